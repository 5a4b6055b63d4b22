#include "panoworld/evalmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>
#include <tuple>

namespace panoworld {

DepthLoss depth_loss(std::span<const double> d_hat, std::span<const double> d, double eps) {
    if (d_hat.size() != d.size()) {
        throw Error("depth_loss: prediction and target sizes differ");
    }
    if (d.empty()) {
        throw Error("depth_loss: empty depth map");
    }
    const std::size_t n = d.size();
    for (std::size_t i = 0; i < n; ++i) {
        if (!(d_hat[i] > 0.0) || !(d[i] > 0.0)) {
            throw Error("depth_loss: depths must be positive");
        }
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    DepthLoss out;
    out.grad_log.resize(n);
    out.grad_si.resize(n);

    std::vector<double> delta(n);
    double sum_abs = 0.0;
    double sum_delta = 0.0;
    double sum_sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = std::log(d_hat[i] + 1.0) - std::log(d[i] + 1.0);
        sum_abs += std::abs(r);
        const double sign = r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0);
        out.grad_log[i] = sign * inv_n / (d_hat[i] + 1.0);

        delta[i] = std::log(d_hat[i] + eps) - std::log(d[i] + eps);
        sum_delta += delta[i];
        sum_sq += delta[i] * delta[i];
    }
    out.l_log = sum_abs * inv_n;

    const double mean_delta = sum_delta * inv_n;
    const double inner = sum_sq * inv_n - 0.85 * mean_delta * mean_delta + eps;
    const double root = std::sqrt(inner);
    out.l_si = 0.1 * root;
    for (std::size_t i = 0; i < n; ++i) {
        const double d_inner = (2.0 * delta[i] - 1.7 * mean_delta) * inv_n / (d_hat[i] + eps);
        out.grad_si[i] = 0.1 * d_inner / (2.0 * root);
    }
    return out;
}

double total_loss(double l2, double perc, double alpha_reg, double depth,
                  const LossWeights& weights) {
    return weights.l2 * l2 + weights.perc * perc + weights.alpha * alpha_reg +
           weights.depth * depth;
}

double opacity_regularizer(std::span<const GaussianPrimitive> gaussians) {
    if (gaussians.empty()) {
        return 0.0;
    }
    double sum = 0.0;
    for (const auto& g : gaussians) {
        sum += g.alpha;
    }
    return sum / static_cast<double>(gaussians.size());
}

double psnr_from_mse(double mse) {
    if (!(mse > 0.0)) {
        return kPsnrCap;
    }
    return std::min(kPsnrCap, 10.0 * std::log10(255.0 * 255.0 / mse));
}

namespace {

std::vector<double> gaussian_window() {
    std::vector<double> w(11);
    double sum = 0.0;
    for (int i = 0; i < 11; ++i) {
        const double x = i - 5;
        w[i] = std::exp(-x * x / (2.0 * 1.5 * 1.5));
        sum += w[i];
    }
    for (double& v : w) {
        v /= sum;
    }
    return w;
}

// "Valid" separable filtering: output is (w - 10) x (h - 10).
std::vector<double> filter_valid(const std::vector<double>& img, int w, int h,
                                 const std::vector<double>& win) {
    const int ow = w - 10;
    const int oh = h - 10;
    std::vector<double> tmp(static_cast<std::size_t>(ow) * h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < ow; ++x) {
            double s = 0.0;
            for (int k = 0; k < 11; ++k) {
                s += win[k] * img[static_cast<std::size_t>(y) * w + x + k];
            }
            tmp[static_cast<std::size_t>(y) * ow + x] = s;
        }
    }
    std::vector<double> out(static_cast<std::size_t>(ow) * oh);
    for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
            double s = 0.0;
            for (int k = 0; k < 11; ++k) {
                s += win[k] * tmp[static_cast<std::size_t>(y + k) * ow + x];
            }
            out[static_cast<std::size_t>(y) * ow + x] = s;
        }
    }
    return out;
}

}  // namespace

ImageScores psnr_ssim(const PanoImage& a, const PanoImage& b) {
    if (a.width != b.width || a.height != b.height) {
        throw Error("psnr_ssim: image dimensions differ");
    }
    if (a.width < 11 || a.height < 11) {
        throw Error("psnr_ssim: images smaller than the 11x11 SSIM window");
    }
    const std::size_t n = a.pixel_count();
    double sq = 0.0;
    for (std::size_t i = 0; i < 3 * n; ++i) {
        const double d = static_cast<double>(a.color[i]) - static_cast<double>(b.color[i]);
        sq += d * d;
    }
    ImageScores scores;
    scores.psnr = psnr_from_mse(sq / static_cast<double>(3 * n));

    const auto win = gaussian_window();
    constexpr double c1 = (0.01 * 255.0) * (0.01 * 255.0);
    constexpr double c2 = (0.03 * 255.0) * (0.03 * 255.0);
    double total = 0.0;
    for (int ch = 0; ch < 3; ++ch) {
        std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = a.color[3 * i + ch];
            y[i] = b.color[3 * i + ch];
            xx[i] = x[i] * x[i];
            yy[i] = y[i] * y[i];
            xy[i] = x[i] * y[i];
        }
        const auto mx = filter_valid(x, a.width, a.height, win);
        const auto my = filter_valid(y, a.width, a.height, win);
        const auto mxx = filter_valid(xx, a.width, a.height, win);
        const auto myy = filter_valid(yy, a.width, a.height, win);
        const auto mxy = filter_valid(xy, a.width, a.height, win);
        double sum = 0.0;
        for (std::size_t i = 0; i < mx.size(); ++i) {
            const double vx = mxx[i] - mx[i] * mx[i];
            const double vy = myy[i] - my[i] * my[i];
            const double cov = mxy[i] - mx[i] * my[i];
            sum += ((2.0 * mx[i] * my[i] + c1) * (2.0 * cov + c2)) /
                   ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
        }
        total += sum / static_cast<double>(mx.size());
    }
    scores.ssim = total / 3.0;
    return scores;
}

std::vector<Vec3> EvalRegion::sample_points() const {
    std::vector<Vec3> pts;
    pts.reserve(static_cast<std::size_t>(samples) * samples);
    for (int j = 0; j < samples; ++j) {
        for (int i = 0; i < samples; ++i) {
            pts.push_back(corner + (i + 0.5) * step * e_u + (j + 0.5) * step * e_v);
        }
    }
    return pts;
}

void validate_region(const ShellScene& shell, const EvalRegion& region) {
    if (std::abs(region.e_u.norm() - 1.0) > 1e-9 || std::abs(region.e_v.norm() - 1.0) > 1e-9 ||
        std::abs(region.e_u.dot(region.e_v)) > 1e-9) {
        throw Error("evaluation region axes must be orthonormal");
    }
    if (region.samples < 1 || !(region.step > 0.0)) {
        throw Error("evaluation region needs a positive sample grid");
    }
    const Vec3 far_u = region.corner + region.extent * region.e_u;
    const Vec3 far_v = region.corner + region.extent * region.e_v;
    for (const auto& tri : shell.triangles()) {
        const double off = tri.normal.dot(tri.v[0]);
        if (std::abs(tri.normal.dot(region.corner) - off) <= 1e-6 &&
            std::abs(tri.normal.dot(far_u) - off) <= 1e-6 &&
            std::abs(tri.normal.dot(far_v) - off) <= 1e-6) {
            return;
        }
    }
    throw Error("evaluation region does not lie on any shell surface");
}

Vec3 sample_bilinear(const PanoImage& image, double x, double y) {
    const int w = image.width;
    const int h = image.height;
    y = std::clamp(y, 0.0, static_cast<double>(h - 1));
    const double fx = std::floor(x);
    const double fy = std::floor(y);
    const double tx = x - fx;
    const double ty = y - fy;
    auto wrap = [w](long v) { return static_cast<int>(((v % w) + w) % w); };
    const int x0 = wrap(static_cast<long>(fx));
    const int x1 = wrap(static_cast<long>(fx) + 1);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, h - 1);
    auto px = [&](int xx, int yy) {
        const std::size_t i = image.index(xx, yy);
        return Vec3(image.color[3 * i], image.color[3 * i + 1], image.color[3 * i + 2]);
    };
    return (1.0 - ty) * ((1.0 - tx) * px(x0, y0) + tx * px(x1, y0)) +
           ty * ((1.0 - tx) * px(x0, y1) + tx * px(x1, y1));
}

namespace {

struct SampleView {
    bool visible = false;
    double x = 0.0;
    double y = 0.0;
};

SampleView view_sample(const ShellScene& shell, const PosedPano& pano, const Vec3& p) {
    SampleView v;
    const Vec3 offset = p - pano.pose.position;
    const double dist = offset.norm();
    if (!(dist > 0.0)) {
        return v;
    }
    const auto hit = shell.cast(pano.pose.position, offset / dist);
    if (!hit || std::abs(hit->t - dist) > kCovisibilityEps) {
        return v;
    }
    const auto proj = project_point(pano.pose, p, pano.image->width, pano.image->height);
    v.x = proj.x;
    v.y = proj.y;
    if (!pano.image->valid.empty()) {
        const int ix = static_cast<int>(std::lround(proj.x)) % pano.image->width;
        const int iy = std::clamp(static_cast<int>(std::lround(proj.y)), 0,
                                  pano.image->height - 1);
        if (!pano.image->valid[pano.image->index(ix, iy)]) {
            return v;
        }
    }
    v.visible = true;
    return v;
}

}  // namespace

OverlapReport overlap_psnr(const ShellScene& shell, std::span<const PosedPano> panos,
                           std::span<const EvalRegion> regions, std::size_t base_index) {
    if (panos.size() < 2) {
        throw Error("overlap_psnr needs at least two panoramas");
    }
    if (base_index >= panos.size()) {
        throw Error("overlap_psnr: base index out of range");
    }
    if (regions.empty()) {
        throw Error("overlap_psnr: no evaluation regions");
    }
    for (const auto& p : panos) {
        if (!p.image) {
            throw Error("overlap_psnr: missing panorama image");
        }
        validate_pano_size(p.image->width, p.image->height);
    }
    for (const auto& r : regions) {
        validate_region(shell, r);
    }

    const PosedPano& base = panos[base_index];
    std::vector<std::size_t> evaluated;
    for (std::size_t i = 0; i < panos.size(); ++i) {
        if (i != base_index) {
            evaluated.push_back(i);
        }
    }
    std::vector<std::pair<std::size_t, std::size_t>> jobs;
    for (std::size_t r = 0; r < regions.size(); ++r) {
        for (std::size_t e : evaluated) {
            jobs.emplace_back(e, r);
        }
    }
    std::vector<OverlapEntry> results(jobs.size());
    parallel_for(0, static_cast<int>(jobs.size()), [&](int j) {
        const auto [e, r] = jobs[static_cast<std::size_t>(j)];
        OverlapEntry entry;
        entry.pano = e;
        entry.region = r;
        double sq = 0.0;
        for (const Vec3& p : regions[r].sample_points()) {
            const auto vb = view_sample(shell, base, p);
            if (!vb.visible) {
                continue;
            }
            const auto ve = view_sample(shell, panos[e], p);
            if (!ve.visible) {
                continue;
            }
            const Vec3 cb = sample_bilinear(*base.image, vb.x, vb.y);
            const Vec3 ce = sample_bilinear(*panos[e].image, ve.x, ve.y);
            sq += (cb - ce).squaredNorm();
            ++entry.valid;
        }
        if (entry.valid > 0) {
            entry.mse = sq / (3.0 * static_cast<double>(entry.valid));
            entry.psnr = psnr_from_mse(entry.mse);
        }
        results[static_cast<std::size_t>(j)] = entry;
    });

    OverlapReport report;
    double sum = 0.0;
    for (const auto& entry : results) {
        if (entry.valid == 0) {
            std::ostringstream w;
            w << "pano " << entry.pano << " region " << entry.region
              << " has no co-visible samples; excluded";
            report.warnings.push_back(w.str());
            continue;
        }
        report.entries.push_back(entry);
        sum += entry.psnr;
    }
    if (report.entries.empty()) {
        throw Error("overlap_psnr: no region has co-visible samples");
    }
    std::sort(report.entries.begin(), report.entries.end(),
              [](const OverlapEntry& a, const OverlapEntry& b) {
                  return std::tie(a.pano, a.region) < std::tie(b.pano, b.region);
              });
    report.mean_psnr = sum / static_cast<double>(report.entries.size());
    return report;
}

std::vector<EvalRegion> auto_select_regions(const ShellScene& shell, const PanoPose& base,
                                            double center_height) {
    struct Quad {
        Vec3 lo, hi;
        Vec3 normal;
        double width = 0.0;
    };
    // Wall quads are emitted as two triangles with identical bounding boxes.
    std::map<RoomId, std::vector<Quad>> walls;
    std::map<std::tuple<RoomId, double, double, double, double, double, double>, int> seen;
    for (const auto& tri : shell.triangles()) {
        if (tri.cls != SurfaceClass::wall || std::abs(tri.normal.z()) > 1e-9) {
            continue;
        }
        Aabb box;
        for (const auto& v : tri.v) {
            box.extend(v);
        }
        const auto key = std::make_tuple(tri.room, box.lo.x(), box.lo.y(), box.lo.z(), box.hi.x(),
                                         box.hi.y(), box.hi.z());
        if (++seen[key] != 2) {
            continue;
        }
        Quad q{box.lo, box.hi, tri.normal, std::hypot(box.hi.x() - box.lo.x(),
                                                      box.hi.y() - box.lo.y())};
        walls[tri.room].push_back(q);
    }

    std::vector<EvalRegion> regions;
    for (const auto& [room, quads] : walls) {
        const Quad* best = nullptr;
        for (const auto& q : quads) {
            const bool fits = q.lo.z() <= center_height - 0.6 && q.hi.z() >= center_height + 0.6 &&
                              q.width >= 1.2;
            if (fits && (!best || q.width > best->width)) {
                best = &q;
            }
        }
        if (!best) {
            continue;
        }
        const Vec3 e_u = Vec3::UnitZ().cross(best->normal).normalized();
        const Vec3 e_v = Vec3::UnitZ();
        // Any point of the quad plane: the lower corner sits on it.
        const Vec3 mid(0.5 * (best->lo.x() + best->hi.x()), 0.5 * (best->lo.y() + best->hi.y()),
                       center_height);
        EvalRegion region;
        region.corner = mid - 0.5 * region.extent * e_u - 0.5 * region.extent * e_v;
        region.e_u = e_u;
        region.e_v = e_v;
        const Vec3 offset = mid - base.position;
        const auto hit = shell.cast(base.position, offset.normalized());
        if (hit && std::abs(hit->t - offset.norm()) <= kCovisibilityEps) {
            regions.push_back(region);
        }
    }
    return regions;
}

std::string format_overlap_report(const OverlapReport& report, std::span<const NodeId> node_ids) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(4);
    for (const auto& w : report.warnings) {
        out << "# " << w << '\n';
    }
    for (const auto& e : report.entries) {
        const auto id = e.pano < node_ids.size() ? static_cast<std::size_t>(node_ids[e.pano])
                                                 : e.pano;
        out << "node " << id << " region " << e.region << " psnr " << e.psnr << " mse " << e.mse
            << " valid " << e.valid << '\n';
    }
    out << "mean_psnr " << report.mean_psnr << '\n';
    return out.str();
}

}  // namespace panoworld
