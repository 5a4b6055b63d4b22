#include "panoworld/gaussians.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

namespace panoworld {

ShColor ShColor::from_rgb(const Vec3& rgb) {
    ShColor sh;
    sh.dc = (rgb - Vec3::Constant(0.5)) / kC0;
    return sh;
}

Vec3 sh_eval(const ShColor& sh, const Vec3& view_dir) {
    const double x = view_dir.x();
    const double y = view_dir.y();
    const double z = view_dir.z();
    Vec3 c = Vec3::Constant(0.5) + ShColor::kC0 * sh.dc - ShColor::kC1 * y * sh.linear[0] +
             ShColor::kC1 * z * sh.linear[1] - ShColor::kC1 * x * sh.linear[2];
    return c.cwiseMax(0.0).cwiseMin(1.0);
}

void validate_gaussian(const GaussianPrimitive& g) {
    if (!(g.sigma.minCoeff() > 0.0)) {
        throw Error("gaussian scale must be positive");
    }
    if (!(g.alpha >= 0.0 && g.alpha <= 1.0)) {
        throw Error("gaussian opacity outside [0, 1]");
    }
    if (std::abs(g.q.norm() - 1.0) > 1e-9) {
        throw Error("gaussian rotation is not a unit quaternion");
    }
    if (std::abs(g.src_dir.norm() - 1.0) > 1e-9) {
        throw Error("gaussian source direction is not unit length");
    }
}

PanoImage PanoImage::blank(int width, int height, std::array<std::uint8_t, 3> fill) {
    validate_pano_size(width, height);
    PanoImage img;
    img.width = width;
    img.height = height;
    img.color.resize(img.pixel_count() * 3);
    for (std::size_t i = 0; i < img.pixel_count(); ++i) {
        img.set_rgb(i, fill);
    }
    img.valid.assign(img.pixel_count(), 1);
    return img;
}

namespace {

struct Prepared {
    Vec3 offset;    // mu - camera
    Mat3 inv_cov;   // Sigma^-1
    double c = 0.0; // offset^T Sigma^-1 offset
    Vec3 rgb;
    double alpha = 0.0;
};

struct Span {
    std::uint32_t gaussian;
    std::uint16_t x0, x1;  // inclusive, x0 <= x1
};

struct Hit {
    double t;
    double g;
    std::uint32_t gaussian;
};

std::uint8_t to_byte(double v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace

PanoImage render_pano(std::span<const GaussianPrimitive> gaussians, const PanoPose& pose,
                      int width, int height, const RenderOptions& options) {
    validate_pano_size(width, height);
    validate_pose(pose);
    if (width > 65535) {
        throw Error("panorama too wide for the splat renderer");
    }
    const Mat3 rot = pose.world_from_camera();
    const Mat3 rot_t = rot.transpose();
    const Vec3 origin = pose.position;
    const std::size_t count = gaussians.size();

    std::vector<Prepared> prep(count);
    std::vector<std::vector<Span>> rows(static_cast<std::size_t>(height));
    const double px_per_rad_x = width / (2.0 * kPi);
    const double px_per_rad_y = height / kPi;

    for (std::size_t k = 0; k < count; ++k) {
        const auto& g = gaussians[k];
        Prepared& p = prep[k];
        p.offset = g.mu - origin;
        const Mat3 r = g.q.normalized().toRotationMatrix();
        const Vec3 inv_var = g.sigma.cwiseProduct(g.sigma).cwiseInverse();
        p.inv_cov = r * inv_var.asDiagonal() * r.transpose();
        p.c = p.offset.dot(p.inv_cov * p.offset);
        p.alpha = g.alpha;
        const double dist = p.offset.norm();
        p.rgb = sh_eval(g.sh, dist > 0.0 ? Vec3(p.offset / dist) : Vec3::UnitX());

        // Conservative pixel footprint of the ball of radius cutoff * max scale.
        const double radius = kCutoffSigmas * g.sigma.maxCoeff();
        const auto k32 = static_cast<std::uint32_t>(k);
        const auto full_width = static_cast<std::uint16_t>(width - 1);
        if (dist <= radius) {
            for (int y = 0; y < height; ++y) {
                rows[y].push_back({k32, 0, full_width});
            }
            continue;
        }
        const Vec3 local = rot_t * (p.offset / dist);
        const double el = std::atan2(local.z(), std::hypot(local.x(), local.y()));
        const double az = std::atan2(local.y(), local.x());
        const double beta = std::asin(radius / dist);
        const double el_hi = el + beta;
        const double el_lo = el - beta;
        const int y0 = std::max(0, static_cast<int>(std::floor((0.5 * kPi - el_hi) * px_per_rad_y - 0.5)) - 1);
        const int y1 = std::min(height - 1, static_cast<int>(std::ceil((0.5 * kPi - el_lo) * px_per_rad_y - 0.5)) + 1);
        const bool pole = el_hi >= 0.5 * kPi || el_lo <= -0.5 * kPi || std::sin(beta) >= std::cos(el);
        if (pole) {
            for (int y = y0; y <= y1; ++y) {
                rows[y].push_back({k32, 0, full_width});
            }
            continue;
        }
        const double half_az = std::asin(std::sin(beta) / std::cos(el));
        const long xa = static_cast<long>(std::floor((az - half_az + kPi) * px_per_rad_x - 0.5)) - 1;
        const long xb = static_cast<long>(std::ceil((az + half_az + kPi) * px_per_rad_x - 0.5)) + 1;
        if (xb - xa + 1 >= width) {
            for (int y = y0; y <= y1; ++y) {
                rows[y].push_back({k32, 0, full_width});
            }
            continue;
        }
        const long wa = ((xa % width) + width) % width;
        const long wb = ((xb % width) + width) % width;
        for (int y = y0; y <= y1; ++y) {
            if (wa <= wb) {
                rows[y].push_back({k32, static_cast<std::uint16_t>(wa), static_cast<std::uint16_t>(wb)});
            } else {
                rows[y].push_back({k32, static_cast<std::uint16_t>(wa), full_width});
                rows[y].push_back({k32, 0, static_cast<std::uint16_t>(wb)});
            }
        }
    }

    PanoImage img;
    img.width = width;
    img.height = height;
    img.provenance = Provenance::cache;
    img.color.assign(img.pixel_count() * 3, 0);
    img.valid.assign(img.pixel_count(), 0);
    img.depth = std::vector<float>(img.pixel_count(), 0.0f);
    img.alpha = std::vector<float>(img.pixel_count(), 0.0f);
    const Vec3 bg(options.background[0] / 255.0, options.background[1] / 255.0,
                  options.background[2] / 255.0);
    const double cutoff2 = kCutoffSigmas * kCutoffSigmas;

    parallel_for(0, height, [&](int y) {
        const auto& spans = rows[static_cast<std::size_t>(y)];
        std::vector<std::uint32_t> start(static_cast<std::size_t>(width) + 1, 0);
        for (const auto& s : spans) {
            for (int x = s.x0; x <= s.x1; ++x) {
                ++start[x + 1];
            }
        }
        for (int x = 0; x < width; ++x) {
            start[x + 1] += start[x];
        }
        std::vector<std::uint32_t> fill(start.begin(), start.end() - 1);
        std::vector<Hit> hits(start[width]);
        std::vector<std::uint32_t> used(static_cast<std::size_t>(width), 0);
        std::vector<Vec3> dirs(static_cast<std::size_t>(width));
        for (int x = 0; x < width; ++x) {
            dirs[x] = rot * pixel_direction_continuous(x, y, width, height);
        }
        for (const auto& s : spans) {
            const Prepared& p = prep[s.gaussian];
            for (int x = s.x0; x <= s.x1; ++x) {
                const Vec3& d = dirs[x];
                const Vec3 sd = p.inv_cov * d;
                const double a = d.dot(sd);
                const double b = sd.dot(p.offset);
                const double t = b / a;
                if (t < options.near) {
                    continue;
                }
                const double m2 = std::max(0.0, p.c - b * t);
                if (m2 > cutoff2) {
                    continue;
                }
                hits[fill[x]++] = {t, p.alpha * std::exp(-0.5 * m2), s.gaussian};
                ++used[x];
            }
        }
        for (int x = 0; x < width; ++x) {
            auto first = hits.begin() + start[x];
            auto last = first + used[x];
            std::sort(first, last, [](const Hit& a, const Hit& b) {
                return a.t < b.t || (a.t == b.t && a.gaussian < b.gaussian);
            });
            double transmittance = 1.0;
            Vec3 rgb = Vec3::Zero();
            double depth = 0.0;
            for (auto it = first; it != last; ++it) {
                const double w = it->g * transmittance;
                rgb += w * prep[it->gaussian].rgb;
                depth += w * it->t;
                transmittance *= 1.0 - it->g;
            }
            const double acc = 1.0 - transmittance;
            const std::size_t i = img.index(x, y);
            (*img.alpha)[i] = static_cast<float>(acc);
            if (acc >= kValidAlpha) {
                if (options.normalize_color) {
                    rgb /= acc;
                } else {
                    rgb += transmittance * bg;
                }
                img.valid[i] = 1;
                (*img.depth)[i] = static_cast<float>(depth / acc);
                img.set_rgb(i, {to_byte(rgb.x()), to_byte(rgb.y()), to_byte(rgb.z())});
            } else {
                img.set_rgb(i, options.background);
            }
        }
    });
    return img;
}

std::vector<GaussianPrimitive> lift_pano(const PanoImage& pano, const PanoPose& pose, int stride,
                                         RoomId room, NodeId src_node) {
    if (!pano.depth) {
        throw Error("lift_pano needs a panorama with depth");
    }
    if (stride < 1) {
        throw Error("lift stride must be >= 1");
    }
    validate_pano_size(pano.width, pano.height);
    validate_pose(pose);
    const Mat3 rot = pose.world_from_camera();
    const int rows = (pano.height + stride - 1) / stride;
    std::vector<std::vector<GaussianPrimitive>> per_row(static_cast<std::size_t>(rows));
    const double footprint = 2.0 * kPi / pano.width * stride * kLiftSigmaFactor;
    parallel_for(0, rows, [&](int r) {
        const int y = r * stride;
        auto& out = per_row[static_cast<std::size_t>(r)];
        for (int x = 0; x < pano.width; x += stride) {
            const std::size_t i = pano.index(x, y);
            if ((!pano.valid.empty() && !pano.valid[i]) || pano.is_marker(i)) {
                continue;
            }
            const double depth = (*pano.depth)[i];
            if (!(depth > 0.0)) {
                continue;
            }
            GaussianPrimitive g;
            const Vec3 dir = (rot * pixel_direction_continuous(x, y, pano.width, pano.height)).normalized();
            g.mu = pose.position + depth * dir;
            g.q = Quat::Identity();
            g.sigma = Vec3::Constant(depth * footprint);
            g.alpha = kLiftAlpha;
            const auto c = pano.rgb(i);
            g.sh = ShColor::from_rgb(Vec3(c[0], c[1], c[2]) / 255.0);
            g.src_node = src_node;
            g.src_dir = dir;
            g.room = room;
            out.push_back(g);
        }
    });
    std::vector<GaussianPrimitive> all;
    for (auto& r : per_row) {
        all.insert(all.end(), r.begin(), r.end());
    }
    return all;
}

namespace {

constexpr char kMagic[4] = {'P', 'W', 'G', 'S'};
constexpr std::uint32_t kVersion = 1;
constexpr std::size_t kRecordFloats = 28;

}  // namespace

void save_gaussians(const std::filesystem::path& path, std::span<const GaussianPrimitive> gs) {
    static_assert(std::endian::native == std::endian::little,
                  "cache files assume a little-endian host");
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("cannot open '" + path.string() + "' for writing");
    }
    const std::uint64_t count = gs.size();
    out.write(kMagic, 4);
    out.write(reinterpret_cast<const char*>(&kVersion), 4);
    out.write(reinterpret_cast<const char*>(&count), 8);
    std::vector<std::uint32_t> rec(kRecordFloats);
    auto put = [&](std::size_t& i, double v) {
        const float f = static_cast<float>(v);
        std::memcpy(&rec[i++], &f, 4);
    };
    for (const auto& g : gs) {
        std::size_t i = 0;
        for (int k = 0; k < 3; ++k) put(i, g.mu[k]);
        put(i, g.q.w());
        put(i, g.q.x());
        put(i, g.q.y());
        put(i, g.q.z());
        for (int k = 0; k < 3; ++k) put(i, g.sigma[k]);
        put(i, g.alpha);
        for (int k = 0; k < 3; ++k) put(i, g.sh.dc[k]);
        for (const auto& band : g.sh.linear) {
            for (int k = 0; k < 3; ++k) put(i, band[k]);
        }
        rec[i++] = g.src_node;
        for (int k = 0; k < 3; ++k) put(i, g.src_dir[k]);
        rec[i++] = g.room;
        out.write(reinterpret_cast<const char*>(rec.data()),
                  static_cast<std::streamsize>(rec.size() * 4));
    }
    if (!out) {
        throw Error("write failed for '" + path.string() + "'");
    }
}

std::vector<GaussianPrimitive> load_gaussians(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open '" + path.string() + "'");
    }
    char magic[4];
    std::uint32_t version = 0;
    std::uint64_t count = 0;
    in.read(magic, 4);
    in.read(reinterpret_cast<char*>(&version), 4);
    in.read(reinterpret_cast<char*>(&count), 8);
    if (!in || std::memcmp(magic, kMagic, 4) != 0 || version != kVersion) {
        throw Error("'" + path.string() + "' is not a gaussian cache file");
    }
    std::vector<GaussianPrimitive> gs;
    gs.reserve(count);
    std::vector<std::uint32_t> rec(kRecordFloats);
    auto get = [&](std::size_t& i) {
        float f;
        std::memcpy(&f, &rec[i++], 4);
        return static_cast<double>(f);
    };
    for (std::uint64_t n = 0; n < count; ++n) {
        in.read(reinterpret_cast<char*>(rec.data()), static_cast<std::streamsize>(rec.size() * 4));
        if (!in) {
            throw Error("truncated gaussian cache file '" + path.string() + "'");
        }
        GaussianPrimitive g;
        std::size_t i = 0;
        for (int k = 0; k < 3; ++k) g.mu[k] = get(i);
        const double w = get(i);
        const double x = get(i);
        const double y = get(i);
        const double z = get(i);
        g.q = Quat(w, x, y, z).normalized();
        for (int k = 0; k < 3; ++k) g.sigma[k] = get(i);
        g.alpha = get(i);
        for (int k = 0; k < 3; ++k) g.sh.dc[k] = get(i);
        for (auto& band : g.sh.linear) {
            for (int k = 0; k < 3; ++k) band[k] = get(i);
        }
        g.src_node = rec[i++];
        for (int k = 0; k < 3; ++k) g.src_dir[k] = get(i);
        g.src_dir.normalize();
        g.room = rec[i++];
        gs.push_back(g);
    }
    return gs;
}

}  // namespace panoworld
