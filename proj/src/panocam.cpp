#include "panoworld/panocam.hpp"

#include <cmath>
#include <string>

namespace panoworld {

void validate_pose(const PanoPose& pose) {
    if (std::abs(pose.rotation.norm() - 1.0) > 1e-9) {
        throw Error("pose rotation is not a unit quaternion");
    }
    if (!pose.position.allFinite()) {
        throw Error("pose position is not finite");
    }
}

void validate_pano_size(int width, int height) {
    if (height <= 0 || width != 2 * height) {
        throw Error("panorama size must satisfy width = 2 * height > 0 (got " +
                    std::to_string(width) + "x" + std::to_string(height) + ")");
    }
}

Vec3 pixel_direction_continuous(double x, double y, int width, int height) {
    const double azimuth = 2.0 * kPi * (x + 0.5) / width - kPi;
    const double elevation = kPi * (0.5 - (y + 0.5) / height);
    const double c = std::cos(elevation);
    return {c * std::cos(azimuth), c * std::sin(azimuth), std::sin(elevation)};
}

Vec3 pixel_direction(int x, int y, int width, int height) {
    validate_pano_size(width, height);
    if (x < 0 || x >= width || y < 0 || y >= height) {
        throw Error("pixel (" + std::to_string(x) + ", " + std::to_string(y) +
                    ") outside panorama");
    }
    return pixel_direction_continuous(x, y, width, height);
}

ProjectedPoint project_point(const PanoPose& pose, const Vec3& p, int width, int height) {
    validate_pano_size(width, height);
    const Vec3 offset = p - pose.position;
    const double depth = offset.norm();
    if (!(depth > 0.0)) {
        throw Error("cannot project the camera center");
    }
    const Vec3 local = pose.rotation.conjugate() * (offset / depth);
    const double horizontal = std::hypot(local.x(), local.y());
    const double elevation = std::atan2(local.z(), horizontal);
    double x = 0.0;
    if (horizontal > 1e-12) {
        const double azimuth = std::atan2(local.y(), local.x());
        x = (azimuth + kPi) * width / (2.0 * kPi) - 0.5;
        x = std::fmod(x, static_cast<double>(width));
        if (x < 0.0) {
            x += width;
        }
        if (x >= width) {
            x -= width;
        }
    }
    const double y = (0.5 - elevation / kPi) * height - 0.5;
    return {x, y, depth};
}

RayMap plucker_rays(const PanoPose& pose, int width, int height) {
    validate_pano_size(width, height);
    RayMap map;
    map.width = width;
    map.height = height;
    const std::size_t n = static_cast<std::size_t>(width) * height;
    map.directions.resize(n);
    map.moments.resize(n);
    const Mat3 rot = pose.world_from_camera();
    const Vec3 o = pose.position;
    parallel_for(0, height, [&](int y) {
        for (int x = 0; x < width; ++x) {
            const std::size_t i = map.index(x, y);
            const Vec3 d = rot * pixel_direction_continuous(x, y, width, height);
            map.directions[i] = d;
            map.moments[i] = o.cross(d);
        }
    });
    return map;
}

CPRoPETable::CPRoPETable(int width_tokens, int pairs, int height_tokens, int v_pairs, double base)
    : width_(width_tokens), pairs_(pairs), height_(height_tokens), v_pairs_(v_pairs), base_(base) {
    if (pairs < 1 || width_tokens < 2) {
        throw Error("CPRoPE needs pairs >= 1 and width_tokens >= 2");
    }
    if (height_tokens < 0 || v_pairs < 0) {
        throw Error("CPRoPE vertical sizes must be non-negative");
    }
    const auto w = static_cast<std::size_t>(width_);
    hcos_.resize(static_cast<std::size_t>(pairs_) * w);
    hsin_.resize(hcos_.size());
    for (int m = 1; m <= pairs_; ++m) {
        for (int x = 0; x < width_; ++x) {
            // Reduce m*x modulo W in integers so the table is exactly periodic.
            const long r = (static_cast<long>(m) * x) % width_;
            const double theta = 2.0 * kPi * static_cast<double>(r) / width_;
            hcos_[(m - 1) * w + x] = std::cos(theta);
            hsin_[(m - 1) * w + x] = std::sin(theta);
        }
    }
    const auto h = static_cast<std::size_t>(height_);
    vcos_.resize(static_cast<std::size_t>(v_pairs_) * h);
    vsin_.resize(vcos_.size());
    for (int k = 0; k < v_pairs_; ++k) {
        const double omega = vertical_frequency(k);
        for (int y = 0; y < height_; ++y) {
            vcos_[k * h + y] = std::cos(y * omega);
            vsin_[k * h + y] = std::sin(y * omega);
        }
    }
}

std::pair<double, double> CPRoPETable::horizontal(int m, long x) const {
    if (m < 1 || m > pairs_) {
        throw Error("horizontal harmonic out of range");
    }
    long r = x % width_;
    if (r < 0) {
        r += width_;
    }
    const std::size_t i = static_cast<std::size_t>(m - 1) * width_ + static_cast<std::size_t>(r);
    return {hcos_[i], hsin_[i]};
}

std::pair<double, double> CPRoPETable::vertical(int k, int y) const {
    if (k < 0 || k >= v_pairs_ || y < 0 || y >= height_) {
        throw Error("vertical table index out of range");
    }
    const std::size_t i = static_cast<std::size_t>(k) * height_ + y;
    return {vcos_[i], vsin_[i]};
}

double CPRoPETable::horizontal_phase(int m, double x) const {
    return m * 2.0 * kPi * x / width_;
}

double CPRoPETable::vertical_frequency(int k) const {
    const double dv = 2.0 * v_pairs_;
    return std::pow(base_, -2.0 * k / dv);
}

FloatRaster CPRoPETable::horizontal_raster() const {
    FloatRaster r;
    r.width = 2 * pairs_;
    r.height = width_;
    r.data.resize(static_cast<std::size_t>(r.width) * r.height);
    for (int x = 0; x < width_; ++x) {
        for (int m = 1; m <= pairs_; ++m) {
            const auto [c, s] = horizontal(m, x);
            r.data[static_cast<std::size_t>(x) * r.width + 2 * (m - 1)] = static_cast<float>(c);
            r.data[static_cast<std::size_t>(x) * r.width + 2 * (m - 1) + 1] = static_cast<float>(s);
        }
    }
    return r;
}

FloatRaster CPRoPETable::vertical_raster() const {
    FloatRaster r;
    r.width = 2 * v_pairs_;
    r.height = height_;
    r.data.resize(static_cast<std::size_t>(r.width) * r.height);
    for (int y = 0; y < height_; ++y) {
        for (int k = 0; k < v_pairs_; ++k) {
            const auto [c, s] = vertical(k, y);
            r.data[static_cast<std::size_t>(y) * r.width + 2 * k] = static_cast<float>(c);
            r.data[static_cast<std::size_t>(y) * r.width + 2 * k + 1] = static_cast<float>(s);
        }
    }
    return r;
}

}  // namespace panoworld
