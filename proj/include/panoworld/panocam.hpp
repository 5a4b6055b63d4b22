#pragma once

#include "panoworld/common.hpp"
#include "panoworld/raster_io.hpp"

#include <utility>
#include <vector>

namespace panoworld {

// Camera pose of one panorama node. World frame is right-handed, z-up,
// meters. The camera frame looks down +x with +z up; rotation maps camera
// vectors to world vectors.
struct PanoPose {
    Vec3 position = Vec3::Zero();
    Quat rotation = Quat::Identity();

    Mat3 world_from_camera() const { return rotation.toRotationMatrix(); }
    bool operator==(const PanoPose& o) const {
        return position == o.position && rotation.coeffs() == o.rotation.coeffs();
    }
};

void validate_pose(const PanoPose& pose);
// Width must be exactly twice the height, both positive.
void validate_pano_size(int width, int height);

// Unit direction through the center of pixel (x, y) in camera coordinates.
// Azimuth runs from -pi at the left edge to +pi at the right edge, elevation
// from +pi/2 at the top to -pi/2 at the bottom.
Vec3 pixel_direction(int x, int y, int width, int height);
// Same mapping at continuous pixel coordinates; no range checks.
Vec3 pixel_direction_continuous(double x, double y, int width, int height);

struct ProjectedPoint {
    double x = 0.0;  // in [0, width)
    double y = 0.0;
    double depth = 0.0;
};

// Inverse of pixel_direction composed with the pose. At the poles the
// azimuth is undefined and x = 0 is returned.
ProjectedPoint project_point(const PanoPose& pose, const Vec3& p, int width, int height);

// Extrinsics-only Plucker rays: d = R r(x, y), moment = o x d.
struct RayMap {
    int width = 0;
    int height = 0;
    std::vector<Vec3> directions;
    std::vector<Vec3> moments;

    const Vec3& direction(int x, int y) const { return directions[index(x, y)]; }
    const Vec3& moment(int x, int y) const { return moments[index(x, y)]; }
    std::size_t index(int x, int y) const {
        return static_cast<std::size_t>(y) * width + x;
    }
};

RayMap plucker_rays(const PanoPose& pose, int width, int height);

// Rotary phase tables for panorama tokens. The horizontal branch uses
// integer harmonics of the circular angle 2*pi*x/W so every frequency is
// periodic over the width; the vertical branch uses the conventional
// geometric schedule over a non-circular index.
class CPRoPETable {
public:
    static constexpr double kDefaultBase = 10000.0;

    CPRoPETable(int width_tokens, int pairs, int height_tokens, int v_pairs,
                double base = kDefaultBase);

    int width_tokens() const { return width_; }
    int pairs() const { return pairs_; }
    int height_tokens() const { return height_; }
    int v_pairs() const { return v_pairs_; }

    // (cos, sin) of m * phi(x) for harmonic m in [1, pairs]. Any integer x is
    // accepted and reduced modulo W, so x = W yields the x = 0 entry.
    std::pair<double, double> horizontal(int m, long x) const;
    // (cos, sin) of y * omega_k for k in [0, v_pairs).
    std::pair<double, double> vertical(int k, int y) const;

    // Unreduced phase m * 2*pi*x / W.
    double horizontal_phase(int m, double x) const;
    double vertical_frequency(int k) const;

    // Debug dumps: horizontal raster is (2*pairs) x W, vertical is (2*v_pairs) x H,
    // each row holding interleaved (cos, sin).
    FloatRaster horizontal_raster() const;
    FloatRaster vertical_raster() const;

private:
    int width_;
    int pairs_;
    int height_;
    int v_pairs_;
    double base_;
    std::vector<double> hcos_, hsin_;  // [(m-1) * W + x]
    std::vector<double> vcos_, vsin_;  // [k * H + y]
};

}  // namespace panoworld
