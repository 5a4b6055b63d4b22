#pragma once

#include "panoworld/common.hpp"
#include "panoworld/panocam.hpp"
#include "panoworld/scenegraph.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace panoworld {

// Degree-1 real spherical harmonics per RGB channel, in the usual splatting
// convention: color = 0.5 + C0*k0 - C1*y*k1 + C1*z*k2 - C1*x*k3.
struct ShColor {
    static constexpr double kC0 = 0.28209479177387814;
    static constexpr double kC1 = 0.4886025119029199;

    Vec3 dc = Vec3::Zero();
    std::array<Vec3, 3> linear{Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};

    // DC coefficient reproducing `rgb` (channels in [0, 1]) from every direction.
    static ShColor from_rgb(const Vec3& rgb);
    // Color implied by the DC band alone.
    Vec3 base_rgb() const { return Vec3::Constant(0.5) + kC0 * dc; }
};

// View-dependent color for a unit view direction, clamped to [0, 1].
Vec3 sh_eval(const ShColor& sh, const Vec3& view_dir);

struct GaussianPrimitive {
    Vec3 mu = Vec3::Zero();
    Quat q = Quat::Identity();
    Vec3 sigma = Vec3::Constant(0.01);
    double alpha = 1.0;
    ShColor sh;
    NodeId src_node = 0;
    Vec3 src_dir = Vec3::UnitX();
    RoomId room = 0;

    double mean_scale() const { return sigma.mean(); }
};

// Throws on violated primitive invariants.
void validate_gaussian(const GaussianPrimitive& g);

// Equirectangular image with optional per-pixel depth and coverage.
struct PanoImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> color;  // RGB8 row-major
    std::optional<std::vector<float>> depth;
    std::vector<std::uint8_t> valid;  // 1 = valid
    std::optional<std::vector<float>> alpha;
    Provenance provenance = Provenance::none;

    static PanoImage blank(int width, int height, std::array<std::uint8_t, 3> fill = {0, 0, 0});

    std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
    std::array<std::uint8_t, 3> rgb(std::size_t i) const {
        return {color[3 * i], color[3 * i + 1], color[3 * i + 2]};
    }
    void set_rgb(std::size_t i, std::array<std::uint8_t, 3> c) {
        color[3 * i] = c[0];
        color[3 * i + 1] = c[1];
        color[3 * i + 2] = c[2];
    }
    // All three channels equal 255: the invalid-memory marker.
    bool is_marker(std::size_t i) const {
        return color[3 * i] == 255 && color[3 * i + 1] == 255 && color[3 * i + 2] == 255;
    }
};

inline constexpr double kValidAlpha = 0.5;
// Contributions beyond this Mahalanobis radius are ignored by the renderer.
inline constexpr double kCutoffSigmas = 3.0;

struct RenderOptions {
    std::array<std::uint8_t, 3> background{0, 0, 0};
    double near = 1e-3;
    // Divide valid pixel colors by their accumulated alpha instead of
    // compositing the remaining transmittance over the background.
    bool normalize_color = false;
};

// Front-to-back compositing of each Gaussian's response at the ray point of
// maximal density. Depth is the weight-normalized expected depth.
PanoImage render_pano(std::span<const GaussianPrimitive> gaussians, const PanoPose& pose,
                      int width, int height, const RenderOptions& options = {});

inline constexpr double kLiftSigmaFactor = 0.7;
inline constexpr double kLiftAlpha = 0.9;

// Deterministic depth unprojection: one isotropic Gaussian per valid strided
// pixel, emitted in row-major order.
std::vector<GaussianPrimitive> lift_pano(const PanoImage& pano, const PanoPose& pose, int stride,
                                         RoomId room, NodeId src_node = 0);

// Binary cache file: 16-byte header (magic "PWGS", uint32 version, uint64
// count) followed by 112-byte little-endian records.
void save_gaussians(const std::filesystem::path& path, std::span<const GaussianPrimitive> gs);
std::vector<GaussianPrimitive> load_gaussians(const std::filesystem::path& path);

}  // namespace panoworld
