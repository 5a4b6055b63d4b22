#pragma once

#include "panoworld/gaussians.hpp"
#include "panoworld/scenegraph.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace panoworld {

inline constexpr double kDepthEps = 1e-6;
inline constexpr double kPsnrCap = 99.0;

struct DepthLoss {
    double l_log = 0.0;
    double l_si = 0.0;
    std::vector<double> grad_log;  // d L_log / d d_hat
    std::vector<double> grad_si;   // d L_si / d d_hat
};

// L_log = mean |log(d_hat + 1) - log(d + 1)|
// L_si  = 0.1 * sqrt(mean(delta^2) - 0.85 * mean(delta)^2 + eps),
//         delta = log(d_hat + eps) - log(d + eps)
// The L1 subgradient at a zero residual is taken as 0.
DepthLoss depth_loss(std::span<const double> d_hat, std::span<const double> d,
                     double eps = kDepthEps);

struct LossWeights {
    double l2 = 1.0;
    double perc = 0.1;
    double alpha = 0.05;
    double depth = 0.5;
};

double total_loss(double l2, double perc, double alpha_reg, double depth,
                  const LossWeights& weights = {});

// Mean opacity of a Gaussian set (0 for an empty set).
double opacity_regularizer(std::span<const GaussianPrimitive> gaussians);

struct ImageScores {
    double psnr = 0.0;
    double ssim = 0.0;
};

// PSNR over all RGB samples with peak 255 (capped at 99 dB); SSIM with an
// 11x11 Gaussian window (sigma 1.5) over fully covered window positions,
// averaged over channels.
ImageScores psnr_ssim(const PanoImage& a, const PanoImage& b);

double psnr_from_mse(double mse);

// Square surface patch sampled on a samples x samples grid at `step`
// spacing, cell-centered.
struct EvalRegion {
    Vec3 corner = Vec3::Zero();
    Vec3 e_u = Vec3::UnitX();
    Vec3 e_v = Vec3::UnitZ();
    double extent = 1.0;
    double step = 0.01;
    int samples = 100;

    std::vector<Vec3> sample_points() const;
};

// Throws unless the axes are orthonormal and the patch lies on the plane of
// some shell triangle.
void validate_region(const ShellScene& shell, const EvalRegion& region);

inline constexpr double kCovisibilityEps = 0.02;

struct PosedPano {
    const PanoImage* image = nullptr;
    PanoPose pose;
};

struct OverlapEntry {
    std::size_t pano = 0;  // index into the evaluated list
    std::size_t region = 0;
    std::size_t valid = 0;
    double mse = 0.0;
    double psnr = 0.0;
};

struct OverlapReport {
    std::vector<OverlapEntry> entries;
    std::vector<std::string> warnings;
    double mean_psnr = 0.0;
};

// Cross-node consistency: every region sample co-visible from the base and
// an evaluated pano contributes a bilinear color pair; PSNR per (pano,
// region), unweighted mean over pairs. Pairs without valid samples are
// dropped with a warning; if nothing remains, throws.
OverlapReport overlap_psnr(const ShellScene& shell, std::span<const PosedPano> panos,
                           std::span<const EvalRegion> regions, std::size_t base_index);

// Bilinear RGB lookup at continuous pixel coordinates (pixel centers at
// integers), wrapping horizontally and clamping vertically.
Vec3 sample_bilinear(const PanoImage& image, double x, double y);

// For synthetic shells: the widest solid full-height wall of each room,
// one centered region per wall at `center_height`, kept only if its center
// is visible from `base`.
std::vector<EvalRegion> auto_select_regions(const ShellScene& shell, const PanoPose& base,
                                            double center_height = kDefaultCameraHeight);

// Plain-text report: one "node <i> region <r> psnr <db> mse <v> valid <n>"
// line per entry, warnings as "# " lines, then "mean_psnr <db>".
std::string format_overlap_report(const OverlapReport& report,
                                  std::span<const NodeId> node_ids = {});

}  // namespace panoworld
