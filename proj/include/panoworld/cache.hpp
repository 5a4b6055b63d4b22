#pragma once

#include "panoworld/gaussians.hpp"
#include "panoworld/scenegraph.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <unordered_map>
#include <vector>

namespace panoworld {

struct CacheParams {
    double tau_mu = 1.0;     // center distance, in units of the smaller mean scale
    double tau_v = 0.5;      // minimum cosine between supporting view directions
    double alpha_min = 0.05; // prune threshold
    double cell = 0.25;      // spatial hash cell, meters
};

inline constexpr double kDefaultTauDepth = 0.10;

// Same room, centers closer than tau_mu * min(mean scales) (strict), and
// supporting directions with cosine strictly above tau_v.
bool compatible(const GaussianPrimitive& a, const GaussianPrimitive& b, double tau_mu,
                double tau_v);

// Opacity-weighted geometry and DC color; alpha is the max; the linear SH
// bands and provenance come from the dominant (more opaque) primitive, with
// ties going to `a`. Throws if the pair is not compatible.
GaussianPrimitive fuse_pair(const GaussianPrimitive& a, const GaussianPrimitive& b,
                            double tau_mu = 1.0, double tau_v = 0.5);

struct UpdateStats {
    NodeId node = 0;
    std::size_t added = 0;
    std::size_t merged = 0;
    std::size_t pruned = 0;
    std::size_t total = 0;
    // Existing primitives examined for compatibility during the update.
    std::size_t candidate_tests = 0;
};

// Growing whole-house memory. Updates are single-writer; snapshot() hands
// out an immutable view that stays valid across later updates.
class GaussianCache {
public:
    explicit GaussianCache(double cell = CacheParams{}.cell);

    // Fuse delta into the cache, then prune low-opacity primitives in the
    // grid cells this update touched. Each delta primitive merges with at
    // most one pre-existing primitive (the nearest compatible one, ties by
    // index) or is appended.
    UpdateStats update(std::span<const GaussianPrimitive> delta, const CacheParams& params,
                       NodeId node = 0);

    std::shared_ptr<const std::vector<GaussianPrimitive>> snapshot() const { return prims_; }
    const std::vector<GaussianPrimitive>& primitives() const { return *prims_; }
    std::size_t size() const { return prims_->size(); }
    double cell() const { return cell_; }
    const std::vector<UpdateStats>& history() const { return history_; }

    // True when the spatial hash indexes exactly the live primitives.
    bool grid_consistent() const;

private:
    using CellKey = std::uint64_t;

    CellKey key_of(const Vec3& p) const;
    static CellKey pack(std::int64_t x, std::int64_t y, std::int64_t z);
    void rebuild_grid();
    std::vector<GaussianPrimitive>& mutable_prims();

    double cell_;
    std::shared_ptr<std::vector<GaussianPrimitive>> prims_;
    std::unordered_map<CellKey, std::vector<std::uint32_t>> grid_;
    std::vector<UpdateStats> history_;
};

// Invalidates memory pixels that are already invalid or whose cache depth
// lies more than tau_d behind the shell depth; invalid pixels are painted
// (255, 255, 255).
PanoImage filter_memory(const PanoImage& memory, std::span<const double> shell_depth,
                        double tau_d = kDefaultTauDepth);
PanoImage filter_memory(const PanoImage& memory, const GeometricProxy& shell,
                        double tau_d = kDefaultTauDepth);

// Tab-separated stats log: header line then one record per update.
void write_stats_log(const std::filesystem::path& path, std::span<const UpdateStats> stats);

}  // namespace panoworld
