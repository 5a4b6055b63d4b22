#include "panoworld/cache.hpp"

#include "panoworld/scene_io.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

namespace panoworld {

bool compatible(const GaussianPrimitive& a, const GaussianPrimitive& b, double tau_mu,
                double tau_v) {
    if (a.room != b.room) {
        return false;
    }
    const double limit = tau_mu * std::min(a.mean_scale(), b.mean_scale());
    if (!((a.mu - b.mu).norm() < limit)) {
        return false;
    }
    return a.src_dir.dot(b.src_dir) > tau_v;
}

GaussianPrimitive fuse_pair(const GaussianPrimitive& a, const GaussianPrimitive& b, double tau_mu,
                            double tau_v) {
    if (!compatible(a, b, tau_mu, tau_v)) {
        throw Error("fuse_pair called on incompatible primitives");
    }
    double wa = a.alpha;
    double wb = b.alpha;
    if (wa + wb <= 0.0) {
        wa = wb = 1.0;
    }
    const double sum = wa + wb;
    const GaussianPrimitive& dominant = b.alpha > a.alpha ? b : a;

    GaussianPrimitive out = dominant;
    out.mu = (wa * a.mu + wb * b.mu) / sum;
    out.sigma = (wa * a.sigma + wb * b.sigma) / sum;
    Eigen::Vector4d qa = a.q.coeffs();
    Eigen::Vector4d qb = b.q.coeffs();
    if (qa.dot(qb) < 0.0) {
        qb = -qb;
    }
    const Eigen::Vector4d blend = wa * qa + wb * qb;
    out.q = blend.norm() > 1e-12 ? Quat(Eigen::Vector4d(blend.normalized())) : dominant.q;
    out.alpha = std::max(a.alpha, b.alpha);
    out.sh.dc = (wa * a.sh.dc + wb * b.sh.dc) / sum;
    out.sh.linear = dominant.sh.linear;
    return out;
}

GaussianCache::GaussianCache(double cell)
    : cell_(cell), prims_(std::make_shared<std::vector<GaussianPrimitive>>()) {
    if (!(cell > 0.0)) {
        throw Error("cache grid cell must be positive");
    }
}

GaussianCache::CellKey GaussianCache::pack(std::int64_t x, std::int64_t y, std::int64_t z) {
    constexpr std::int64_t bias = 1 << 20;
    constexpr std::uint64_t mask = (1u << 21) - 1;
    return (static_cast<std::uint64_t>(x + bias) & mask) |
           ((static_cast<std::uint64_t>(y + bias) & mask) << 21) |
           ((static_cast<std::uint64_t>(z + bias) & mask) << 42);
}

GaussianCache::CellKey GaussianCache::key_of(const Vec3& p) const {
    return pack(static_cast<std::int64_t>(std::floor(p.x() / cell_)),
                static_cast<std::int64_t>(std::floor(p.y() / cell_)),
                static_cast<std::int64_t>(std::floor(p.z() / cell_)));
}

std::vector<GaussianPrimitive>& GaussianCache::mutable_prims() {
    if (prims_.use_count() > 1) {
        prims_ = std::make_shared<std::vector<GaussianPrimitive>>(*prims_);
    }
    return *prims_;
}

void GaussianCache::rebuild_grid() {
    grid_.clear();
    const auto& prims = *prims_;
    for (std::size_t i = 0; i < prims.size(); ++i) {
        grid_[key_of(prims[i].mu)].push_back(static_cast<std::uint32_t>(i));
    }
}

bool GaussianCache::grid_consistent() const {
    std::size_t indexed = 0;
    for (const auto& [key, ids] : grid_) {
        for (std::uint32_t i : ids) {
            if (i >= prims_->size() || key_of((*prims_)[i].mu) != key) {
                return false;
            }
        }
        indexed += ids.size();
    }
    return indexed == prims_->size();
}

UpdateStats GaussianCache::update(std::span<const GaussianPrimitive> delta,
                                  const CacheParams& params, NodeId node) {
    auto& prims = mutable_prims();
    UpdateStats stats;
    stats.node = node;
    const std::size_t before = prims.size();
    std::set<CellKey> touched;

    for (const auto& d : delta) {
        const double radius = params.tau_mu * d.mean_scale();
        const Vec3 lo = (d.mu - Vec3::Constant(radius)) / cell_;
        const Vec3 hi = (d.mu + Vec3::Constant(radius)) / cell_;
        std::optional<std::uint32_t> best;
        double best_dist = std::numeric_limits<double>::infinity();
        for (auto cx = static_cast<std::int64_t>(std::floor(lo.x()));
             cx <= static_cast<std::int64_t>(std::floor(hi.x())); ++cx) {
            for (auto cy = static_cast<std::int64_t>(std::floor(lo.y()));
                 cy <= static_cast<std::int64_t>(std::floor(hi.y())); ++cy) {
                for (auto cz = static_cast<std::int64_t>(std::floor(lo.z()));
                     cz <= static_cast<std::int64_t>(std::floor(hi.z())); ++cz) {
                    const auto it = grid_.find(pack(cx, cy, cz));
                    if (it == grid_.end()) {
                        continue;
                    }
                    for (std::uint32_t idx : it->second) {
                        if (idx >= before) {
                            continue;  // appended during this update
                        }
                        ++stats.candidate_tests;
                        const auto& e = prims[idx];
                        if (!compatible(e, d, params.tau_mu, params.tau_v)) {
                            continue;
                        }
                        const double dist = (e.mu - d.mu).norm();
                        if (dist < best_dist || (dist == best_dist && idx < *best)) {
                            best = idx;
                            best_dist = dist;
                        }
                    }
                }
            }
        }
        if (best) {
            auto& e = prims[*best];
            const CellKey old_key = key_of(e.mu);
            // Existing primitive first: equal opacity keeps its appearance.
            e = fuse_pair(e, d, params.tau_mu, params.tau_v);
            const CellKey new_key = key_of(e.mu);
            if (new_key != old_key) {
                auto& ids = grid_[old_key];
                ids.erase(std::find(ids.begin(), ids.end(), *best));
                if (ids.empty()) {
                    grid_.erase(old_key);
                }
                grid_[new_key].push_back(*best);
            }
            touched.insert(new_key);
            ++stats.merged;
        } else {
            const auto idx = static_cast<std::uint32_t>(prims.size());
            prims.push_back(d);
            const CellKey key = key_of(d.mu);
            grid_[key].push_back(idx);
            touched.insert(key);
            ++stats.added;
        }
    }

    std::vector<char> doomed;
    for (CellKey key : touched) {
        const auto it = grid_.find(key);
        if (it == grid_.end()) {
            continue;
        }
        for (std::uint32_t idx : it->second) {
            if (prims[idx].alpha < params.alpha_min) {
                if (doomed.empty()) {
                    doomed.assign(prims.size(), 0);
                }
                doomed[idx] = 1;
                ++stats.pruned;
            }
        }
    }
    if (stats.pruned > 0) {
        std::size_t w = 0;
        for (std::size_t i = 0; i < prims.size(); ++i) {
            if (!doomed[i]) {
                if (w != i) {
                    prims[w] = prims[i];
                }
                ++w;
            }
        }
        prims.resize(w);
        rebuild_grid();
    }
    stats.total = prims.size();
    history_.push_back(stats);
    return stats;
}

PanoImage filter_memory(const PanoImage& memory, std::span<const double> shell_depth,
                        double tau_d) {
    if (!memory.depth) {
        throw Error("filter_memory needs a memory image with depth");
    }
    if (shell_depth.size() != memory.pixel_count()) {
        throw Error("filter_memory: memory and shell depth resolutions differ");
    }
    PanoImage out = memory;
    if (out.valid.empty()) {
        out.valid.assign(out.pixel_count(), 1);
    }
    const auto& depth = *memory.depth;
    for (std::size_t i = 0; i < out.pixel_count(); ++i) {
        const bool behind_shell = static_cast<double>(depth[i]) > shell_depth[i] + tau_d;
        if (!out.valid[i] || behind_shell) {
            out.valid[i] = 0;
            out.set_rgb(i, {255, 255, 255});
        }
    }
    return out;
}

PanoImage filter_memory(const PanoImage& memory, const GeometricProxy& shell, double tau_d) {
    if (shell.width != memory.width || shell.height != memory.height) {
        throw Error("filter_memory: memory and shell depth resolutions differ");
    }
    return filter_memory(memory, shell.depth, tau_d);
}

void write_stats_log(const std::filesystem::path& path, std::span<const UpdateStats> stats) {
    std::ostringstream out;
    out << "node_id\tadded\tmerged\tpruned\ttotal\n";
    for (const auto& s : stats) {
        out << s.node << '\t' << s.added << '\t' << s.merged << '\t' << s.pruned << '\t' << s.total
            << '\n';
    }
    write_text_file(path, out.str());
}

}  // namespace panoworld
