#pragma once

#include "panoworld/cache.hpp"
#include "panoworld/evalmetrics.hpp"
#include "panoworld/gaussians.hpp"
#include "panoworld/oracle.hpp"
#include "panoworld/scenegraph.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace panoworld {

struct TourConfig {
    std::filesystem::path scene;
    std::filesystem::path output;
    std::uint64_t seed = 1;
    int width = 512;
    int height = 256;
    double max_spacing = 1.0;
    int k_same = kDefaultKSame;
    int k_door = kDefaultKDoor;
    double tau_mu = CacheParams{}.tau_mu;
    double tau_v = CacheParams{}.tau_v;
    double tau_d = kDefaultTauDepth;
    double alpha_min = CacheParams{}.alpha_min;
    int stride = 1;
    // Procedural texture lattice spacing (meters) and contrast (gray levels).
    double pattern_scale = TextureSeed{}.pattern_scale;
    double pattern_amplitude = TextureSeed{}.amplitude;
    // Stop after this many generated nodes (0 = whole graph).
    int max_nodes = 0;
    // When false, no memory image is ever rendered or passed on.
    bool use_cache = true;
    // Later nodes paint unseen surfaces with a node-specific pattern, the way
    // a generator would invent detail it has no memory of.
    bool drift = true;
    // Memory colors are normalized by splat coverage.
    bool normalize_memory = true;
    bool eval = true;
    bool write_proxies = true;
    bool write_snapshots = false;

    void validate() const;
    CacheParams cache_params() const;
};

// JSON form mirrors the field names above; missing keys keep defaults.
std::string tour_config_to_json(const TourConfig& config);
TourConfig tour_config_from_json(const std::string& text);

struct NodeRecord {
    NodeId id = 0;
    RoomId room = 0;
    std::vector<NodeId> context;
    std::optional<NodeId> nearby;
    bool had_memory = false;
    std::size_t memory_valid = 0;  // pixels passed to the generator as memory
};

struct TourReport {
    NodeId start = 0;
    std::vector<NodeRecord> nodes;  // generation order
    std::vector<UpdateStats> stats;
    std::size_t cache_size = 0;
    std::optional<OverlapReport> overlap;
};

// Breadth-first order over navigation edges from `start`, neighbors visited
// in ascending id.
std::vector<NodeId> generation_order(const NodeGraph& graph, NodeId start);

// Nearest generated same-room node, else nearest generated boundary node of
// a doorway touching the node's room; ties by id.
std::optional<NodeId> pick_nearby(const NodeGraph& graph, NodeId node,
                                  const std::vector<NodeId>& generated);

// Runs the autoregressive tour and writes its artifacts into config.output.
TourReport run_tour(const TourConfig& config);

// Reads the manifest written by run_tour and evaluates overlap PSNR against
// the first generated node.
OverlapReport evaluate_run(const std::filesystem::path& run_dir, const ShellScene& shell,
                           std::vector<NodeId>* node_ids = nullptr);

}  // namespace panoworld
