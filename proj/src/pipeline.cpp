#include "panoworld/pipeline.hpp"

#include "panoworld/oracle.hpp"
#include "panoworld/raster_io.hpp"
#include "panoworld/scene_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <deque>
#include <map>
#include <set>

namespace panoworld {

using nlohmann::json;

void TourConfig::validate() const {
    validate_pano_size(width, height);
    if (!(max_spacing > 0.0)) {
        throw Error("max_spacing must be positive");
    }
    if (k_same < 0 || k_door < 0) {
        throw Error("context sizes must be non-negative");
    }
    if (!(tau_mu > 0.0) || !(tau_d > 0.0) || !(alpha_min > 0.0) || !(tau_v > -1.0 && tau_v < 1.0)) {
        throw Error("cache thresholds out of range");
    }
    if (stride < 1) {
        throw Error("lift stride must be at least 1");
    }
    if (!(pattern_scale > 0.0) || !(pattern_amplitude >= 0.0)) {
        throw Error("texture pattern scale must be positive and amplitude non-negative");
    }
    if (max_nodes < 0) {
        throw Error("max_nodes must be non-negative");
    }
}

CacheParams TourConfig::cache_params() const {
    CacheParams p;
    p.tau_mu = tau_mu;
    p.tau_v = tau_v;
    p.alpha_min = alpha_min;
    return p;
}

std::string tour_config_to_json(const TourConfig& c) {
    json j = {{"scene", c.scene.string()},
              {"output", c.output.string()},
              {"seed", c.seed},
              {"width", c.width},
              {"height", c.height},
              {"max_spacing", c.max_spacing},
              {"k_same", c.k_same},
              {"k_door", c.k_door},
              {"tau_mu", c.tau_mu},
              {"tau_v", c.tau_v},
              {"tau_d", c.tau_d},
              {"alpha_min", c.alpha_min},
              {"stride", c.stride},
              {"pattern_scale", c.pattern_scale},
              {"pattern_amplitude", c.pattern_amplitude},
              {"max_nodes", c.max_nodes},
              {"use_cache", c.use_cache},
              {"drift", c.drift},
              {"normalize_memory", c.normalize_memory},
              {"eval", c.eval},
              {"write_proxies", c.write_proxies},
              {"write_snapshots", c.write_snapshots}};
    return j.dump(2) + "\n";
}

TourConfig tour_config_from_json(const std::string& text) {
    TourConfig c;
    try {
        const json j = json::parse(text);
        if (!j.is_object()) {
            throw Error("tour config must be a JSON object");
        }
        static const std::set<std::string> known = {
            "scene",  "output", "seed",      "width",     "height", "max_spacing",
            "k_same", "k_door", "tau_mu",    "tau_v",     "tau_d",  "alpha_min",
            "stride", "pattern_scale", "pattern_amplitude", "max_nodes", "use_cache", "drift", "normalize_memory",  "eval",   "write_proxies",
            "write_snapshots"};
        for (const auto& [key, value] : j.items()) {
            if (!known.count(key)) {
                throw Error("unknown tour config key '" + key + "'");
            }
        }
        auto get = [&](const char* key, auto& field) {
            if (j.contains(key)) {
                j.at(key).get_to(field);
            }
        };
        if (j.contains("scene")) {
            c.scene = j.at("scene").get<std::string>();
        }
        if (j.contains("output")) {
            c.output = j.at("output").get<std::string>();
        }
        get("seed", c.seed);
        get("width", c.width);
        get("height", c.height);
        get("max_spacing", c.max_spacing);
        get("k_same", c.k_same);
        get("k_door", c.k_door);
        get("tau_mu", c.tau_mu);
        get("tau_v", c.tau_v);
        get("tau_d", c.tau_d);
        get("alpha_min", c.alpha_min);
        get("stride", c.stride);
        get("pattern_scale", c.pattern_scale);
        get("pattern_amplitude", c.pattern_amplitude);
        get("max_nodes", c.max_nodes);
        get("use_cache", c.use_cache);
        get("drift", c.drift);
        get("normalize_memory", c.normalize_memory);
        get("eval", c.eval);
        get("write_proxies", c.write_proxies);
        get("write_snapshots", c.write_snapshots);
    } catch (const json::exception& e) {
        throw Error(std::string("tour config: ") + e.what());
    }
    return c;
}

std::vector<NodeId> generation_order(const NodeGraph& graph, NodeId start) {
    const auto adj = graph.adjacency();
    std::vector<char> seen(graph.nodes.size(), 0);
    std::vector<NodeId> order;
    std::deque<std::size_t> queue{graph.index_of(start)};
    seen[queue.front()] = 1;
    while (!queue.empty()) {
        const std::size_t i = queue.front();
        queue.pop_front();
        order.push_back(graph.nodes[i].id);
        std::vector<std::size_t> next;
        for (const auto& [j, len] : adj[i]) {
            if (!seen[j]) {
                next.push_back(j);
            }
        }
        std::sort(next.begin(), next.end(), [&](std::size_t a, std::size_t b) {
            return graph.nodes[a].id < graph.nodes[b].id;
        });
        for (std::size_t j : next) {
            if (!seen[j]) {
                seen[j] = 1;
                queue.push_back(j);
            }
        }
    }
    return order;
}

std::optional<NodeId> pick_nearby(const NodeGraph& graph, NodeId node,
                                  const std::vector<NodeId>& generated) {
    const GraphNode& self = graph.node(node);
    auto nearest = [&](auto&& accept) -> std::optional<NodeId> {
        std::optional<NodeId> best;
        double best_d = 0.0;
        for (NodeId id : generated) {
            if (id == node) {
                continue;
            }
            const GraphNode& other = graph.node(id);
            if (!accept(other)) {
                continue;
            }
            const double d = (other.pose.position - self.pose.position).norm();
            if (!best || d < best_d || (d == best_d && id < *best)) {
                best = id;
                best_d = d;
            }
        }
        return best;
    };
    if (auto same = nearest([&](const GraphNode& o) { return o.room == self.room; })) {
        return same;
    }
    return nearest([&](const GraphNode& o) {
        return o.boundary && o.doorway_rooms &&
               (o.doorway_rooms->first == self.room || o.doorway_rooms->second == self.room);
    });
}

namespace {

std::string node_tag(NodeId id) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%03u", static_cast<unsigned>(id));
    return buf;
}

void write_pano(const std::filesystem::path& path, const PanoImage& img) {
    write_png_rgb8(path, img.width, img.height, img.color);
}

// Stage wrapper: module errors carry the node and stage that raised them.
template <typename Fn>
auto stage(NodeId node, const char* name, Fn&& fn) {
    try {
        return fn();
    } catch (const Error& e) {
        throw Error("node " + std::to_string(node) + " " + name + ": " + e.what());
    }
}

json pose_json(const PanoPose& pose) {
    return {{"position", {pose.position.x(), pose.position.y(), pose.position.z()}},
            {"rotation",
             {pose.rotation.w(), pose.rotation.x(), pose.rotation.y(), pose.rotation.z()}}};
}

}  // namespace

TourReport run_tour(const TourConfig& config) {
    config.validate();
    const FloorplanSpec spec = load_floorplan(config.scene);
    const ShellScene shell = build_shell(spec);
    const NodeGraph base_graph = build_node_graph(shell, config.max_spacing);
    const NodeGraph graph = insert_auxiliary_nodes(base_graph, shell, config.max_spacing);

    std::set<NodeId> targets;
    for (const auto& n : graph.nodes) {
        if (n.kind == NodeKind::target) {
            targets.insert(n.id);
        }
    }
    TourReport report;
    report.start = select_start_node(graph, targets);
    std::vector<NodeId> order = generation_order(graph, report.start);
    if (config.max_nodes > 0 && order.size() > static_cast<std::size_t>(config.max_nodes)) {
        order.resize(static_cast<std::size_t>(config.max_nodes));
    }

    const auto& out = config.output;
    std::filesystem::create_directories(out);
    write_text_file(out / "graph.json", node_graph_to_json(graph));
    write_text_file(out / "config.json", tour_config_to_json(config));

    TextureSeed tex = make_texture_seed(config.seed, spec);
    tex.pattern_scale = config.pattern_scale;
    tex.amplitude = config.pattern_amplitude;
    const CacheParams params = config.cache_params();
    const std::size_t context_bound =
        1 + static_cast<std::size_t>(config.k_same) + static_cast<std::size_t>(config.k_door);

    GaussianCache cache(params.cell);
    std::vector<NodeId> generated;
    std::set<NodeId> generated_set;
    std::map<NodeId, PanoImage> panos;
    json manifest_nodes = json::array();

    for (std::size_t step = 0; step < order.size(); ++step) {
        const NodeId id = order[step];
        const GraphNode& node = graph.node(id);
        const PanoPose& pose = node.pose;
        const std::string tag = node_tag(id);
        NodeRecord record;
        record.id = id;
        record.room = node.room;

        const GeometricProxy proxy = stage(id, "shell render", [&] {
            return shell_render(shell, pose, config.width, config.height);
        });
        if (proxy.provenance != Provenance::shell) {
            throw Error("node " + std::to_string(id) + ": proxy does not come from the shell");
        }

        std::optional<PanoImage> memory;
        if (step > 0 && config.use_cache) {
            memory = stage(id, "memory render", [&] {
                const auto snap = cache.snapshot();
                RenderOptions ro;
                ro.normalize_color = config.normalize_memory;
                PanoImage raw = render_pano(*snap, pose, config.width, config.height, ro);
                if (raw.provenance != Provenance::cache) {
                    throw Error("memory image does not come from the cache renderer");
                }
                return filter_memory(raw, proxy, config.tau_d);
            });
            record.had_memory = true;
            for (std::size_t i = 0; i < memory->pixel_count(); ++i) {
                record.memory_valid += memory->valid[i] && !memory->is_marker(i) ? 1 : 0;
            }
        }

        record.nearby = pick_nearby(graph, id, generated);
        record.context = select_context(graph, id, generated_set, config.k_same, config.k_door);
        if (record.context.size() > context_bound) {
            throw Error("node " + std::to_string(id) + ": context exceeds its bound");
        }

        const TextureSeed node_tex = config.drift && step > 0 ? reseeded(tex, id) : tex;
        const PanoImage* nearby = record.nearby ? &panos.at(*record.nearby) : nullptr;
        PanoImage pano = stage(id, "generate", [&] {
            return oracle_generate(shell, node_tex, proxy, memory ? &*memory : nullptr, nearby,
                                   pose);
        });
        if (pano.provenance != Provenance::generator) {
            throw Error("node " + std::to_string(id) + ": panorama does not come from the generator");
        }

        std::vector<GaussianPrimitive> delta = stage(id, "lift", [&] {
            return lift_pano(pano, pose, config.stride, node.room, id);
        });
        for (auto& g : delta) {
            g.room = locate_room(spec, g.mu.head<2>()).value_or(node.room);
        }
        if (config.use_cache) {
            report.stats.push_back(stage(id, "cache update", [&] {
                return cache.update(delta, params, id);
            }));
        }

        write_pano(out / ("pano_" + tag + ".png"), pano);
        write_raw_float(out / ("pano_" + tag + "_depth.raw"), pano.width, pano.height,
                        *pano.depth);
        if (config.write_proxies) {
            write_proxy(out / ("proxy_" + tag), proxy);
        }
        if (memory) {
            write_pano(out / ("memory_" + tag + ".png"), *memory);
        }
        if (config.write_snapshots && config.use_cache) {
            save_gaussians(out / ("cache_" + tag + ".bin"), cache.primitives());
        }

        json entry = pose_json(pose);
        entry["id"] = id;
        entry["room"] = node.room;
        entry["kind"] = node.kind == NodeKind::target ? "target" : "auxiliary";
        entry["boundary"] = node.boundary;
        entry["pano"] = "pano_" + tag + ".png";
        entry["context"] = record.context;
        entry["nearby"] = record.nearby ? json(*record.nearby) : json(nullptr);
        entry["memory_valid"] = record.memory_valid;
        manifest_nodes.push_back(entry);

        generated.push_back(id);
        generated_set.insert(id);
        panos.emplace(id, std::move(pano));
        report.nodes.push_back(std::move(record));
    }

    save_gaussians(out / "cache_final.bin", cache.primitives());
    write_stats_log(out / "stats.log", report.stats);
    report.cache_size = cache.size();

    const json manifest = {{"width", config.width},
                           {"height", config.height},
                           {"start", report.start},
                           {"nodes", manifest_nodes}};
    write_text_file(out / "poses.json", manifest.dump(2) + "\n");

    if (config.eval && order.size() >= 2) {
        std::vector<PosedPano> posed;
        for (NodeId id : order) {
            posed.push_back({&panos.at(id), graph.node(id).pose});
        }
        const auto regions = auto_select_regions(shell, posed.front().pose);
        report.overlap = overlap_psnr(shell, posed, regions, 0);
        write_text_file(out / "overlap.txt", format_overlap_report(*report.overlap, order));
    }
    return report;
}

OverlapReport evaluate_run(const std::filesystem::path& run_dir, const ShellScene& shell,
                           std::vector<NodeId>* node_ids) {
    json manifest;
    try {
        manifest = json::parse(read_text_file(run_dir / "poses.json"));
    } catch (const json::exception& e) {
        throw Error((run_dir / "poses.json").string() + ": " + e.what());
    }
    std::vector<PanoImage> images;
    std::vector<PanoPose> poses;
    std::vector<NodeId> ids;
    try {
        for (const auto& n : manifest.at("nodes")) {
            const auto rgb = read_png_rgb8(run_dir / n.at("pano").get<std::string>());
            PanoImage img = PanoImage::blank(rgb.width, rgb.height);
            img.color = rgb.rgb;
            img.valid.assign(img.pixel_count(), 1);
            images.push_back(std::move(img));
            const auto p = n.at("position");
            const auto q = n.at("rotation");
            PanoPose pose;
            pose.position = Vec3(p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>());
            pose.rotation = Quat(q.at(0).get<double>(), q.at(1).get<double>(),
                                 q.at(2).get<double>(), q.at(3).get<double>());
            poses.push_back(pose);
            ids.push_back(n.at("id").get<NodeId>());
        }
    } catch (const json::exception& e) {
        throw Error((run_dir / "poses.json").string() + ": " + e.what());
    }
    std::vector<PosedPano> posed;
    for (std::size_t i = 0; i < images.size(); ++i) {
        posed.push_back({&images[i], poses[i]});
    }
    if (posed.empty()) {
        throw Error("run manifest lists no panoramas");
    }
    const auto regions = auto_select_regions(shell, posed.front().pose);
    auto report = overlap_psnr(shell, posed, regions, 0);
    if (node_ids) {
        *node_ids = ids;
    }
    return report;
}

}  // namespace panoworld
