// panoworld command-line front end.
#include "panoworld/evalmetrics.hpp"
#include "panoworld/gaussians.hpp"
#include "panoworld/oracle.hpp"
#include "panoworld/pipeline.hpp"
#include "panoworld/raster_io.hpp"
#include "panoworld/scene_io.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <sstream>

using namespace panoworld;

namespace {

std::vector<double> parse_list(const std::string& text, std::size_t min_n, std::size_t max_n,
                               const char* what) {
    std::vector<double> v;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            v.push_back(std::stod(item, &used));
            if (used != item.size()) {
                throw std::invalid_argument(item);
            }
        } catch (const std::exception&) {
            throw Error(std::string("bad number in ") + what + ": '" + item + "'");
        }
    }
    if (v.size() < min_n || v.size() > max_n) {
        throw Error(std::string("wrong number of values in ") + what);
    }
    return v;
}

std::vector<double> to_doubles(const FloatRaster& r) { return {r.data.begin(), r.data.end()}; }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"panoworld: node-based panoramic world engine"};
    app.require_subcommand(1);

    // gen-scene
    auto* gen = app.add_subcommand("gen-scene", "Generate a synthetic multi-room scene file");
    std::uint64_t gen_seed = 1;
    int gen_rooms = 3;
    std::string gen_out;
    gen->add_option("--seed", gen_seed, "Scene seed")->capture_default_str();
    gen->add_option("--rooms", gen_rooms, "Number of rooms (1..8)")->capture_default_str();
    gen->add_option("-o,--output", gen_out, "Output scene file")->required();

    // plan
    auto* plan = app.add_subcommand("plan", "Build the node graph and dump it as JSON");
    std::string plan_scene, plan_out;
    double plan_spacing = 1.0;
    plan->add_option("--scene", plan_scene, "Scene file")->required();
    plan->add_option("--max-spacing", plan_spacing, "Auxiliary node spacing, meters")
        ->capture_default_str();
    plan->add_option("-o,--output", plan_out, "Output graph file (stdout if omitted)");

    // run
    auto* run = app.add_subcommand("run", "Run the autoregressive tour");
    TourConfig cfg;
    std::string run_config, run_scene, run_out;
    run->add_option("--config", run_config, "Tour config JSON; flags override its values");
    run->add_option("--scene", run_scene, "Scene file");
    run->add_option("-o,--output", run_out, "Output directory");
    auto* o_seed = run->add_option("--seed", cfg.seed, "Texture seed");
    auto* o_w = run->add_option("--width", cfg.width, "Panorama width");
    auto* o_h = run->add_option("--height", cfg.height, "Panorama height");
    auto* o_sp = run->add_option("--max-spacing", cfg.max_spacing, "Auxiliary node spacing");
    auto* o_stride = run->add_option("--stride", cfg.stride, "Lift stride in pixels");
    auto* o_ps = run->add_option("--pattern-scale", cfg.pattern_scale, "Texture lattice, meters");
    auto* o_pa = run->add_option("--pattern-amplitude", cfg.pattern_amplitude, "Texture contrast");
    auto* o_max = run->add_option("--max-nodes", cfg.max_nodes, "Stop after N nodes (0 = all)");
    auto* o_ks = run->add_option("--k-same", cfg.k_same, "Same-room context nodes");
    auto* o_kd = run->add_option("--k-door", cfg.k_door, "Doorway context nodes");
    auto* o_tmu = run->add_option("--tau-mu", cfg.tau_mu, "Merge distance ratio");
    auto* o_tv = run->add_option("--tau-v", cfg.tau_v, "Merge view cosine");
    auto* o_td = run->add_option("--tau-d", cfg.tau_d, "Memory depth gate, meters");
    auto* o_am = run->add_option("--alpha-min", cfg.alpha_min, "Prune opacity");
    bool no_cache = false, no_eval = false, no_drift = false;
    run->add_flag("--no-cache", no_cache, "Never pass memory to the generator");
    run->add_flag("--no-eval", no_eval, "Skip the overlap report");
    run->add_flag("--no-drift", no_drift, "Use one texture pattern for every node");

    // render-cache
    auto* rc = app.add_subcommand("render-cache", "Render a cache file from a pose");
    std::string rc_cache, rc_pose, rc_rot = "1,0,0,0", rc_out, rc_depth;
    int rc_w = 512, rc_h = 256;
    rc->add_option("--cache", rc_cache, "Cache file")->required();
    rc->add_option("--pose", rc_pose, "Camera position x,y,z")->required();
    rc->add_option("--rotation", rc_rot, "Rotation quaternion w,x,y,z")->capture_default_str();
    rc->add_option("--width", rc_w)->capture_default_str();
    rc->add_option("--height", rc_h)->capture_default_str();
    rc->add_option("-o,--output", rc_out, "Output PNG")->required();
    rc->add_option("--depth", rc_depth, "Optional raw float depth output");

    // eval-overlap
    auto* ev = app.add_subcommand("eval-overlap", "Cross-node overlap PSNR of a run directory");
    std::string ev_scene, ev_run, ev_out;
    ev->add_option("--scene", ev_scene, "Scene file")->required();
    ev->add_option("--run", ev_run, "Run output directory (poses.json + panoramas)")->required();
    ev->add_option("-o,--output", ev_out, "Report file (stdout if omitted)");

    // losses
    auto* ls = app.add_subcommand("losses", "Depth losses between two raw float rasters");
    std::string ls_pred, ls_target;
    double ls_l2 = 0.0, ls_perc = 0.0, ls_alpha = 0.0;
    ls->add_option("--pred", ls_pred, "Predicted depth raster")->required();
    ls->add_option("--target", ls_target, "Target depth raster")->required();
    ls->add_option("--l2", ls_l2, "Photometric L2 component")->capture_default_str();
    ls->add_option("--perc", ls_perc, "Perceptual component (external)")->capture_default_str();
    ls->add_option("--alpha-reg", ls_alpha, "Opacity regularizer component")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (gen->parsed()) {
            save_floorplan(gen_out, gen_scene(gen_seed, gen_rooms));
        } else if (plan->parsed()) {
            const auto shell = build_shell(load_floorplan(plan_scene));
            const auto graph =
                insert_auxiliary_nodes(build_node_graph(shell, plan_spacing), shell, plan_spacing);
            const auto text = node_graph_to_json(graph);
            if (plan_out.empty()) {
                std::cout << text;
            } else {
                write_text_file(plan_out, text);
            }
        } else if (run->parsed()) {
            if (!run_config.empty()) {
                const TourConfig file_cfg = tour_config_from_json(read_text_file(run_config));
                TourConfig merged = file_cfg;
                // Re-apply explicitly given flags over the file values.
                if (*o_seed) merged.seed = cfg.seed;
                if (*o_w) merged.width = cfg.width;
                if (*o_h) merged.height = cfg.height;
                if (*o_sp) merged.max_spacing = cfg.max_spacing;
                if (*o_stride) merged.stride = cfg.stride;
                if (*o_ps) merged.pattern_scale = cfg.pattern_scale;
                if (*o_pa) merged.pattern_amplitude = cfg.pattern_amplitude;
                if (*o_max) merged.max_nodes = cfg.max_nodes;
                if (*o_ks) merged.k_same = cfg.k_same;
                if (*o_kd) merged.k_door = cfg.k_door;
                if (*o_tmu) merged.tau_mu = cfg.tau_mu;
                if (*o_tv) merged.tau_v = cfg.tau_v;
                if (*o_td) merged.tau_d = cfg.tau_d;
                if (*o_am) merged.alpha_min = cfg.alpha_min;
                cfg = merged;
            }
            if (!run_scene.empty()) cfg.scene = run_scene;
            if (!run_out.empty()) cfg.output = run_out;
            if (no_cache) cfg.use_cache = false;
            if (no_eval) cfg.eval = false;
            if (no_drift) cfg.drift = false;
            if (cfg.scene.empty() || cfg.output.empty()) {
                std::cerr << "error: run needs --scene and --output (or a config providing them)\n";
                return 2;
            }
            const auto report = run_tour(cfg);
            std::cout << "nodes " << report.nodes.size() << " cache " << report.cache_size;
            if (report.overlap) {
                std::cout << " mean_psnr " << report.overlap->mean_psnr;
            }
            std::cout << '\n';
        } else if (rc->parsed()) {
            const auto p = parse_list(rc_pose, 3, 3, "--pose");
            const auto q = parse_list(rc_rot, 4, 4, "--rotation");
            PanoPose pose;
            pose.position = Vec3(p[0], p[1], p[2]);
            pose.rotation = Quat(q[0], q[1], q[2], q[3]);
            validate_pose(pose);
            const auto gs = load_gaussians(rc_cache);
            const auto img = render_pano(gs, pose, rc_w, rc_h);
            write_png_rgb8(rc_out, img.width, img.height, img.color);
            if (!rc_depth.empty()) {
                write_raw_float(rc_depth, img.width, img.height, *img.depth);
            }
        } else if (ev->parsed()) {
            const auto shell = build_shell(load_floorplan(ev_scene));
            std::vector<NodeId> ids;
            const auto report = evaluate_run(ev_run, shell, &ids);
            const auto text = format_overlap_report(report, ids);
            if (ev_out.empty()) {
                std::cout << text;
            } else {
                write_text_file(ev_out, text);
            }
        } else if (ls->parsed()) {
            const auto pred = read_raw_float(ls_pred);
            const auto target = read_raw_float(ls_target);
            if (pred.width != target.width || pred.height != target.height) {
                throw Error("depth rasters differ in size");
            }
            const auto pd = to_doubles(pred);
            const auto td = to_doubles(target);
            const auto loss = depth_loss(pd, td);
            const double depth = loss.l_log + loss.l_si;
            std::printf("l_log %.9g\nl_si %.9g\nl_depth %.9g\ntotal %.9g\n", loss.l_log, loss.l_si,
                        depth, total_loss(ls_l2, ls_perc, ls_alpha, depth));
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
