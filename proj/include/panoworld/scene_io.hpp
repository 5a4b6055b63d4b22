#pragma once

#include "panoworld/scenegraph.hpp"

#include <filesystem>
#include <string>

namespace panoworld {

// Scene files are JSON:
//
//   {
//     "wall_height": 2.8,
//     "wall_thickness": 0.2,
//     "rooms": [ {"id": 0, "label": "living", "polygon": [[x, y], ...]}, ... ],
//     "doorways": [ {"rooms": [0, 1], "segment": [[x, y], [x, y]], "height": 2.1}, ... ],
//     "nodes": [ [x, y, z], ... ]
//   }
//
// All lengths in meters. "nodes" are the target panorama positions.
std::string floorplan_to_json(const FloorplanSpec& spec);
FloorplanSpec floorplan_from_json(const std::string& text);

void save_floorplan(const std::filesystem::path& path, const FloorplanSpec& spec);
FloorplanSpec load_floorplan(const std::filesystem::path& path);

// Node graph dump: {"nodes": [{id, room, kind, boundary, position, rotation}], "edges": [[a, b]]}.
std::string node_graph_to_json(const NodeGraph& graph);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace panoworld
