#include "panoworld/scene_io.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace panoworld {

using nlohmann::json;

namespace {

json vec2_json(const Vec2& v) { return json::array({v.x(), v.y()}); }
json vec3_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec2 json_vec2(const json& j) {
    if (!j.is_array() || j.size() != 2) {
        throw Error("expected [x, y]");
    }
    return {j[0].get<double>(), j[1].get<double>()};
}

Vec3 json_vec3(const json& j) {
    if (!j.is_array() || j.size() != 3) {
        throw Error("expected [x, y, z]");
    }
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

}  // namespace

std::string floorplan_to_json(const FloorplanSpec& spec) {
    json j;
    j["wall_height"] = spec.wall_height;
    j["wall_thickness"] = spec.wall_thickness;
    j["rooms"] = json::array();
    for (const auto& r : spec.rooms) {
        json poly = json::array();
        for (const auto& p : r.polygon) {
            poly.push_back(vec2_json(p));
        }
        j["rooms"].push_back({{"id", r.id}, {"label", r.label}, {"polygon", poly}});
    }
    j["doorways"] = json::array();
    for (const auto& d : spec.doorways) {
        j["doorways"].push_back({{"rooms", json::array({d.room_a, d.room_b})},
                                 {"segment", json::array({vec2_json(d.p0), vec2_json(d.p1)})},
                                 {"height", d.height}});
    }
    j["nodes"] = json::array();
    for (const auto& t : spec.targets) {
        j["nodes"].push_back(vec3_json(t));
    }
    return j.dump(2) + "\n";
}

FloorplanSpec floorplan_from_json(const std::string& text) {
    FloorplanSpec spec;
    try {
        const json j = json::parse(text);
        spec.wall_height = j.at("wall_height").get<double>();
        spec.wall_thickness = j.value("wall_thickness", 0.0);
        for (const auto& r : j.at("rooms")) {
            Room room;
            room.id = r.at("id").get<RoomId>();
            room.label = r.value("label", std::string{});
            for (const auto& p : r.at("polygon")) {
                room.polygon.push_back(json_vec2(p));
            }
            spec.rooms.push_back(std::move(room));
        }
        for (const auto& d : j.value("doorways", json::array())) {
            Doorway door;
            const auto& rooms = d.at("rooms");
            door.room_a = rooms.at(0).get<RoomId>();
            door.room_b = rooms.at(1).get<RoomId>();
            door.p0 = json_vec2(d.at("segment").at(0));
            door.p1 = json_vec2(d.at("segment").at(1));
            door.height = d.value("height", 2.1);
            spec.doorways.push_back(door);
        }
        for (const auto& n : j.value("nodes", json::array())) {
            spec.targets.push_back(json_vec3(n));
        }
    } catch (const json::exception& e) {
        throw Error(std::string("scene file: ") + e.what());
    }
    return spec;
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot open '" + path.string() + "'");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) {
        throw Error("cannot open '" + path.string() + "' for writing");
    }
    out << text;
    if (!out) {
        throw Error("write failed for '" + path.string() + "'");
    }
}

void save_floorplan(const std::filesystem::path& path, const FloorplanSpec& spec) {
    write_text_file(path, floorplan_to_json(spec));
}

FloorplanSpec load_floorplan(const std::filesystem::path& path) {
    return floorplan_from_json(read_text_file(path));
}

std::string node_graph_to_json(const NodeGraph& graph) {
    json j;
    j["nodes"] = json::array();
    for (const auto& n : graph.nodes) {
        const auto& q = n.pose.rotation;
        json node = {{"id", n.id},
                     {"room", n.room},
                     {"kind", n.kind == NodeKind::target ? "target" : "auxiliary"},
                     {"boundary", n.boundary},
                     {"position", vec3_json(n.pose.position)},
                     {"rotation", json::array({q.w(), q.x(), q.y(), q.z()})}};
        if (n.doorway_rooms) {
            node["doorway_rooms"] = json::array({n.doorway_rooms->first, n.doorway_rooms->second});
        }
        j["nodes"].push_back(node);
    }
    j["edges"] = json::array();
    for (const auto& [a, b] : graph.edges) {
        j["edges"].push_back(json::array({a, b}));
    }
    return j.dump(2) + "\n";
}

}  // namespace panoworld
