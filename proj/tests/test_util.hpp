#pragma once

#include "panoworld/scenegraph.hpp"

#include <filesystem>
#include <random>
#include <string>

namespace pwtest {

using namespace panoworld;

inline Room rect_room(RoomId id, double x0, double y0, double x1, double y1,
                      std::string label = "room") {
    Room r;
    r.id = id;
    r.label = std::move(label);
    r.polygon = {Vec2(x0, y0), Vec2(x1, y0), Vec2(x1, y1), Vec2(x0, y1)};
    return r;
}

// 4 x 4 m room, 3 m high, centered at (2, 2).
inline FloorplanSpec single_room(double height = 3.0) {
    FloorplanSpec spec;
    spec.rooms.push_back(rect_room(0, 0, 0, 4, 4));
    spec.wall_height = height;
    spec.targets.emplace_back(2.0, 2.0, 1.5);
    return spec;
}

// Rooms A = [0,4]x[0,4] and B = [4,8]x[0,4]; doorway of `door_width` at
// y in [1.5, 1.5 + door_width] on x = 4.
inline FloorplanSpec two_rooms(double thickness = 0.0, double door_width = 1.0,
                               double door_height = 2.1, double wall_height = 3.0) {
    FloorplanSpec spec;
    spec.rooms.push_back(rect_room(0, 0, 0, 4, 4, "a"));
    spec.rooms.push_back(rect_room(1, 4, 0, 8, 4, "b"));
    spec.wall_height = wall_height;
    spec.wall_thickness = thickness;
    Doorway d;
    d.room_a = 0;
    d.room_b = 1;
    d.p0 = Vec2(4.0, 1.5);
    d.p1 = Vec2(4.0, 1.5 + door_width);
    d.height = door_height;
    spec.doorways.push_back(d);
    spec.targets.emplace_back(2.0, 2.0, 1.5);
    spec.targets.emplace_back(6.0, 2.0, 1.5);
    return spec;
}

inline PanoPose pose_at(double x, double y, double z = 1.5) {
    PanoPose p;
    p.position = Vec3(x, y, z);
    return p;
}

inline Quat random_rotation(std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::Vector4d v(n(rng), n(rng), n(rng), n(rng));
    v.normalize();
    return Quat(v[0], v[1], v[2], v[3]);
}

inline Vec3 random_unit(std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    return Vec3(n(rng), n(rng), n(rng)).normalized();
}

inline std::filesystem::path scratch_dir(const std::string& name) {
    const auto dir = std::filesystem::path(PANOWORLD_TEST_TMP) / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace pwtest
