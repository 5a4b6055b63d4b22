#pragma once

#include "panoworld/gaussians.hpp"
#include "panoworld/scenegraph.hpp"

#include <cstdint>
#include <map>
#include <optional>

namespace panoworld {

// Stand-in for the style condition: a seed for the procedural pattern plus
// a base color per room.
struct TextureSeed {
    std::uint64_t seed = 0;
    std::map<RoomId, Vec3> palette;  // RGB in [0, 255]
    double pattern_scale = 1.0;      // lattice spacing, meters
    double amplitude = 24.0;         // pattern contrast, gray levels
};

TextureSeed make_texture_seed(std::uint64_t seed, const FloorplanSpec& spec);

// Same palette and scale, different pattern: what the generator paints
// when it has no memory to follow.
TextureSeed reseeded(const TextureSeed& tex, std::uint64_t salt);

// Procedural surface color in [0, 250]^3: smooth value noise on a lattice of
// pattern_scale cells, blended with the room palette. Pure function of its
// arguments; the marker value 255 is never produced.
Vec3 texture_color(const TextureSeed& tex, const Vec3& position, SurfaceClass cls, RoomId room);

// Axis-aligned rectangular rooms on a grid, joined along a random spanning
// tree by 1 m doorways; one target node at each room center.
FloorplanSpec gen_scene(std::uint64_t seed, int n_rooms);

// Generator stand-in: valid memory pixels (no channel at 255) pass through,
// every other pixel takes the procedural texture of the shell surface the
// proxy saw there. `nearby` is accepted for interface parity and ignored.
// The result carries the proxy depth.
PanoImage oracle_generate(const ShellScene& shell, const TextureSeed& tex,
                          const GeometricProxy& proxy, const PanoImage* memory,
                          const PanoImage* nearby, const PanoPose& pose);

}  // namespace panoworld
