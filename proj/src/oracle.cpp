#include "panoworld/oracle.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <set>
#include <string>

namespace panoworld {
namespace {

const std::array<const char*, 8> kRoomLabels = {"living", "kitchen", "bedroom", "study",
                                                "bath",   "dining",  "hall",    "guest"};

// Lattice value in [-1, 1].
double lattice(std::uint64_t seed, std::int64_t ix, std::int64_t iy, std::int64_t iz,
               std::uint64_t channel) {
    std::uint64_t h = mix64(seed ^ 0x5bd1e995ULL);
    h = mix64(h ^ static_cast<std::uint64_t>(ix));
    h = mix64(h ^ static_cast<std::uint64_t>(iy));
    h = mix64(h ^ static_cast<std::uint64_t>(iz));
    h = mix64(h ^ channel);
    return static_cast<double>(h >> 11) * 0x1.0p-52 - 1.0;
}

double smooth(double t) { return t * t * (3.0 - 2.0 * t); }

double value_noise(std::uint64_t seed, const Vec3& p, std::uint64_t channel) {
    const Vec3 f(std::floor(p.x()), std::floor(p.y()), std::floor(p.z()));
    const auto ix = static_cast<std::int64_t>(f.x());
    const auto iy = static_cast<std::int64_t>(f.y());
    const auto iz = static_cast<std::int64_t>(f.z());
    const double tx = smooth(p.x() - f.x());
    const double ty = smooth(p.y() - f.y());
    const double tz = smooth(p.z() - f.z());
    double acc = 0.0;
    for (int dz = 0; dz <= 1; ++dz) {
        for (int dy = 0; dy <= 1; ++dy) {
            for (int dx = 0; dx <= 1; ++dx) {
                const double w = (dx ? tx : 1.0 - tx) * (dy ? ty : 1.0 - ty) * (dz ? tz : 1.0 - tz);
                acc += w * lattice(seed, ix + dx, iy + dy, iz + dz, channel);
            }
        }
    }
    return acc;
}

}  // namespace

TextureSeed make_texture_seed(std::uint64_t seed, const FloorplanSpec& spec) {
    TextureSeed tex;
    tex.seed = seed;
    Rng rng(mix64(seed ^ 0x7e57ULL));
    for (const auto& room : spec.rooms) {
        tex.palette[room.id] = Vec3(rng.uniform(80.0, 190.0), rng.uniform(80.0, 190.0),
                                    rng.uniform(80.0, 190.0));
    }
    return tex;
}

TextureSeed reseeded(const TextureSeed& tex, std::uint64_t salt) {
    TextureSeed out = tex;
    out.seed = mix64(tex.seed ^ mix64(salt + 1));
    return out;
}

Vec3 texture_color(const TextureSeed& tex, const Vec3& position, SurfaceClass cls, RoomId room) {
    const auto it = tex.palette.find(room);
    Vec3 base = it != tex.palette.end() ? it->second : Vec3::Constant(128.0);
    switch (cls) {
        case SurfaceClass::floor: base *= 0.7; break;
        case SurfaceClass::ceiling: base = 0.4 * base + Vec3::Constant(0.6 * 225.0); break;
        default: break;
    }
    const Vec3 p = position / tex.pattern_scale;
    const auto salt = static_cast<std::uint64_t>(cls) * 16;
    const double luminance = value_noise(tex.seed, p, salt);
    Vec3 c;
    for (int k = 0; k < 3; ++k) {
        const double tint = value_noise(tex.seed, p, salt + 1 + static_cast<std::uint64_t>(k));
        c[k] = base[k] + tex.amplitude * (0.7 * luminance + 0.3 * tint);
    }
    return c.cwiseMax(0.0).cwiseMin(250.0);
}

FloorplanSpec gen_scene(std::uint64_t seed, int n_rooms) {
    if (n_rooms < 1 || n_rooms > 8) {
        throw Error("gen_scene supports 1 to 8 rooms");
    }
    Rng rng(seed);
    const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n_rooms))));
    const int rows = (n_rooms + cols - 1) / cols;
    auto snap = [](double v) { return std::round(v * 20.0) / 20.0; };
    std::vector<double> xs{0.0};
    std::vector<double> ys{0.0};
    for (int c = 0; c < cols; ++c) {
        xs.push_back(xs.back() + snap(rng.uniform(3.6, 5.0)));
    }
    for (int r = 0; r < rows; ++r) {
        ys.push_back(ys.back() + snap(rng.uniform(3.6, 5.0)));
    }

    // Grow a connected set of grid cells; each new cell records the cell it
    // was reached from, which becomes its doorway.
    struct Cell {
        int c, r;
        auto operator<=>(const Cell&) const = default;
    };
    std::vector<Cell> chosen{{0, 0}};
    std::vector<int> parent{-1};
    while (static_cast<int>(chosen.size()) < n_rooms) {
        std::vector<std::pair<Cell, int>> frontier;
        std::set<Cell> seen(chosen.begin(), chosen.end());
        for (int i = 0; i < static_cast<int>(chosen.size()); ++i) {
            const Cell& cell = chosen[i];
            const Cell around[4] = {{cell.c + 1, cell.r}, {cell.c - 1, cell.r},
                                    {cell.c, cell.r + 1}, {cell.c, cell.r - 1}};
            for (const Cell& n : around) {
                if (n.c < 0 || n.r < 0 || n.c >= cols || n.r >= rows || seen.count(n)) {
                    continue;
                }
                frontier.emplace_back(n, i);
            }
        }
        const auto pick = frontier[rng.below(frontier.size())];
        chosen.push_back(pick.first);
        parent.push_back(pick.second);
    }

    FloorplanSpec spec;
    spec.wall_height = 2.8;
    spec.wall_thickness = 0.2;
    for (int i = 0; i < n_rooms; ++i) {
        const Cell& cell = chosen[i];
        const double x0 = xs[cell.c], x1 = xs[cell.c + 1];
        const double y0 = ys[cell.r], y1 = ys[cell.r + 1];
        Room room;
        room.id = static_cast<RoomId>(i);
        room.label = kRoomLabels[static_cast<std::size_t>(i) % kRoomLabels.size()];
        room.polygon = {Vec2(x0, y0), Vec2(x1, y0), Vec2(x1, y1), Vec2(x0, y1)};
        spec.rooms.push_back(room);
        spec.targets.emplace_back(0.5 * (x0 + x1), 0.5 * (y0 + y1), kDefaultCameraHeight);
    }
    constexpr double kDoorWidth = 1.0;
    for (int i = 1; i < n_rooms; ++i) {
        const Cell& a = chosen[parent[i]];
        const Cell& b = chosen[i];
        Doorway door;
        door.room_a = static_cast<RoomId>(parent[i]);
        door.room_b = static_cast<RoomId>(i);
        door.height = 2.1;
        const double margin = 0.5 * kDoorWidth + 0.4;
        if (a.r == b.r) {
            const double x = xs[std::max(a.c, b.c)];
            const double lo = ys[a.r], hi = ys[a.r + 1];
            const double mid = snap(rng.uniform(lo + margin, hi - margin));
            door.p0 = Vec2(x, mid - 0.5 * kDoorWidth);
            door.p1 = Vec2(x, mid + 0.5 * kDoorWidth);
        } else {
            const double y = ys[std::max(a.r, b.r)];
            const double lo = xs[a.c], hi = xs[a.c + 1];
            const double mid = snap(rng.uniform(lo + margin, hi - margin));
            door.p0 = Vec2(mid - 0.5 * kDoorWidth, y);
            door.p1 = Vec2(mid + 0.5 * kDoorWidth, y);
        }
        spec.doorways.push_back(door);
    }
    validate_floorplan(spec);
    return spec;
}

PanoImage oracle_generate(const ShellScene& shell, const TextureSeed& tex,
                          const GeometricProxy& proxy, const PanoImage* memory,
                          const PanoImage* /*nearby*/, const PanoPose& pose) {
    if (proxy.provenance != Provenance::shell) {
        throw Error("generator proxy must come from the shell renderer");
    }
    if (!(proxy.pose == pose)) {
        throw Error("proxy was rendered from a different pose");
    }
    label_pose_room(shell, pose);
    if (memory) {
        if (memory->provenance != Provenance::cache) {
            throw Error("generator memory must come from the cache renderer");
        }
        if (memory->width != proxy.width || memory->height != proxy.height) {
            throw Error("memory and proxy resolutions differ");
        }
    }
    PanoImage out = PanoImage::blank(proxy.width, proxy.height);
    out.provenance = Provenance::generator;
    out.depth = std::vector<float>(out.pixel_count(), 0.0f);
    const Mat3 rot = pose.world_from_camera();
    parallel_for(0, proxy.height, [&](int y) {
        for (int x = 0; x < proxy.width; ++x) {
            const std::size_t i = proxy.index(x, y);
            const double depth = proxy.depth[i];
            (*out.depth)[i] = static_cast<float>(depth);
            if (memory && memory->valid[i]) {
                const auto c = memory->rgb(i);
                if (c[0] != 255 && c[1] != 255 && c[2] != 255) {
                    out.set_rgb(i, c);
                    continue;
                }
            }
            if (!(depth > 0.0)) {
                out.valid[i] = 0;
                continue;
            }
            const Vec3 dir = rot * pixel_direction_continuous(x, y, proxy.width, proxy.height);
            const Vec3 hit = pose.position + depth * dir;
            const auto& label = proxy.semantics[i];
            const Vec3 c = texture_color(tex, hit, label.cls, label.room);
            out.set_rgb(i, {static_cast<std::uint8_t>(std::lround(c.x())),
                            static_cast<std::uint8_t>(std::lround(c.y())),
                            static_cast<std::uint8_t>(std::lround(c.z()))});
        }
    });
    return out;
}

}  // namespace panoworld
