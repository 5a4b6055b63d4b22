#include "panoworld/scenegraph.hpp"

#include "panoworld/raster_io.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <queue>
#include <sstream>
#include <unordered_map>

namespace panoworld {
namespace {

constexpr double kGeomEps = 1e-9;
constexpr double kCollinearEps = 1e-6;
constexpr double kDoorwayNodeOffset = 0.25;

double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

double signed_area(const std::vector<Vec2>& poly) {
    double a = 0.0;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        a += cross2(poly[i], poly[(i + 1) % poly.size()]);
    }
    return 0.5 * a;
}

std::vector<Vec2> counter_clockwise(std::vector<Vec2> poly) {
    if (signed_area(poly) < 0.0) {
        std::reverse(poly.begin(), poly.end());
    }
    return poly;
}

double orient(const Vec2& a, const Vec2& b, const Vec2& c) { return cross2(b - a, c - a); }

double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
    const Vec2 ab = b - a;
    const double len2 = ab.squaredNorm();
    double t = len2 > 0.0 ? (p - a).dot(ab) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return (a + t * ab - p).norm();
}

// Interiors cross at a single point (no touching, no collinear overlap).
bool segments_cross(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
    const double o1 = orient(a, b, c);
    const double o2 = orient(a, b, d);
    const double o3 = orient(c, d, a);
    const double o4 = orient(c, d, b);
    const double eps = kGeomEps;
    return ((o1 > eps && o2 < -eps) || (o1 < -eps && o2 > eps)) &&
           ((o3 > eps && o4 < -eps) || (o3 < -eps && o4 > eps));
}

// Any contact, including touching endpoints and collinear overlap.
bool segments_touch(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
    if (segments_cross(a, b, c, d)) {
        return true;
    }
    return point_segment_distance(a, c, d) < kGeomEps || point_segment_distance(b, c, d) < kGeomEps ||
           point_segment_distance(c, a, b) < kGeomEps || point_segment_distance(d, a, b) < kGeomEps;
}

bool point_in_triangle(const Vec2& p, const Vec2& a, const Vec2& b, const Vec2& c) {
    return orient(a, b, p) >= -kGeomEps && orient(b, c, p) >= -kGeomEps &&
           orient(c, a, p) >= -kGeomEps;
}

// Ear clipping of a simple counter-clockwise polygon; returns index triples.
std::vector<std::array<std::size_t, 3>> triangulate(const std::vector<Vec2>& poly) {
    std::vector<std::size_t> idx(poly.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::vector<std::array<std::size_t, 3>> tris;
    std::size_t guard = 0;
    while (idx.size() > 3 && guard < poly.size() * poly.size()) {
        ++guard;
        bool clipped = false;
        for (std::size_t i = 0; i < idx.size(); ++i) {
            const std::size_t ia = idx[(i + idx.size() - 1) % idx.size()];
            const std::size_t ib = idx[i];
            const std::size_t ic = idx[(i + 1) % idx.size()];
            const Vec2& a = poly[ia];
            const Vec2& b = poly[ib];
            const Vec2& c = poly[ic];
            if (orient(a, b, c) <= kGeomEps) {
                continue;  // reflex or degenerate corner
            }
            bool empty = true;
            for (std::size_t j : idx) {
                if (j == ia || j == ib || j == ic) {
                    continue;
                }
                if (point_in_triangle(poly[j], a, b, c)) {
                    empty = false;
                    break;
                }
            }
            if (!empty) {
                continue;
            }
            tris.push_back({ia, ib, ic});
            idx.erase(idx.begin() + static_cast<std::ptrdiff_t>(i));
            clipped = true;
            break;
        }
        if (!clipped) {
            throw Error("polygon triangulation failed (degenerate polygon)");
        }
    }
    if (idx.size() == 3) {
        tris.push_back({idx[0], idx[1], idx[2]});
    }
    return tris;
}

// Moves every edge of a CCW polygon inward by `offset`.
std::vector<Vec2> inset_polygon(const std::vector<Vec2>& poly, double offset) {
    const std::size_t n = poly.size();
    if (offset <= 0.0) {
        return poly;
    }
    std::vector<Vec2> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2& prev = poly[(i + n - 1) % n];
        const Vec2& cur = poly[i];
        const Vec2& next = poly[(i + 1) % n];
        const Vec2 u0 = (cur - prev).normalized();
        const Vec2 u1 = (next - cur).normalized();
        const Vec2 n0(-u0.y(), u0.x());
        const Vec2 n1(-u1.y(), u1.x());
        const Vec2 a = prev + offset * n0;  // line a + s*u0
        const Vec2 b = cur + offset * n1;   // line b + t*u1
        const double denom = cross2(u0, u1);
        if (std::abs(denom) < 1e-12) {
            out[i] = cur + offset * n1;
        } else {
            const double s = cross2(b - a, u1) / denom;
            out[i] = a + s * u0;
        }
    }
    return out;
}

// Edge index of `poly` containing segment [p0, p1], if any.
std::optional<std::size_t> edge_containing(const std::vector<Vec2>& poly, const Vec2& p0,
                                           const Vec2& p1) {
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const Vec2& a = poly[i];
        const Vec2& b = poly[(i + 1) % poly.size()];
        if (point_segment_distance(p0, a, b) < kCollinearEps &&
            point_segment_distance(p1, a, b) < kCollinearEps) {
            return i;
        }
    }
    return std::nullopt;
}

Vec2 interior_sample(const std::vector<Vec2>& poly) {
    const auto ccw = counter_clockwise(poly);
    const auto tris = triangulate(ccw);
    const auto& t = tris.front();
    return (ccw[t[0]] + ccw[t[1]] + ccw[t[2]]) / 3.0;
}

const Room* find_room(const FloorplanSpec& spec, RoomId id) {
    for (const auto& r : spec.rooms) {
        if (r.id == id) {
            return &r;
        }
    }
    return nullptr;
}

std::string room_str(RoomId id) { return "room " + std::to_string(id); }

}  // namespace

const char* to_string(SurfaceClass c) {
    switch (c) {
        case SurfaceClass::none: return "none";
        case SurfaceClass::wall: return "wall";
        case SurfaceClass::floor: return "floor";
        case SurfaceClass::ceiling: return "ceiling";
        case SurfaceClass::opening: return "opening";
    }
    return "?";
}

PolygonSide classify_point(const std::vector<Vec2>& polygon, const Vec2& p, double eps) {
    const std::size_t n = polygon.size();
    for (std::size_t i = 0; i < n; ++i) {
        if (point_segment_distance(p, polygon[i], polygon[(i + 1) % n]) <= eps) {
            return PolygonSide::boundary;
        }
    }
    bool inside = false;
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const Vec2& a = polygon[i];
        const Vec2& b = polygon[j];
        if ((a.y() > p.y()) != (b.y() > p.y())) {
            const double x = a.x() + (p.y() - a.y()) * (b.x() - a.x()) / (b.y() - a.y());
            if (p.x() < x) {
                inside = !inside;
            }
        }
    }
    return inside ? PolygonSide::inside : PolygonSide::outside;
}

std::optional<RoomId> locate_room(const FloorplanSpec& spec, const Vec2& p) {
    std::optional<RoomId> best;
    for (const auto& room : spec.rooms) {
        if (classify_point(room.polygon, p) != PolygonSide::outside) {
            if (!best || room.id < *best) {
                best = room.id;
            }
        }
    }
    return best;
}

void validate_floorplan(const FloorplanSpec& spec) {
    if (spec.rooms.empty()) {
        throw Error("floorplan has no rooms");
    }
    if (!(spec.wall_height > 0.0)) {
        throw Error("wall_height must be positive");
    }
    if (spec.wall_thickness < 0.0 || spec.wall_thickness >= 2.0 * kDoorwayNodeOffset) {
        throw Error("wall_thickness must be in [0, 0.5) m");
    }
    std::set<RoomId> ids;
    for (const auto& room : spec.rooms) {
        if (!ids.insert(room.id).second) {
            throw Error("duplicate room id " + std::to_string(room.id));
        }
        const auto& poly = room.polygon;
        const std::size_t n = poly.size();
        if (n < 3) {
            throw Error(room_str(room.id) + ": polygon needs at least 3 vertices");
        }
        if (std::abs(signed_area(poly)) < 1e-9) {
            throw Error(room_str(room.id) + ": polygon has zero area");
        }
        for (std::size_t i = 0; i < n; ++i) {
            if ((poly[i] - poly[(i + 1) % n]).norm() < kGeomEps) {
                throw Error(room_str(room.id) + ": repeated vertex");
            }
            for (std::size_t j = i + 1; j < n; ++j) {
                const bool adjacent = j == i + 1 || (i == 0 && j == n - 1);
                if (adjacent) {
                    continue;
                }
                if (segments_touch(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n])) {
                    throw Error(room_str(room.id) + ": polygon is self-intersecting");
                }
            }
        }
    }
    for (std::size_t a = 0; a < spec.rooms.size(); ++a) {
        for (std::size_t b = a + 1; b < spec.rooms.size(); ++b) {
            const auto& pa = spec.rooms[a].polygon;
            const auto& pb = spec.rooms[b].polygon;
            bool overlap = false;
            for (std::size_t i = 0; i < pa.size() && !overlap; ++i) {
                for (std::size_t j = 0; j < pb.size() && !overlap; ++j) {
                    overlap = segments_cross(pa[i], pa[(i + 1) % pa.size()], pb[j],
                                             pb[(j + 1) % pb.size()]);
                }
            }
            for (const auto& v : pa) {
                overlap = overlap || classify_point(pb, v) == PolygonSide::inside;
            }
            for (const auto& v : pb) {
                overlap = overlap || classify_point(pa, v) == PolygonSide::inside;
            }
            overlap = overlap || classify_point(pb, interior_sample(pa)) == PolygonSide::inside ||
                      classify_point(pa, interior_sample(pb)) == PolygonSide::inside;
            if (overlap) {
                throw Error("rooms " + std::to_string(spec.rooms[a].id) + " and " +
                            std::to_string(spec.rooms[b].id) + " overlap");
            }
        }
    }
    for (std::size_t k = 0; k < spec.doorways.size(); ++k) {
        const auto& d = spec.doorways[k];
        const std::string tag = "doorway " + std::to_string(k);
        const Room* ra = find_room(spec, d.room_a);
        const Room* rb = find_room(spec, d.room_b);
        if (!ra || !rb || d.room_a == d.room_b) {
            throw Error(tag + ": must join two distinct existing rooms");
        }
        if ((d.p1 - d.p0).norm() < kGeomEps) {
            throw Error(tag + ": degenerate doorway of zero width");
        }
        if (!(d.height > 0.0) || d.height > spec.wall_height + kGeomEps) {
            throw Error(tag + ": opening height must be in (0, wall_height]");
        }
        if (!edge_containing(ra->polygon, d.p0, d.p1) || !edge_containing(rb->polygon, d.p0, d.p1)) {
            throw Error(tag + ": segment does not lie on a shared wall of its rooms");
        }
    }
    for (std::size_t i = 0; i < spec.targets.size(); ++i) {
        const Vec3& t = spec.targets[i];
        const auto room = locate_room(spec, t.head<2>());
        if (!room || t.z() <= 0.0 || t.z() >= spec.wall_height) {
            throw Error("target " + std::to_string(i) + " is not inside any room");
        }
    }
}

// ---------------------------------------------------------------------------
// Shell construction

namespace {

class ShellBuilder {
public:
    explicit ShellBuilder(const FloorplanSpec& spec) : spec_(spec) {}

    std::vector<ShellTriangle> build() {
        for (const auto& room : spec_.rooms) {
            add_room(room);
        }
        return std::move(tris_);
    }

private:
    void add_triangle(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& outward,
                      SurfaceClass cls, RoomId room) {
        ShellTriangle t;
        t.cls = cls;
        t.room = room;
        t.normal = outward.normalized();
        const Vec3 geo = (b - a).cross(c - a);
        if (geo.dot(t.normal) >= 0.0) {
            t.v = {a, b, c};
        } else {
            t.v = {a, c, b};
        }
        tris_.push_back(t);
    }

    void add_quad(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d, const Vec3& outward,
                  SurfaceClass cls, RoomId room) {
        add_triangle(a, b, c, outward, cls, room);
        add_triangle(a, c, d, outward, cls, room);
    }

    void add_room(const Room& room) {
        const auto poly = counter_clockwise(room.polygon);
        const double half = 0.5 * spec_.wall_thickness;
        const double height = spec_.wall_height;
        const auto inner = inset_polygon(poly, half);
        for (const auto& t : triangulate(inner)) {
            const auto& a = inner[t[0]];
            const auto& b = inner[t[1]];
            const auto& c = inner[t[2]];
            add_triangle(Vec3(a.x(), a.y(), 0.0), Vec3(b.x(), b.y(), 0.0), Vec3(c.x(), c.y(), 0.0),
                         -Vec3::UnitZ(), SurfaceClass::floor, room.id);
            add_triangle(Vec3(a.x(), a.y(), height), Vec3(b.x(), b.y(), height),
                         Vec3(c.x(), c.y(), height), Vec3::UnitZ(), SurfaceClass::ceiling, room.id);
        }
        const std::size_t n = poly.size();
        for (std::size_t i = 0; i < n; ++i) {
            add_wall_edge(room.id, poly[i], poly[(i + 1) % n], inner[i], inner[(i + 1) % n], half);
        }
    }

    void add_wall_edge(RoomId room, const Vec2& p, const Vec2& q, const Vec2& inner_p,
                       const Vec2& inner_q, double half) {
        const double len = (q - p).norm();
        const Vec2 u = (q - p) / len;
        const Vec2 nin(-u.y(), u.x());
        const Vec3 u3(u.x(), u.y(), 0.0);
        const Vec3 out3(-nin.x(), -nin.y(), 0.0);
        const double height = spec_.wall_height;
        const double s_begin = (inner_p - p).dot(u);
        const double s_end = (inner_q - p).dot(u);

        auto at = [&](double s, double off, double z) {
            const Vec2 xy = p + s * u + off * nin;
            return Vec3(xy.x(), xy.y(), z);
        };
        auto wall_quad = [&](double s0, double s1, double z0, double z1, SurfaceClass cls) {
            add_quad(at(s0, half, z0), at(s1, half, z0), at(s1, half, z1), at(s0, half, z1), out3,
                     cls, room);
        };

        struct Opening {
            double s0, s1, height;
        };
        std::vector<Opening> openings;
        for (const auto& d : spec_.doorways) {
            if (!d.connects(room)) {
                continue;
            }
            if (point_segment_distance(d.p0, p, q) > kCollinearEps ||
                point_segment_distance(d.p1, p, q) > kCollinearEps) {
                continue;
            }
            const double a = (d.p0 - p).dot(u);
            const double b = (d.p1 - p).dot(u);
            openings.push_back({std::min(a, b), std::max(a, b), d.height});
        }
        std::sort(openings.begin(), openings.end(),
                  [](const Opening& a, const Opening& b) { return a.s0 < b.s0; });

        double cursor = s_begin;
        for (const auto& o : openings) {
            if (o.s0 < cursor - kGeomEps || o.s1 > s_end + kGeomEps) {
                throw Error(room_str(room) + ": doorway overlaps a wall corner or another doorway");
            }
            if (o.s0 > cursor + kGeomEps) {
                wall_quad(cursor, o.s0, 0.0, height, SurfaceClass::wall);
            }
            wall_quad(o.s0, o.s1, 0.0, o.height, SurfaceClass::opening);
            if (o.height < height - kGeomEps) {
                wall_quad(o.s0, o.s1, o.height, height, SurfaceClass::wall);
            }
            if (half > 0.0) {
                // Reveal of the opening through this room's half of the wall slab.
                add_quad(at(o.s0, half, 0.0), at(o.s0, 0.0, 0.0), at(o.s0, 0.0, o.height),
                         at(o.s0, half, o.height), -u3, SurfaceClass::wall, room);
                add_quad(at(o.s1, half, 0.0), at(o.s1, 0.0, 0.0), at(o.s1, 0.0, o.height),
                         at(o.s1, half, o.height), u3, SurfaceClass::wall, room);
                add_quad(at(o.s0, half, 0.0), at(o.s1, half, 0.0), at(o.s1, 0.0, 0.0),
                         at(o.s0, 0.0, 0.0), -Vec3::UnitZ(), SurfaceClass::floor, room);
                const SurfaceClass top =
                    o.height < height - kGeomEps ? SurfaceClass::wall : SurfaceClass::ceiling;
                add_quad(at(o.s0, half, o.height), at(o.s1, half, o.height), at(o.s1, 0.0, o.height),
                         at(o.s0, 0.0, o.height), Vec3::UnitZ(), top, room);
            }
            cursor = o.s1;
        }
        if (s_end > cursor + kGeomEps) {
            wall_quad(cursor, s_end, 0.0, height, SurfaceClass::wall);
        }
    }

    const FloorplanSpec& spec_;
    std::vector<ShellTriangle> tris_;
};

bool ray_box(const Aabb& box, const Vec3& o, const Vec3& inv_d, double t_max) {
    double t0 = 0.0;
    double t1 = t_max;
    for (int k = 0; k < 3; ++k) {
        double a = (box.lo[k] - o[k]) * inv_d[k];
        double b = (box.hi[k] - o[k]) * inv_d[k];
        if (a > b) {
            std::swap(a, b);
        }
        // NaN from 0 * inf (ray parallel and on the slab) keeps the interval.
        if (a > t0) {
            t0 = a;
        }
        if (b < t1) {
            t1 = b;
        }
        if (t0 > t1 + 1e-9) {
            return false;
        }
    }
    return true;
}

}  // namespace

std::optional<double> intersect_triangle(const ShellTriangle& tri, const Vec3& origin,
                                         const Vec3& dir) {
    const Vec3 e1 = tri.v[1] - tri.v[0];
    const Vec3 e2 = tri.v[2] - tri.v[0];
    const Vec3 pvec = dir.cross(e2);
    const double det = e1.dot(pvec);
    if (std::abs(det) < 1e-14) {
        return std::nullopt;
    }
    const double inv = 1.0 / det;
    const Vec3 tvec = origin - tri.v[0];
    const double u = tvec.dot(pvec) * inv;
    if (u < -1e-12 || u > 1.0 + 1e-12) {
        return std::nullopt;
    }
    const Vec3 qvec = tvec.cross(e1);
    const double v = dir.dot(qvec) * inv;
    if (v < -1e-12 || u + v > 1.0 + 1e-12) {
        return std::nullopt;
    }
    const double t = e2.dot(qvec) * inv;
    if (t <= 1e-9) {
        return std::nullopt;
    }
    return t;
}

ShellScene::ShellScene(FloorplanSpec plan, std::vector<ShellTriangle> triangles)
    : plan_(std::move(plan)), triangles_(std::move(triangles)) {
    for (const auto& t : triangles_) {
        for (const auto& v : t.v) {
            bounds_.extend(v);
        }
    }
    build_bvh();
}

void ShellScene::build_bvh() {
    bvh_.clear();
    order_.resize(triangles_.size());
    std::iota(order_.begin(), order_.end(), 0u);
    if (!triangles_.empty()) {
        bvh_.reserve(2 * triangles_.size());
        build_node(0, static_cast<std::uint32_t>(triangles_.size()));
    }
}

std::uint32_t ShellScene::build_node(std::uint32_t first, std::uint32_t count) {
    const auto self = static_cast<std::uint32_t>(bvh_.size());
    bvh_.emplace_back();
    Aabb box;
    Aabb centroids;
    for (std::uint32_t i = first; i < first + count; ++i) {
        const auto& t = triangles_[order_[i]];
        for (const auto& v : t.v) {
            box.extend(v);
        }
        centroids.extend((t.v[0] + t.v[1] + t.v[2]) / 3.0);
    }
    bvh_[self].box = box;
    if (count <= 4) {
        bvh_[self].first = first;
        bvh_[self].count = count;
        return self;
    }
    int axis = 0;
    const Vec3 extent = centroids.hi - centroids.lo;
    if (extent.y() > extent[axis]) axis = 1;
    if (extent.z() > extent[axis]) axis = 2;
    const std::uint32_t mid = first + count / 2;
    auto key = [&](std::uint32_t i) {
        const auto& t = triangles_[i];
        return std::make_pair(t.v[0][axis] + t.v[1][axis] + t.v[2][axis], i);
    };
    std::nth_element(order_.begin() + first, order_.begin() + mid, order_.begin() + first + count,
                     [&](std::uint32_t a, std::uint32_t b) { return key(a) < key(b); });
    const std::uint32_t left = build_node(first, mid - first);
    const std::uint32_t right = build_node(mid, first + count - mid);
    bvh_[self].first = left;
    bvh_[self].count = 0;
    bvh_[self].right = right;
    return self;
}

bool hit_precedes(const ShellScene& shell, const Vec3& dir, double t_a, std::size_t tri_a,
                  double t_b, std::size_t tri_b) {
    constexpr double tie = 1e-9;
    if (t_a < t_b - tie) {
        return true;
    }
    if (t_b < t_a - tie) {
        return false;
    }
    const bool inner_a = dir.dot(shell.triangles()[tri_a].normal) > 0.0;
    const bool inner_b = dir.dot(shell.triangles()[tri_b].normal) > 0.0;
    if (inner_a != inner_b) {
        return inner_a;
    }
    return tri_a < tri_b;
}

std::optional<ShellHit> ShellScene::cast(const Vec3& origin, const Vec3& dir) const {
    if (bvh_.empty()) {
        return std::nullopt;
    }
    const Vec3 inv_d(1.0 / dir.x(), 1.0 / dir.y(), 1.0 / dir.z());
    std::optional<ShellHit> best;
    double nearest_opening = std::numeric_limits<double>::infinity();
    std::uint32_t stack[64];
    int sp = 0;
    stack[sp++] = 0;
    while (sp > 0) {
        const BvhNode& node = bvh_[stack[--sp]];
        const double limit = best ? best->t + 1e-6 : std::numeric_limits<double>::infinity();
        if (!ray_box(node.box, origin, inv_d, limit)) {
            continue;
        }
        if (node.count == 0) {
            stack[sp++] = node.right;
            stack[sp++] = node.first;
            continue;
        }
        for (std::uint32_t i = node.first; i < node.first + node.count; ++i) {
            const std::size_t ti = order_[i];
            const auto t = intersect_triangle(triangles_[ti], origin, dir);
            if (!t) {
                continue;
            }
            if (triangles_[ti].cls == SurfaceClass::opening) {
                nearest_opening = std::min(nearest_opening, *t);
                continue;
            }
            if (!best || hit_precedes(*this, dir, *t, ti, best->t, best->triangle)) {
                best = ShellHit{*t, ti, false};
            }
        }
    }
    if (best) {
        best->through_opening = nearest_opening < best->t - 1e-9;
    }
    return best;
}

ShellScene build_shell(const FloorplanSpec& spec) {
    validate_floorplan(spec);
    return ShellScene(spec, ShellBuilder(spec).build());
}

RoomId label_pose_room(const ShellScene& shell, const PanoPose& pose) {
    validate_pose(pose);
    const auto& plan = shell.floorplan();
    const auto room = locate_room(plan, pose.position.head<2>());
    if (!room || pose.position.z() <= 0.0 || pose.position.z() >= plan.wall_height) {
        std::ostringstream msg;
        msg << "position (" << pose.position.x() << ", " << pose.position.y() << ", "
            << pose.position.z() << ") is not inside any room";
        throw Error(msg.str());
    }
    return *room;
}

// ---------------------------------------------------------------------------
// Node graph

const GraphNode& NodeGraph::node(NodeId id) const { return nodes[index_of(id)]; }

std::size_t NodeGraph::index_of(NodeId id) const {
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (nodes[i].id == id) {
            return i;
        }
    }
    throw Error("node " + std::to_string(id) + " not in graph");
}

bool NodeGraph::contains(NodeId id) const {
    return std::any_of(nodes.begin(), nodes.end(), [id](const GraphNode& n) { return n.id == id; });
}

double NodeGraph::edge_length(NodeId a, NodeId b) const {
    return (node(a).pose.position - node(b).pose.position).norm();
}

std::vector<std::vector<std::pair<std::size_t, double>>> NodeGraph::adjacency() const {
    std::unordered_map<NodeId, std::size_t> index;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        index[nodes[i].id] = i;
    }
    std::vector<std::vector<std::pair<std::size_t, double>>> adj(nodes.size());
    for (const auto& [a, b] : edges) {
        const std::size_t ia = index.at(a);
        const std::size_t ib = index.at(b);
        const double len = (nodes[ia].pose.position - nodes[ib].pose.position).norm();
        adj[ia].emplace_back(ib, len);
        adj[ib].emplace_back(ia, len);
    }
    return adj;
}

bool NodeGraph::connected() const {
    if (nodes.empty()) {
        return true;
    }
    const auto adj = adjacency();
    std::vector<char> seen(nodes.size(), 0);
    std::vector<std::size_t> stack{0};
    seen[0] = 1;
    std::size_t count = 1;
    while (!stack.empty()) {
        const std::size_t i = stack.back();
        stack.pop_back();
        for (const auto& [j, len] : adj[i]) {
            if (!seen[j]) {
                seen[j] = 1;
                ++count;
                stack.push_back(j);
            }
        }
    }
    return count == nodes.size();
}

void NodeGraph::normalize_edges() {
    for (auto& e : edges) {
        if (e.first > e.second) {
            std::swap(e.first, e.second);
        }
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    edges.erase(std::remove_if(edges.begin(), edges.end(),
                               [](const auto& e) { return e.first == e.second; }),
                edges.end());
}

namespace {

void assign_boundary(GraphNode& node, const FloorplanSpec& plan) {
    node.boundary = false;
    node.doorway_rooms.reset();
    double best = std::numeric_limits<double>::infinity();
    for (const auto& d : plan.doorways) {
        const double dist = (node.pose.position.head<2>() - d.midpoint()).norm();
        if (dist <= kBoundaryRadius + 1e-12 && dist < best) {
            best = dist;
            node.boundary = true;
            node.doorway_rooms = std::make_pair(std::min(d.room_a, d.room_b),
                                                std::max(d.room_a, d.room_b));
        }
    }
}

bool line_of_sight(const Room& room, const Vec2& a, const Vec2& b) {
    const auto& poly = room.polygon;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        if (segments_cross(a, b, poly[i], poly[(i + 1) % poly.size()])) {
            return false;
        }
    }
    return classify_point(poly, 0.5 * (a + b)) != PolygonSide::outside;
}

struct UnionFind {
    std::vector<std::size_t> parent;
    explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    std::size_t find(std::size_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }
    bool unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a == b) {
            return false;
        }
        parent[std::max(a, b)] = std::min(a, b);
        return true;
    }
};

void validate_spacing(double max_spacing, bool enforce_range) {
    if (!(max_spacing > 0.0)) {
        throw Error("max_spacing must be positive");
    }
    if (enforce_range && (max_spacing < 0.5 || max_spacing > 1.5)) {
        throw Error("max_spacing must lie in [0.5, 1.5] m");
    }
}

}  // namespace

NodeGraph build_node_graph(const ShellScene& shell, double max_spacing) {
    validate_spacing(max_spacing, false);
    const auto& plan = shell.floorplan();
    NodeGraph g;
    NodeId next = 0;
    auto add_node = [&](const Vec3& pos, NodeKind kind) {
        GraphNode n;
        n.id = next++;
        n.pose.position = pos;
        n.room = label_pose_room(shell, n.pose);
        n.kind = kind;
        assign_boundary(n, plan);
        g.nodes.push_back(n);
        return n.id;
    };
    for (const auto& t : plan.targets) {
        add_node(t, NodeKind::target);
    }
    for (const auto& d : plan.doorways) {
        const Vec2 m = d.midpoint();
        const Vec2 u = (d.p1 - d.p0).normalized();
        Vec2 n(-u.y(), u.x());
        const Room* ra = find_room(plan, d.room_a);
        if (classify_point(ra->polygon, m + 0.05 * n) != PolygonSide::inside) {
            n = -n;
        }
        const Vec2 pa = m + kDoorwayNodeOffset * n;
        const Vec2 pb = m - kDoorwayNodeOffset * n;
        const NodeId a = add_node(Vec3(pa.x(), pa.y(), kDefaultCameraHeight), NodeKind::auxiliary);
        const NodeId b = add_node(Vec3(pb.x(), pb.y(), kDefaultCameraHeight), NodeKind::auxiliary);
        g.edges.emplace_back(a, b);
    }

    for (const auto& room : plan.rooms) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < g.nodes.size(); ++i) {
            if (g.nodes[i].room == room.id) {
                members.push_back(i);
            }
        }
        struct Candidate {
            double len;
            std::size_t a, b;
        };
        std::vector<Candidate> candidates;
        for (std::size_t i = 0; i < members.size(); ++i) {
            for (std::size_t j = i + 1; j < members.size(); ++j) {
                const auto& na = g.nodes[members[i]];
                const auto& nb = g.nodes[members[j]];
                if (!line_of_sight(room, na.pose.position.head<2>(), nb.pose.position.head<2>())) {
                    continue;
                }
                candidates.push_back({(na.pose.position - nb.pose.position).norm(), i, j});
            }
        }
        std::sort(candidates.begin(), candidates.end(), [](const Candidate& x, const Candidate& y) {
            return std::tie(x.len, x.a, x.b) < std::tie(y.len, y.a, y.b);
        });
        UnionFind uf(members.size());
        for (const auto& c : candidates) {
            const bool close = c.len <= 2.0 * max_spacing + 1e-12;
            const bool joins = uf.unite(c.a, c.b);
            if (close || joins) {
                g.edges.emplace_back(g.nodes[members[c.a]].id, g.nodes[members[c.b]].id);
            }
        }
    }
    g.normalize_edges();
    if (!g.connected()) {
        throw Error("node graph is disconnected (a room lacks line of sight or a doorway)");
    }
    return g;
}

NodeGraph insert_auxiliary_nodes(const NodeGraph& graph, const ShellScene& shell,
                                 double max_spacing, bool enforce_spacing_range) {
    validate_spacing(max_spacing, enforce_spacing_range);
    const auto& plan = shell.floorplan();
    NodeGraph out;
    out.nodes = graph.nodes;
    NodeId next = 0;
    for (const auto& n : graph.nodes) {
        next = std::max(next, n.id + 1);
    }
    auto sorted = graph.edges;
    for (auto& e : sorted) {
        if (e.first > e.second) {
            std::swap(e.first, e.second);
        }
    }
    std::sort(sorted.begin(), sorted.end());
    for (const auto& [a, b] : sorted) {
        const auto& na = graph.node(a);
        const auto& nb = graph.node(b);
        const Vec3 pa = na.pose.position;
        const Vec3 pb = nb.pose.position;
        const double len = (pb - pa).norm();
        // Strict comparison; the relative slack keeps exact multiples stable.
        if (!(len > max_spacing * (1.0 + 1e-9))) {
            out.edges.emplace_back(a, b);
            continue;
        }
        const int inserted = static_cast<int>(std::ceil(len / max_spacing - 1e-9)) - 1;
        NodeId prev = a;
        for (int k = 1; k <= inserted; ++k) {
            const double f = static_cast<double>(k) / (inserted + 1);
            GraphNode n;
            n.id = next++;
            n.pose.position = pa + f * (pb - pa);
            n.pose.rotation = Quat::Identity();
            n.kind = NodeKind::auxiliary;
            const auto room = locate_room(plan, n.pose.position.head<2>());
            n.room = room ? *room : (f <= 0.5 ? na.room : nb.room);
            assign_boundary(n, plan);
            out.nodes.push_back(n);
            out.edges.emplace_back(prev, n.id);
            prev = n.id;
        }
        out.edges.emplace_back(prev, b);
    }
    out.normalize_edges();
    return out;
}

namespace {

std::vector<double> dijkstra(const std::vector<std::vector<std::pair<std::size_t, double>>>& adj,
                             std::size_t source) {
    std::vector<double> dist(adj.size(), std::numeric_limits<double>::infinity());
    using Item = std::pair<double, std::size_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
    dist[source] = 0.0;
    queue.emplace(0.0, source);
    while (!queue.empty()) {
        const auto [d, i] = queue.top();
        queue.pop();
        if (d > dist[i]) {
            continue;
        }
        for (const auto& [j, w] : adj[i]) {
            if (d + w < dist[j]) {
                dist[j] = d + w;
                queue.emplace(dist[j], j);
            }
        }
    }
    return dist;
}

}  // namespace

NodeId select_start_node(const NodeGraph& graph, const std::set<NodeId>& targets) {
    if (targets.empty()) {
        throw Error("select_start_node needs at least one target");
    }
    for (NodeId t : targets) {
        if (!graph.contains(t)) {
            throw Error("target node " + std::to_string(t) + " not in graph");
        }
    }
    if (!graph.connected()) {
        throw Error("node graph is disconnected");
    }
    const auto adj = graph.adjacency();
    std::vector<double> total(graph.nodes.size(), 0.0);
    for (NodeId t : targets) {
        const auto dist = dijkstra(adj, graph.index_of(t));
        for (std::size_t i = 0; i < dist.size(); ++i) {
            total[i] += dist[i];
        }
    }
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
        const double mean = total[i] / static_cast<double>(targets.size());
        if (!best) {
            best = i;
            continue;
        }
        const double best_mean = total[*best] / static_cast<double>(targets.size());
        const double tie = 1e-9 * std::max(1.0, best_mean);
        if (mean < best_mean - tie ||
            (std::abs(mean - best_mean) <= tie && graph.nodes[i].id < graph.nodes[*best].id)) {
            best = i;
        }
    }
    return graph.nodes[*best].id;
}

std::vector<NodeId> select_context(const NodeGraph& graph, NodeId node,
                                   const std::set<NodeId>& generated, int k_same, int k_door) {
    const GraphNode& self = graph.node(node);
    struct Pick {
        double dist;
        NodeId id;
    };
    auto by_distance = [](const Pick& a, const Pick& b) {
        return std::tie(a.dist, a.id) < std::tie(b.dist, b.id);
    };
    std::vector<Pick> same;
    std::vector<Pick> door;
    for (const auto& n : graph.nodes) {
        if (n.id == node || !generated.count(n.id)) {
            continue;
        }
        const double dist = (n.pose.position - self.pose.position).norm();
        if (n.room == self.room) {
            same.push_back({dist, n.id});
        }
        if (n.boundary && n.doorway_rooms &&
            (n.doorway_rooms->first == self.room || n.doorway_rooms->second == self.room)) {
            door.push_back({dist, n.id});
        }
    }
    std::sort(same.begin(), same.end(), by_distance);
    std::sort(door.begin(), door.end(), by_distance);
    std::vector<NodeId> out{node};
    for (int i = 0; i < k_same && i < static_cast<int>(same.size()); ++i) {
        out.push_back(same[i].id);
    }
    int added = 0;
    for (const auto& p : door) {
        if (added >= k_door) {
            break;
        }
        if (std::find(out.begin(), out.end(), p.id) != out.end()) {
            continue;
        }
        out.push_back(p.id);
        ++added;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Proxy rendering

GeometricProxy shell_render(const ShellScene& shell, const PanoPose& pose, int width, int height) {
    validate_pano_size(width, height);
    label_pose_room(shell, pose);
    GeometricProxy proxy;
    proxy.width = width;
    proxy.height = height;
    proxy.pose = pose;
    proxy.provenance = Provenance::shell;
    const std::size_t n = static_cast<std::size_t>(width) * height;
    proxy.normals.assign(n, Vec3::Zero());
    proxy.semantics.assign(n, SemanticLabel{});
    proxy.depth.assign(n, 0.0);
    const Mat3 rot = pose.world_from_camera();
    parallel_for(0, height, [&](int y) {
        for (int x = 0; x < width; ++x) {
            const Vec3 dir = rot * pixel_direction_continuous(x, y, width, height);
            const auto hit = shell.cast(pose.position, dir);
            if (!hit) {
                continue;
            }
            const auto& tri = shell.triangles()[hit->triangle];
            const std::size_t i = proxy.index(x, y);
            proxy.depth[i] = hit->t;
            proxy.normals[i] = tri.normal.dot(dir) > 0.0 ? Vec3(-tri.normal) : tri.normal;
            proxy.semantics[i] = SemanticLabel{tri.cls, tri.room, hit->through_opening};
        }
    });
    return proxy;
}

std::array<std::uint8_t, 3> semantic_color(const SemanticLabel& label) {
    return {static_cast<std::uint8_t>(50 * static_cast<int>(label.cls)),
            static_cast<std::uint8_t>((30 + 40 * static_cast<long>(label.room)) % 256),
            static_cast<std::uint8_t>(label.through_opening ? 255 : 0)};
}

void write_proxy(const std::filesystem::path& prefix, const GeometricProxy& proxy) {
    const std::size_t n = static_cast<std::size_t>(proxy.width) * proxy.height;
    std::vector<std::uint8_t> sem(n * 3);
    std::vector<std::uint16_t> nrm(n * 3);
    std::vector<float> depth(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto c = semantic_color(proxy.semantics[i]);
        std::copy(c.begin(), c.end(), sem.begin() + static_cast<std::ptrdiff_t>(3 * i));
        for (int k = 0; k < 3; ++k) {
            const double v = std::clamp((proxy.normals[i][k] + 1.0) * 0.5, 0.0, 1.0);
            nrm[3 * i + k] = static_cast<std::uint16_t>(std::lround(v * 65535.0));
        }
        depth[i] = static_cast<float>(proxy.depth[i]);
    }
    const std::string base = prefix.string();
    write_png_rgb8(base + "_semantics.png", proxy.width, proxy.height, sem);
    write_png_rgb16(base + "_normals.png", proxy.width, proxy.height, nrm);
    write_raw_float(base + "_depth.raw", proxy.width, proxy.height, depth);
}

}  // namespace panoworld
