#pragma once

#include "panoworld/common.hpp"
#include "panoworld/panocam.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace panoworld {

inline constexpr double kDefaultCameraHeight = 1.5;
// Nodes within this horizontal distance of a doorway midpoint are boundary nodes.
inline constexpr double kBoundaryRadius = 0.3;

enum class SurfaceClass : std::uint8_t { none = 0, wall = 1, floor = 2, ceiling = 3, opening = 4 };

const char* to_string(SurfaceClass c);

// ---------------------------------------------------------------------------
// Floorplan

struct Room {
    RoomId id = 0;
    std::vector<Vec2> polygon;  // meters, either winding
    std::string label;

    bool operator==(const Room&) const = default;
};

struct Doorway {
    RoomId room_a = 0;
    RoomId room_b = 0;
    Vec2 p0 = Vec2::Zero();
    Vec2 p1 = Vec2::Zero();
    double height = 2.1;

    Vec2 midpoint() const { return 0.5 * (p0 + p1); }
    bool connects(RoomId r) const { return room_a == r || room_b == r; }
    bool operator==(const Doorway&) const = default;
};

// Room polygons share boundary edges; wall_thickness splits each shared wall
// into two slabs of half thickness, one per room. Zero thickness gives
// coincident wall surfaces.
struct FloorplanSpec {
    std::vector<Room> rooms;
    std::vector<Doorway> doorways;
    double wall_height = 2.8;
    double wall_thickness = 0.0;
    std::vector<Vec3> targets;  // target panorama positions

    bool operator==(const FloorplanSpec&) const = default;
};

// Throws Error describing the first violated invariant.
void validate_floorplan(const FloorplanSpec& spec);

enum class PolygonSide { outside, boundary, inside };
PolygonSide classify_point(const std::vector<Vec2>& polygon, const Vec2& p, double eps = 1e-9);

// Room whose polygon contains p (boundary points included, lowest id wins).
std::optional<RoomId> locate_room(const FloorplanSpec& spec, const Vec2& p);

// ---------------------------------------------------------------------------
// Shell

struct ShellTriangle {
    std::array<Vec3, 3> v;
    SurfaceClass cls = SurfaceClass::wall;
    RoomId room = 0;
    Vec3 normal = Vec3::UnitZ();  // unit, pointing out of the room volume
};

struct Aabb {
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 hi = Vec3::Constant(-std::numeric_limits<double>::infinity());

    void extend(const Vec3& p) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    void extend(const Aabb& b) {
        lo = lo.cwiseMin(b.lo);
        hi = hi.cwiseMax(b.hi);
    }
};

struct ShellHit {
    double t = 0.0;
    std::size_t triangle = 0;
    // An opening triangle was crossed before the occluding hit.
    bool through_opening = false;
};

// Moller-Trumbore ray/triangle test; returns t > 0 on hit.
std::optional<double> intersect_triangle(const ShellTriangle& tri, const Vec3& origin,
                                         const Vec3& dir);

// Coarse 3D shell extruded from a floorplan, with a small BVH for ray casts.
class ShellScene {
public:
    ShellScene() = default;
    ShellScene(FloorplanSpec plan, std::vector<ShellTriangle> triangles);

    const FloorplanSpec& floorplan() const { return plan_; }
    const std::vector<ShellTriangle>& triangles() const { return triangles_; }
    const Aabb& bounds() const { return bounds_; }

    // Nearest occluding hit along origin + t*dir (dir unit). Opening
    // triangles never occlude. Coincident surfaces resolve toward the face
    // seen from inside its room, then toward the lower triangle index.
    std::optional<ShellHit> cast(const Vec3& origin, const Vec3& dir) const;

private:
    struct BvhNode {
        Aabb box;
        std::uint32_t first = 0;  // leaf: index into order_; inner: left child
        std::uint32_t count = 0;  // 0 for inner nodes
        std::uint32_t right = 0;
    };

    void build_bvh();
    std::uint32_t build_node(std::uint32_t first, std::uint32_t count);

    FloorplanSpec plan_;
    std::vector<ShellTriangle> triangles_;
    Aabb bounds_;
    std::vector<BvhNode> bvh_;
    std::vector<std::uint32_t> order_;
};

// Orders two hits at (nearly) equal distance; exposed so independent
// intersectors can share the exact tie rule.
bool hit_precedes(const ShellScene& shell, const Vec3& dir, double t_a, std::size_t tri_a,
                  double t_b, std::size_t tri_b);

ShellScene build_shell(const FloorplanSpec& spec);

RoomId label_pose_room(const ShellScene& shell, const PanoPose& pose);

// ---------------------------------------------------------------------------
// Node graph

enum class NodeKind : std::uint8_t { target, auxiliary };

struct GraphNode {
    NodeId id = 0;
    PanoPose pose;
    RoomId room = 0;
    NodeKind kind = NodeKind::target;
    bool boundary = false;
    // Rooms joined by the doorway this boundary node sits beside.
    std::optional<std::pair<RoomId, RoomId>> doorway_rooms;
};

struct NodeGraph {
    std::vector<GraphNode> nodes;
    std::vector<std::pair<NodeId, NodeId>> edges;  // a < b, sorted, unique

    const GraphNode& node(NodeId id) const;
    std::size_t index_of(NodeId id) const;
    bool contains(NodeId id) const;
    double edge_length(NodeId a, NodeId b) const;
    // Neighbor lists (node index, edge length) parallel to `nodes`.
    std::vector<std::vector<std::pair<std::size_t, double>>> adjacency() const;
    bool connected() const;
    void normalize_edges();
};

// Targets from the floorplan plus a boundary node on each side of every
// doorway; same-room pairs within 2*max_spacing with line of sight are
// joined, each room's nodes are made connected with shortest line-of-sight
// edges, and each doorway pair is joined by a crossing edge.
NodeGraph build_node_graph(const ShellScene& shell, double max_spacing);

// Subdivides every edge strictly longer than max_spacing with
// ceil(len / max_spacing) - 1 equally spaced auxiliary nodes.
NodeGraph insert_auxiliary_nodes(const NodeGraph& graph, const ShellScene& shell,
                                 double max_spacing, bool enforce_spacing_range = true);

// Node with the minimum mean shortest-path distance to the targets.
NodeId select_start_node(const NodeGraph& graph, const std::set<NodeId>& targets);

inline constexpr int kDefaultKSame = 3;
inline constexpr int kDefaultKDoor = 1;

// {node} + up to k_same nearest generated same-room nodes + up to k_door
// generated boundary nodes of doorways touching the node's room.
std::vector<NodeId> select_context(const NodeGraph& graph, NodeId node,
                                   const std::set<NodeId>& generated, int k_same = kDefaultKSame,
                                   int k_door = kDefaultKDoor);

// ---------------------------------------------------------------------------
// Geometric proxy

enum class Provenance : std::uint8_t { none, shell, cache, generator };

struct SemanticLabel {
    SurfaceClass cls = SurfaceClass::none;
    RoomId room = 0;
    bool through_opening = false;
};

struct GeometricProxy {
    int width = 0;
    int height = 0;
    PanoPose pose;
    Provenance provenance = Provenance::shell;
    std::vector<Vec3> normals;  // unit, facing the camera
    std::vector<SemanticLabel> semantics;
    std::vector<double> depth;  // meters; 0 where nothing was hit

    std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
};

GeometricProxy shell_render(const ShellScene& shell, const PanoPose& pose, int width, int height);

// Writes <prefix>_semantics.png (8-bit color code), <prefix>_normals.png
// (16-bit, (n+1)/2 * 65535) and <prefix>_depth.raw.
void write_proxy(const std::filesystem::path& prefix, const GeometricProxy& proxy);

// 8-bit RGB code: R = 50 * class, G = 30 + 40 * room (mod 256), B = 255 when
// the ray crossed an opening.
std::array<std::uint8_t, 3> semantic_color(const SemanticLabel& label);

}  // namespace panoworld
