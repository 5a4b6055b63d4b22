#include "panoworld/oracle.hpp"
#include "panoworld/raster_io.hpp"
#include "panoworld/scene_io.hpp"
#include "panoworld/scenegraph.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <numeric>
#include <random>

using namespace panoworld;
using pwtest::pose_at;

namespace {

int count_class(const ShellScene& s, SurfaceClass c) {
    return static_cast<int>(std::count_if(s.triangles().begin(), s.triangles().end(),
                                          [c](const ShellTriangle& t) { return t.cls == c; }));
}

// Independent O(n) intersector: textbook Moller-Trumbore on every triangle.
std::optional<double> naive_intersect(const ShellTriangle& tri, const Vec3& o, const Vec3& d) {
    const Vec3 e1 = tri.v[1] - tri.v[0];
    const Vec3 e2 = tri.v[2] - tri.v[0];
    const Vec3 h = d.cross(e2);
    const double a = e1.dot(h);
    if (std::abs(a) < 1e-14) {
        return std::nullopt;
    }
    const double f = 1.0 / a;
    const Vec3 s = o - tri.v[0];
    const double u = f * s.dot(h);
    if (u < -1e-12 || u > 1.0 + 1e-12) {
        return std::nullopt;
    }
    const Vec3 q = s.cross(e1);
    const double v = f * d.dot(q);
    if (v < -1e-12 || u + v > 1.0 + 1e-12) {
        return std::nullopt;
    }
    const double t = f * e2.dot(q);
    if (t <= 1e-9) {
        return std::nullopt;
    }
    return t;
}

struct NaiveHit {
    double t;
    std::size_t tri;
};

std::optional<NaiveHit> naive_cast(const ShellScene& s, const Vec3& o, const Vec3& d) {
    std::optional<NaiveHit> best;
    for (std::size_t i = 0; i < s.triangles().size(); ++i) {
        if (s.triangles()[i].cls == SurfaceClass::opening) {
            continue;
        }
        const auto t = naive_intersect(s.triangles()[i], o, d);
        if (t && (!best || hit_precedes(s, d, *t, i, best->t, best->tri))) {
            best = NaiveHit{*t, i};
        }
    }
    return best;
}

GraphNode plain_node(NodeId id, const Vec3& p, RoomId room = 0) {
    GraphNode n;
    n.id = id;
    n.pose.position = p;
    n.room = room;
    return n;
}

// Random connected graph: random spanning tree plus a few extra edges.
NodeGraph random_graph(std::mt19937_64& rng, int n, int rooms) {
    std::uniform_real_distribution<double> u(0.0, 10.0);
    std::uniform_int_distribution<int> ur(0, rooms - 1);
    NodeGraph g;
    for (int i = 0; i < n; ++i) {
        auto node = plain_node(static_cast<NodeId>(i), Vec3(u(rng), u(rng), 1.5),
                               static_cast<RoomId>(ur(rng)));
        if (rng() % 4 == 0) {
            node.boundary = true;
            const auto other = static_cast<RoomId>(ur(rng));
            node.doorway_rooms = std::make_pair(std::min(node.room, other),
                                                std::max(node.room, other));
        }
        g.nodes.push_back(node);
    }
    for (int i = 1; i < n; ++i) {
        std::uniform_int_distribution<int> up(0, i - 1);
        g.edges.emplace_back(static_cast<NodeId>(up(rng)), static_cast<NodeId>(i));
    }
    for (int k = 0; k < n / 3; ++k) {
        std::uniform_int_distribution<int> ui(0, n - 1);
        g.edges.emplace_back(static_cast<NodeId>(ui(rng)), static_cast<NodeId>(ui(rng)));
    }
    g.normalize_edges();
    return g;
}

double mean_distance_brute(const NodeGraph& g, NodeId from, const std::set<NodeId>& targets) {
    // Floyd-Warshall over the whole graph.
    const std::size_t n = g.nodes.size();
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> d(n, std::vector<double>(n, inf));
    for (std::size_t i = 0; i < n; ++i) {
        d[i][i] = 0.0;
    }
    for (const auto& [a, b] : g.edges) {
        const auto ia = g.index_of(a), ib = g.index_of(b);
        d[ia][ib] = d[ib][ia] = std::min(d[ia][ib], g.edge_length(a, b));
    }
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                d[i][j] = std::min(d[i][j], d[i][k] + d[k][j]);
            }
        }
    }
    double sum = 0.0;
    for (NodeId t : targets) {
        sum += d[g.index_of(from)][g.index_of(t)];
    }
    return sum / static_cast<double>(targets.size());
}

}  // namespace

// ---------------------------------------------------------------------------
// Floorplan validation and shell construction

TEST(BuildShell, SingleRoomTriangleCounts) {
    const auto shell = build_shell(pwtest::single_room());
    EXPECT_EQ(count_class(shell, SurfaceClass::floor), 2);
    EXPECT_EQ(count_class(shell, SurfaceClass::ceiling), 2);
    EXPECT_EQ(count_class(shell, SurfaceClass::wall), 8);
    EXPECT_EQ(count_class(shell, SurfaceClass::opening), 0);
    EXPECT_EQ(shell.triangles().size(), 12u);
}

TEST(BuildShell, SingleRoomIsClosed) {
    const auto shell = build_shell(pwtest::single_room());
    const auto proxy = shell_render(shell, pose_at(2.0, 2.0), 128, 64);
    for (double d : proxy.depth) {
        EXPECT_GT(d, 0.0);
    }
}

TEST(BuildShell, FullHeightDoorwayLeavesNoOccluderInOpening) {
    const auto spec = pwtest::two_rooms(0.0, 1.0, 3.0, 3.0);
    const auto shell = build_shell(spec);
    int below = 0, above = 0;
    for (const auto& t : shell.triangles()) {
        const bool on_shared = std::abs(t.v[0].x() - 4.0) < 1e-12 &&
                               std::abs(t.v[1].x() - 4.0) < 1e-12 &&
                               std::abs(t.v[2].x() - 4.0) < 1e-12;
        if (!on_shared) {
            continue;
        }
        double lo = 1e9, hi = -1e9;
        for (const auto& v : t.v) {
            lo = std::min(lo, v.y());
            hi = std::max(hi, v.y());
        }
        if (t.cls == SurfaceClass::wall) {
            EXPECT_TRUE(hi <= 1.5 + 1e-12 || lo >= 2.5 - 1e-12) << "wall inside the opening";
            below += hi <= 1.5 + 1e-12;
            above += lo >= 2.5 - 1e-12;
        } else {
            EXPECT_EQ(t.cls, SurfaceClass::opening);
        }
    }
    EXPECT_GT(below, 0);
    EXPECT_GT(above, 0);
    // Both rooms get a pair on each side of the opening.
    EXPECT_EQ(below, 4);
    EXPECT_EQ(above, 4);
}

TEST(BuildShell, NormalsAreUnitAndRoomsValid) {
    for (double thickness : {0.0, 0.2}) {
        const auto shell = build_shell(pwtest::two_rooms(thickness));
        for (const auto& t : shell.triangles()) {
            EXPECT_NEAR(t.normal.norm(), 1.0, 1e-9);
            EXPECT_TRUE(t.room == 0 || t.room == 1);
        }
    }
}

TEST(ValidateFloorplan, RejectsZeroWidthDoorway) {
    auto spec = pwtest::two_rooms();
    spec.doorways[0].p1 = spec.doorways[0].p0;
    EXPECT_THROW(build_shell(spec), Error);
}

TEST(ValidateFloorplan, RejectsOverlappingRooms) {
    FloorplanSpec spec;
    spec.rooms.push_back(pwtest::rect_room(0, 0, 0, 4, 4));
    spec.rooms.push_back(pwtest::rect_room(1, 3, 1, 7, 3));
    EXPECT_THROW(build_shell(spec), Error);
    spec.rooms[1] = pwtest::rect_room(1, 1, 1, 2, 2);  // nested
    EXPECT_THROW(build_shell(spec), Error);
}

TEST(ValidateFloorplan, RejectsDoorwayOffSharedEdge) {
    auto spec = pwtest::two_rooms();
    spec.doorways[0].p0 = Vec2(2.0, 4.0);
    spec.doorways[0].p1 = Vec2(3.0, 4.0);
    EXPECT_THROW(build_shell(spec), Error);
}

TEST(ValidateFloorplan, RejectsSelfIntersectionAndDuplicateIds) {
    FloorplanSpec spec;
    Room bow;
    bow.polygon = {Vec2(0, 0), Vec2(2, 2), Vec2(2, 0), Vec2(0, 2)};
    spec.rooms.push_back(bow);
    EXPECT_THROW(validate_floorplan(spec), Error);
    spec.rooms = {pwtest::rect_room(0, 0, 0, 1, 1), pwtest::rect_room(0, 1, 0, 2, 1)};
    EXPECT_THROW(validate_floorplan(spec), Error);
}

TEST(BuildShell, LShapedRoomTriangulates) {
    FloorplanSpec spec;
    Room l;
    l.polygon = {Vec2(0, 0), Vec2(4, 0), Vec2(4, 2), Vec2(2, 2), Vec2(2, 4), Vec2(0, 4)};
    spec.rooms.push_back(l);
    const auto shell = build_shell(spec);
    EXPECT_EQ(count_class(shell, SurfaceClass::floor), 4);
    double area = 0.0;
    for (const auto& t : shell.triangles()) {
        if (t.cls == SurfaceClass::floor) {
            area += 0.5 * (t.v[1] - t.v[0]).cross(t.v[2] - t.v[0]).norm();
        }
    }
    EXPECT_NEAR(area, 12.0, 1e-9);
    // The notch is not covered: a ray down at (3, 3) inside the bounds misses the floor.
    const auto proxy = shell_render(shell, pose_at(1.0, 1.0), 64, 32);
    for (double d : proxy.depth) {
        EXPECT_GT(d, 0.0);
    }
}

// ---------------------------------------------------------------------------
// Room labels

TEST(LabelPoseRoom, CentroidAndSharedWall) {
    const auto shell = build_shell(pwtest::two_rooms());
    EXPECT_EQ(label_pose_room(shell, pose_at(2.0, 2.0)), 0u);
    EXPECT_EQ(label_pose_room(shell, pose_at(6.0, 2.0)), 1u);
    EXPECT_EQ(label_pose_room(shell, pose_at(4.0, 3.5)), 0u);
}

TEST(LabelPoseRoom, OutsideIsAnError) {
    const auto shell = build_shell(pwtest::two_rooms());
    EXPECT_THROW(label_pose_room(shell, pose_at(9.0, 2.0)), Error);
    EXPECT_THROW(label_pose_room(shell, pose_at(2.0, 2.0, 5.0)), Error);
}

// ---------------------------------------------------------------------------
// Start node

TEST(SelectStartNode, SingleTargetIsItself) {
    NodeGraph g;
    for (NodeId i = 0; i < 4; ++i) {
        g.nodes.push_back(plain_node(i, Vec3(i, 0, 1.5)));
    }
    g.edges = {{0, 1}, {1, 2}, {2, 3}};
    EXPECT_EQ(select_start_node(g, {2}), 2u);
}

TEST(SelectStartNode, PathTieGoesToLowestId) {
    NodeGraph g;
    for (NodeId i = 0; i < 3; ++i) {
        g.nodes.push_back(plain_node(i, Vec3(i, 0, 1.5)));
    }
    g.edges = {{0, 1}, {1, 2}};
    const std::set<NodeId> targets{0, 2};
    EXPECT_DOUBLE_EQ(mean_distance_brute(g, 0, targets), 1.0);
    EXPECT_DOUBLE_EQ(mean_distance_brute(g, 1, targets), 1.0);
    EXPECT_DOUBLE_EQ(mean_distance_brute(g, 2, targets), 1.0);
    EXPECT_EQ(select_start_node(g, targets), 0u);
}

TEST(SelectStartNode, StarCenterWins) {
    NodeGraph g;
    g.nodes.push_back(plain_node(0, Vec3(0, 0, 1.5)));
    const Vec3 leaves[4] = {Vec3(1, 0, 1.5), Vec3(-1, 0, 1.5), Vec3(0, 1, 1.5), Vec3(0, -1, 1.5)};
    for (NodeId i = 1; i <= 4; ++i) {
        g.nodes.push_back(plain_node(i, leaves[i - 1]));
        g.edges.emplace_back(0, i);
    }
    const std::set<NodeId> targets{1, 2, 3, 4};
    double best = std::numeric_limits<double>::infinity();
    NodeId best_id = 0;
    for (const auto& n : g.nodes) {
        const double m = mean_distance_brute(g, n.id, targets);
        if (m < best) {
            best = m;
            best_id = n.id;
        }
    }
    EXPECT_EQ(best_id, 0u);
    EXPECT_EQ(select_start_node(g, targets), 0u);
}

TEST(SelectStartNode, MatchesBruteForceOnRandomGraphs) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const auto g = random_graph(rng, 12, 3);
        const std::set<NodeId> targets{0, 3, 7, 11};
        const NodeId chosen = select_start_node(g, targets);
        const double chosen_mean = mean_distance_brute(g, chosen, targets);
        for (const auto& n : g.nodes) {
            EXPECT_GE(mean_distance_brute(g, n.id, targets), chosen_mean - 1e-9);
        }
    }
}

TEST(SelectStartNode, RelabelingKeepsMeanDistance) {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 10; ++trial) {
        const auto g = random_graph(rng, 10, 2);
        const std::set<NodeId> targets{1, 4, 8};
        std::vector<NodeId> perm(g.nodes.size());
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        NodeGraph h = g;
        for (auto& n : h.nodes) {
            n.id = perm[n.id];
        }
        for (auto& e : h.edges) {
            e = {perm[e.first], perm[e.second]};
        }
        h.normalize_edges();
        std::set<NodeId> mapped;
        for (NodeId t : targets) {
            mapped.insert(perm[t]);
        }
        const double a = mean_distance_brute(g, select_start_node(g, targets), targets);
        const double b = mean_distance_brute(h, select_start_node(h, mapped), mapped);
        EXPECT_NEAR(a, b, 1e-9);
    }
}

TEST(SelectStartNode, DisconnectedGraphIsAnError) {
    NodeGraph g;
    g.nodes.push_back(plain_node(0, Vec3(0, 0, 1.5)));
    g.nodes.push_back(plain_node(1, Vec3(1, 0, 1.5)));
    EXPECT_THROW(select_start_node(g, {0}), Error);
    EXPECT_THROW(select_start_node(g, {}), Error);
}

// ---------------------------------------------------------------------------
// Auxiliary nodes

namespace {

FloorplanSpec long_room() {
    FloorplanSpec spec;
    spec.rooms.push_back(pwtest::rect_room(0, 0, 0, 10, 4));
    spec.wall_height = 3.0;
    return spec;
}

NodeGraph two_node_graph(double len) {
    NodeGraph g;
    g.nodes.push_back(plain_node(0, Vec3(1.0, 2.0, 1.5)));
    g.nodes.push_back(plain_node(1, Vec3(1.0 + len, 2.0, 1.5)));
    g.edges = {{0, 1}};
    return g;
}

}  // namespace

TEST(InsertAuxiliaryNodes, ThreeMetersAtOneMeter) {
    const auto shell = build_shell(long_room());
    const auto out = insert_auxiliary_nodes(two_node_graph(3.0), shell, 1.0);
    ASSERT_EQ(out.nodes.size(), 4u);
    EXPECT_EQ(out.nodes[2].kind, NodeKind::auxiliary);
    EXPECT_NEAR(out.nodes[2].pose.position.x(), 2.0, 1e-12);
    EXPECT_NEAR(out.nodes[3].pose.position.x(), 3.0, 1e-12);
    EXPECT_EQ(out.nodes[2].room, 0u);
    EXPECT_EQ(out.edges.size(), 3u);
    EXPECT_TRUE(out.connected());
}

TEST(InsertAuxiliaryNodes, ShortAndBoundaryEdgesUnchanged) {
    const auto shell = build_shell(long_room());
    EXPECT_EQ(insert_auxiliary_nodes(two_node_graph(0.8), shell, 1.5).nodes.size(), 2u);
    EXPECT_EQ(insert_auxiliary_nodes(two_node_graph(1.5), shell, 1.5).nodes.size(), 2u);
    EXPECT_EQ(insert_auxiliary_nodes(two_node_graph(1.5001), shell, 1.5).nodes.size(), 3u);
}

TEST(InsertAuxiliaryNodes, SpacingRangeIsEnforcedByDefault) {
    const auto shell = build_shell(long_room());
    EXPECT_THROW(insert_auxiliary_nodes(two_node_graph(3.0), shell, 0.4), Error);
    EXPECT_THROW(insert_auxiliary_nodes(two_node_graph(3.0), shell, 2.0), Error);
    EXPECT_EQ(insert_auxiliary_nodes(two_node_graph(3.0), shell, 2.0, false).nodes.size(), 3u);
}

TEST(InsertAuxiliaryNodes, Idempotent) {
    for (std::uint64_t seed : {1, 2, 3, 4}) {
        const auto spec = gen_scene(seed, 4);
        const auto shell = build_shell(spec);
        for (double s : {0.5, 1.0, 1.5}) {
            const auto once = insert_auxiliary_nodes(build_node_graph(shell, s), shell, s);
            const auto twice = insert_auxiliary_nodes(once, shell, s);
            ASSERT_EQ(once.nodes.size(), twice.nodes.size());
            EXPECT_EQ(once.edges, twice.edges);
            for (std::size_t i = 0; i < once.nodes.size(); ++i) {
                EXPECT_EQ(once.nodes[i].id, twice.nodes[i].id);
                EXPECT_EQ(once.nodes[i].pose, twice.nodes[i].pose);
            }
            EXPECT_TRUE(once.connected());
            for (const auto& [a, b] : once.edges) {
                EXPECT_LE(once.edge_length(a, b), s * (1.0 + 1e-9));
            }
        }
    }
}

TEST(InsertAuxiliaryNodes, DoorwayNodesAreBoundary) {
    const auto shell = build_shell(pwtest::two_rooms(0.2));
    const auto g = insert_auxiliary_nodes(build_node_graph(shell, 1.0), shell, 1.0);
    int boundary = 0;
    for (const auto& n : g.nodes) {
        const double d = (n.pose.position.head<2>() - Vec2(4.0, 2.0)).norm();
        EXPECT_EQ(n.boundary, d <= kBoundaryRadius + 1e-12);
        boundary += n.boundary;
    }
    EXPECT_GE(boundary, 2);
}

// ---------------------------------------------------------------------------
// Node graph

TEST(BuildNodeGraph, EdgesStayInRoomOrCrossDoorways) {
    for (std::uint64_t seed : {5, 6, 7}) {
        const auto spec = gen_scene(seed, 5);
        const auto shell = build_shell(spec);
        const auto g = insert_auxiliary_nodes(build_node_graph(shell, 1.0), shell, 1.0);
        EXPECT_TRUE(g.connected());
        for (const auto& [a, b] : g.edges) {
            const auto& na = g.node(a);
            const auto& nb = g.node(b);
            if (na.room != nb.room) {
                EXPECT_TRUE(na.boundary && nb.boundary);
                EXPECT_EQ(na.doorway_rooms, nb.doorway_rooms);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Context selection

TEST(SelectContext, EmptyHistory) {
    const auto shell = build_shell(pwtest::two_rooms());
    const auto g = build_node_graph(shell, 1.0);
    EXPECT_EQ(select_context(g, 0, {}), std::vector<NodeId>{0});
}

TEST(SelectContext, NearestSameRoomThenDoorway) {
    NodeGraph g;
    g.nodes.push_back(plain_node(0, Vec3(0, 0, 1.5), 0));
    for (NodeId i = 1; i <= 5; ++i) {
        g.nodes.push_back(plain_node(i, Vec3(0.5 * (6 - i), 0, 1.5), 0));  // 2.5 .. 0.5 m
    }
    auto door = plain_node(6, Vec3(0, 3.0, 1.5), 1);
    door.boundary = true;
    door.doorway_rooms = std::make_pair(RoomId{0}, RoomId{1});
    g.nodes.push_back(door);
    g.nodes.push_back(plain_node(7, Vec3(0, 0.1, 1.5), 2));  // other room, not a boundary
    const std::set<NodeId> generated{1, 2, 3, 4, 5, 6, 7};
    EXPECT_EQ(select_context(g, 0, generated, 3, 0), (std::vector<NodeId>{0, 5, 4, 3}));
    EXPECT_EQ(select_context(g, 0, generated, 3, 1), (std::vector<NodeId>{0, 5, 4, 3, 6}));
    EXPECT_EQ(select_context(g, 0, {6}, 3, 1), (std::vector<NodeId>{0, 6}));
}

TEST(SelectContext, BoundedOnRandomGraphs) {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 50; ++trial) {
        const auto g = random_graph(rng, 20, 3);
        const int k_same = static_cast<int>(rng() % 5);
        const int k_door = static_cast<int>(rng() % 3);
        for (const auto& n : g.nodes) {
            std::set<NodeId> generated;
            for (const auto& m : g.nodes) {
                if (m.id != n.id && rng() % 2) {
                    generated.insert(m.id);
                }
            }
            const auto ctx = select_context(g, n.id, generated, k_same, k_door);
            EXPECT_LE(ctx.size(), static_cast<std::size_t>(1 + k_same + k_door));
            EXPECT_EQ(ctx.front(), n.id);
            const std::set<NodeId> unique(ctx.begin(), ctx.end());
            EXPECT_EQ(unique.size(), ctx.size());
        }
    }
}

// ---------------------------------------------------------------------------
// Shell rendering

TEST(ShellRender, WallFacingPixel) {
    const auto shell = build_shell(pwtest::single_room());
    const int w = 512, h = 256;
    const auto proxy = shell_render(shell, pose_at(2.0, 2.0), w, h);
    const std::size_t i = proxy.index(w / 2, h / 2);
    const Vec3 d = pixel_direction(w / 2, h / 2, w, h);
    EXPECT_NEAR(proxy.depth[i], 2.0 / d.x(), 1e-9);
    EXPECT_NEAR(proxy.depth[i], 2.0, 1e-3);
    EXPECT_LT((proxy.normals[i] - Vec3(-1.0, 0.0, 0.0)).norm(), 1e-12);
    EXPECT_LT((proxy.normals[i] + d).norm(), 0.02);
    EXPECT_EQ(proxy.semantics[i].cls, SurfaceClass::wall);
}

TEST(ShellRender, NadirPixel) {
    const auto shell = build_shell(pwtest::single_room());
    const int w = 512, h = 256;
    const auto proxy = shell_render(shell, pose_at(2.0, 2.0), w, h);
    const std::size_t i = proxy.index(w / 2, h - 1);
    EXPECT_NEAR(proxy.depth[i], 1.5, 1e-3);
    EXPECT_LT((proxy.normals[i] - Vec3::UnitZ()).norm(), 1e-12);
    EXPECT_EQ(proxy.semantics[i].cls, SurfaceClass::floor);
}

TEST(ShellRender, RayThroughDoorwayReachesNeighborRoom) {
    for (double thickness : {0.0, 0.2}) {
        const auto shell = build_shell(pwtest::two_rooms(thickness));
        const int w = 512, h = 256;
        const auto proxy = shell_render(shell, pose_at(2.0, 2.0), w, h);
        const std::size_t i = proxy.index(w / 2, h / 2);
        const Vec3 d = pixel_direction(w / 2, h / 2, w, h);
        const double far_wall = 8.0 - 0.5 * thickness;
        EXPECT_NEAR(proxy.depth[i], (far_wall - 2.0) / d.x(), 1e-9);
        EXPECT_EQ(proxy.semantics[i].room, 1u);
        EXPECT_EQ(proxy.semantics[i].cls, SurfaceClass::wall);
        EXPECT_TRUE(proxy.semantics[i].through_opening);
        // Looking the other way stays in room A.
        const std::size_t j = proxy.index(0, h / 2);
        EXPECT_EQ(proxy.semantics[j].room, 0u);
        EXPECT_FALSE(proxy.semantics[j].through_opening);
    }
}

TEST(ShellRender, MatchesNaiveIntersector) {
    std::vector<FloorplanSpec> scenes = {pwtest::single_room(), pwtest::two_rooms(0.0),
                                         pwtest::two_rooms(0.2), gen_scene(9, 4)};
    std::mt19937_64 rng(99);
    const int w = 256, h = 128;
    for (const auto& spec : scenes) {
        const auto shell = build_shell(spec);
        const Vec3 origin = spec.targets.front();
        PanoPose pose;
        pose.position = origin;
        pose.rotation = pwtest::random_rotation(rng);
        const auto proxy = shell_render(shell, pose, w, h);
        std::uniform_int_distribution<int> ux(0, w - 1), uy(0, h - 1);
        for (int k = 0; k < 1000; ++k) {
            const int x = ux(rng), y = uy(rng);
            const Vec3 d = pose.world_from_camera() * pixel_direction(x, y, w, h);
            const auto hit = naive_cast(shell, origin, d);
            ASSERT_TRUE(hit.has_value());
            const std::size_t i = proxy.index(x, y);
            EXPECT_NEAR(proxy.depth[i], hit->t, 1e-9);
            EXPECT_EQ(proxy.semantics[i].room, shell.triangles()[hit->tri].room);
            EXPECT_EQ(proxy.semantics[i].cls, shell.triangles()[hit->tri].cls);
        }
    }
}

TEST(ShellRender, ProxyFilesRoundTrip) {
    const auto dir = pwtest::scratch_dir("proxy");
    const auto shell = build_shell(pwtest::two_rooms(0.2));
    const auto proxy = shell_render(shell, pose_at(2.0, 2.0), 64, 32);
    write_proxy(dir / "p", proxy);
    const auto depth = read_raw_float(dir / "p_depth.raw");
    ASSERT_EQ(depth.width, 64);
    ASSERT_EQ(depth.height, 32);
    for (std::size_t i = 0; i < depth.data.size(); ++i) {
        EXPECT_FLOAT_EQ(depth.data[i], static_cast<float>(proxy.depth[i]));
    }
    const auto sem = read_png_rgb8(dir / "p_semantics.png");
    ASSERT_EQ(sem.width, 64);
    const auto c = semantic_color(proxy.semantics[0]);
    EXPECT_EQ(sem.rgb[0], c[0]);
    EXPECT_EQ(sem.rgb[1], c[1]);
    EXPECT_EQ(sem.rgb[2], c[2]);
    EXPECT_TRUE(std::filesystem::exists(dir / "p_normals.png"));
    EXPECT_EQ(semantic_color({SurfaceClass::wall, 1, true}),
              (std::array<std::uint8_t, 3>{50, 70, 255}));
}

TEST(ShellRender, RejectsPoseOutsideShell) {
    const auto shell = build_shell(pwtest::single_room());
    EXPECT_THROW(shell_render(shell, pose_at(5.0, 2.0), 64, 32), Error);
    EXPECT_THROW(shell_render(shell, pose_at(2.0, 2.0), 64, 31), Error);
}

// ---------------------------------------------------------------------------
// Scene files

TEST(SceneIo, JsonRoundTrip) {
    const auto spec = gen_scene(12, 5);
    const auto back = floorplan_from_json(floorplan_to_json(spec));
    EXPECT_EQ(back, spec);
}

TEST(SceneIo, MalformedInputIsAnError) {
    EXPECT_THROW(floorplan_from_json("{"), Error);
    EXPECT_THROW(floorplan_from_json("{\"rooms\": 3}"), Error);
    EXPECT_THROW(load_floorplan("/nonexistent/scene.json"), Error);
}
