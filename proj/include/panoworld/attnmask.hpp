#pragma once

#include "panoworld/common.hpp"
#include "panoworld/panocam.hpp"

#include <Eigen/Dense>

#include <set>
#include <utility>
#include <vector>

namespace panoworld {

using Matrix = Eigen::MatrixXd;

struct ContextNode {
    NodeId id = 0;
    RoomId room = 0;
    bool boundary = false;
};

// Node-level attention groups expanded blockwise over tokens. Node i's
// tokens occupy rows [i * tokens_per_node, (i + 1) * tokens_per_node).
struct GroupMask {
    int tokens_per_node = 0;
    std::vector<RoomId> node_rooms;
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> allowed;  // node x node

    int node_count() const { return static_cast<int>(node_rooms.size()); }
    int token_count() const { return node_count() * tokens_per_node; }
    bool token_allowed(int query, int key) const {
        return allowed(query / tokens_per_node, key / tokens_per_node);
    }
    // Additive form: 0 where allowed, -infinity where masked.
    Matrix logit_bias() const;
};

// Allowed iff same room, or the rooms share a doorway and at least one of
// the two nodes is a boundary node.
GroupMask build_group_mask(const std::vector<ContextNode>& context,
                           const std::set<std::pair<RoomId, RoomId>>& doorway_pairs,
                           int tokens_per_node);

// Row-wise masked softmax of scale * q k^T. Masked keys are excluded from
// the normalization and receive weight exactly 0.
Matrix attention_weights(const Matrix& q, const Matrix& k, const GroupMask& mask, double scale);

Matrix masked_attention(const Matrix& q, const Matrix& k, const Matrix& v, const GroupMask& mask,
                        double scale);

struct LaneSplit {
    int horizontal_pairs = 0;
    int vertical_pairs = 0;
};

// dim / 8 pairs for each branch; remaining lanes stay unrotated.
LaneSplit default_lane_split(int dim);

struct TokenPosition {
    long x = 0;
    int y = 0;
};

// Rotates lane pairs (2m-2, 2m-1), m = 1..M_x, by the horizontal phase of
// the token's x, then the next 2*M_y lanes by the vertical phase of its y.
Matrix apply_cprope(const Matrix& features, const CPRoPETable& table,
                    const std::vector<TokenPosition>& token_xy);

}  // namespace panoworld
