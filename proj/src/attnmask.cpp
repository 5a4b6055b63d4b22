#include "panoworld/attnmask.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace panoworld {

Matrix GroupMask::logit_bias() const {
    const int n = token_count();
    Matrix bias(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            bias(i, j) = token_allowed(i, j) ? 0.0 : -std::numeric_limits<double>::infinity();
        }
    }
    return bias;
}

GroupMask build_group_mask(const std::vector<ContextNode>& context,
                           const std::set<std::pair<RoomId, RoomId>>& doorway_pairs,
                           int tokens_per_node) {
    if (context.empty()) {
        throw Error("group mask needs a non-empty context");
    }
    if (tokens_per_node < 1) {
        throw Error("tokens_per_node must be positive");
    }
    auto doorway_connected = [&](RoomId a, RoomId b) {
        return doorway_pairs.count({a, b}) > 0 || doorway_pairs.count({b, a}) > 0;
    };
    GroupMask mask;
    mask.tokens_per_node = tokens_per_node;
    const auto n = static_cast<Eigen::Index>(context.size());
    mask.allowed.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        mask.node_rooms.push_back(context[i].room);
        for (Eigen::Index j = 0; j < n; ++j) {
            const auto& a = context[i];
            const auto& b = context[j];
            mask.allowed(i, j) = a.room == b.room ||
                                 ((a.boundary || b.boundary) && doorway_connected(a.room, b.room));
        }
    }
    return mask;
}

Matrix attention_weights(const Matrix& q, const Matrix& k, const GroupMask& mask, double scale) {
    const Eigen::Index n = q.rows();
    if (k.rows() != n || q.cols() != k.cols() || n != mask.token_count()) {
        throw Error("attention shape mismatch");
    }
    Matrix w = Matrix::Zero(n, n);
    std::vector<double> logits(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        double peak = -std::numeric_limits<double>::infinity();
        for (Eigen::Index j = 0; j < n; ++j) {
            if (mask.token_allowed(static_cast<int>(i), static_cast<int>(j))) {
                logits[j] = scale * q.row(i).dot(k.row(j));
                peak = std::max(peak, logits[j]);
            }
        }
        double sum = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (mask.token_allowed(static_cast<int>(i), static_cast<int>(j))) {
                w(i, j) = std::exp(logits[j] - peak);
                sum += w(i, j);
            }
        }
        w.row(i) /= sum;
    }
    return w;
}

Matrix masked_attention(const Matrix& q, const Matrix& k, const Matrix& v, const GroupMask& mask,
                        double scale) {
    if (v.rows() != q.rows()) {
        throw Error("attention shape mismatch");
    }
    return attention_weights(q, k, mask, scale) * v;
}

LaneSplit default_lane_split(int dim) { return {dim / 8, dim / 8}; }

Matrix apply_cprope(const Matrix& features, const CPRoPETable& table,
                    const std::vector<TokenPosition>& token_xy) {
    const int mx = table.pairs();
    const int my = table.v_pairs();
    if (features.cols() < 2 * (mx + my)) {
        throw Error("feature dim too small for the configured rotary pairs");
    }
    if (static_cast<std::size_t>(features.rows()) != token_xy.size()) {
        throw Error("one position per token required");
    }
    Matrix out = features;
    for (Eigen::Index t = 0; t < features.rows(); ++t) {
        const auto& pos = token_xy[static_cast<std::size_t>(t)];
        for (int m = 1; m <= mx; ++m) {
            const auto [c, s] = table.horizontal(m, pos.x);
            const Eigen::Index a = 2 * (m - 1);
            const double u = features(t, a);
            const double w = features(t, a + 1);
            out(t, a) = u * c - w * s;
            out(t, a + 1) = u * s + w * c;
        }
        for (int k = 0; k < my; ++k) {
            const auto [c, s] = table.vertical(k, pos.y);
            const Eigen::Index a = 2 * mx + 2 * k;
            const double u = features(t, a);
            const double w = features(t, a + 1);
            out(t, a) = u * c - w * s;
            out(t, a + 1) = u * s + w * c;
        }
    }
    return out;
}

}  // namespace panoworld
