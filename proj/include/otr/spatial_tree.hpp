#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "otr/errors.hpp"
#include "otr/points.hpp"
#include "otr/rng.hpp"

namespace otr {

enum class TreeFamily : std::uint8_t { KD, QUAD };

inline const char* family_name(TreeFamily f) {
    return f == TreeFamily::KD ? "kd" : "quad";
}

// Depth limits at or above this value never bind in practice; it doubles as
// the "unlimited" default.
inline constexpr std::uint32_t kNoDepthLimit = 1u << 20;

struct TreeBuildConfig {
    TreeFamily family = TreeFamily::KD;
    // Fraction of the cell width used for the random median shift; must lie
    // in [0, 0.5) so a shifted median cannot leave the cell.
    double eta = 0.25;
    // Maximum number of splits on any root-to-leaf path. Reaching it freezes
    // the cell into a (possibly multi-point) leaf.
    std::uint32_t depth_limit = kNoDepthLimit;
    std::uint64_t seed = 0;

    bool operator==(const TreeBuildConfig&) const = default;
};

struct TreeNode {
    std::int32_t parent = -1;  // -1 marks the root
    // Weight of the edge to the parent. A node whose path from the root has
    // t splits carries weight phi * 2^(-floor(t/D)) in a kd-tree and
    // phi * 2^(-t) in a quadtree (one quadtree split refines every axis).
    double edge_weight = 0.0;
    std::uint32_t split_count = 0;  // splits from root to this node
    std::int32_t split_axis = -1;   // kd internal nodes only
    double split_value = 0.0;       // kd internal nodes only
    std::vector<std::uint32_t> children;
    std::vector<std::uint32_t> points;  // nonempty exactly at leaves
    std::vector<double> cell_lo;        // quad leaves: low corner of the cell

    bool operator==(const TreeNode&) const = default;
};

// Random spatial partition tree over a point store, with the edge-weight
// schedule anchored at phi = half the longest side of the data bounding box.
// Nodes are stored in construction (pre)order with the root at index 0, so
// node indices of children always exceed their parent's.
struct SpatialTree {
    TreeBuildConfig config;
    std::uint32_t dim = 0;
    double phi = 0.0;
    std::vector<TreeNode> nodes;
    std::vector<std::uint32_t> point_to_leaf;  // one entry per store point
    std::vector<double> root_lo;               // quad: root cell low corner

    bool is_leaf(std::size_t v) const { return nodes[v].children.empty(); }

    // Side length of a quad node's cell: the root cell has side 2*phi and
    // every split halves it.
    double cell_side(std::size_t v) const {
        return std::ldexp(2.0 * phi, -static_cast<int>(nodes[v].split_count));
    }

    bool operator==(const SpatialTree&) const = default;
};

struct TreeDepthStats {
    std::uint32_t max_splits = 0;
    double mean_leaf_splits = 0.0;
    std::size_t leaf_count = 0;
};

inline TreeDepthStats tree_depth_stats(const SpatialTree& tree) {
    TreeDepthStats st;
    std::size_t total = 0;
    for (std::size_t v = 0; v < tree.nodes.size(); ++v) {
        if (!tree.is_leaf(v)) continue;
        ++st.leaf_count;
        total += tree.nodes[v].split_count;
        st.max_splits = std::max(st.max_splits, tree.nodes[v].split_count);
    }
    st.mean_leaf_splits =
        st.leaf_count ? static_cast<double>(total) / static_cast<double>(st.leaf_count)
                      : 0.0;
    return st;
}

// Sum of edge weights along the unique tree path between two nodes.
inline double tree_distance(const SpatialTree& tree, std::size_t a, std::size_t b) {
    if (a >= tree.nodes.size() || b >= tree.nodes.size())
        throw argument_error("tree_distance: node index out of range");
    double acc = 0.0;
    while (a != b) {
        const auto& na = tree.nodes[a];
        const auto& nb = tree.nodes[b];
        if (na.split_count >= nb.split_count) {
            acc += na.edge_weight;
            a = static_cast<std::size_t>(na.parent);
        } else {
            acc += nb.edge_weight;
            b = static_cast<std::size_t>(nb.parent);
        }
    }
    return acc;
}

namespace detail {

inline void validate_build_config(const TreeBuildConfig& cfg, TreeFamily expected) {
    if (cfg.family != expected)
        throw argument_error(std::string("tree build: config family is ") +
                             family_name(cfg.family) + ", expected " +
                             family_name(expected));
    if (!(cfg.eta >= 0.0 && cfg.eta < 0.5))
        throw argument_error("tree build: eta must lie in [0, 0.5)");
    if (cfg.depth_limit == 0)
        throw argument_error("tree build: depth_limit must be >= 1");
}

// Bounding box as (lo, hi) per axis.
inline std::pair<std::vector<double>, std::vector<double>> bounding_box(
    const PointStore& store) {
    const std::size_t d = store.dim();
    std::vector<double> lo(store.point(0).begin(), store.point(0).end());
    std::vector<double> hi = lo;
    for (std::size_t p = 1; p < store.size(); ++p) {
        const auto row = store.point(p);
        for (std::size_t k = 0; k < d; ++k) {
            lo[k] = std::min(lo[k], row[k]);
            hi[k] = std::max(hi[k], row[k]);
        }
    }
    return {std::move(lo), std::move(hi)};
}

inline double half_max_side(const std::vector<double>& lo, const std::vector<double>& hi) {
    double side = 0.0;
    for (std::size_t k = 0; k < lo.size(); ++k) side = std::max(side, hi[k] - lo[k]);
    return side / 2.0;
}

struct KdBuilder {
    const PointStore& store;
    const TreeBuildConfig& cfg;
    RandomStream& rng;
    SpatialTree& tree;
    std::vector<std::uint32_t>& order;  // point indices, partitioned in place
    std::vector<double> scratch;        // axis coordinates for median selection

    double child_weight(std::uint32_t child_splits) const {
        return std::ldexp(tree.phi,
                          -static_cast<int>(child_splits / store.dim()));
    }

    void make_leaf(std::size_t node_id, std::size_t begin, std::size_t end) {
        auto& node = tree.nodes[node_id];
        node.points.assign(order.begin() + static_cast<std::ptrdiff_t>(begin),
                           order.begin() + static_cast<std::ptrdiff_t>(end));
        for (std::uint32_t p : node.points)
            tree.point_to_leaf[p] = static_cast<std::uint32_t>(node_id);
    }

    void build(std::size_t node_id, std::size_t begin, std::size_t end,
               std::vector<double>& cell_lo, std::vector<double>& cell_hi) {
        const std::size_t n = end - begin;
        const std::uint32_t splits = tree.nodes[node_id].split_count;
        if (n <= 1 || splits >= cfg.depth_limit) {
            make_leaf(node_id, begin, end);
            return;
        }
        const std::uint32_t d = static_cast<std::uint32_t>(store.dim());
        // Draw a split axis, retrying (up to D draws) past axes on which all
        // points coincide.
        int axis = -1;
        double vmin = 0.0, vmax = 0.0;
        for (std::uint32_t attempt = 0; attempt < d; ++attempt) {
            const std::uint32_t a = rng.next_index(d);
            double mn = store.point(order[begin])[a], mx = mn;
            for (std::size_t p = begin + 1; p < end; ++p) {
                const double c = store.point(order[p])[a];
                mn = std::min(mn, c);
                mx = std::max(mx, c);
            }
            if (mx > mn) {
                axis = static_cast<int>(a);
                vmin = mn;
                vmax = mx;
                break;
            }
        }
        if (axis < 0) {
            make_leaf(node_id, begin, end);
            return;
        }

        scratch.resize(n);
        for (std::size_t p = begin; p < end; ++p)
            scratch[p - begin] = store.point(order[p])[static_cast<std::size_t>(axis)];
        std::nth_element(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(n / 2),
                         scratch.end());
        const double median = scratch[n / 2];

        const double width = cell_hi[static_cast<std::size_t>(axis)] -
                             cell_lo[static_cast<std::size_t>(axis)];
        const double shift = rng.next_uniform(-cfg.eta * width, cfg.eta * width);
        double split = median + shift;
        // Keep both children nonempty: split must lie in (vmin, vmax].
        if (split <= vmin) split = std::nextafter(vmin, std::numeric_limits<double>::infinity());
        if (split > vmax) split = vmax;

        const auto mid_it = std::partition(
            order.begin() + static_cast<std::ptrdiff_t>(begin),
            order.begin() + static_cast<std::ptrdiff_t>(end),
            [&](std::uint32_t p) { return store.point(p)[static_cast<std::size_t>(axis)] < split; });
        const std::size_t mid = static_cast<std::size_t>(mid_it - order.begin());

        tree.nodes[node_id].split_axis = axis;
        tree.nodes[node_id].split_value = split;
        const std::uint32_t child_splits = splits + 1;
        const double w = child_weight(child_splits);

        const std::size_t left_id = tree.nodes.size();
        tree.nodes.emplace_back();
        tree.nodes[left_id].parent = static_cast<std::int32_t>(node_id);
        tree.nodes[left_id].edge_weight = w;
        tree.nodes[left_id].split_count = child_splits;
        tree.nodes[node_id].children.push_back(static_cast<std::uint32_t>(left_id));
        const double saved_hi = cell_hi[static_cast<std::size_t>(axis)];
        cell_hi[static_cast<std::size_t>(axis)] = split;
        build(left_id, begin, mid, cell_lo, cell_hi);
        cell_hi[static_cast<std::size_t>(axis)] = saved_hi;

        const std::size_t right_id = tree.nodes.size();
        tree.nodes.emplace_back();
        tree.nodes[right_id].parent = static_cast<std::int32_t>(node_id);
        tree.nodes[right_id].edge_weight = w;
        tree.nodes[right_id].split_count = child_splits;
        tree.nodes[node_id].children.push_back(static_cast<std::uint32_t>(right_id));
        const double saved_lo = cell_lo[static_cast<std::size_t>(axis)];
        cell_lo[static_cast<std::size_t>(axis)] = split;
        build(right_id, mid, end, cell_lo, cell_hi);
        cell_lo[static_cast<std::size_t>(axis)] = saved_lo;
    }
};

struct QuadBuilder {
    const PointStore& store;
    const TreeBuildConfig& cfg;
    SpatialTree& tree;

    bool all_identical(const std::vector<std::uint32_t>& pts) const {
        const auto first = store.point(pts[0]);
        for (std::size_t p = 1; p < pts.size(); ++p) {
            const auto row = store.point(pts[p]);
            for (std::size_t k = 0; k < row.size(); ++k)
                if (row[k] != first[k]) return false;
        }
        return true;
    }

    void make_leaf(std::size_t node_id, std::vector<std::uint32_t> pts,
                   std::vector<double> lo) {
        auto& node = tree.nodes[node_id];
        node.points = std::move(pts);
        node.cell_lo = std::move(lo);
        for (std::uint32_t p : node.points)
            tree.point_to_leaf[p] = static_cast<std::uint32_t>(node_id);
    }

    void build(std::size_t node_id, std::vector<std::uint32_t> pts,
               std::vector<double> lo, double side) {
        const std::size_t d = store.dim();
        const std::uint32_t base_splits = tree.nodes[node_id].split_count;
        if (pts.size() <= 1 || base_splits >= cfg.depth_limit || all_identical(pts)) {
            make_leaf(node_id, std::move(pts), std::move(lo));
            return;
        }
        // Split the cell at its midpoints. A split that leaves every point in
        // one octant only shrinks the cell: advance the split count without
        // materializing single-child chains, so internal nodes always carry
        // at least two children.
        std::vector<double> cur_lo = lo;
        double cur_side = side;
        std::uint32_t cur_splits = base_splits;
        const std::size_t words = (d + 63) / 64;
        for (;;) {
            if (cur_splits >= cfg.depth_limit) {
                make_leaf(node_id, std::move(pts), std::move(lo));
                return;
            }
            const double half = cur_side / 2.0;
            if (!(half > 0.0) || half == cur_side) {
                // Numerical exhaustion: the cell can no longer shrink.
                make_leaf(node_id, std::move(pts), std::move(lo));
                return;
            }
            std::map<std::vector<std::uint64_t>, std::vector<std::uint32_t>> buckets;
            std::vector<std::uint64_t> code(words);
            for (std::uint32_t p : pts) {
                std::fill(code.begin(), code.end(), 0);
                const auto row = store.point(p);
                for (std::size_t k = 0; k < d; ++k)
                    if (row[k] >= cur_lo[k] + half) code[k / 64] |= 1ull << (k % 64);
                buckets[code].push_back(p);
            }
            ++cur_splits;
            if (buckets.size() == 1) {
                const auto& bits = buckets.begin()->first;
                for (std::size_t k = 0; k < d; ++k)
                    if (bits[k / 64] >> (k % 64) & 1) cur_lo[k] += half;
                cur_side = half;
                continue;
            }
            for (auto& [bits, child_pts] : buckets) {
                const std::size_t child_id = tree.nodes.size();
                tree.nodes.emplace_back();
                tree.nodes[child_id].parent = static_cast<std::int32_t>(node_id);
                tree.nodes[child_id].split_count = cur_splits;
                tree.nodes[child_id].edge_weight =
                    std::ldexp(tree.phi, -static_cast<int>(cur_splits));
                tree.nodes[node_id].children.push_back(
                    static_cast<std::uint32_t>(child_id));
                std::vector<double> child_lo = cur_lo;
                for (std::size_t k = 0; k < d; ++k)
                    if (bits[k / 64] >> (k % 64) & 1) child_lo[k] += half;
                build(child_id, std::move(child_pts), std::move(child_lo), half);
            }
            return;
        }
    }
};

}  // namespace detail

// Randomized kd-tree: each node draws a uniform axis, splits at the lower
// median of the axis coordinates shifted by a uniform offset in
// [-eta*L, eta*L] (L = cell width on that axis), sends points with
// coordinate >= the shifted median right, and recurses until cells hold one
// point (or the depth limit / coordinate-identical degeneracy freezes a
// multi-point leaf). Deterministic given (store, cfg).
inline SpatialTree build_kdtree(const PointStore& store, const TreeBuildConfig& cfg) {
    detail::validate_build_config(cfg, TreeFamily::KD);
    SpatialTree tree;
    tree.config = cfg;
    tree.dim = static_cast<std::uint32_t>(store.dim());
    tree.point_to_leaf.assign(store.size(), 0);
    tree.nodes.emplace_back();

    auto [lo, hi] = detail::bounding_box(store);
    tree.phi = detail::half_max_side(lo, hi);

    RandomStream rng(cfg.seed);
    std::vector<std::uint32_t> order(store.size());
    for (std::size_t p = 0; p < order.size(); ++p)
        order[p] = static_cast<std::uint32_t>(p);
    detail::KdBuilder builder{store, cfg, rng, tree, order, {}};
    builder.build(0, 0, order.size(), lo, hi);
    return tree;
}

// Quadtree over an explicit root cell (low corner `origin`, side 2*phi).
// Every split halves the cell on every axis at once; children are created
// lazily for occupied octants only, in ascending octant-code order.
inline SpatialTree build_quadtree_rooted(const PointStore& store,
                                         const TreeBuildConfig& cfg,
                                         std::vector<double> origin, double phi) {
    detail::validate_build_config(cfg, TreeFamily::QUAD);
    if (origin.size() != store.dim())
        throw argument_error("build_quadtree_rooted: origin dimension mismatch");
    SpatialTree tree;
    tree.config = cfg;
    tree.dim = static_cast<std::uint32_t>(store.dim());
    tree.phi = phi;
    tree.root_lo = origin;
    tree.point_to_leaf.assign(store.size(), 0);
    tree.nodes.emplace_back();

    std::vector<std::uint32_t> pts(store.size());
    for (std::size_t p = 0; p < pts.size(); ++p) pts[p] = static_cast<std::uint32_t>(p);
    detail::QuadBuilder builder{store, cfg, tree};
    builder.build(0, std::move(pts), std::move(origin), 2.0 * phi);
    return tree;
}

// Quadtree with a randomized root placement: the root cell has side 2*phi
// and its low corner is the data minimum pushed down by a per-axis uniform
// shift, capped by the cell's slack on that axis so every point stays inside.
inline SpatialTree build_quadtree(const PointStore& store, const TreeBuildConfig& cfg) {
    detail::validate_build_config(cfg, TreeFamily::QUAD);
    auto [lo, hi] = detail::bounding_box(store);
    const double phi = detail::half_max_side(lo, hi);
    std::vector<double> origin(store.dim());
    RandomStream rng(cfg.seed);
    if (phi > 0.0) {
        for (std::size_t k = 0; k < store.dim(); ++k) {
            const double slack = 2.0 * phi - (hi[k] - lo[k]);
            origin[k] = lo[k] - rng.next_unit() * std::min(phi, slack);
        }
    } else {
        origin = lo;
    }
    return build_quadtree_rooted(store, cfg, std::move(origin), phi);
}

// Low corner and high corner of a quad leaf's cell.
inline std::pair<std::vector<double>, std::vector<double>> quad_leaf_cell(
    const SpatialTree& tree, std::size_t leaf) {
    if (leaf >= tree.nodes.size())
        throw argument_error("quad_leaf_cell: node index out of range");
    const auto& node = tree.nodes[leaf];
    if (node.cell_lo.empty())
        throw argument_error("quad_leaf_cell: node carries no cell bounds");
    std::vector<double> hi = node.cell_lo;
    const double side = tree.cell_side(leaf);
    for (double& h : hi) h += side;
    return {node.cell_lo, hi};
}

}  // namespace otr
