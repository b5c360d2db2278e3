#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "otr/distribution.hpp"
#include "otr/errors.hpp"
#include "otr/plan.hpp"
#include "otr/points.hpp"
#include "otr/spatial_tree.hpp"

namespace otr {

// Entries with less mass than this are folded into the pair being recorded
// instead of surviving as dust, so marginals stay exact to ~1e-12 per entry.
inline constexpr double kMassEps = 1e-12;

struct FlowtreeEvaluation {
    FlowMatching matching;
    // Cost of the matching under the tree metric; equals the optimal
    // transport cost on the tree.
    double tree_cost = 0.0;
    // Cost of the same matching under the ground metric; NaN when no store
    // was supplied. Always an upper bound on the exact transport cost.
    double ground_cost = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

struct PendingEntry {
    std::uint32_t pos;  // position into the owning distribution's support
    double mass;
    double depth;  // accumulated edge weight from the origin leaf
};

struct NodeLists {
    std::vector<PendingEntry> mu, nu;
};

inline void seed_lists(const SpatialTree& tree, const DiscreteDistribution& d,
                       std::map<std::uint32_t, NodeLists>& active, bool into_mu) {
    for (std::size_t p = 0; p < d.size(); ++p) {
        const std::uint32_t point = d.support()[p];
        if (point >= tree.point_to_leaf.size())
            throw argument_error("flowtree: support point " + std::to_string(point) +
                                 " is not mapped in the tree");
        auto& lists = active[tree.point_to_leaf[point]];
        auto& list = into_mu ? lists.mu : lists.nu;
        list.push_back({static_cast<std::uint32_t>(p), d.weights()[p], 0.0});
    }
}

}  // namespace detail

// Greedy bottom-up evaluation: unmatched mass is matched where it first
// meets, walking from the leaves toward the root. Within a node both sides
// are kept in ascending support-position order and matched front to front,
// which makes the produced value symmetric in (mu, nu). The matching is an
// optimal coupling under the tree metric; its ground-metric cost is the
// estimator's distance.
inline FlowtreeEvaluation flowtree_evaluate(const SpatialTree& tree,
                                            const DiscreteDistribution& mu,
                                            const DiscreteDistribution& nu,
                                            const PointStore* store = nullptr,
                                            GroundMetric metric = GroundMetric::L1) {
    FlowtreeEvaluation out;
    out.matching.entries.reserve(mu.size() + nu.size());

    // Keyed by node index; children were constructed after their parents, so
    // draining the largest key first processes every child before its parent.
    std::map<std::uint32_t, detail::NodeLists> active;
    detail::seed_lists(tree, mu, active, true);
    detail::seed_lists(tree, nu, active, false);

    double tree_cost = 0.0;
    double ground_cost = 0.0;
    const auto by_pos = [](const detail::PendingEntry& x, const detail::PendingEntry& y) {
        return x.pos < y.pos;
    };

    while (!active.empty()) {
        const auto it = std::prev(active.end());
        const std::uint32_t node_id = it->first;
        detail::NodeLists lists = std::move(it->second);
        active.erase(it);

        std::sort(lists.mu.begin(), lists.mu.end(), by_pos);
        std::sort(lists.nu.begin(), lists.nu.end(), by_pos);

        std::size_t a = 0, b = 0;
        while (a < lists.mu.size() && b < lists.nu.size()) {
            auto& pa = lists.mu[a];
            auto& pb = lists.nu[b];
            double take = std::min(pa.mass, pb.mass);
            double rem_a = pa.mass - take;
            double rem_b = pb.mass - take;
            if (rem_a <= kMassEps) {
                take += rem_a;
                rem_a = 0.0;
            }
            if (rem_b <= kMassEps) {
                take += rem_b;
                rem_b = 0.0;
            }
            if (take > 0.0) {
                out.matching.entries.push_back({pa.pos, pb.pos, take});
                tree_cost += take * (pa.depth + pb.depth);
                if (store != nullptr)
                    ground_cost += take * ground_distance(*store, mu.support()[pa.pos],
                                                          nu.support()[pb.pos], metric);
            }
            if (rem_a == 0.0)
                ++a;
            else
                pa.mass = rem_a;
            if (rem_b == 0.0)
                ++b;
            else
                pb.mass = rem_b;
        }

        const auto& node = tree.nodes[node_id];
        auto push_up = [&](std::vector<detail::PendingEntry>& rest, std::size_t from,
                           bool into_mu) {
            if (from >= rest.size()) return;
            if (node.parent < 0) {
                // Mass totals on both sides are 1, so any residual at the
                // root is accumulated rounding.
                double residual = 0.0;
                for (std::size_t k = from; k < rest.size(); ++k) residual += rest[k].mass;
                if (residual > 1e-8)
                    throw numeric_error("flowtree: unmatched mass " +
                                        std::to_string(residual) + " at the root");
                return;
            }
            auto& parent_lists = active[static_cast<std::uint32_t>(node.parent)];
            auto& dst = into_mu ? parent_lists.mu : parent_lists.nu;
            for (std::size_t k = from; k < rest.size(); ++k) {
                detail::PendingEntry e = rest[k];
                e.depth += node.edge_weight;
                dst.push_back(e);
            }
        };
        push_up(lists.mu, a, true);
        push_up(lists.nu, b, false);
    }

    out.tree_cost = tree_cost;
    if (store != nullptr) out.ground_cost = ground_cost;
    return out;
}

// Optimal coupling under the tree metric, as produced by the greedy merge.
inline FlowMatching flowtree_matching(const SpatialTree& tree,
                                      const DiscreteDistribution& mu,
                                      const DiscreteDistribution& nu) {
    return flowtree_evaluate(tree, mu, nu).matching;
}

// Ground-metric cost of the tree-optimal coupling. Feasibility of the
// coupling makes this a certified upper bound on (hence never below) the
// exact 1-Wasserstein distance.
inline double flowtree_distance(const SpatialTree& tree, const DiscreteDistribution& mu,
                                const DiscreteDistribution& nu, const PointStore& store,
                                GroundMetric metric = GroundMetric::L1) {
    return flowtree_evaluate(tree, mu, nu, &store, metric).ground_cost;
}

// Closed-form 1-Wasserstein distance under the tree metric: per-node mass
// differences weighted by the edge to the parent. Computed as its own
// bottom-up pass, independent of the matching route.
inline double tree_wasserstein(const SpatialTree& tree, const DiscreteDistribution& mu,
                               const DiscreteDistribution& nu) {
    std::map<std::uint32_t, std::pair<double, double>> mass;
    auto seed = [&](const DiscreteDistribution& d, bool into_mu) {
        for (std::size_t p = 0; p < d.size(); ++p) {
            const std::uint32_t point = d.support()[p];
            if (point >= tree.point_to_leaf.size())
                throw argument_error("flowtree: support point " + std::to_string(point) +
                                     " is not mapped in the tree");
            auto& slot = mass[tree.point_to_leaf[point]];
            (into_mu ? slot.first : slot.second) += d.weights()[p];
        }
    };
    seed(mu, true);
    seed(nu, false);

    double acc = 0.0;
    while (!mass.empty()) {
        const auto it = std::prev(mass.end());
        const std::uint32_t node_id = it->first;
        const auto [m_mu, m_nu] = it->second;
        mass.erase(it);
        const auto& node = tree.nodes[node_id];
        if (node.parent < 0) continue;
        acc += node.edge_weight * std::fabs(m_mu - m_nu);
        auto& up = mass[static_cast<std::uint32_t>(node.parent)];
        up.first += m_mu;
        up.second += m_nu;
    }
    return acc;
}

}  // namespace otr
