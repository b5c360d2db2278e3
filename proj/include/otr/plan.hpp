#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "otr/distribution.hpp"
#include "otr/errors.hpp"
#include "otr/points.hpp"

namespace otr {

// Sparse coupling between two distributions. Entries hold positions into the
// respective supports (not raw point indices) and a nonnegative mass.
struct FlowMatching {
    struct Entry {
        std::uint32_t i = 0;  // position into the first distribution's support
        std::uint32_t j = 0;  // position into the second distribution's support
        double mass = 0.0;

        bool operator==(const Entry&) const = default;
    };
    std::vector<Entry> entries;

    bool operator==(const FlowMatching&) const = default;
};

// Row and column sums of a plan, for feasibility checks.
inline std::pair<std::vector<double>, std::vector<double>>
plan_marginals(const FlowMatching& plan, std::size_t n, std::size_t m) {
    std::vector<double> row(n, 0.0), col(m, 0.0);
    for (const auto& e : plan.entries) {
        if (e.i >= n || e.j >= m)
            throw argument_error("plan entry out of range");
        row[e.i] += e.mass;
        col[e.j] += e.mass;
    }
    return {row, col};
}

// Cost of a plan under the ground metric: sum of mass * d(x_i, y_j). Any
// feasible plan evaluated this way upper-bounds the optimal transport cost.
inline double plan_ground_cost(const FlowMatching& plan, const DiscreteDistribution& mu,
                               const DiscreteDistribution& nu, const PointStore& store,
                               GroundMetric metric) {
    double acc = 0.0;
    for (const auto& e : plan.entries) {
        if (e.i >= mu.size() || e.j >= nu.size())
            throw argument_error("plan entry out of range for the given supports");
        acc += e.mass * ground_distance(store, mu.support()[e.i], nu.support()[e.j], metric);
    }
    return acc;
}

}  // namespace otr
