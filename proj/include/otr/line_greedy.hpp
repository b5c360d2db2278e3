#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "otr/distribution.hpp"
#include "otr/errors.hpp"
#include "otr/plan.hpp"
#include "otr/points.hpp"
#include "otr/rng.hpp"

namespace otr {

// Scalar coordinates of every store point along one line.
struct LineEmbedding {
    std::vector<double> coords;  // one entry per store point
    std::uint64_t seed = 0;

    bool operator==(const LineEmbedding&) const = default;
};

// Projects all points onto a direction drawn uniformly from the unit sphere
// (normalized Gaussian vector). The map is linear in the points, so in one
// dimension it reduces to multiplication by +-1.
inline LineEmbedding project_to_line_random(const PointStore& store, std::uint64_t seed) {
    const std::size_t d = store.dim();
    RandomStream rng(seed);
    std::vector<double> dir(d);
    double norm = 0.0;
    do {
        norm = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
            dir[k] = rng.next_gaussian();
            norm += dir[k] * dir[k];
        }
        norm = std::sqrt(norm);
    } while (norm == 0.0);
    for (double& x : dir) x /= norm;

    LineEmbedding out;
    out.seed = seed;
    out.coords.resize(store.size());
    for (std::size_t p = 0; p < store.size(); ++p) {
        const auto row = store.point(p);
        double acc = 0.0;
        for (std::size_t k = 0; k < d; ++k) acc += row[k] * dir[k];
        out.coords[p] = acc;
    }
    return out;
}

struct Line1dResult {
    double cost = 0.0;     // transport cost along the line, |s - t| ground cost
    FlowMatching plan;     // feasible coupling; optimal for the 1-D problem
};

// Exact 1-D optimal transport by the sorted greedy sweep: order both
// supports by line coordinate and repeatedly match the smallest unmatched
// mass. On the line the greedy plan is optimal, and its support never
// exceeds n + m - 1 pairs.
inline Line1dResult solve_1d_exact(const DiscreteDistribution& mu,
                                   const DiscreteDistribution& nu,
                                   const LineEmbedding& line) {
    auto position = [&](std::uint32_t point) {
        if (point >= line.coords.size())
            throw argument_error("solve_1d_exact: point " + std::to_string(point) +
                                 " has no line coordinate");
        return line.coords[point];
    };

    // Sort support positions by line coordinate, ties by support position so
    // the sweep is deterministic.
    std::vector<std::uint32_t> ord_a(mu.size()), ord_b(nu.size());
    std::iota(ord_a.begin(), ord_a.end(), 0u);
    std::iota(ord_b.begin(), ord_b.end(), 0u);
    std::sort(ord_a.begin(), ord_a.end(), [&](std::uint32_t x, std::uint32_t y) {
        const double px = position(mu.support()[x]), py = position(mu.support()[y]);
        return px != py ? px < py : x < y;
    });
    std::sort(ord_b.begin(), ord_b.end(), [&](std::uint32_t x, std::uint32_t y) {
        const double px = position(nu.support()[x]), py = position(nu.support()[y]);
        return px != py ? px < py : x < y;
    });

    constexpr double kDust = 1e-12;
    Line1dResult out;
    std::size_t a = 0, b = 0;
    double rem_a = mu.weights()[ord_a[0]], rem_b = nu.weights()[ord_b[0]];
    while (a < ord_a.size() && b < ord_b.size()) {
        double take = std::min(rem_a, rem_b);
        rem_a -= take;
        rem_b -= take;
        if (rem_a <= kDust) {
            take += rem_a;
            rem_a = 0.0;
        }
        if (rem_b <= kDust) {
            take += rem_b;
            rem_b = 0.0;
        }
        const std::uint32_t i = ord_a[a], j = ord_b[b];
        if (take > 0.0) {
            out.plan.entries.push_back({i, j, take});
            out.cost +=
                take * std::fabs(position(mu.support()[i]) - position(nu.support()[j]));
        }
        if (rem_a == 0.0 && ++a < ord_a.size()) rem_a = mu.weights()[ord_a[a]];
        if (rem_b == 0.0 && ++b < ord_b.size()) rem_b = nu.weights()[ord_b[b]];
    }
    return out;
}

// Greedy line estimator: take the 1-D-optimal plan from the projection and
// price it with the full ground metric. The plan is feasible, so the value
// never falls below the exact transport cost.
inline double one_greedy_distance(const DiscreteDistribution& mu,
                                  const DiscreteDistribution& nu,
                                  const LineEmbedding& line, const PointStore& store,
                                  GroundMetric metric = GroundMetric::L1) {
    const auto line_plan = solve_1d_exact(mu, nu, line);
    return plan_ground_cost(line_plan.plan, mu, nu, store, metric);
}

}  // namespace otr
