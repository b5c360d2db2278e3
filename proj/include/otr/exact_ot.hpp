#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "otr/distribution.hpp"
#include "otr/errors.hpp"
#include "otr/plan.hpp"
#include "otr/points.hpp"

namespace otr {

struct TransportSolution {
    double cost = 0.0;
    FlowMatching plan;
    // Dual potentials: alpha over supply rows, beta over demand columns.
    // At optimality alpha_i + beta_j <= c_ij everywhere, with equality on
    // every arc that carries mass.
    std::vector<double> dual_supply;
    std::vector<double> dual_demand;
};

struct OptimalityReport {
    double max_dual_violation = 0.0;      // max over (i,j) of alpha_i + beta_j - c_ij
    double max_slack_violation = 0.0;     // max over plan entries of |c_ij - alpha_i - beta_j|
    double max_marginal_violation = 0.0;  // max deviation of plan marginals from supply/demand
};

// Certifies a solution against the LP optimality conditions. Small positive
// violations bounded by accumulated rounding are expected; anything beyond
// ~1e-9 on unit-mass problems indicates a bug.
inline OptimalityReport check_optimality(const TransportSolution& sol,
                                         std::span<const double> cost, std::size_t n,
                                         std::size_t m, std::span<const double> supply,
                                         std::span<const double> demand) {
    OptimalityReport rep;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j)
            rep.max_dual_violation = std::max(
                rep.max_dual_violation,
                sol.dual_supply[i] + sol.dual_demand[j] - cost[i * m + j]);
    for (const auto& e : sol.plan.entries)
        rep.max_slack_violation = std::max(
            rep.max_slack_violation,
            std::fabs(cost[e.i * m + e.j] - sol.dual_supply[e.i] - sol.dual_demand[e.j]));
    auto [row, col] = plan_marginals(sol.plan, n, m);
    for (std::size_t i = 0; i < n; ++i)
        rep.max_marginal_violation =
            std::max(rep.max_marginal_violation, std::fabs(row[i] - supply[i]));
    for (std::size_t j = 0; j < m; ++j)
        rep.max_marginal_violation =
            std::max(rep.max_marginal_violation, std::fabs(col[j] - demand[j]));
    return rep;
}

namespace detail {

// Removes cycles from the support graph of a flow by cost-neutral
// cancellation. At optimality every support arc is tight against the duals,
// so any support cycle has zero net cost; cancelling around it preserves
// both cost and marginals while shrinking the support to a forest, which
// caps the plan at n + m - 1 entries.
inline void cancel_support_cycles(std::vector<double>& flow, std::size_t n,
                                  std::size_t m) {
    const std::size_t v = n + m;
    for (;;) {
        std::vector<std::vector<std::uint32_t>> adj(v);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j)
                if (flow[i * m + j] > 0.0) {
                    adj[i].push_back(static_cast<std::uint32_t>(n + j));
                    adj[n + j].push_back(static_cast<std::uint32_t>(i));
                }
        // DFS over the undirected support graph looking for a cycle.
        std::vector<int> parent(v, -2);  // -2 unvisited, -1 root
        std::vector<std::uint32_t> cycle;
        for (std::size_t root = 0; root < v && cycle.empty(); ++root) {
            if (parent[root] != -2) continue;
            std::vector<std::uint32_t> stack{static_cast<std::uint32_t>(root)};
            parent[root] = -1;
            while (!stack.empty() && cycle.empty()) {
                const std::uint32_t u = stack.back();
                stack.pop_back();
                for (std::uint32_t w : adj[u]) {
                    if (static_cast<int>(w) == parent[u]) continue;
                    if (parent[w] == -2) {
                        parent[w] = static_cast<int>(u);
                        stack.push_back(w);
                    } else {
                        // Back edge u-w: walk both ancestries to build the cycle.
                        std::vector<std::uint32_t> pu{u}, pw{w};
                        for (int x = parent[u]; x >= 0; x = parent[x])
                            pu.push_back(static_cast<std::uint32_t>(x));
                        for (int x = parent[w]; x >= 0; x = parent[x])
                            pw.push_back(static_cast<std::uint32_t>(x));
                        // Trim to the part below the lowest common ancestor.
                        std::size_t a = pu.size(), b = pw.size();
                        while (a > 0 && b > 0 && pu[a - 1] == pw[b - 1]) {
                            --a;
                            --b;
                        }
                        cycle.assign(pu.begin(), pu.begin() + a + 1);
                        for (std::size_t k = b; k-- > 0;) cycle.push_back(pw[k]);
                        break;
                    }
                }
            }
        }
        if (cycle.empty()) return;
        // Alternate decrease/increase around the cycle; cancel by the minimum
        // flow on the decreasing arcs.
        const std::size_t len = cycle.size();
        auto arc = [&](std::size_t k) {
            std::uint32_t a = cycle[k], b = cycle[(k + 1) % len];
            if (a >= n) std::swap(a, b);
            return a * m + (b - n);
        };
        double delta = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < len; k += 2) delta = std::min(delta, flow[arc(k)]);
        for (std::size_t k = 0; k < len; ++k) {
            if (k % 2 == 0) {
                flow[arc(k)] -= delta;
                if (flow[arc(k)] <= delta * 1e-15) flow[arc(k)] = 0.0;
            } else {
                flow[arc(k)] += delta;
            }
        }
        // At least one decreasing arc is now exactly zero; ensure it.
        double lo = std::numeric_limits<double>::infinity();
        std::size_t lo_arc = 0;
        for (std::size_t k = 0; k < len; k += 2)
            if (flow[arc(k)] < lo) {
                lo = flow[arc(k)];
                lo_arc = arc(k);
            }
        flow[lo_arc] = 0.0;
    }
}

}  // namespace detail

// Minimum-cost transport between nonnegative supply and demand vectors with
// equal totals, over a dense row-major cost matrix. Successive shortest
// paths with dual potentials: every augmentation follows a path of zero
// reduced cost after the potential update, so the final duals certify
// optimality (see check_optimality). Plans are reduced to a support forest,
// hence at most n + m - 1 entries.
inline TransportSolution solve_transport(std::span<const double> cost, std::size_t n,
                                         std::size_t m, std::span<const double> supply,
                                         std::span<const double> demand) {
    if (n == 0 || m == 0) throw argument_error("solve_transport: empty side");
    if (cost.size() != n * m) throw argument_error("solve_transport: cost size mismatch");
    if (supply.size() != n || demand.size() != m)
        throw argument_error("solve_transport: marginal size mismatch");
    double total_a = 0.0, total_b = 0.0;
    for (double a : supply) {
        if (!std::isfinite(a) || a < 0.0)
            throw argument_error("solve_transport: supplies must be finite and >= 0");
        total_a += a;
    }
    for (double b : demand) {
        if (!std::isfinite(b) || b < 0.0)
            throw argument_error("solve_transport: demands must be finite and >= 0");
        total_b += b;
    }
    if (std::fabs(total_a - total_b) > 1e-9)
        throw argument_error("solve_transport: supply/demand totals differ by " +
                             std::to_string(total_a - total_b));
    for (double c : cost)
        if (!std::isfinite(c)) throw argument_error("solve_transport: non-finite cost");

    constexpr double kExhausted = 1e-13;
    const double inf = std::numeric_limits<double>::infinity();
    const std::size_t v = n + m;

    std::vector<double> flow(n * m, 0.0);
    std::vector<double> alpha(n, 0.0), beta(m, 0.0);
    std::vector<double> rem_a(supply.begin(), supply.end());
    std::vector<double> rem_b(demand.begin(), demand.end());

    std::vector<double> dist(v);
    std::vector<int> parent(v);
    std::vector<char> settled(v);

    const std::size_t max_rounds = 100 * v + 1000;
    std::size_t rounds = 0;
    for (;;) {
        bool pending = false;
        for (std::size_t i = 0; i < n; ++i)
            if (rem_a[i] > kExhausted) {
                pending = true;
                break;
            }
        if (!pending) break;
        if (++rounds > max_rounds)
            throw numeric_error("solve_transport: augmentation limit exceeded");

        // Dijkstra over reduced costs from all sources with remaining supply.
        std::fill(dist.begin(), dist.end(), inf);
        std::fill(parent.begin(), parent.end(), -1);
        std::fill(settled.begin(), settled.end(), 0);
        for (std::size_t i = 0; i < n; ++i)
            if (rem_a[i] > kExhausted) dist[i] = 0.0;

        int target = -1;
        for (;;) {
            int u = -1;
            double best = inf;
            for (std::size_t x = 0; x < v; ++x)
                if (!settled[x] && dist[x] < best) {
                    best = dist[x];
                    u = static_cast<int>(x);
                }
            if (u < 0) break;
            settled[u] = 1;
            if (static_cast<std::size_t>(u) >= n && rem_b[u - n] > kExhausted) {
                target = u;
                break;
            }
            if (static_cast<std::size_t>(u) < n) {
                const std::size_t i = static_cast<std::size_t>(u);
                for (std::size_t j = 0; j < m; ++j) {
                    const double len =
                        std::max(cost[i * m + j] - alpha[i] - beta[j], 0.0);
                    if (dist[i] + len < dist[n + j]) {
                        dist[n + j] = dist[i] + len;
                        parent[n + j] = u;
                    }
                }
            } else {
                const std::size_t j = static_cast<std::size_t>(u) - n;
                for (std::size_t i = 0; i < n; ++i) {
                    if (flow[i * m + j] <= 0.0) continue;
                    const double len =
                        std::max(alpha[i] + beta[j] - cost[i * m + j], 0.0);
                    if (dist[u] + len < dist[i]) {
                        dist[i] = dist[u] + len;
                        parent[i] = u;
                    }
                }
            }
        }
        if (target < 0)
            throw numeric_error("solve_transport: no augmenting path found");
        const double d_star = dist[target];

        for (std::size_t i = 0; i < n; ++i)
            alpha[i] += d_star - std::min(dist[i], d_star);
        for (std::size_t j = 0; j < m; ++j)
            beta[j] -= d_star - std::min(dist[n + j], d_star);

        // Path bottleneck: remaining demand at the target, remaining supply at
        // the path's origin, and flow on every backward arc in between.
        double delta = rem_b[target - n];
        int x = target;
        while (parent[x] >= 0) {
            const int p = parent[x];
            if (x >= static_cast<int>(n) && p < static_cast<int>(n)) {
                // forward arc p -> x, no bottleneck
            } else {
                // backward arc: x is a source reached from sink p
                delta = std::min(delta, flow[static_cast<std::size_t>(x) * m +
                                             (static_cast<std::size_t>(p) - n)]);
            }
            x = p;
        }
        delta = std::min(delta, rem_a[x]);

        int y = target;
        while (parent[y] >= 0) {
            const int p = parent[y];
            if (y >= static_cast<int>(n)) {
                flow[static_cast<std::size_t>(p) * m + (static_cast<std::size_t>(y) - n)] +=
                    delta;
            } else {
                flow[static_cast<std::size_t>(y) * m + (static_cast<std::size_t>(p) - n)] -=
                    delta;
            }
            y = p;
        }
        rem_a[y] -= delta;
        rem_b[target - n] -= delta;
        if (rem_a[y] <= kExhausted) rem_a[y] = 0.0;
        if (rem_b[target - n] <= kExhausted) rem_b[target - n] = 0.0;
    }

    detail::cancel_support_cycles(flow, n, m);

    TransportSolution sol;
    sol.dual_supply = std::move(alpha);
    sol.dual_demand = std::move(beta);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j)
            if (flow[i * m + j] > 0.0) {
                sol.plan.entries.push_back({static_cast<std::uint32_t>(i),
                                            static_cast<std::uint32_t>(j),
                                            flow[i * m + j]});
                acc += flow[i * m + j] * cost[i * m + j];
            }
    sol.cost = acc;
    return sol;
}

struct ExactTransportConfig {
    // Combined support-size cap; the dense solver is meant for desk scale.
    std::size_t max_total_support = 2000;
};

// Cost matrix between two supports under the ground metric.
inline std::vector<double> support_cost_matrix(const DiscreteDistribution& mu,
                                               const DiscreteDistribution& nu,
                                               const PointStore& store,
                                               GroundMetric metric) {
    const std::size_t n = mu.size(), m = nu.size();
    std::vector<double> cost(n * m);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j)
            cost[i * m + j] =
                ground_distance(store, mu.support()[i], nu.support()[j], metric);
    return cost;
}

// Exact 1-Wasserstein distance (and an optimal plan with dual certificate)
// between two distributions over a shared store.
inline TransportSolution exact_wasserstein(const DiscreteDistribution& mu,
                                           const DiscreteDistribution& nu,
                                           const PointStore& store, GroundMetric metric,
                                           const ExactTransportConfig& cfg = {}) {
    if (mu.size() + nu.size() > cfg.max_total_support)
        throw capacity_error("exact_wasserstein: combined support " +
                             std::to_string(mu.size() + nu.size()) +
                             " exceeds limit " + std::to_string(cfg.max_total_support));
    const auto cost = support_cost_matrix(mu, nu, store, metric);
    return solve_transport(cost, mu.size(), nu.size(), mu.weights(), nu.weights());
}

}  // namespace otr
