#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "otr/distribution.hpp"
#include "otr/errors.hpp"
#include "otr/exact_ot.hpp"
#include "otr/points.hpp"

namespace otr {

struct SinkhornConfig {
    double reg = 0.1;
    std::uint32_t max_iter = 10;

    bool operator==(const SinkhornConfig&) const = default;
};

struct SinkhornResult {
    // <C, P> for the (generally infeasible) scaled plan; not a bound on the
    // exact cost in either direction.
    double cost = 0.0;
    std::vector<double> plan;  // row-major n x m
};

// Entropic-regularized scaling in the natural domain. One iteration updates
// u <- mu / (K v) and then v <- nu / (K^T u), starting from v = 1; exactly
// max_iter iterations are run with no early exit. Kernel entries are floored
// at 1e-300 so exp underflow cannot zero them outright.
inline SinkhornResult sinkhorn_transport(const DiscreteDistribution& mu,
                                         const DiscreteDistribution& nu,
                                         const PointStore& store, GroundMetric metric,
                                         const SinkhornConfig& cfg = {}) {
    if (!(cfg.reg > 0.0) || !std::isfinite(cfg.reg))
        throw argument_error("sinkhorn: reg must be finite and > 0");
    if (cfg.max_iter == 0) throw argument_error("sinkhorn: max_iter must be >= 1");

    const std::size_t n = mu.size(), m = nu.size();
    const auto cost = support_cost_matrix(mu, nu, store, metric);
    constexpr double kKernelFloor = 1e-300;
    std::vector<double> kernel(n * m);
    for (std::size_t e = 0; e < kernel.size(); ++e)
        kernel[e] = std::max(std::exp(-cost[e] / cfg.reg), kKernelFloor);

    std::vector<double> u(n, 1.0), v(m, 1.0);
    std::vector<double> ku(m), kv(n);
    const auto reg_str = [&] { return std::to_string(cfg.reg); };
    for (std::uint32_t it = 0; it < cfg.max_iter; ++it) {
        for (std::size_t i = 0; i < n; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < m; ++j) acc += kernel[i * m + j] * v[j];
            kv[i] = acc;
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (kv[i] == 0.0 || !std::isfinite(kv[i]))
                throw numeric_error("sinkhorn: scaling underflow in row " +
                                    std::to_string(i) + " at reg " + reg_str());
            u[i] = mu.weights()[i] / kv[i];
        }
        for (std::size_t j = 0; j < m; ++j) {
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) acc += kernel[i * m + j] * u[i];
            ku[j] = acc;
        }
        for (std::size_t j = 0; j < m; ++j) {
            if (ku[j] == 0.0 || !std::isfinite(ku[j]))
                throw numeric_error("sinkhorn: scaling underflow in column " +
                                    std::to_string(j) + " at reg " + reg_str());
            v[j] = nu.weights()[j] / ku[j];
        }
    }

    SinkhornResult out;
    out.plan.resize(n * m);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            const double p = u[i] * kernel[i * m + j] * v[j];
            if (!std::isfinite(p))
                throw numeric_error("sinkhorn: non-finite plan entry at reg " + reg_str());
            out.plan[i * m + j] = p;
            acc += p * cost[i * m + j];
        }
    out.cost = acc;
    return out;
}

// Transport cost reported by the fixed-round scaling above.
inline double sinkhorn_cost(const DiscreteDistribution& mu, const DiscreteDistribution& nu,
                            const PointStore& store, GroundMetric metric,
                            const SinkhornConfig& cfg = {}) {
    return sinkhorn_transport(mu, nu, store, metric, cfg).cost;
}

}  // namespace otr
