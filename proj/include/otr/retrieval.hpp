#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "otr/distribution.hpp"
#include "otr/errors.hpp"
#include "otr/exact_ot.hpp"
#include "otr/flowtree.hpp"
#include "otr/line_greedy.hpp"
#include "otr/parallel.hpp"
#include "otr/points.hpp"
#include "otr/sinkhorn.hpp"
#include "otr/spatial_tree.hpp"

namespace otr {

enum class MethodKind : std::uint8_t {
    EXACT,
    SINKHORN,
    FLOWTREE_QUAD,
    FLOWTREE_KD,
    ONE_GREEDY_R,
};

inline const char* method_name(MethodKind k) {
    switch (k) {
        case MethodKind::EXACT: return "exact";
        case MethodKind::SINKHORN: return "sinkhorn";
        case MethodKind::FLOWTREE_QUAD: return "flowtree";
        case MethodKind::FLOWTREE_KD: return "kd-flowtree";
        case MethodKind::ONE_GREEDY_R: return "greedy1d-r";
    }
    return "unknown";
}

inline MethodKind parse_method_name(const std::string& name) {
    if (name == "exact") return MethodKind::EXACT;
    if (name == "sinkhorn") return MethodKind::SINKHORN;
    if (name == "flowtree") return MethodKind::FLOWTREE_QUAD;
    if (name == "kd-flowtree") return MethodKind::FLOWTREE_KD;
    if (name == "greedy1d-r") return MethodKind::ONE_GREEDY_R;
    throw argument_error("unknown method '" + name + "'");
}

// A retrieval method plus its configuration. Only the fields relevant to the
// kind are consulted; the tree config's family must agree with the kind.
struct MethodSpec {
    MethodKind kind = MethodKind::FLOWTREE_KD;
    TreeBuildConfig tree;        // FLOWTREE_* kinds
    SinkhornConfig sinkhorn;     // SINKHORN
    std::uint64_t seed = 0;      // ONE_GREEDY_R projection seed

    bool operator==(const MethodSpec&) const = default;
};

inline MethodSpec make_method(MethodKind kind) {
    MethodSpec spec;
    spec.kind = kind;
    if (kind == MethodKind::FLOWTREE_QUAD) spec.tree.family = TreeFamily::QUAD;
    return spec;
}

// Preprocessing owned by a method: the tree or the line embedding. Built
// once per database and shared read-only by any number of query evaluations.
struct MethodState {
    MethodKind built_for = MethodKind::EXACT;
    std::optional<SpatialTree> tree;
    std::optional<LineEmbedding> line;
};

inline MethodState prepare_method(const PointStore& store, const MethodSpec& spec) {
    MethodState state;
    state.built_for = spec.kind;
    switch (spec.kind) {
        case MethodKind::FLOWTREE_KD:
            if (spec.tree.family != TreeFamily::KD)
                throw argument_error("kd-flowtree: tree config family must be kd");
            state.tree = build_kdtree(store, spec.tree);
            break;
        case MethodKind::FLOWTREE_QUAD:
            if (spec.tree.family != TreeFamily::QUAD)
                throw argument_error("flowtree: tree config family must be quad");
            state.tree = build_quadtree(store, spec.tree);
            break;
        case MethodKind::ONE_GREEDY_R:
            state.line = project_to_line_random(store, spec.seed);
            break;
        case MethodKind::EXACT:
        case MethodKind::SINKHORN:
            break;
    }
    return state;
}

// Distance between two distributions under one method. All methods return
// nonnegative scores.
inline double method_distance(const PointStore& store, const DiscreteDistribution& a,
                              const DiscreteDistribution& b, const MethodSpec& spec,
                              const MethodState& state,
                              GroundMetric metric = GroundMetric::L1,
                              const ExactTransportConfig& exact_cfg = {}) {
    if (state.built_for != spec.kind)
        throw argument_error(std::string("method state was built for ") +
                             method_name(state.built_for) + ", not " +
                             method_name(spec.kind));
    switch (spec.kind) {
        case MethodKind::EXACT:
            return exact_wasserstein(a, b, store, metric, exact_cfg).cost;
        case MethodKind::SINKHORN:
            return sinkhorn_cost(a, b, store, metric, spec.sinkhorn);
        case MethodKind::FLOWTREE_QUAD:
        case MethodKind::FLOWTREE_KD:
            return flowtree_distance(*state.tree, a, b, store, metric);
        case MethodKind::ONE_GREEDY_R:
            return one_greedy_distance(a, b, *state.line, store, metric);
    }
    throw argument_error("method_distance: unknown method kind");
}

// Database items ordered by ascending score for one query; score ties break
// toward the lower item index.
struct RankedResult {
    std::uint32_t query_index = 0;
    std::vector<std::pair<std::uint32_t, double>> ranking;  // (item, score)
};

inline RankedResult rank_database(const DiscreteDistribution& query, const Dataset& ds,
                                  const MethodSpec& spec, const MethodState& state,
                                  GroundMetric metric = GroundMetric::L1,
                                  const ExactTransportConfig& exact_cfg = {},
                                  std::uint32_t query_index = 0) {
    if (ds.items.empty()) throw argument_error("rank_database: empty dataset");
    RankedResult out;
    out.query_index = query_index;
    out.ranking.resize(ds.items.size());
    for (std::size_t t = 0; t < ds.items.size(); ++t)
        out.ranking[t] = {static_cast<std::uint32_t>(t),
                          method_distance(ds.store, query, ds.items[t], spec, state,
                                          metric, exact_cfg)};
    std::sort(out.ranking.begin(), out.ranking.end(),
              [](const auto& x, const auto& y) {
                  return x.second != y.second ? x.second < y.second : x.first < y.first;
              });
    return out;
}

// Whether the exact nearest neighbor appears in the top k of a ranking.
inline bool hit_at_k(const RankedResult& result, std::uint32_t exact_nn, std::size_t k) {
    if (k == 0 || k > result.ranking.size())
        throw argument_error("hit_at_k: k out of range");
    for (std::size_t t = 0; t < k; ++t)
        if (result.ranking[t].first == exact_nn) return true;
    return false;
}

// Fraction of queries whose exact nearest neighbor lands in the top k.
inline double recall_at_k(std::span<const RankedResult> results,
                          std::span<const std::uint32_t> exact_nn, std::size_t k) {
    if (results.empty() || results.size() != exact_nn.size())
        throw argument_error("recall_at_k: result/truth size mismatch");
    std::size_t hits = 0;
    for (std::size_t q = 0; q < results.size(); ++q)
        hits += hit_at_k(results[q], exact_nn[q], k) ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(results.size());
}

struct RecallPoint {
    double r = 0.0;       // candidate fraction
    double recall = 0.0;  // Recall@ceil(r * database size)

    bool operator==(const RecallPoint&) const = default;
};

struct MethodReport {
    MethodKind kind = MethodKind::EXACT;
    std::string name;
    std::vector<RecallPoint> curve;
    // Median preprocessing + query time over the timing repetitions; the
    // difference against time_query_only_seconds is preprocessing alone.
    double time_total_seconds = 0.0;
    double time_query_only_seconds = 0.0;
};

struct BenchReport {
    std::size_t database_size = 0;
    std::size_t query_count = 0;
    std::uint32_t dim = 0;
    double avg_support = 0.0;
    std::vector<double> r_grid;
    std::vector<std::uint32_t> exact_nn;  // ground truth per query
    std::vector<MethodReport> methods;
};

struct BenchOptions {
    std::vector<double> r_grid;        // empty: the default percent grid
    GroundMetric metric = GroundMetric::L1;
    std::size_t timing_reps = 3;
    ExactTransportConfig exact;
    std::size_t threads = 0;  // 0: auto (hardware, env-capped)
};

// r in {0.01, 0.02, ..., 1.00}.
inline std::vector<double> default_r_grid() {
    std::vector<double> grid(100);
    for (std::size_t i = 0; i < 100; ++i) grid[i] = static_cast<double>(i + 1) / 100.0;
    return grid;
}

// Candidate-list size for fraction r of a database: ceil(r * size), with a
// small downward nudge so decimal fractions parsed into binary do not round
// one past the intended value.
inline std::size_t candidates_for_fraction(double r, std::size_t database_size) {
    if (!(r > 0.0) || r > 1.0) throw argument_error("r must lie in (0, 1]");
    const double raw = r * static_cast<double>(database_size);
    std::size_t k = static_cast<std::size_t>(std::ceil(raw - 1e-9));
    k = std::max<std::size_t>(1, std::min(k, database_size));
    return k;
}

namespace detail {

inline double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

template <typename E>
[[noreturn]] inline void rethrow_tagged(const std::string& who, const E& e) {
    throw E(who + ": " + e.what());
}

// Re-raises a method failure with the method's identity prefixed, keeping
// the exception type so callers can still map it to an exit code.
template <typename Fn>
inline auto with_identity(const std::string& who, Fn&& fn) {
    try {
        return fn();
    } catch (const capacity_error& e) {
        rethrow_tagged(who, e);
    } catch (const numeric_error& e) {
        rethrow_tagged(who, e);
    } catch (const argument_error& e) {
        rethrow_tagged(who, e);
    }
}

}  // namespace detail

struct HoldoutSplit {
    Dataset database;
    std::vector<DiscreteDistribution> queries;
};

// Reserves the trailing fraction of the dataset's items as queries (at least
// one query, at least one database item). The point store is shared by copy.
inline HoldoutSplit holdout_split(const Dataset& ds, double frac) {
    if (!(frac > 0.0) || frac >= 1.0)
        throw argument_error("holdout_split: fraction must lie in (0, 1)");
    if (ds.items.size() < 2)
        throw argument_error("holdout_split: need at least two distributions");
    std::size_t nq = static_cast<std::size_t>(
        std::llround(frac * static_cast<double>(ds.items.size())));
    nq = std::max<std::size_t>(1, std::min(nq, ds.items.size() - 1));
    const std::size_t ndb = ds.items.size() - nq;
    HoldoutSplit split;
    split.database.store = ds.store;
    split.database.items.assign(ds.items.begin(),
                                ds.items.begin() + static_cast<std::ptrdiff_t>(ndb));
    if (!ds.labels.empty() && ds.labels.size() == ds.items.size())
        split.database.labels.assign(
            ds.labels.begin(), ds.labels.begin() + static_cast<std::ptrdiff_t>(ndb));
    split.queries.assign(ds.items.begin() + static_cast<std::ptrdiff_t>(ndb),
                         ds.items.end());
    return split;
}

// Exact nearest neighbor (ties to the lowest item index) for each query.
inline std::vector<std::uint32_t> exact_nearest_neighbors(
    const Dataset& ds, std::span<const DiscreteDistribution> queries,
    GroundMetric metric, const ExactTransportConfig& exact_cfg = {},
    std::size_t threads = 0) {
    if (ds.items.empty()) throw argument_error("exact_nearest_neighbors: empty dataset");
    std::vector<std::uint32_t> nn(queries.size(), 0);
    detail::with_identity("exact-oracle", [&] {
        parallel_for(
            queries.size(),
            [&](std::size_t q) {
                double best = std::numeric_limits<double>::infinity();
                std::uint32_t arg = 0;
                for (std::size_t t = 0; t < ds.items.size(); ++t) {
                    const double c =
                        exact_wasserstein(queries[q], ds.items[t], ds.store, metric,
                                          exact_cfg)
                            .cost;
                    if (c < best) {
                        best = c;
                        arg = static_cast<std::uint32_t>(t);
                    }
                }
                nn[q] = arg;
            },
            threads);
        return 0;
    });
    return nn;
}

// Full benchmark: exact ground truth once, then per-method preprocessing,
// ranking, and recall curves. Preprocessing and query phases are timed
// separately with a monotonic clock; times are medians over timing_reps
// repetitions (recall values are identical across repetitions by
// determinism, so only the last repetition's rankings are kept).
inline BenchReport run_benchmark(const Dataset& ds,
                                 std::span<const DiscreteDistribution> queries,
                                 std::span<const MethodSpec> methods,
                                 const BenchOptions& opt = {}) {
    if (ds.items.empty()) throw argument_error("run_benchmark: empty dataset");
    if (queries.empty()) throw argument_error("run_benchmark: no queries");
    if (opt.timing_reps == 0) throw argument_error("run_benchmark: timing_reps must be >= 1");

    BenchReport report;
    report.database_size = ds.items.size();
    report.query_count = queries.size();
    report.dim = static_cast<std::uint32_t>(ds.store.dim());
    report.avg_support = dataset_stats(ds).avg_support;
    report.r_grid = opt.r_grid.empty() ? default_r_grid() : opt.r_grid;
    for (double r : report.r_grid) candidates_for_fraction(r, report.database_size);

    report.exact_nn =
        exact_nearest_neighbors(ds, queries, opt.metric, opt.exact, opt.threads);

    using clock = std::chrono::steady_clock;
    for (const MethodSpec& spec : methods) {
        MethodReport mr;
        mr.kind = spec.kind;
        mr.name = method_name(spec.kind);
        std::vector<double> prep_times, query_times;
        std::vector<RankedResult> rankings(queries.size());
        detail::with_identity(mr.name, [&] {
            for (std::size_t rep = 0; rep < opt.timing_reps; ++rep) {
                const auto t0 = clock::now();
                const MethodState state = prepare_method(ds.store, spec);
                const auto t1 = clock::now();
                parallel_for(
                    queries.size(),
                    [&](std::size_t q) {
                        rankings[q] =
                            rank_database(queries[q], ds, spec, state, opt.metric,
                                          opt.exact, static_cast<std::uint32_t>(q));
                    },
                    opt.threads);
                const auto t2 = clock::now();
                prep_times.push_back(std::chrono::duration<double>(t1 - t0).count());
                query_times.push_back(std::chrono::duration<double>(t2 - t1).count());
            }
            return 0;
        });
        const double prep = detail::median_of(prep_times);
        const double query = detail::median_of(query_times);
        mr.time_query_only_seconds = query;
        mr.time_total_seconds = prep + query;
        for (double r : report.r_grid) {
            const std::size_t k = candidates_for_fraction(r, report.database_size);
            mr.curve.push_back({r, recall_at_k(rankings, report.exact_nn, k)});
        }
        report.methods.push_back(std::move(mr));
    }
    return report;
}

// Rebuilds the two tree methods at each depth limit (fixed seeds) and
// benchmarks them; keyed by limit.
inline std::map<std::uint32_t, BenchReport> depth_sweep(
    const Dataset& ds, std::span<const DiscreteDistribution> queries,
    std::span<const std::uint32_t> limits, const TreeBuildConfig& kd_base,
    const TreeBuildConfig& quad_base, const BenchOptions& opt = {}) {
    if (limits.empty()) throw argument_error("depth_sweep: no depth limits");
    std::map<std::uint32_t, BenchReport> out;
    for (std::uint32_t limit : limits) {
        MethodSpec kd = make_method(MethodKind::FLOWTREE_KD);
        kd.tree = kd_base;
        kd.tree.family = TreeFamily::KD;
        kd.tree.depth_limit = limit;
        MethodSpec quad = make_method(MethodKind::FLOWTREE_QUAD);
        quad.tree = quad_base;
        quad.tree.family = TreeFamily::QUAD;
        quad.tree.depth_limit = limit;
        const MethodSpec methods[] = {kd, quad};
        out.emplace(limit, run_benchmark(ds, queries, methods, opt));
    }
    return out;
}

}  // namespace otr
