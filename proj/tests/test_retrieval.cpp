// Tests for the retrieval harness: ranking contracts, recall arithmetic,
// candidate-count rounding, the holdout split, benchmark self-consistency,
// determinism across thread counts, and the depth-limit sweep.
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "otr/retrieval.hpp"
#include "support/synthetic.hpp"

using namespace otr;

namespace {

// Ten distinct 1-D points; item t is a point mass at coordinate t.
Dataset delta_dataset(std::size_t count) {
    std::vector<double> coords(count);
    for (std::size_t t = 0; t < count; ++t) coords[t] = static_cast<double>(t);
    Dataset ds;
    ds.store = PointStore(1, std::move(coords));
    for (std::size_t t = 0; t < count; ++t)
        ds.items.emplace_back(std::vector<std::uint32_t>{static_cast<std::uint32_t>(t)},
                              std::vector<double>{1.0}, count);
    return ds;
}

// Small clustered corpus split into database + queries, shared by the
// benchmark tests below.
struct SmallBench {
    Dataset database;
    std::vector<DiscreteDistribution> queries;
};

SmallBench small_bench(std::uint64_t seed) {
    synth::CorpusShape shape;
    shape.items = 48;
    shape.support = 5;
    shape.dim = 6;
    shape.clusters = 4;
    const auto ds = synth::cluster_corpus(seed, shape);
    const auto split = holdout_split(ds, 0.125);  // 6 queries, 42 database items
    return {split.database, split.queries};
}

std::vector<MethodSpec> all_methods(std::uint64_t seed) {
    std::vector<MethodSpec> methods;
    for (MethodKind kind : {MethodKind::EXACT, MethodKind::SINKHORN,
                            MethodKind::FLOWTREE_QUAD, MethodKind::FLOWTREE_KD,
                            MethodKind::ONE_GREEDY_R}) {
        MethodSpec spec = make_method(kind);
        spec.tree.seed = seed;
        spec.seed = seed + 2;
        methods.push_back(spec);
    }
    return methods;
}

}  // namespace

TEST_CASE("crafted rankings give recall thirds") {
    // Three queries whose exact neighbors sit at approximate ranks 1, 2, 5.
    const std::uint32_t order[3][5] = {
        {4, 3, 2, 1, 0},  // exact nn 4 found at rank 1
        {0, 4, 2, 1, 3},  // exact nn 4 found at rank 2
        {0, 1, 2, 3, 4},  // exact nn 4 found at rank 5
    };
    std::vector<RankedResult> results(3);
    for (std::size_t q = 0; q < 3; ++q) {
        results[q].query_index = static_cast<std::uint32_t>(q);
        for (std::size_t t = 0; t < 5; ++t)
            results[q].ranking.push_back({order[q][t], static_cast<double>(t)});
    }
    const std::vector<std::uint32_t> truth = {4, 4, 4};
    CHECK(recall_at_k(results, truth, 1) == doctest::Approx(1.0 / 3.0));
    CHECK(recall_at_k(results, truth, 2) == doctest::Approx(2.0 / 3.0));
    CHECK(recall_at_k(results, truth, 3) == doctest::Approx(2.0 / 3.0));
    CHECK(recall_at_k(results, truth, 4) == doctest::Approx(2.0 / 3.0));
    CHECK(recall_at_k(results, truth, 5) == doctest::Approx(1.0));

    SUBCASE("argument validation") {
        CHECK_THROWS_AS(recall_at_k(results, truth, 0), argument_error);
        CHECK_THROWS_AS(recall_at_k(results, truth, 6), argument_error);
        const std::vector<std::uint32_t> short_truth = {4, 4};
        CHECK_THROWS_AS(recall_at_k(results, short_truth, 1), argument_error);
        const std::vector<RankedResult> none;
        const std::vector<std::uint32_t> empty_truth;
        CHECK_THROWS_AS(recall_at_k(none, empty_truth, 1), argument_error);
    }
}

TEST_CASE("rank_database orders by score with index tie-break") {
    auto ds = delta_dataset(10);
    const auto spec = make_method(MethodKind::EXACT);
    const auto state = prepare_method(ds.store, spec);

    SUBCASE("query equal to a database item ranks it first with score zero") {
        const auto res = rank_database(ds.items[7], ds, spec, state);
        REQUIRE(res.ranking.size() == 10);
        CHECK(res.ranking[0].first == 7);
        CHECK(res.ranking[0].second == doctest::Approx(0.0));
        // Permutation of all item indices, scores ascending and nonnegative.
        std::vector<bool> seen(10, false);
        for (std::size_t t = 0; t < res.ranking.size(); ++t) {
            seen[res.ranking[t].first] = true;
            CHECK(res.ranking[t].second >= 0.0);
            if (t > 0) CHECK(res.ranking[t].second >= res.ranking[t - 1].second);
        }
        CHECK(std::all_of(seen.begin(), seen.end(), [](bool b) { return b; }));
    }

    SUBCASE("single-item database returns that item") {
        Dataset one;
        one.store = ds.store;
        one.items = {ds.items[3]};
        const auto res = rank_database(ds.items[7], one, spec, state);
        REQUIRE(res.ranking.size() == 1);
        CHECK(res.ranking[0].first == 0);
    }

    SUBCASE("equal scores order by database index") {
        Dataset dup;
        dup.store = ds.store;
        dup.items = {ds.items[5], ds.items[5], ds.items[9]};
        const auto res = rank_database(ds.items[5], dup, spec, state);
        REQUIRE(res.ranking.size() == 3);
        CHECK(res.ranking[0].first == 0);
        CHECK(res.ranking[1].first == 1);
        CHECK(res.ranking[2].first == 2);
        CHECK(res.ranking[0].second == res.ranking[1].second);
    }

    SUBCASE("empty dataset is rejected") {
        Dataset empty;
        empty.store = ds.store;
        CHECK_THROWS_AS(rank_database(ds.items[0], empty, spec, state), argument_error);
    }

    SUBCASE("state built for another method is rejected") {
        const auto kd = make_method(MethodKind::FLOWTREE_KD);
        const auto kd_state = prepare_method(ds.store, kd);
        CHECK_THROWS_AS(method_distance(ds.store, ds.items[0], ds.items[1], spec, kd_state),
                        argument_error);
        try {
            method_distance(ds.store, ds.items[0], ds.items[1], spec, kd_state);
        } catch (const argument_error& e) {
            const std::string msg = e.what();
            CHECK(msg.find("kd-flowtree") != std::string::npos);
            CHECK(msg.find("exact") != std::string::npos);
        }
    }
}

TEST_CASE("candidate counts round as intended") {
    CHECK(candidates_for_fraction(0.1, 500) == 50);
    CHECK(candidates_for_fraction(0.05, 500) == 25);
    CHECK(candidates_for_fraction(1.0, 500) == 500);
    CHECK(candidates_for_fraction(0.001, 500) == 1);
    CHECK(candidates_for_fraction(1e-9, 500) == 1);  // clamps up to one
    // 0.07 * 300 lands a hair above 21 in binary; the nudge keeps it at 21.
    CHECK(candidates_for_fraction(0.07, 300) == 21);
    CHECK(candidates_for_fraction(1.0 / 3.0, 3) == 1);
    CHECK(candidates_for_fraction(0.34, 3) == 2);
    CHECK_THROWS_AS(candidates_for_fraction(0.0, 10), argument_error);
    CHECK_THROWS_AS(candidates_for_fraction(-0.1, 10), argument_error);
    CHECK_THROWS_AS(candidates_for_fraction(1.5, 10), argument_error);
}

TEST_CASE("holdout split reserves the trailing items") {
    synth::CorpusShape shape;
    shape.items = 10;
    shape.support = 3;
    shape.dim = 2;
    shape.clusters = 2;
    const auto ds = synth::cluster_corpus(7, shape);
    REQUIRE(ds.labels.size() == 10);

    const auto split = holdout_split(ds, 0.3);
    CHECK(split.database.items.size() == 7);
    CHECK(split.queries.size() == 3);
    CHECK(split.database.labels.size() == 7);
    CHECK(split.database.store.size() == ds.store.size());
    for (std::size_t t = 0; t < 7; ++t)
        CHECK(split.database.items[t].support()[0] == ds.items[t].support()[0]);
    for (std::size_t q = 0; q < 3; ++q)
        CHECK(split.queries[q].support()[0] == ds.items[7 + q].support()[0]);

    SUBCASE("at least one item stays on each side") {
        Dataset two;
        two.store = ds.store;
        two.items = {ds.items[0], ds.items[1]};
        const auto tiny = holdout_split(two, 0.5);
        CHECK(tiny.database.items.size() == 1);
        CHECK(tiny.queries.size() == 1);
    }

    SUBCASE("argument validation") {
        CHECK_THROWS_AS(holdout_split(ds, 0.0), argument_error);
        CHECK_THROWS_AS(holdout_split(ds, 1.0), argument_error);
        Dataset one;
        one.store = ds.store;
        one.items = {ds.items[0]};
        CHECK_THROWS_AS(holdout_split(one, 0.5), argument_error);
    }
}

TEST_CASE("benchmark self-consistency on a clustered corpus") {
    const auto bench = small_bench(123);
    BenchOptions opt;
    opt.r_grid = {0.05, 0.25, 0.5, 1.0};
    opt.timing_reps = 1;
    const auto methods = all_methods(11);
    const auto report = run_benchmark(bench.database, bench.queries, methods, opt);

    CHECK(report.database_size == bench.database.items.size());
    CHECK(report.query_count == bench.queries.size());
    CHECK(report.dim == 6);
    CHECK(report.exact_nn.size() == bench.queries.size());
    REQUIRE(report.methods.size() == methods.size());

    // Ground truth embedded in the report matches a direct oracle call.
    const auto truth = exact_nearest_neighbors(bench.database, bench.queries,
                                               GroundMetric::L1);
    CHECK(report.exact_nn == truth);

    for (const auto& mr : report.methods) {
        REQUIRE(mr.curve.size() == opt.r_grid.size());
        // Monotone in r; recall 1 at r = 1; times consistent.
        for (std::size_t t = 0; t < mr.curve.size(); ++t) {
            CHECK(mr.curve[t].r == opt.r_grid[t]);
            CHECK(mr.curve[t].recall >= 0.0);
            CHECK(mr.curve[t].recall <= 1.0);
            if (t > 0) CHECK(mr.curve[t].recall >= mr.curve[t - 1].recall);
        }
        CHECK(mr.curve.back().recall == doctest::Approx(1.0));
        CHECK(mr.time_total_seconds >= mr.time_query_only_seconds);
        CHECK(mr.time_query_only_seconds >= 0.0);
    }

    // The exact method reproduces the oracle ranking: flat curve at 1.
    CHECK(report.methods[0].name == "exact");
    for (const auto& pt : report.methods[0].curve)
        CHECK(pt.recall == doctest::Approx(1.0));
}

TEST_CASE("benchmark curves replay identically across runs and thread counts") {
    const auto bench = small_bench(321);
    const auto methods = all_methods(5);
    BenchOptions opt;
    opt.r_grid = {0.1, 0.5, 1.0};
    opt.timing_reps = 1;
    opt.threads = 1;
    const auto a = run_benchmark(bench.database, bench.queries, methods, opt);
    const auto b = run_benchmark(bench.database, bench.queries, methods, opt);
    opt.threads = 3;
    const auto c = run_benchmark(bench.database, bench.queries, methods, opt);

    CHECK(a.exact_nn == b.exact_nn);
    CHECK(a.exact_nn == c.exact_nn);
    REQUIRE(a.methods.size() == b.methods.size());
    REQUIRE(a.methods.size() == c.methods.size());
    for (std::size_t s = 0; s < a.methods.size(); ++s) {
        CHECK(a.methods[s].curve == b.methods[s].curve);
        CHECK(a.methods[s].curve == c.methods[s].curve);
    }
}

TEST_CASE("benchmark argument validation") {
    const auto bench = small_bench(99);
    const auto methods = all_methods(1);
    BenchOptions opt;
    opt.timing_reps = 1;

    Dataset empty;
    empty.store = bench.database.store;
    CHECK_THROWS_AS(run_benchmark(empty, bench.queries, methods, opt), argument_error);

    const std::vector<DiscreteDistribution> no_queries;
    CHECK_THROWS_AS(run_benchmark(bench.database, no_queries, methods, opt),
                    argument_error);

    opt.timing_reps = 0;
    CHECK_THROWS_AS(run_benchmark(bench.database, bench.queries, methods, opt),
                    argument_error);

    opt.timing_reps = 1;
    opt.r_grid = {0.5, 1.5};
    CHECK_THROWS_AS(run_benchmark(bench.database, bench.queries, methods, opt),
                    argument_error);
}

TEST_CASE("oracle capacity errors carry the oracle's identity") {
    const auto bench = small_bench(202);
    const auto methods = all_methods(1);
    BenchOptions opt;
    opt.timing_reps = 1;
    opt.exact.max_total_support = 4;  // any pair exceeds this
    try {
        (void)run_benchmark(bench.database, bench.queries, methods, opt);
        FAIL("expected capacity_error");
    } catch (const capacity_error& e) {
        const std::string msg = e.what();
        CHECK(msg.find("exact-oracle") != std::string::npos);
        CHECK(msg.find('4') != std::string::npos);
    }
}

TEST_CASE("depth sweep rebuilds per limit and matches unlimited at the cap") {
    const auto bench = small_bench(550);
    TreeBuildConfig kd_base;
    kd_base.seed = 9;
    TreeBuildConfig quad_base;
    quad_base.family = TreeFamily::QUAD;
    quad_base.seed = 10;
    BenchOptions opt;
    opt.r_grid = {0.1, 0.5, 1.0};
    opt.timing_reps = 1;

    const std::vector<std::uint32_t> limits = {2, kNoDepthLimit};
    const auto sweep = depth_sweep(bench.database, bench.queries, limits, kd_base,
                                   quad_base, opt);
    REQUIRE(sweep.size() == 2);
    REQUIRE(sweep.count(2) == 1);
    REQUIRE(sweep.count(kNoDepthLimit) == 1);
    for (const auto& [limit, report] : sweep) {
        REQUIRE(report.methods.size() == 2);
        CHECK(report.methods[0].name == std::string("kd-flowtree"));
        CHECK(report.methods[1].name == std::string("flowtree"));
    }

    // The cap value equals the default "unlimited" limit, so a direct
    // benchmark with the base configs reproduces that entry's curves.
    MethodSpec kd = make_method(MethodKind::FLOWTREE_KD);
    kd.tree = kd_base;
    MethodSpec quad = make_method(MethodKind::FLOWTREE_QUAD);
    quad.tree = quad_base;
    const std::vector<MethodSpec> methods = {kd, quad};
    const auto direct = run_benchmark(bench.database, bench.queries, methods, opt);
    for (std::size_t s = 0; s < 2; ++s)
        CHECK(sweep.at(kNoDepthLimit).methods[s].curve == direct.methods[s].curve);

    const std::vector<std::uint32_t> none;
    CHECK_THROWS_AS(depth_sweep(bench.database, bench.queries, none, kd_base, quad_base,
                                opt),
                    argument_error);
}

TEST_CASE("approximate methods beat chance on clustered data") {
    // Not an accuracy acceptance gate, just a sanity floor: on well-separated
    // clusters every approximation should place the exact neighbor in the top
    // half far more often than random guessing would.
    const auto bench = small_bench(777);
    BenchOptions opt;
    opt.r_grid = {0.5};
    opt.timing_reps = 1;
    const auto methods = all_methods(3);
    const auto report = run_benchmark(bench.database, bench.queries, methods, opt);
    for (const auto& mr : report.methods) CHECK(mr.curve[0].recall >= 0.5);
}
