// ot-retrieve: dataset ingestion, tree building, pairwise distances, and the
// nearest-neighbor retrieval benchmark, over the otr library.
//
// Exit codes: 0 success, 2 usage/parse error, 3 capacity error, 1 otherwise.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "otr/otr.hpp"

namespace {

// Seed derivation shared by `dist` and `bench` so the two commands agree on
// any given --seed: kd tree draws from seed, quadtree from seed+1, and the
// 1-D projection from seed+2, keeping the three streams distinct.
otr::MethodSpec configured_method(otr::MethodKind kind, const otr::RunConfig& cfg) {
    otr::MethodSpec spec = otr::make_method(kind);
    spec.tree.eta = cfg.eta;
    spec.tree.depth_limit = cfg.depth_limit;
    spec.tree.seed =
        kind == otr::MethodKind::FLOWTREE_QUAD ? cfg.seed + 1 : cfg.seed;
    spec.sinkhorn.reg = cfg.sinkhorn_reg;
    spec.sinkhorn.max_iter = cfg.sinkhorn_max_iter;
    spec.seed = cfg.seed + 2;
    return spec;
}

struct FlagOverrides {
    CLI::Option* methods = nullptr;
    CLI::Option* metric = nullptr;
    CLI::Option* seed = nullptr;
    CLI::Option* eta = nullptr;
    CLI::Option* depth_limit = nullptr;
    CLI::Option* reg = nullptr;
    CLI::Option* max_iter = nullptr;
    CLI::Option* queries = nullptr;
    CLI::Option* r_grid = nullptr;

    std::vector<std::string> methods_v;
    std::string metric_v = "l1";
    std::uint64_t seed_v = 0;
    double eta_v = 0.25;
    std::uint32_t depth_limit_v = otr::kNoDepthLimit;
    double reg_v = 0.1;
    std::uint32_t max_iter_v = 10;
    std::string queries_v = "holdout:0.1";
    std::string r_grid_v = "default";

    void attach(CLI::App* cmd, bool many_methods) {
        methods = cmd->add_option(
            "--method", methods_v,
            "Distance method (exact|sinkhorn|flowtree|kd-flowtree|greedy1d-r)");
        methods->delimiter(',');
        if (!many_methods) methods->expected(0, 1);
        metric = cmd->add_option("--metric", metric_v, "Ground metric (l1|l2)");
        seed = cmd->add_option("--seed", seed_v, "Random seed");
        eta = cmd->add_option("--eta", eta_v,
                              "Median-shift fraction for kd splits, in [0, 0.5)");
        depth_limit = cmd->add_option("--depth-limit", depth_limit_v,
                                      "Maximum splits on any root-to-leaf path");
        reg = cmd->add_option("--reg", reg_v, "Entropic regularization strength");
        max_iter =
            cmd->add_option("--max-iter", max_iter_v, "Matrix-scaling iterations");
        queries = cmd->add_option("--queries", queries_v,
                                  "Query split: holdout:<fraction> or file:<path>");
        r_grid = cmd->add_option(
            "--r-grid", r_grid_v,
            "Candidate fractions: 'default' or comma-separated values in (0, 1]");
    }

    // Flags the user actually passed win over the config file.
    void apply(otr::RunConfig& cfg) const {
        if (methods != nullptr && methods->count() > 0) {
            cfg.methods.clear();
            for (const std::string& name : methods_v)
                cfg.methods.push_back(otr::parse_method_name(name));
            if (cfg.methods.empty())
                throw otr::argument_error("--method list is empty");
        }
        if (metric->count() > 0) {
            if (metric_v == "l1")
                cfg.metric = otr::GroundMetric::L1;
            else if (metric_v == "l2")
                cfg.metric = otr::GroundMetric::L2;
            else
                throw otr::argument_error("--metric must be l1 or l2, got '" +
                                          metric_v + "'");
        }
        if (seed->count() > 0) cfg.seed = seed_v;
        if (eta->count() > 0) {
            if (eta_v < 0.0 || eta_v >= 0.5)
                throw otr::argument_error("--eta must lie in [0, 0.5)");
            cfg.eta = eta_v;
        }
        if (depth_limit->count() > 0) {
            if (depth_limit_v == 0 || depth_limit_v > otr::kNoDepthLimit)
                throw otr::argument_error("--depth-limit out of range");
            cfg.depth_limit = depth_limit_v;
        }
        if (reg->count() > 0) {
            if (reg_v <= 0.0) throw otr::argument_error("--reg must be positive");
            cfg.sinkhorn_reg = reg_v;
        }
        if (max_iter->count() > 0) {
            if (max_iter_v == 0)
                throw otr::argument_error("--max-iter must be positive");
            cfg.sinkhorn_max_iter = max_iter_v;
        }
        if (queries->count() > 0) cfg.queries = otr::parse_queries_spec(queries_v);
        if (r_grid->count() > 0) cfg.r_grid = otr::parse_r_grid(r_grid_v);
    }
};

int run_stats(const std::string& points_path, const std::string& dists_path) {
    const otr::Dataset ds = otr::load_dataset(points_path, dists_path, &std::cerr);
    const otr::DatasetStats st = otr::dataset_stats(ds);
    std::printf("size %zu\n", st.size);
    std::printf("avg_support %.3f\n", st.avg_support);
    std::printf("dim %zu\n", ds.store.dim());
    return 0;
}

int run_dist(const std::string& points_path, const std::string& dists_path,
             std::uint32_t i, std::uint32_t j, const FlagOverrides& flags) {
    otr::RunConfig cfg;
    flags.apply(cfg);
    const otr::MethodKind kind = flags.methods->count() > 0
                                     ? cfg.methods.at(0)
                                     : otr::MethodKind::EXACT;
    const otr::Dataset ds = otr::load_dataset(points_path, dists_path, &std::cerr);
    if (i >= ds.items.size() || j >= ds.items.size())
        throw otr::argument_error("distribution index out of range (file has " +
                                  std::to_string(ds.items.size()) + " lines)");
    const otr::MethodSpec spec = configured_method(kind, cfg);
    const otr::MethodState state = otr::prepare_method(ds.store, spec);
    otr::ExactTransportConfig exact_cfg;
    exact_cfg.max_total_support = cfg.exact_capacity;
    const double d = otr::method_distance(ds.store, ds.items[i], ds.items[j], spec,
                                          state, cfg.metric, exact_cfg);
    std::printf("%.12f\n", d);
    return 0;
}

int run_bench(const std::string& points_path, const std::string& dists_path,
              const std::string& config_path, const std::string& out_prefix,
              const FlagOverrides& flags, bool sweep) {
    otr::RunConfig cfg =
        config_path.empty() ? otr::RunConfig{} : otr::load_config(config_path);
    flags.apply(cfg);

    otr::Dataset full = otr::load_dataset(points_path, dists_path, &std::cerr);
    otr::Dataset db;
    std::vector<otr::DiscreteDistribution> queries;
    if (cfg.queries.kind == otr::QueriesSpec::Kind::HOLDOUT) {
        otr::HoldoutSplit split = otr::holdout_split(full, cfg.queries.holdout_frac);
        db = std::move(split.database);
        queries = std::move(split.queries);
    } else {
        db = std::move(full);
        queries =
            otr::load_distributions(cfg.queries.path, db.store.size(), &std::cerr);
    }

    otr::BenchOptions opt;
    opt.r_grid = cfg.r_grid;
    opt.metric = cfg.metric;
    opt.timing_reps = cfg.timing_reps;
    opt.exact.max_total_support = cfg.exact_capacity;

    const auto emit = [&](const otr::BenchReport& report, const std::string& stem) {
        otr::save_recall_csv(stem + ".recall.csv", report);
        otr::save_report_json(stem + ".report.json", report, &cfg);
        std::printf("wrote %s.recall.csv\n", stem.c_str());
        std::printf("wrote %s.report.json\n", stem.c_str());
    };

    if (!sweep) {
        std::vector<otr::MethodSpec> methods;
        for (otr::MethodKind kind : cfg.methods)
            methods.push_back(configured_method(kind, cfg));
        emit(otr::run_benchmark(db, queries, methods, opt), out_prefix);
        return 0;
    }

    otr::TreeBuildConfig kd_base;
    kd_base.family = otr::TreeFamily::KD;
    kd_base.eta = cfg.eta;
    kd_base.seed = cfg.seed;
    otr::TreeBuildConfig quad_base;
    quad_base.family = otr::TreeFamily::QUAD;
    quad_base.eta = cfg.eta;
    quad_base.seed = cfg.seed + 1;
    const auto reports =
        otr::depth_sweep(db, queries, cfg.depth_limits, kd_base, quad_base, opt);
    for (const auto& [limit, report] : reports)
        emit(report, out_prefix + ".depth" + std::to_string(limit));
    return 0;
}

int run_build_tree(const std::string& points_path, const std::string& out_prefix,
                   const FlagOverrides& flags) {
    otr::RunConfig cfg;
    flags.apply(cfg);
    otr::MethodKind kind = otr::MethodKind::FLOWTREE_KD;
    if (flags.methods->count() > 0) kind = cfg.methods.at(0);
    if (kind != otr::MethodKind::FLOWTREE_KD && kind != otr::MethodKind::FLOWTREE_QUAD)
        throw otr::argument_error(
            "build-tree requires --method flowtree or kd-flowtree");
    const otr::PointStore store = otr::load_points(points_path);
    const otr::MethodSpec spec = configured_method(kind, cfg);
    const otr::SpatialTree tree = kind == otr::MethodKind::FLOWTREE_KD
                                      ? otr::build_kdtree(store, spec.tree)
                                      : otr::build_quadtree(store, spec.tree);
    const std::string path = out_prefix + ".tree";
    otr::save_tree(path, tree);
    const otr::TreeDepthStats st = otr::tree_depth_stats(tree);
    std::printf("wrote %s (%zu nodes, %zu leaves, max splits %u)\n", path.c_str(),
                tree.nodes.size(), st.leaf_count, st.max_splits);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fast 1-Wasserstein nearest-neighbor retrieval"};
    app.require_subcommand(1);

    std::string points_path, dists_path, config_path, out_prefix = "out";
    std::uint32_t dist_i = 0, dist_j = 0;

    CLI::App* stats = app.add_subcommand(
        "stats", "Print dataset size, average support size, and dimension");
    stats->add_option("points", points_path, "Point file")->required();
    stats->add_option("dists", dists_path, "Distribution file")->required();

    CLI::App* dist = app.add_subcommand(
        "dist", "Distance between two distributions under one method");
    dist->add_option("points", points_path, "Point file")->required();
    dist->add_option("dists", dists_path, "Distribution file")->required();
    dist->add_option("i", dist_i, "First distribution index")->required();
    dist->add_option("j", dist_j, "Second distribution index")->required();
    FlagOverrides dist_flags;
    dist_flags.attach(dist, false);

    CLI::App* bench = app.add_subcommand(
        "bench", "Recall benchmark against the exact nearest-neighbor oracle");
    bench->add_option("points", points_path, "Point file")->required();
    bench->add_option("dists", dists_path, "Distribution file")->required();
    bench->add_option("--config", config_path, "Run configuration file");
    bench->add_option("--out-prefix", out_prefix, "Output path prefix");
    FlagOverrides bench_flags;
    bench_flags.attach(bench, true);

    CLI::App* sweep = app.add_subcommand(
        "sweep-depth", "Benchmark the two tree methods across depth limits");
    sweep->add_option("points", points_path, "Point file")->required();
    sweep->add_option("dists", dists_path, "Distribution file")->required();
    sweep->add_option("--config", config_path, "Run configuration file");
    sweep->add_option("--out-prefix", out_prefix, "Output path prefix");
    FlagOverrides sweep_flags;
    sweep_flags.attach(sweep, true);

    CLI::App* build = app.add_subcommand("build-tree",
                                         "Build a partition tree and serialize it");
    build->add_option("points", points_path, "Point file")->required();
    build->add_option("--out-prefix", out_prefix, "Output path prefix");
    FlagOverrides build_flags;
    build_flags.attach(build, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (stats->parsed()) return run_stats(points_path, dists_path);
        if (dist->parsed())
            return run_dist(points_path, dists_path, dist_i, dist_j, dist_flags);
        if (bench->parsed())
            return run_bench(points_path, dists_path, config_path, out_prefix,
                             bench_flags, false);
        if (sweep->parsed())
            return run_bench(points_path, dists_path, config_path, out_prefix,
                             sweep_flags, true);
        if (build->parsed())
            return run_build_tree(points_path, out_prefix, build_flags);
        std::cerr << "error: no command selected\n";
        return 2;
    } catch (const otr::parse_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const otr::argument_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const otr::capacity_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
