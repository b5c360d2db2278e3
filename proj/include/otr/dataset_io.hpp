#pragma once

#include <cctype>
#include <cinttypes>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "otr/binary_io.hpp"
#include "otr/distribution.hpp"
#include "otr/errors.hpp"
#include "otr/points.hpp"
#include "otr/retrieval.hpp"

#include "json.hpp"

namespace otr {

// ---------------------------------------------------------------------------
// Point file: "OTPTS1" magic, u32 count, u32 dim, then count*dim IEEE-754
// binary32 coordinates, row-major, little-endian.  Coordinates are held in
// doubles in memory; every binary32 value is exactly representable, so a
// write/read cycle of data that came from this format is bit-exact.
// ---------------------------------------------------------------------------

inline constexpr char kPointsMagic[] = "OTPTS1";

inline std::string serialize_points(const PointStore& store) {
    using namespace detail;
    std::string out;
    out.append(kPointsMagic, 6);
    put_u32(out, static_cast<std::uint32_t>(store.size()));
    put_u32(out, static_cast<std::uint32_t>(store.dim()));
    for (std::size_t i = 0; i < store.size(); ++i)
        for (double c : store.point(i)) put_f32(out, static_cast<float>(c));
    return out;
}

inline PointStore deserialize_points(const std::string& bytes) {
    using namespace detail;
    ByteReader r{bytes, 0, "point file"};
    r.need(6);
    if (bytes.compare(0, 6, kPointsMagic, 6) != 0)
        throw parse_error("point file: bad magic");
    r.pos = 6;
    const std::uint64_t count = r.u32();
    const std::uint64_t dim = r.u32();
    if (count == 0 || dim == 0)
        throw parse_error("point file: zero point count or dimension");
    const std::uint64_t expected = 14 + 4 * count * dim;
    if (bytes.size() != expected)
        throw parse_error("point file: size " + std::to_string(bytes.size()) +
                          " does not match header (expected " +
                          std::to_string(expected) + ")");
    std::vector<double> coords;
    coords.reserve(count * dim);
    for (std::uint64_t k = 0; k < count * dim; ++k)
        coords.push_back(static_cast<double>(r.f32()));
    return PointStore(static_cast<std::size_t>(dim), std::move(coords));
}

inline void save_points(const std::string& path, const PointStore& store) {
    detail::write_file_bytes(path, serialize_points(store));
}

inline PointStore load_points(const std::string& path) {
    try {
        return deserialize_points(detail::read_file_bytes(path));
    } catch (const parse_error& e) {
        throw parse_error(path + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Distribution file: one distribution per non-empty line.  '#' starts a
// comment.  A line is either bare point indices ("3 17 42", uniform weights)
// or index:weight pairs ("3:0.5 17:0.25 42:0.25"); the two styles cannot be
// mixed on one line.  Explicit weights are normalized on load; a raw sum off
// by more than 1e-6 earns a warning.
// ---------------------------------------------------------------------------

namespace detail {

inline bool parse_index_token(const std::string& tok, std::uint32_t& out) {
    if (tok.empty()) return false;
    for (char c : tok)
        if (!std::isdigit(static_cast<unsigned char>(c))) return false;
    errno = 0;
    char* end = nullptr;
    const unsigned long long v = std::strtoull(tok.c_str(), &end, 10);
    if (errno != 0 || end != tok.c_str() + tok.size() || v > 0xffffffffULL)
        return false;
    out = static_cast<std::uint32_t>(v);
    return true;
}

inline bool parse_double_token(const std::string& tok, double& out) {
    if (tok.empty()) return false;
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end != tok.c_str() + tok.size()) return false;
    out = v;
    return true;
}

}  // namespace detail

inline std::vector<DiscreteDistribution> parse_distributions(
    std::istream& in, std::size_t store_size, std::ostream* warn = nullptr) {
    std::vector<DiscreteDistribution> items;
    std::string raw;
    long line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        if (const auto hash = raw.find('#'); hash != std::string::npos)
            raw.erase(hash);
        std::istringstream tokens(raw);
        std::vector<std::uint32_t> support;
        std::vector<double> weights;
        bool explicit_weights = false;
        std::string tok;
        while (tokens >> tok) {
            const auto colon = tok.find(':');
            if (support.empty() && weights.empty())
                explicit_weights = colon != std::string::npos;
            if ((colon != std::string::npos) != explicit_weights)
                throw parse_error("cannot mix bare indices and index:weight entries",
                                  line_no);
            std::uint32_t idx = 0;
            if (colon == std::string::npos) {
                if (!detail::parse_index_token(tok, idx))
                    throw parse_error("bad point index '" + tok + "'", line_no);
                support.push_back(idx);
            } else {
                double w = 0.0;
                if (!detail::parse_index_token(tok.substr(0, colon), idx))
                    throw parse_error("bad point index '" + tok.substr(0, colon) + "'",
                                      line_no);
                if (!detail::parse_double_token(tok.substr(colon + 1), w))
                    throw parse_error("bad weight '" + tok.substr(colon + 1) + "'",
                                      line_no);
                if (!std::isfinite(w) || w < 0.0)
                    throw parse_error("weight must be finite and non-negative",
                                      line_no);
                support.push_back(idx);
                weights.push_back(w);
            }
            if (idx >= store_size)
                throw parse_error("point index " + std::to_string(idx) +
                                      " out of range (store has " +
                                      std::to_string(store_size) + " points)",
                                  line_no);
        }
        if (support.empty()) continue;  // blank or comment-only line
        for (std::size_t a = 0; a < support.size(); ++a)
            for (std::size_t b = a + 1; b < support.size(); ++b)
                if (support[a] == support[b])
                    throw parse_error("duplicate point index " +
                                          std::to_string(support[a]),
                                      line_no);
        if (!explicit_weights) {
            items.push_back(uniform_distribution(support, store_size));
            continue;
        }
        double sum = 0.0;
        for (double w : weights) sum += w;
        if (sum <= 0.0) throw parse_error("weights sum to zero", line_no);
        if (std::abs(sum - 1.0) > 1e-6 && warn != nullptr)
            *warn << "warning: line " << line_no << ": weights sum to " << sum
                  << "; normalizing\n";
        // Skip the division when the sum is already 1 up to rounding noise so
        // that writing and re-reading a normalized distribution is bit-exact.
        if (std::abs(sum - 1.0) > 1e-12)
            for (double& w : weights) w /= sum;
        items.emplace_back(std::move(support), std::move(weights), store_size);
    }
    return items;
}

inline std::vector<DiscreteDistribution> load_distributions(
    const std::string& path, std::size_t store_size, std::ostream* warn = nullptr) {
    std::ifstream in(path);
    if (!in) throw parse_error("cannot open '" + path + "'");
    try {
        return parse_distributions(in, store_size, warn);
    } catch (const parse_error& e) {
        throw parse_error(path + ": " + e.what());
    }
}

inline std::string format_distributions(const std::vector<DiscreteDistribution>& items) {
    std::string out;
    char buf[64];
    for (const DiscreteDistribution& d : items) {
        bool uniform = true;
        for (double w : d.weights())
            if (w != d.weights()[0]) uniform = false;
        for (std::size_t k = 0; k < d.size(); ++k) {
            if (k > 0) out.push_back(' ');
            if (uniform) {
                std::snprintf(buf, sizeof buf, "%" PRIu32, d.support()[k]);
            } else {
                std::snprintf(buf, sizeof buf, "%" PRIu32 ":%.17g", d.support()[k],
                              d.weights()[k]);
            }
            out += buf;
        }
        out.push_back('\n');
    }
    return out;
}

inline void save_distributions(const std::string& path,
                               const std::vector<DiscreteDistribution>& items) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw parse_error("cannot open '" + path + "' for writing");
    out << format_distributions(items);
    if (!out) throw parse_error("write failed for '" + path + "'");
}

inline Dataset load_dataset(const std::string& points_path,
                            const std::string& dists_path,
                            std::ostream* warn = nullptr) {
    Dataset ds{load_points(points_path), {}, {}};
    ds.items = load_distributions(dists_path, ds.store.size(), warn);
    return ds;
}

// ---------------------------------------------------------------------------
// Run configuration: "key = value" lines with '#' comments.
// ---------------------------------------------------------------------------

struct QueriesSpec {
    enum class Kind { HOLDOUT, FILE } kind = Kind::HOLDOUT;
    double holdout_frac = 0.1;  // fraction of dataset reserved as queries
    std::string path;           // distribution file when kind == FILE

    bool operator==(const QueriesSpec&) const = default;
};

struct RunConfig {
    std::vector<MethodKind> methods = {MethodKind::EXACT, MethodKind::SINKHORN,
                                       MethodKind::FLOWTREE_QUAD,
                                       MethodKind::FLOWTREE_KD,
                                       MethodKind::ONE_GREEDY_R};
    GroundMetric metric = GroundMetric::L1;
    std::uint64_t seed = 0;
    double eta = 0.25;
    std::uint32_t depth_limit = kNoDepthLimit;
    std::vector<std::uint32_t> depth_limits = {2, 5, 8, 10, 20, 50};
    double sinkhorn_reg = 0.1;
    std::uint32_t sinkhorn_max_iter = 10;
    std::vector<double> r_grid;  // empty = default_r_grid()
    QueriesSpec queries;
    std::size_t timing_reps = 3;
    std::size_t exact_capacity = 2000;

    bool operator==(const RunConfig&) const = default;
};

namespace detail {

inline std::string trim(std::string_view s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return std::string(s.substr(a, b - a));
}

inline std::vector<std::string> split_commas(const std::string& s) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (start <= s.size()) {
        const std::size_t comma = s.find(',', start);
        if (comma == std::string::npos) {
            parts.push_back(trim(std::string_view(s).substr(start)));
            break;
        }
        parts.push_back(trim(std::string_view(s).substr(start, comma - start)));
        start = comma + 1;
    }
    return parts;
}

inline double config_double(const std::string& value, const char* key, long line) {
    double v = 0.0;
    if (!parse_double_token(value, v) || !std::isfinite(v))
        throw parse_error(std::string("bad value for ") + key + ": '" + value + "'",
                          line);
    return v;
}

inline std::uint64_t config_uint(const std::string& value, const char* key,
                                 long line) {
    if (value.empty()) throw parse_error(std::string("empty value for ") + key, line);
    for (char c : value)
        if (!std::isdigit(static_cast<unsigned char>(c)))
            throw parse_error(std::string("bad value for ") + key + ": '" + value +
                                  "'",
                              line);
    errno = 0;
    const unsigned long long v = std::strtoull(value.c_str(), nullptr, 10);
    if (errno != 0)
        throw parse_error(std::string("bad value for ") + key + ": '" + value + "'",
                          line);
    return v;
}

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace detail

// "holdout:<fraction>" or "file:<path>".
inline QueriesSpec parse_queries_spec(const std::string& value) {
    QueriesSpec q;
    if (value.rfind("holdout:", 0) == 0) {
        q.kind = QueriesSpec::Kind::HOLDOUT;
        q.holdout_frac = detail::config_double(value.substr(8), "queries", 0);
        if (q.holdout_frac <= 0.0 || q.holdout_frac >= 1.0)
            throw parse_error("holdout fraction must lie in (0, 1)");
    } else if (value.rfind("file:", 0) == 0) {
        q.kind = QueriesSpec::Kind::FILE;
        q.path = value.substr(5);
        q.holdout_frac = 0.0;
        if (q.path.empty()) throw parse_error("queries file path is empty");
    } else {
        throw parse_error("queries must be holdout:<fraction> or file:<path>");
    }
    return q;
}

// "default" (empty result) or a comma-separated list of fractions in (0, 1].
inline std::vector<double> parse_r_grid(const std::string& value) {
    std::vector<double> grid;
    if (value == "default") return grid;
    for (const std::string& part : detail::split_commas(value)) {
        const double r = detail::config_double(part, "r_grid", 0);
        if (r <= 0.0 || r > 1.0)
            throw parse_error("r_grid entries must lie in (0, 1]");
        grid.push_back(r);
    }
    return grid;
}

inline RunConfig parse_config(std::istream& in) {
    RunConfig cfg;
    std::string raw;
    long line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        if (const auto hash = raw.find('#'); hash != std::string::npos)
            raw.erase(hash);
        const std::string line = detail::trim(raw);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw parse_error("expected key = value", line_no);
        const std::string key = detail::trim(std::string_view(line).substr(0, eq));
        const std::string value =
            detail::trim(std::string_view(line).substr(eq + 1));
        if (key == "methods") {
            cfg.methods.clear();
            for (const std::string& name : detail::split_commas(value)) {
                try {
                    cfg.methods.push_back(parse_method_name(name));
                } catch (const argument_error& e) {
                    throw parse_error(e.what(), line_no);
                }
            }
            if (cfg.methods.empty())
                throw parse_error("methods list is empty", line_no);
        } else if (key == "metric") {
            if (value == "l1")
                cfg.metric = GroundMetric::L1;
            else if (value == "l2")
                cfg.metric = GroundMetric::L2;
            else
                throw parse_error("metric must be l1 or l2, got '" + value + "'",
                                  line_no);
        } else if (key == "seed") {
            cfg.seed = detail::config_uint(value, "seed", line_no);
        } else if (key == "eta") {
            cfg.eta = detail::config_double(value, "eta", line_no);
            if (cfg.eta < 0.0 || cfg.eta >= 0.5)
                throw parse_error("eta must lie in [0, 0.5)", line_no);
        } else if (key == "depth_limit") {
            const std::uint64_t v = detail::config_uint(value, "depth_limit", line_no);
            if (v == 0 || v > kNoDepthLimit)
                throw parse_error("depth_limit out of range", line_no);
            cfg.depth_limit = static_cast<std::uint32_t>(v);
        } else if (key == "depth_limits") {
            cfg.depth_limits.clear();
            for (const std::string& part : detail::split_commas(value)) {
                const std::uint64_t v =
                    detail::config_uint(part, "depth_limits", line_no);
                if (v == 0 || v > kNoDepthLimit)
                    throw parse_error("depth_limits entry out of range", line_no);
                cfg.depth_limits.push_back(static_cast<std::uint32_t>(v));
            }
            if (cfg.depth_limits.empty())
                throw parse_error("depth_limits list is empty", line_no);
        } else if (key == "sinkhorn_reg") {
            cfg.sinkhorn_reg = detail::config_double(value, "sinkhorn_reg", line_no);
            if (cfg.sinkhorn_reg <= 0.0)
                throw parse_error("sinkhorn_reg must be positive", line_no);
        } else if (key == "sinkhorn_max_iter") {
            const std::uint64_t v =
                detail::config_uint(value, "sinkhorn_max_iter", line_no);
            if (v == 0 || v > 1000000)
                throw parse_error("sinkhorn_max_iter out of range", line_no);
            cfg.sinkhorn_max_iter = static_cast<std::uint32_t>(v);
        } else if (key == "r_grid") {
            try {
                cfg.r_grid = parse_r_grid(value);
            } catch (const parse_error& e) {
                throw parse_error(e.what(), line_no);
            }
        } else if (key == "queries") {
            try {
                cfg.queries = parse_queries_spec(value);
            } catch (const parse_error& e) {
                throw parse_error(e.what(), line_no);
            }
        } else if (key == "timing_reps") {
            const std::uint64_t v = detail::config_uint(value, "timing_reps", line_no);
            if (v == 0 || v > 1000)
                throw parse_error("timing_reps out of range", line_no);
            cfg.timing_reps = static_cast<std::size_t>(v);
        } else if (key == "exact_capacity") {
            const std::uint64_t v =
                detail::config_uint(value, "exact_capacity", line_no);
            if (v == 0) throw parse_error("exact_capacity must be positive", line_no);
            cfg.exact_capacity = static_cast<std::size_t>(v);
        } else {
            throw parse_error("unknown key '" + key + "'", line_no);
        }
    }
    return cfg;
}

inline RunConfig parse_config(const std::string& text) {
    std::istringstream in(text);
    return parse_config(in);
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw parse_error("cannot open '" + path + "'");
    try {
        return parse_config(in);
    } catch (const parse_error& e) {
        throw parse_error(path + ": " + e.what());
    }
}

inline std::string serialize_config(const RunConfig& cfg) {
    std::string out;
    out += "methods = ";
    for (std::size_t k = 0; k < cfg.methods.size(); ++k) {
        if (k > 0) out += ",";
        out += method_name(cfg.methods[k]);
    }
    out += "\nmetric = ";
    out += metric_name(cfg.metric);
    out += "\nseed = " + std::to_string(cfg.seed);
    out += "\neta = " + detail::format_double(cfg.eta);
    out += "\ndepth_limit = " + std::to_string(cfg.depth_limit);
    out += "\ndepth_limits = ";
    for (std::size_t k = 0; k < cfg.depth_limits.size(); ++k) {
        if (k > 0) out += ",";
        out += std::to_string(cfg.depth_limits[k]);
    }
    out += "\nsinkhorn_reg = " + detail::format_double(cfg.sinkhorn_reg);
    out += "\nsinkhorn_max_iter = " + std::to_string(cfg.sinkhorn_max_iter);
    out += "\nr_grid = ";
    if (cfg.r_grid.empty()) {
        out += "default";
    } else {
        for (std::size_t k = 0; k < cfg.r_grid.size(); ++k) {
            if (k > 0) out += ",";
            out += detail::format_double(cfg.r_grid[k]);
        }
    }
    out += "\nqueries = ";
    if (cfg.queries.kind == QueriesSpec::Kind::HOLDOUT)
        out += "holdout:" + detail::format_double(cfg.queries.holdout_frac);
    else
        out += "file:" + cfg.queries.path;
    out += "\ntiming_reps = " + std::to_string(cfg.timing_reps);
    out += "\nexact_capacity = " + std::to_string(cfg.exact_capacity);
    out += "\n";
    return out;
}

inline void save_config(const std::string& path, const RunConfig& cfg) {
    detail::write_file_bytes(path, serialize_config(cfg));
}

// ---------------------------------------------------------------------------
// Benchmark outputs: a flat CSV of recall curves and a JSON report.
// ---------------------------------------------------------------------------

inline std::string format_recall_csv(const BenchReport& report) {
    std::string out = "method,r,recall\n";
    char buf[96];
    for (const MethodReport& m : report.methods) {
        for (const RecallPoint& p : m.curve) {
            std::snprintf(buf, sizeof buf, "%s,%.6g,%.10g\n", m.name.c_str(), p.r,
                          p.recall);
            out += buf;
        }
    }
    return out;
}

inline void save_recall_csv(const std::string& path, const BenchReport& report) {
    detail::write_file_bytes(path, format_recall_csv(report));
}

inline nlohmann::ordered_json report_to_json(const BenchReport& report) {
    nlohmann::ordered_json j;
    j["dataset"] = {{"size", report.database_size},
                    {"dim", report.dim},
                    {"avg_support", report.avg_support}};
    j["query_count"] = report.query_count;
    j["r_grid"] = report.r_grid;
    j["exact_nn"] = report.exact_nn;
    j["methods"] = nlohmann::ordered_json::array();
    for (const MethodReport& m : report.methods) {
        nlohmann::ordered_json jm;
        jm["name"] = m.name;
        jm["time_total_seconds"] = m.time_total_seconds;
        jm["time_query_only_seconds"] = m.time_query_only_seconds;
        jm["curve"] = nlohmann::ordered_json::array();
        for (const RecallPoint& p : m.curve)
            jm["curve"].push_back({{"r", p.r}, {"recall", p.recall}});
        j["methods"].push_back(std::move(jm));
    }
    return j;
}

inline void save_report_json(const std::string& path, const BenchReport& report,
                             const RunConfig* config = nullptr) {
    nlohmann::ordered_json j = report_to_json(report);
    if (config != nullptr) j["config"] = serialize_config(*config);
    detail::write_file_bytes(path, j.dump(2) + "\n");
}

}  // namespace otr
