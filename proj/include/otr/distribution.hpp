#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "otr/errors.hpp"
#include "otr/points.hpp"

namespace otr {

inline constexpr double kWeightSumTolerance = 1e-9;

// Finitely supported probability distribution over a PointStore. Support
// indices are distinct and in-range for the store the distribution was
// validated against; weights are nonnegative and sum to 1 within 1e-9.
class DiscreteDistribution {
public:
    DiscreteDistribution(std::vector<std::uint32_t> support, std::vector<double> weights,
                         std::size_t store_size)
        : support_(std::move(support)), weights_(std::move(weights)) {
        if (support_.empty()) throw argument_error("distribution: empty support");
        if (support_.size() != weights_.size())
            throw argument_error("distribution: support/weight length mismatch");
        double sum = 0.0;
        for (double w : weights_) {
            if (!std::isfinite(w) || w < 0.0)
                throw argument_error("distribution: weights must be finite and >= 0");
            sum += w;
        }
        if (std::fabs(sum - 1.0) > kWeightSumTolerance)
            throw argument_error("distribution: weights sum to " + std::to_string(sum) +
                                 ", expected 1");
        for (std::uint32_t idx : support_)
            if (idx >= store_size)
                throw argument_error("distribution: support index " + std::to_string(idx) +
                                     " out of range (store size " +
                                     std::to_string(store_size) + ")");
        std::vector<std::uint32_t> sorted(support_);
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
            throw argument_error("distribution: duplicate support index");
    }

    std::size_t size() const noexcept { return support_.size(); }
    std::span<const std::uint32_t> support() const noexcept { return support_; }
    std::span<const double> weights() const noexcept { return weights_; }

    bool operator==(const DiscreteDistribution&) const = default;

private:
    std::vector<std::uint32_t> support_;
    std::vector<double> weights_;
};

// Uniform weights 1/n over the given support.
inline DiscreteDistribution uniform_distribution(std::vector<std::uint32_t> support,
                                                 std::size_t store_size) {
    const std::size_t n = support.size();
    if (n == 0) throw argument_error("uniform_distribution: empty support");
    std::vector<double> w(n, 1.0 / static_cast<double>(n));
    return DiscreteDistribution(std::move(support), std::move(w), store_size);
}

// A corpus: one shared point store plus the distributions defined over it.
// Labels are optional (empty, or one per item).
struct Dataset {
    PointStore store;
    std::vector<DiscreteDistribution> items;
    std::vector<std::string> labels;
};

struct DatasetStats {
    std::size_t size = 0;      // number of distributions
    double avg_support = 0.0;  // mean support size
};

inline DatasetStats dataset_stats(const Dataset& ds) {
    if (ds.items.empty()) throw argument_error("dataset_stats: empty dataset");
    std::size_t total = 0;
    for (const auto& d : ds.items) total += d.size();
    return {ds.items.size(),
            static_cast<double>(total) / static_cast<double>(ds.items.size())};
}

}  // namespace otr
