#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "otr/errors.hpp"

namespace otr {

// Ground metric on point coordinates. L1 is the default throughout; L2 is
// available for ablations.
enum class GroundMetric : std::uint8_t { L1, L2 };

inline const char* metric_name(GroundMetric m) {
    return m == GroundMetric::L1 ? "l1" : "l2";
}

// Immutable row-major store of N points in R^D. Duplicates are allowed;
// coordinates must be finite.
class PointStore {
public:
    // Empty placeholder store (size 0); any point access throws. Lets the
    // store live inside default-constructed aggregates before loading.
    PointStore() : dim_(1) {}

    PointStore(std::size_t dim, std::vector<double> coords)
        : dim_(dim), coords_(std::move(coords)) {
        if (dim_ == 0) throw argument_error("PointStore: dim must be >= 1");
        if (coords_.empty() || coords_.size() % dim_ != 0)
            throw argument_error("PointStore: coordinate count " +
                                 std::to_string(coords_.size()) +
                                 " is not a nonzero multiple of dim " +
                                 std::to_string(dim_));
        for (double c : coords_)
            if (!std::isfinite(c))
                throw argument_error("PointStore: non-finite coordinate");
    }

    std::size_t dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return coords_.size() / dim_; }

    std::span<const double> point(std::size_t i) const {
        if (i >= size())
            throw argument_error("PointStore: index " + std::to_string(i) +
                                 " out of range (size " + std::to_string(size()) + ")");
        return {coords_.data() + i * dim_, dim_};
    }

    const std::vector<double>& coords() const noexcept { return coords_; }

private:
    std::size_t dim_;
    std::vector<double> coords_;
};

// Distance between two raw coordinate rows of equal length.
inline double point_distance(std::span<const double> a, std::span<const double> b,
                             GroundMetric metric) {
    double acc = 0.0;
    if (metric == GroundMetric::L1) {
        for (std::size_t k = 0; k < a.size(); ++k) acc += std::fabs(a[k] - b[k]);
        return acc;
    }
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double d = a[k] - b[k];
        acc += d * d;
    }
    return std::sqrt(acc);
}

// Ground distance between stored points i and j.
inline double ground_distance(const PointStore& store, std::size_t i, std::size_t j,
                              GroundMetric metric = GroundMetric::L1) {
    return point_distance(store.point(i), store.point(j), metric);
}

}  // namespace otr
