#pragma once

// Deterministic synthetic data used across the tests: small random transport
// instances, and a clustered corpus whose nearest-neighbor structure a good
// approximation should recover.

#include <cstdint>
#include <string>
#include <vector>

#include "otr/distribution.hpp"
#include "otr/points.hpp"
#include "otr/rng.hpp"

namespace synth {

struct Instance {
    otr::PointStore store;
    otr::DiscreteDistribution mu, nu;
};

struct InstanceShape {
    std::size_t max_n = 8;
    std::size_t max_m = 8;
    std::size_t max_dim = 3;
    bool uniform_weights = false;
    bool allow_zero_weights = false;
    double box = 4.0;  // coordinates drawn uniformly from [-box/2, box/2]
};

// The two supports are disjoint contiguous ranges of one shared store, so
// the instance can also drive tree-based methods directly.
inline Instance random_instance(std::uint64_t seed, const InstanceShape& shape = {}) {
    otr::RandomStream rng(seed);
    const std::size_t dim = 1 + rng.next_index(static_cast<std::uint32_t>(shape.max_dim));
    const std::size_t n = 1 + rng.next_index(static_cast<std::uint32_t>(shape.max_n));
    const std::size_t m = 1 + rng.next_index(static_cast<std::uint32_t>(shape.max_m));

    std::vector<double> coords((n + m) * dim);
    for (double& c : coords) c = rng.next_uniform(-shape.box / 2.0, shape.box / 2.0);
    otr::PointStore store(dim, std::move(coords));

    const auto make_weights = [&](std::size_t count) {
        std::vector<double> w(count);
        if (shape.uniform_weights) {
            for (double& x : w) x = 1.0;
        } else {
            for (double& x : w) x = 1e-3 - std::log(1.0 - rng.next_unit());
            if (shape.allow_zero_weights && count > 1)
                for (std::size_t k = 1; k < count; ++k)
                    if (rng.next_unit() < 0.25) w[k] = 0.0;
        }
        double sum = 0.0;
        for (double x : w) sum += x;
        for (double& x : w) x /= sum;
        return w;
    };

    std::vector<std::uint32_t> sup_a(n), sup_b(m);
    for (std::size_t i = 0; i < n; ++i) sup_a[i] = static_cast<std::uint32_t>(i);
    for (std::size_t j = 0; j < m; ++j) sup_b[j] = static_cast<std::uint32_t>(n + j);
    otr::DiscreteDistribution mu(sup_a, make_weights(n), store.size());
    otr::DiscreteDistribution nu(sup_b, make_weights(m), store.size());
    return {std::move(store), std::move(mu), std::move(nu)};
}

struct CorpusShape {
    std::size_t items = 500;
    std::size_t support = 20;
    std::size_t dim = 50;
    std::size_t clusters = 10;
    double sigma = 0.5;  // spread of support points around their cluster center
    // mixture_corpus only: how many distinct clusters each item draws from.
    std::size_t topics_per_item = 3;
};

// Items cycle through Gaussian cluster centers; supports are uniform-weight
// point clouds around the item's center. Coordinates pass through binary32 so
// saving them to the on-disk point format is lossless.
inline otr::Dataset cluster_corpus(std::uint64_t seed, const CorpusShape& shape = {}) {
    otr::RandomStream rng(seed);
    std::vector<double> centers(shape.clusters * shape.dim);
    for (double& c : centers) c = rng.next_gaussian();

    otr::Dataset ds;
    std::vector<double> coords;
    coords.reserve(shape.items * shape.support * shape.dim);
    for (std::size_t t = 0; t < shape.items; ++t) {
        const std::size_t cl = t % shape.clusters;
        for (std::size_t s = 0; s < shape.support; ++s)
            for (std::size_t k = 0; k < shape.dim; ++k) {
                const double x =
                    centers[cl * shape.dim + k] + shape.sigma * rng.next_gaussian();
                coords.push_back(static_cast<double>(static_cast<float>(x)));
            }
        ds.labels.push_back("cluster" + std::to_string(cl));
    }
    ds.store = otr::PointStore(shape.dim, std::move(coords));
    for (std::size_t t = 0; t < shape.items; ++t) {
        std::vector<std::uint32_t> sup(shape.support);
        for (std::size_t s = 0; s < shape.support; ++s)
            sup[s] = static_cast<std::uint32_t>(t * shape.support + s);
        ds.items.push_back(otr::uniform_distribution(sup, ds.store.size()));
    }
    return ds;
}

// Each item mixes a small random subset of the shared clusters: every support
// point independently picks one of the item's topics and scatters around that
// topic's center. Nearest neighbors are decided by how well whole supports
// align across topics, so retrieval quality depends on resolving the cluster
// structure rather than on per-item mean offsets alone.
inline otr::Dataset mixture_corpus(std::uint64_t seed, const CorpusShape& shape = {}) {
    otr::RandomStream rng(seed);
    std::vector<double> centers(shape.clusters * shape.dim);
    for (double& c : centers) c = rng.next_gaussian();

    const std::size_t topics = std::min(shape.topics_per_item, shape.clusters);
    otr::Dataset ds;
    std::vector<double> coords;
    coords.reserve(shape.items * shape.support * shape.dim);
    for (std::size_t t = 0; t < shape.items; ++t) {
        // Distinct topic subset via a partial shuffle.
        std::vector<std::uint32_t> pool(shape.clusters);
        for (std::size_t c = 0; c < shape.clusters; ++c)
            pool[c] = static_cast<std::uint32_t>(c);
        std::string label = "topics";
        for (std::size_t k = 0; k < topics; ++k) {
            const std::size_t pick =
                k + rng.next_index(static_cast<std::uint32_t>(shape.clusters - k));
            std::swap(pool[k], pool[pick]);
            label += (k == 0 ? ':' : '+') + std::to_string(pool[k]);
        }
        ds.labels.push_back(std::move(label));
        for (std::size_t s = 0; s < shape.support; ++s) {
            const std::uint32_t cl = pool[rng.next_index(static_cast<std::uint32_t>(topics))];
            for (std::size_t k = 0; k < shape.dim; ++k) {
                const double x =
                    centers[cl * shape.dim + k] + shape.sigma * rng.next_gaussian();
                coords.push_back(static_cast<double>(static_cast<float>(x)));
            }
        }
    }
    ds.store = otr::PointStore(shape.dim, std::move(coords));
    for (std::size_t t = 0; t < shape.items; ++t) {
        std::vector<std::uint32_t> sup(shape.support);
        for (std::size_t s = 0; s < shape.support; ++s)
            sup[s] = static_cast<std::uint32_t>(t * shape.support + s);
        ds.items.push_back(otr::uniform_distribution(sup, ds.store.size()));
    }
    return ds;
}

}  // namespace synth
