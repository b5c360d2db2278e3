#pragma once

// Umbrella header: approximate and exact 1-Wasserstein distances over
// discrete distributions, random spatial partition trees, the tree-guided
// greedy matching they support, and a nearest-neighbor retrieval benchmark.

#include "otr/dataset_io.hpp"
#include "otr/distribution.hpp"
#include "otr/errors.hpp"
#include "otr/exact_ot.hpp"
#include "otr/flowtree.hpp"
#include "otr/line_greedy.hpp"
#include "otr/parallel.hpp"
#include "otr/plan.hpp"
#include "otr/points.hpp"
#include "otr/retrieval.hpp"
#include "otr/rng.hpp"
#include "otr/sinkhorn.hpp"
#include "otr/spatial_tree.hpp"
#include "otr/tree_serialize.hpp"
