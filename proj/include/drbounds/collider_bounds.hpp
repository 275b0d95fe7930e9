#pragma once

#include "drbounds/dataset.hpp"
#include "drbounds/estimators.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace drbounds {

// A candidate leave-out set of covariate indices. Empty = adjust for all
// covariates (the baseline fully-adjusted analysis).
struct SubsetIndex {
    std::vector<int> excluded; // sorted, distinct

    std::string str() const; // "{}", "{0}", "{0,2}", ...
    bool operator==(const SubsetIndex& o) const { return excluded == o.excluded; }
};

struct BoundsConfig {
    int max_colliders = 1;                // at most this many covariates left out at once
    std::vector<int> known_non_colliders; // indices never considered for exclusion
    std::string method = "dr";            // per-subset estimator: dr | ipw | plugin | psm
    std::string outcome_learner = "kernel";
    std::string propensity_learner = "logistic";
    int folds = 5;
    double clip_epsilon = 0.01;
    std::uint64_t seed = 0;
    int bootstrap_B = 200; // used by bootstrap-based methods only
    std::size_t enum_cap = 10000;
    int jobs = 1;
};

struct BoundEntry {
    SubsetIndex subset;
    EffectEstimate estimate;
};

struct PartialIdentificationResult {
    std::vector<BoundEntry> entries; // in enumeration order (size, then lexicographic)
    double point_lower = 0.0, point_upper = 0.0; // [min_j, max_j] of point estimates
    double outer_ci_lower = 0.0, outer_ci_upper = 0.0; // union of per-subset Wald CIs
    std::size_t argmin = 0, argmax = 0;          // entry indices attaining the bounds
    BoundsConfig config;                         // resolved config echo
};

// All subsets of {0..d-1} \ known_non_colliders with size <= k, ordered by
// size then lexicographically, starting with the empty set. Throws if the
// count would exceed enum_cap.
std::vector<SubsetIndex> enumerate_subsets(int d, int k,
                                           const std::vector<int>& known_non_colliders,
                                           std::size_t enum_cap = 10000);

// Sweep over leave-out subsets: each entry is the configured estimator run on
// subset_covariates(ds, j) with freshly cross-fitted nuisances under a
// subset-derived seed. Deterministic given the seed, independent of jobs.
PartialIdentificationResult estimate_bounds(const Dataset& ds, const BoundsConfig& config);

} // namespace drbounds
