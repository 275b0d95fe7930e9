#pragma once

#include "drbounds/dataset.hpp"
#include "drbounds/learners.hpp"

#include <Eigen/Core>
#include <cstdint>
#include <memory>
#include <string>

namespace drbounds {

struct ClipResult {
    Eigen::VectorXd pi;
    int clipped_count = 0;
};

// Elementwise max(eps, min(1-eps, pi)); eps in [0, 0.5).
ClipResult clip_propensities(const Eigen::VectorXd& pi, double eps);

// Cross-fitted out-of-fold nuisance predictions. Every entry of mu0_hat /
// mu1_hat / pi_hat was produced by models fitted without that unit's fold;
// pi_hat is already clipped to [eps, 1-eps].
struct NuisanceEstimates {
    Eigen::VectorXd mu0_hat, mu1_hat, pi_hat;
    double clip_epsilon = 0.01;
    int clipped_count = 0;
    FoldAssignment folds;
    std::string outcome_desc, propensity_desc;
    std::uint64_t seed = 0;
    // retained so bootstrap-based standard errors can refit per resample
    std::shared_ptr<const OutcomeLearner> outcome_learner;
    std::shared_ptr<const PropensityLearner> propensity_learner;
};

// For each fold k: mu_0 is fitted on control rows outside k, mu_1 on treated
// rows outside k, pi on all rows outside k; fold k is then predicted.
NuisanceEstimates crossfit_nuisances(const Dataset& ds,
                                     std::shared_ptr<const OutcomeLearner> outcome,
                                     std::shared_ptr<const PropensityLearner> propensity,
                                     int K = 5, double clip_epsilon = 0.01,
                                     std::uint64_t seed = 0);

// Same but with a caller-supplied fold assignment (used by bootstrap refits).
NuisanceEstimates crossfit_nuisances(const Dataset& ds,
                                     std::shared_ptr<const OutcomeLearner> outcome,
                                     std::shared_ptr<const PropensityLearner> propensity,
                                     const FoldAssignment& folds, double clip_epsilon = 0.01);

struct EffectEstimate {
    double point = 0.0;
    double se = 0.0;
    double ci_lower = 0.0, ci_upper = 0.0;
    Eigen::VectorXd influence; // empty for bootstrap-based methods
    std::string method;
    int n = 0;
    double clip_epsilon = 0.01;
    int clipped_count = 0;
    int folds = 0;
    std::uint64_t seed = 0;
};

// One-step AIPW:
//   phi_i = (2T-1){Y - mu_T(X)} / {(2T-1)pi(X) + (1-T)} + mu_1(X) - mu_0(X),
// point = mean(phi), se = sample-sd(phi)/sqrt(n), ci = point +- 1.96 se.
EffectEstimate estimate_dr(const Dataset& ds, const NuisanceEstimates& nuis);

// Horvitz-Thompson baseline: mean(TY/pi - (1-T)Y/(1-pi)), influence-based se.
EffectEstimate estimate_ipw(const Dataset& ds, const NuisanceEstimates& nuis);

struct BootstrapConfig {
    int B = 200;       // 0 disables the bootstrap (se = 0)
    bool refit = true; // refit nuisances per resample; false reuses stored predictions
    std::uint64_t seed = 0;
    int jobs = 1;
};

// Plugin mean(mu1 - mu0); se via fold-preserving nonparametric bootstrap.
EffectEstimate estimate_plugin(const Dataset& ds, const NuisanceEstimates& nuis,
                               const BootstrapConfig& bs = {});

// 1-nearest-neighbor propensity matching with replacement, both directions,
// ties broken by lowest index; se via bootstrap.
EffectEstimate estimate_psm_1nn(const Dataset& ds, const NuisanceEstimates& nuis,
                                const BootstrapConfig& bs = {});

// Dispatch on method name: "dr" | "ipw" | "plugin" | "psm".
EffectEstimate estimate_by_name(const std::string& method, const Dataset& ds,
                                const NuisanceEstimates& nuis, const BootstrapConfig& bs = {});

} // namespace drbounds
