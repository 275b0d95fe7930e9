#pragma once

#include "drbounds/dataset.hpp"
#include "drbounds/estimators.hpp"
#include "drbounds/learners.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace drbounds {

// ---- data generating processes ----

// Y = tau*T + outcome_coefs.V + noise; T ~ Bern(expit(logit_intercept +
// logit_coefs.V)). V are the first d covariates; d_noise pure-noise columns
// (the W block) follow. Unconfounded given X, so beta_star = tau.
struct LinearGaussianSpec {
    int d = 2;
    double tau = 1.0;
    std::vector<double> outcome_coefs{1.0, 1.0};
    std::vector<double> logit_coefs{1.0, 0.5};
    double outcome_intercept = 0.0;
    double logit_intercept = 0.0;
    double noise_sd = 1.0;
    int d_noise = 0;
};

// M-structure: U1,U2 ~ N(0,1); C = a1*U1 + b1*U2 + sigma_c*eps;
// T = 1{a2*U1 + eps_T > 0} (probit); Y = tau*T + b2*U2 + sigma_y*eps.
// Covariate 0 is the collider C; adjusting for it biases the contrast.
struct MBiasSpec {
    double tau = 1.0;
    double a1 = 1.0; // U1 -> C
    double a2 = 1.0; // U1 -> T
    double b1 = 1.0; // U2 -> C
    double b2 = 1.0; // U2 -> Y
    double sigma_c = 1.0;
    double sigma_y = 1.0;
    int d_noise = 0;
};

// X ~ N(0,1) observed, U ~ N(0,1) unobserved;
// T ~ Bern(expit(a0 + bt*X + lt*U)); Y = tau*T + by*X + ly*U + sigma_y*eps.
// beta (observed contrast) differs from beta_star by E{gamma(X,1-T)}.
struct UnmeasuredConfounderSpec {
    double tau = 1.0;
    double propensity_intercept = 1.5; // a0
    double x_coef_t = 0.8;             // bt
    double lambda_t = 1.5;             // lt, confounder loading on the T logit
    double x_coef_y = 1.0;             // by
    double lambda_y = 1.0;             // ly, confounder loading on Y
    double sigma_y = 1.0;
};

// X ~ U(0,1)^d; s(x) = sum_j (x_j - 1/2)/sqrt(d);
// pi(x) = expit(pi_amp*sin(2*pi*pi_freq*s)); mu_0(x) = mu_amp*sin(2*pi*mu_freq*s);
// Y = mu_0 + tau*T + sigma_y*eps. Frequency knobs steer effective smoothness.
struct SmoothNonparamSpec {
    int d = 1;
    double tau = 1.0;
    double mu_freq = 1.0, mu_amp = 1.0;
    double pi_freq = 1.0, pi_amp = 1.0;
    double sigma_y = 1.0;
    int d_noise = 0;
};

using DGPSpec =
    std::variant<LinearGaussianSpec, MBiasSpec, UnmeasuredConfounderSpec, SmoothNonparamSpec>;

std::string dgp_name(const DGPSpec& dgp);

// Arm-indexed bias function evaluator: gamma(x, t) row-wise for a fixed t.
using GammaFn = std::function<Eigen::VectorXd(const Eigen::MatrixXd&, int)>;

struct GroundTruth {
    double beta_star = 0.0;     // E{Y(1) - Y(0)}
    double beta_observed = 0.0; // E{mu_1(X) - mu_0(X)}; differs under confounding
    TruthFn mu0, mu1, pi;       // observed-data nuisances given the full covariate block
    GammaFn gamma;              // identically zero when unconfounded given X
    std::vector<int> collider_indices;
    int n_relevant = 0; // leading covariates that truly enter (the V block)
    bool confounded = false;
};

GroundTruth make_ground_truth(const DGPSpec& dgp);

// Deterministic in (dgp, n, seed); retries with incremented sub-seed (up to
// 100) until both treatment arms are realized.
std::pair<Dataset, GroundTruth> generate(const DGPSpec& dgp, int n, std::uint64_t seed);

struct McMoment {
    double mean = 0.0;
    double mc_se = 0.0;
};

// Monte Carlo E{Y(1)-Y(0)} from potential-outcome draws (checks beta_star).
McMoment mc_beta_star(const DGPSpec& dgp, int n_draws, std::uint64_t seed);

// Monte Carlo E{gamma(X, 1-T)} over draws of (X,T).
McMoment mc_gamma_expectation(const DGPSpec& dgp, int n_draws, std::uint64_t seed);

struct GammaRange {
    double lower0 = 0.0, upper0 = 0.0; // range of gamma(., 0)
    double lower1 = 0.0, upper1 = 0.0; // range of gamma(., 1)
};

// Essential range of gamma per arm, by grid scan over +-8 sd of the covariate
// law (univariate-index variants only).
GammaRange gamma_essential_range(const DGPSpec& dgp, int grid_points = 1601);

// ---- Monte Carlo engine ----

struct MethodConfig {
    std::string name;                  // row label in reports
    std::string method = "dr";         // dr | ipw | plugin | psm
    std::string outcome_learner = "kernel";
    std::string propensity_learner = "logistic";
    int folds = 5;
    double clip_epsilon = 0.01;
    int bootstrap_B = 0; // bootstrap-based methods; 0 keeps se at 0
};

struct MonteCarloConfig {
    DGPSpec dgp;
    std::vector<MethodConfig> methods;
    std::vector<int> n_grid;
    int R = 2;
    std::uint64_t seed = 0;
    int jobs = 1;
};

struct CellStats {
    std::string method; // MethodConfig::name
    int n = 0;
    int R_total = 0, R_used = 0, R_failed = 0;
    double mean_bias = 0.0;          // vs beta_star
    double mean_bias_observed = 0.0; // vs beta_observed
    double rmse = 0.0;               // vs beta_star
    double mean_se = 0.0;
    double coverage = 0.0; // 95% CI coverage of beta_star
    double mc_se_bias = 0.0, mc_se_rmse = 0.0, mc_se_coverage = 0.0;
};

struct SlopeFit {
    double slope = 0.0;
    double slope_se = 0.0;
};

struct MethodSlope {
    std::string method;
    SlopeFit fit;
};

struct SimReport {
    MonteCarloConfig config;
    double beta_star = 0.0, beta_observed = 0.0;
    std::vector<CellStats> cells;                       // n-major, then method order
    std::vector<MethodSlope> slopes;                    // when |n_grid| >= 3
    std::vector<std::string> failures;                  // "(replication r, method m): why"
};

// Replication r draws its dataset with seed^r; all methods share it. Failed
// replications are recorded and excluded, never silently dropped.
SimReport run_monte_carlo(const MonteCarloConfig& cfg);

// Least-squares slope of log(rmse) on log(n); points are (n, rmse).
SlopeFit fit_rate_slope(const std::vector<std::pair<double, double>>& points);

// ---- screening experiment ----

struct ScreeningConfig {
    DGPSpec dgp; // its trailing d_noise columns form the W block
    std::vector<int> n_grid;
    int R = 100;
    double level = 0.05;
    std::uint64_t seed = 0;
    int jobs = 1;
    int eval_points = 10000;
    std::optional<double> bandwidth; // kernel bandwidth; nullopt = AUTO
};

struct ScreeningCell {
    int n = 0;
    int R_total = 0;
    double mean_l2_screened = 0.0; // pipeline A: test W-columns, kernel on retained
    double mean_l2_full = 0.0;     // pipeline B: kernel on all of X
    double mc_se_l2_screened = 0.0, mc_se_l2_full = 0.0;
    std::vector<double> rejection_rate; // per W column
    double mean_retained = 0.0;         // average number of W columns kept
};

struct ScreeningReport {
    ScreeningConfig config;
    std::vector<ScreeningCell> cells;
};

// Pipeline A screens each W column with a Fisher-z partial-correlation test of
// W_j and Y given (T, V) via linear residualization, keeps rejected columns,
// then kernel-regresses mu_1 on [V, retained W]; pipeline B regresses on all
// of X. L2 errors are measured against the true mu_1 on a fresh sample.
ScreeningReport screening_experiment(const ScreeningConfig& cfg);

} // namespace drbounds
