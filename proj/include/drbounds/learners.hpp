#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>

namespace drbounds {

// Fitted models are immutable; predict() is deterministic and safe to call
// concurrently.
struct RegressionModel {
    virtual ~RegressionModel() = default;
    virtual Eigen::VectorXd predict(const Eigen::MatrixXd& X) const = 0;
};

struct PropensityModel {
    virtual ~PropensityModel() = default;
    // Predictions lie strictly inside (0,1); clipping happens downstream.
    virtual Eigen::VectorXd predict(const Eigen::MatrixXd& X) const = 0;
};

// Learner = reusable fit recipe. `arm` tells arm-aware learners (the
// simulation oracles) whether they are fitting mu_0 or mu_1; data-driven
// learners ignore it.
struct OutcomeLearner {
    virtual ~OutcomeLearner() = default;
    virtual std::unique_ptr<RegressionModel> fit(const Eigen::MatrixXd& X,
                                                 const Eigen::VectorXd& y,
                                                 int arm = -1) const = 0;
    virtual std::string descriptor() const = 0;
};

struct PropensityLearner {
    virtual ~PropensityLearner() = default;
    virtual std::unique_ptr<PropensityModel> fit(const Eigen::MatrixXd& X,
                                                 const Eigen::VectorXi& t) const = 0;
    virtual std::string descriptor() const = 0;
};

// ---- direct fitting entry points ----

// OLS with intercept; singular or under-determined systems fall back to a
// ridge solve with penalty 1e-8 * trace(A'A)/(d+1).
std::unique_ptr<RegressionModel> fit_linear(const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

// Logistic MLE with intercept via IRLS: stop when max |score| < 1e-8 or 100
// iterations; on separation (||b|| > 1e4) restart with ridge lambda = 1e-4.
std::unique_ptr<PropensityModel> fit_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXi& t);

// Nadaraya-Watson with a product Gaussian kernel. bandwidth = nullopt means
// AUTO: Silverman's rule per dimension, 1.06 * sd_j * n^(-1/(4+d)).
std::unique_ptr<RegressionModel> fit_kernel(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                            std::optional<double> bandwidth = std::nullopt);

// ---- learner objects ----

struct LinearLearner final : OutcomeLearner {
    std::unique_ptr<RegressionModel> fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                         int arm = -1) const override;
    std::string descriptor() const override { return "linear"; }
};

// Intercept-only regression: the deliberately misspecified outcome baseline.
struct MeanLearner final : OutcomeLearner {
    std::unique_ptr<RegressionModel> fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                         int arm = -1) const override;
    std::string descriptor() const override { return "mean"; }
};

struct KernelLearner final : OutcomeLearner {
    std::optional<double> bandwidth; // nullopt = AUTO
    explicit KernelLearner(std::optional<double> bw = std::nullopt) : bandwidth(bw) {}
    std::unique_ptr<RegressionModel> fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                         int arm = -1) const override;
    std::string descriptor() const override;
};

struct LogisticLearner final : PropensityLearner {
    std::unique_ptr<PropensityModel> fit(const Eigen::MatrixXd& X,
                                         const Eigen::VectorXi& t) const override;
    std::string descriptor() const override { return "logistic"; }
};

// Intercept-only propensity: the deliberately misspecified propensity baseline.
struct ConstPropensityLearner final : PropensityLearner {
    std::unique_ptr<PropensityModel> fit(const Eigen::MatrixXd& X,
                                         const Eigen::VectorXi& t) const override;
    std::string descriptor() const override { return "const"; }
};

struct KernelPropensityLearner final : PropensityLearner {
    std::optional<double> bandwidth;
    explicit KernelPropensityLearner(std::optional<double> bw = std::nullopt) : bandwidth(bw) {}
    std::unique_ptr<PropensityModel> fit(const Eigen::MatrixXd& X,
                                         const Eigen::VectorXi& t) const override;
    std::string descriptor() const override;
};

// ---- synthetic perturbed-oracle learners ----

using TruthFn = std::function<Eigen::VectorXd(const Eigen::MatrixXd&)>;

// Returns a learner whose fitted model predicts truth(x) + c*n^(-r)*g(x),
// where g is a fixed seed-determined sum of five random-frequency sinusoids
// along a random direction, normalized by its empirical L2 norm on the
// training sample. Empirical L2 error is c*n^(-r) by construction.
std::shared_ptr<OutcomeLearner> make_perturbed_oracle(TruthFn truth, double rate_exponent,
                                                      double amplitude, std::uint64_t seed);

// Arm-aware oracle for cross-fitting: uses truth0/truth1 according to the
// arm being fitted, with independent perturbations per arm.
std::shared_ptr<OutcomeLearner> make_oracle_outcome_learner(TruthFn truth0, TruthFn truth1,
                                                            double rate_exponent, double amplitude,
                                                            std::uint64_t seed);

// Propensity oracle: perturbation applied on the logit scale, then mapped
// back through the logistic function so outputs stay in (0,1).
std::shared_ptr<PropensityLearner> make_oracle_propensity_learner(TruthFn truth_pi,
                                                                  double rate_exponent,
                                                                  double amplitude,
                                                                  std::uint64_t seed);

// ---- learner spec strings ----
// Grammar: "linear" | "mean" | "kernel" | "kernel(bw=AUTO)" | "kernel(bw=0.5)"
//          | "logistic" | "const" | "oracle(r=0.25,c=1.0)".
// Oracle specs need simulated truth; the plain factories reject them.

struct OracleBindings {
    TruthFn mu0, mu1, pi;
    std::uint64_t seed = 0;
};

struct OracleSpec {
    double r = 0.0;
    double c = 0.0;
};

// Returns the parsed oracle parameters if `spec` is an oracle string.
std::optional<OracleSpec> parse_oracle_spec(const std::string& spec);

std::shared_ptr<OutcomeLearner> make_outcome_learner(const std::string& spec);
std::shared_ptr<PropensityLearner> make_propensity_learner(const std::string& spec);
std::shared_ptr<OutcomeLearner> make_outcome_learner(const std::string& spec,
                                                     const OracleBindings& oracle);
std::shared_ptr<PropensityLearner> make_propensity_learner(const std::string& spec,
                                                           const OracleBindings& oracle);

} // namespace drbounds
