#include "drbounds/learners.hpp"

#include "drbounds/seeding.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

namespace drbounds {

namespace {

constexpr double kProbFloor = 1e-12;

Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& X) {
    Eigen::MatrixXd A(X.rows(), X.cols() + 1);
    A.col(0).setOnes();
    if (X.cols() > 0) A.rightCols(X.cols()) = X;
    return A;
}

Eigen::ArrayXd expit(const Eigen::ArrayXd& z) {
    // Branch on sign to avoid overflow in exp for large |z|.
    return (z >= 0.0).select(1.0 / (1.0 + (-z).exp()), z.exp() / (1.0 + z.exp()));
}

struct LinearModel final : RegressionModel {
    Eigen::VectorXd coef; // intercept first
    Eigen::VectorXd predict(const Eigen::MatrixXd& X) const override {
        if (X.cols() + 1 != coef.size())
            throw std::invalid_argument("linear predict: column count mismatch");
        Eigen::VectorXd out = Eigen::VectorXd::Constant(X.rows(), coef(0));
        if (X.cols() > 0) out += X * coef.tail(X.cols());
        return out;
    }
};

struct MeanModel final : RegressionModel {
    double value = 0.0;
    Eigen::VectorXd predict(const Eigen::MatrixXd& X) const override {
        return Eigen::VectorXd::Constant(X.rows(), value);
    }
};

struct LogisticModel final : PropensityModel {
    Eigen::VectorXd coef;
    Eigen::VectorXd predict(const Eigen::MatrixXd& X) const override {
        if (X.cols() + 1 != coef.size())
            throw std::invalid_argument("logistic predict: column count mismatch");
        Eigen::ArrayXd z = Eigen::ArrayXd::Constant(X.rows(), coef(0));
        if (X.cols() > 0) z += (X * coef.tail(X.cols())).array();
        return expit(z).cwiseMax(kProbFloor).cwiseMin(1.0 - kProbFloor).matrix();
    }
};

struct ConstPropensityModel final : PropensityModel {
    double p = 0.5;
    Eigen::VectorXd predict(const Eigen::MatrixXd& X) const override {
        return Eigen::VectorXd::Constant(X.rows(), p);
    }
};

// Training data is stored pre-scaled by the per-dimension bandwidths, so a
// squared kernel distance is a plain squared Euclidean distance computable
// with one GEMM per query block.
struct KernelModel final : RegressionModel {
    Eigen::MatrixXd train_scaled;
    Eigen::VectorXd train_sqnorm;
    Eigen::VectorXd y;
    Eigen::VectorXd inv_h;

    Eigen::VectorXd predict(const Eigen::MatrixXd& X) const override {
        if (X.cols() != train_scaled.cols())
            throw std::invalid_argument("kernel predict: column count mismatch");
        const Eigen::Index nq = X.rows();
        const Eigen::Index nt = train_scaled.rows();
        Eigen::VectorXd out(nq);
        const Eigen::Index block = 512;
        Eigen::MatrixXd Q;
        for (Eigen::Index start = 0; start < nq; start += block) {
            const Eigen::Index rows = std::min(block, nq - start);
            Q = X.middleRows(start, rows);
            for (Eigen::Index j = 0; j < Q.cols(); ++j) Q.col(j) *= inv_h(j);
            Eigen::MatrixXd d2 = (-2.0 * Q * train_scaled.transpose());
            d2.colwise() += Q.rowwise().squaredNorm();
            d2.rowwise() += train_sqnorm.transpose();
            for (Eigen::Index i = 0; i < rows; ++i) {
                Eigen::Index amin = 0;
                const double m = d2.row(i).minCoeff(&amin);
                // subtract the row minimum before exponentiating: the common
                // factor cancels in the weighted mean and the largest weight
                // is exactly 1, so the denominator can never underflow to 0
                Eigen::ArrayXd w = (-0.5 * (d2.row(i).transpose().array() - m)).exp();
                const double denom = w.sum();
                if (denom > 0.0 && std::isfinite(denom)) {
                    out(start + i) = (w * y.array()).sum() / denom;
                } else {
                    out(start + i) = y(amin); // nearest training point
                }
            }
        }
        (void)nt;
        return out;
    }
};

// Wraps a regression of the treatment indicator as a propensity; values are
// pushed strictly inside (0,1).
struct ClampedPropensityModel final : PropensityModel {
    std::unique_ptr<RegressionModel> inner;
    Eigen::VectorXd predict(const Eigen::MatrixXd& X) const override {
        return inner->predict(X).cwiseMax(kProbFloor).cwiseMin(1.0 - kProbFloor);
    }
};

// Fixed seed-determined smooth perturbation: five sinusoids with random
// frequencies/phases/amplitudes along one random direction.
struct SinePerturbation {
    Eigen::VectorXd direction;
    std::array<double, 5> freq{}, phase{}, amp{};

    static SinePerturbation draw(Eigen::Index d, std::uint64_t seed) {
        std::mt19937_64 rng(splitmix64(seed));
        std::normal_distribution<double> normal(0.0, 1.0);
        std::uniform_real_distribution<double> ufreq(0.3, 2.0);
        std::uniform_real_distribution<double> uphase(0.0, 2.0 * M_PI);
        SinePerturbation g;
        g.direction.resize(d);
        for (Eigen::Index j = 0; j < d; ++j) g.direction(j) = normal(rng);
        const double norm = g.direction.norm();
        if (norm > 0.0) g.direction /= norm;
        for (int j = 0; j < 5; ++j) g.freq[j] = ufreq(rng);
        for (int j = 0; j < 5; ++j) g.phase[j] = uphase(rng);
        for (int j = 0; j < 5; ++j) g.amp[j] = normal(rng);
        return g;
    }

    Eigen::ArrayXd eval(const Eigen::MatrixXd& X) const {
        Eigen::ArrayXd z = X.cols() > 0 ? (X * direction).array().eval()
                                        : Eigen::ArrayXd::Zero(X.rows()).eval();
        Eigen::ArrayXd out = Eigen::ArrayXd::Zero(X.rows());
        for (int j = 0; j < 5; ++j) out += amp[j] * (freq[j] * z + phase[j]).sin();
        return out;
    }
};

double rms_norm(const Eigen::ArrayXd& v) {
    return std::sqrt(v.square().mean());
}

struct PerturbedRegressionModel final : RegressionModel {
    TruthFn truth;
    SinePerturbation g;
    double scale = 0.0; // c * n^(-r) / Z
    Eigen::VectorXd predict(const Eigen::MatrixXd& X) const override {
        Eigen::VectorXd out = truth(X);
        if (scale != 0.0) out.array() += scale * g.eval(X);
        return out;
    }
};

struct PerturbedPropensityModel final : PropensityModel {
    TruthFn truth;
    SinePerturbation g;
    double scale = 0.0;
    Eigen::VectorXd predict(const Eigen::MatrixXd& X) const override {
        Eigen::ArrayXd p = truth(X).array().max(kProbFloor).min(1.0 - kProbFloor);
        if (scale == 0.0) return p.matrix();
        Eigen::ArrayXd logit = (p / (1.0 - p)).log() + scale * g.eval(X);
        return expit(logit).max(kProbFloor).min(1.0 - kProbFloor).matrix();
    }
};

std::unique_ptr<RegressionModel> solve_linear(const Eigen::MatrixXd& A, const Eigen::VectorXd& y) {
    const Eigen::Index p = A.cols();
    bool ridge = A.rows() < p;
    Eigen::VectorXd coef;
    if (!ridge) {
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
        if (qr.rank() < p) {
            ridge = true;
        } else {
            coef = qr.solve(y);
        }
    }
    if (ridge) {
        Eigen::MatrixXd G = A.transpose() * A;
        const double lambda = 1e-8 * G.trace() / static_cast<double>(p);
        G.diagonal().array() += (lambda > 0.0 ? lambda : 1e-8);
        coef = G.ldlt().solve(A.transpose() * y);
    }
    auto model = std::make_unique<LinearModel>();
    model->coef = std::move(coef);
    return model;
}

} // namespace

std::unique_ptr<RegressionModel> fit_linear(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    if (X.rows() == 0) throw std::invalid_argument("fit_linear: zero rows");
    if (X.rows() != y.size()) throw std::invalid_argument("fit_linear: X/y size mismatch");
    return solve_linear(with_intercept(X), y);
}

std::unique_ptr<PropensityModel> fit_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXi& t) {
    if (X.rows() == 0) throw std::invalid_argument("fit_logistic: zero rows");
    if (X.rows() != t.size()) throw std::invalid_argument("fit_logistic: X/t size mismatch");
    const int ones = t.sum();
    if (ones == 0 || ones == t.size())
        throw std::invalid_argument("fit_logistic: single-class input");

    const Eigen::MatrixXd A = with_intercept(X);
    const Eigen::Index p = A.cols();
    const Eigen::VectorXd td = t.cast<double>();

    auto run_irls = [&](double lambda, Eigen::VectorXd& b) -> bool {
        b.setZero();
        for (int iter = 0; iter < 100; ++iter) {
            Eigen::ArrayXd prob = expit((A * b).array());
            Eigen::VectorXd score = A.transpose() * (td.array() - prob).matrix() - lambda * b;
            if (score.cwiseAbs().maxCoeff() < 1e-8) return true;
            Eigen::ArrayXd w = (prob * (1.0 - prob)).max(1e-10);
            Eigen::MatrixXd H = A.transpose() * w.matrix().asDiagonal() * A;
            H.diagonal().array() += lambda;
            b += H.ldlt().solve(score);
            if (b.norm() > 1e4) return false; // separation
        }
        return true; // iteration cap reached; accept current coefficients
    };

    Eigen::VectorXd b(p);
    if (!run_irls(0.0, b)) {
        if (!run_irls(1e-4, b)) {
            // still drifting under the penalty; keep the last iterate, its
            // predictions are clamped inside (0,1) by the model anyway
        }
    }
    auto model = std::make_unique<LogisticModel>();
    model->coef = std::move(b);
    return model;
}

std::unique_ptr<RegressionModel> fit_kernel(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                            std::optional<double> bandwidth) {
    if (X.rows() < 1) throw std::invalid_argument("fit_kernel: needs at least one row");
    if (X.rows() != y.size()) throw std::invalid_argument("fit_kernel: X/y size mismatch");
    if (bandwidth && !(*bandwidth > 0.0))
        throw std::invalid_argument("fit_kernel: bandwidth must be positive");
    const Eigen::Index n = X.rows();
    const Eigen::Index d = X.cols();
    Eigen::VectorXd h(d);
    if (bandwidth) {
        h.setConstant(*bandwidth);
    } else {
        const double nfac = std::pow(static_cast<double>(n), -1.0 / (4.0 + static_cast<double>(d)));
        for (Eigen::Index j = 0; j < d; ++j) {
            double sd = 0.0;
            if (n > 1) {
                const double mean = X.col(j).mean();
                sd = std::sqrt((X.col(j).array() - mean).square().sum() / static_cast<double>(n - 1));
            }
            h(j) = sd > 0.0 ? 1.06 * sd * nfac : 1.0;
        }
    }
    auto model = std::make_unique<KernelModel>();
    model->inv_h = h.cwiseInverse();
    model->train_scaled = X;
    for (Eigen::Index j = 0; j < d; ++j) model->train_scaled.col(j) *= model->inv_h(j);
    model->train_sqnorm = model->train_scaled.rowwise().squaredNorm();
    model->y = y;
    return model;
}

std::unique_ptr<RegressionModel> LinearLearner::fit(const Eigen::MatrixXd& X,
                                                    const Eigen::VectorXd& y, int) const {
    return fit_linear(X, y);
}

std::unique_ptr<RegressionModel> MeanLearner::fit(const Eigen::MatrixXd& X,
                                                  const Eigen::VectorXd& y, int) const {
    if (y.size() == 0) throw std::invalid_argument("mean learner: zero rows");
    (void)X;
    auto model = std::make_unique<MeanModel>();
    model->value = y.mean();
    return model;
}

std::unique_ptr<RegressionModel> KernelLearner::fit(const Eigen::MatrixXd& X,
                                                    const Eigen::VectorXd& y, int) const {
    return fit_kernel(X, y, bandwidth);
}

std::string KernelLearner::descriptor() const {
    if (!bandwidth) return "kernel(bw=AUTO)";
    std::ostringstream os;
    os << "kernel(bw=" << *bandwidth << ")";
    return os.str();
}

std::unique_ptr<PropensityModel> LogisticLearner::fit(const Eigen::MatrixXd& X,
                                                      const Eigen::VectorXi& t) const {
    return fit_logistic(X, t);
}

std::unique_ptr<PropensityModel> ConstPropensityLearner::fit(const Eigen::MatrixXd& X,
                                                             const Eigen::VectorXi& t) const {
    if (t.size() == 0) throw std::invalid_argument("const propensity: zero rows");
    const int ones = t.sum();
    if (ones == 0 || ones == t.size())
        throw std::invalid_argument("const propensity: single-class input");
    (void)X;
    auto model = std::make_unique<ConstPropensityModel>();
    model->p = static_cast<double>(ones) / static_cast<double>(t.size());
    return model;
}

std::unique_ptr<PropensityModel> KernelPropensityLearner::fit(const Eigen::MatrixXd& X,
                                                              const Eigen::VectorXi& t) const {
    if (t.size() == 0) throw std::invalid_argument("kernel propensity: zero rows");
    const int ones = t.sum();
    if (ones == 0 || ones == t.size())
        throw std::invalid_argument("kernel propensity: single-class input");
    auto model = std::make_unique<ClampedPropensityModel>();
    model->inner = fit_kernel(X, t.cast<double>(), bandwidth);
    return model;
}

std::string KernelPropensityLearner::descriptor() const {
    if (!bandwidth) return "kernel(bw=AUTO)";
    std::ostringstream os;
    os << "kernel(bw=" << *bandwidth << ")";
    return os.str();
}

namespace {

struct PerturbedOracleRegressionLearner final : OutcomeLearner {
    TruthFn truth0, truth1; // truth1 empty => single-truth learner
    double r = 0.0, c = 0.0;
    std::uint64_t seed = 0;
    bool arm_aware = false;

    std::unique_ptr<RegressionModel> fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                         int arm) const override {
        if (X.rows() == 0) throw std::invalid_argument("oracle learner: zero rows");
        (void)y;
        TruthFn truth = truth0;
        std::uint64_t g_seed = seed;
        if (arm_aware) {
            if (arm != 0 && arm != 1)
                throw std::invalid_argument("arm-aware oracle learner requires arm 0 or 1");
            truth = arm == 0 ? truth0 : truth1;
            g_seed = derive_seed(seed, static_cast<std::uint64_t>(arm));
        }
        auto model = std::make_unique<PerturbedRegressionModel>();
        model->truth = truth;
        model->g = SinePerturbation::draw(X.cols(), g_seed);
        if (c != 0.0) {
            double z = rms_norm(model->g.eval(X));
            if (!(z > 1e-12)) z = 1.0;
            model->scale = c * std::pow(static_cast<double>(X.rows()), -r) / z;
        }
        return model;
    }

    std::string descriptor() const override {
        std::ostringstream os;
        os << "oracle(r=" << r << ",c=" << c << ")";
        return os.str();
    }
};

struct PerturbedOraclePropensityLearner final : PropensityLearner {
    TruthFn truth_pi;
    double r = 0.0, c = 0.0;
    std::uint64_t seed = 0;

    std::unique_ptr<PropensityModel> fit(const Eigen::MatrixXd& X,
                                         const Eigen::VectorXi& t) const override {
        if (X.rows() == 0) throw std::invalid_argument("oracle learner: zero rows");
        (void)t;
        auto model = std::make_unique<PerturbedPropensityModel>();
        model->truth = truth_pi;
        model->g = SinePerturbation::draw(X.cols(), derive_seed(seed, 2));
        if (c != 0.0) {
            double z = rms_norm(model->g.eval(X));
            if (!(z > 1e-12)) z = 1.0;
            model->scale = c * std::pow(static_cast<double>(X.rows()), -r) / z;
        }
        return model;
    }

    std::string descriptor() const override {
        std::ostringstream os;
        os << "oracle(r=" << r << ",c=" << c << ")";
        return os.str();
    }
};

} // namespace

std::shared_ptr<OutcomeLearner> make_perturbed_oracle(TruthFn truth, double rate_exponent,
                                                      double amplitude, std::uint64_t seed) {
    if (rate_exponent < 0.0) throw std::invalid_argument("perturbed oracle: r must be >= 0");
    if (amplitude < 0.0) throw std::invalid_argument("perturbed oracle: c must be >= 0");
    auto learner = std::make_shared<PerturbedOracleRegressionLearner>();
    learner->truth0 = std::move(truth);
    learner->r = rate_exponent;
    learner->c = amplitude;
    learner->seed = seed;
    learner->arm_aware = false;
    return learner;
}

std::shared_ptr<OutcomeLearner> make_oracle_outcome_learner(TruthFn truth0, TruthFn truth1,
                                                            double rate_exponent, double amplitude,
                                                            std::uint64_t seed) {
    if (rate_exponent < 0.0) throw std::invalid_argument("perturbed oracle: r must be >= 0");
    if (amplitude < 0.0) throw std::invalid_argument("perturbed oracle: c must be >= 0");
    auto learner = std::make_shared<PerturbedOracleRegressionLearner>();
    learner->truth0 = std::move(truth0);
    learner->truth1 = std::move(truth1);
    learner->r = rate_exponent;
    learner->c = amplitude;
    learner->seed = seed;
    learner->arm_aware = true;
    return learner;
}

std::shared_ptr<PropensityLearner> make_oracle_propensity_learner(TruthFn truth_pi,
                                                                  double rate_exponent,
                                                                  double amplitude,
                                                                  std::uint64_t seed) {
    if (rate_exponent < 0.0) throw std::invalid_argument("perturbed oracle: r must be >= 0");
    if (amplitude < 0.0) throw std::invalid_argument("perturbed oracle: c must be >= 0");
    auto learner = std::make_shared<PerturbedOraclePropensityLearner>();
    learner->truth_pi = std::move(truth_pi);
    learner->r = rate_exponent;
    learner->c = amplitude;
    learner->seed = seed;
    return learner;
}

namespace {

std::optional<double> parse_kernel_bw(const std::string& spec) {
    // "kernel" or "kernel(bw=...)"
    if (spec == "kernel" || spec == "kernel(bw=AUTO)") return std::nullopt;
    const std::string prefix = "kernel(bw=";
    if (spec.rfind(prefix, 0) != 0 || spec.back() != ')')
        throw std::invalid_argument("bad kernel spec: '" + spec + "'");
    const std::string arg = spec.substr(prefix.size(), spec.size() - prefix.size() - 1);
    if (arg == "AUTO") return std::nullopt;
    std::size_t pos = 0;
    double bw = 0.0;
    try {
        bw = std::stod(arg, &pos);
    } catch (const std::exception&) {
        throw std::invalid_argument("bad kernel bandwidth: '" + arg + "'");
    }
    if (pos != arg.size() || !(bw > 0.0))
        throw std::invalid_argument("bad kernel bandwidth: '" + arg + "'");
    return bw;
}

bool is_kernel_spec(const std::string& spec) { return spec.rfind("kernel", 0) == 0; }

} // namespace

std::optional<OracleSpec> parse_oracle_spec(const std::string& spec) {
    if (spec.rfind("oracle", 0) != 0) return std::nullopt;
    const std::string prefix = "oracle(";
    if (spec.rfind(prefix, 0) != 0 || spec.back() != ')')
        throw std::invalid_argument("bad oracle spec: '" + spec + "' (expected oracle(r=..,c=..))");
    std::string body = spec.substr(prefix.size(), spec.size() - prefix.size() - 1);
    OracleSpec out;
    bool saw_r = false, saw_c = false;
    std::istringstream is(body);
    std::string item;
    while (std::getline(is, item, ',')) {
        const auto eq = item.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("bad oracle spec item: '" + item + "'");
        const std::string key = item.substr(0, eq);
        const std::string val = item.substr(eq + 1);
        std::size_t pos = 0;
        double v = 0.0;
        try {
            v = std::stod(val, &pos);
        } catch (const std::exception&) {
            throw std::invalid_argument("bad oracle spec value: '" + val + "'");
        }
        if (pos != val.size()) throw std::invalid_argument("bad oracle spec value: '" + val + "'");
        if (key == "r") {
            out.r = v;
            saw_r = true;
        } else if (key == "c") {
            out.c = v;
            saw_c = true;
        } else {
            throw std::invalid_argument("unknown oracle spec key: '" + key + "'");
        }
    }
    if (!saw_r || !saw_c)
        throw std::invalid_argument("oracle spec needs both r and c: '" + spec + "'");
    return out;
}

std::shared_ptr<OutcomeLearner> make_outcome_learner(const std::string& spec) {
    if (spec == "linear") return std::make_shared<LinearLearner>();
    if (spec == "mean") return std::make_shared<MeanLearner>();
    if (is_kernel_spec(spec)) return std::make_shared<KernelLearner>(parse_kernel_bw(spec));
    if (parse_oracle_spec(spec))
        throw std::invalid_argument("oracle learner requires simulated ground truth");
    throw std::invalid_argument("unknown outcome learner: '" + spec + "'");
}

std::shared_ptr<PropensityLearner> make_propensity_learner(const std::string& spec) {
    if (spec == "logistic") return std::make_shared<LogisticLearner>();
    if (spec == "const") return std::make_shared<ConstPropensityLearner>();
    if (is_kernel_spec(spec)) return std::make_shared<KernelPropensityLearner>(parse_kernel_bw(spec));
    if (parse_oracle_spec(spec))
        throw std::invalid_argument("oracle learner requires simulated ground truth");
    throw std::invalid_argument("unknown propensity learner: '" + spec + "'");
}

std::shared_ptr<OutcomeLearner> make_outcome_learner(const std::string& spec,
                                                     const OracleBindings& oracle) {
    if (const auto os = parse_oracle_spec(spec))
        return make_oracle_outcome_learner(oracle.mu0, oracle.mu1, os->r, os->c, oracle.seed);
    return make_outcome_learner(spec);
}

std::shared_ptr<PropensityLearner> make_propensity_learner(const std::string& spec,
                                                           const OracleBindings& oracle) {
    if (const auto os = parse_oracle_spec(spec))
        return make_oracle_propensity_learner(oracle.pi, os->r, os->c, oracle.seed);
    return make_propensity_learner(spec);
}

} // namespace drbounds
