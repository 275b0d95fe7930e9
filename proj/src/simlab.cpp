#include "drbounds/simlab.hpp"

#include "drbounds/parallel.hpp"
#include "drbounds/quadrature.hpp"
#include "drbounds/seeding.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <stdexcept>
#include <tuple>

namespace drbounds {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

double expit_d(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

McMoment moment_of(const Eigen::VectorXd& v) {
    McMoment m;
    const auto n = v.size();
    if (n == 0) return m;
    m.mean = v.mean();
    if (n > 1) {
        const double var = (v.array() - m.mean).square().sum() / static_cast<double>(n - 1);
        m.mc_se = std::sqrt(var / static_cast<double>(n));
    }
    return m;
}

void require_finite(double v, const char* what) {
    if (!std::isfinite(v)) throw std::invalid_argument(std::string(what) + " must be finite");
}

void validate_spec(const LinearGaussianSpec& s) {
    if (s.d < 1) throw std::invalid_argument("linear_gaussian: d must be >= 1");
    if (static_cast<int>(s.outcome_coefs.size()) != s.d)
        throw std::invalid_argument("linear_gaussian: outcome_coefs must have length d");
    if (static_cast<int>(s.logit_coefs.size()) != s.d)
        throw std::invalid_argument("linear_gaussian: logit_coefs must have length d");
    for (double c : s.outcome_coefs) require_finite(c, "linear_gaussian: outcome coefficient");
    for (double c : s.logit_coefs) require_finite(c, "linear_gaussian: logit coefficient");
    require_finite(s.tau, "linear_gaussian: tau");
    require_finite(s.outcome_intercept, "linear_gaussian: outcome_intercept");
    require_finite(s.logit_intercept, "linear_gaussian: logit_intercept");
    if (!(s.noise_sd >= 0.0)) throw std::invalid_argument("linear_gaussian: noise_sd must be >= 0");
    if (s.d_noise < 0) throw std::invalid_argument("linear_gaussian: d_noise must be >= 0");
}

void validate_spec(const MBiasSpec& s) {
    require_finite(s.tau, "m_bias: tau");
    require_finite(s.a1, "m_bias: a1");
    require_finite(s.a2, "m_bias: a2");
    require_finite(s.b1, "m_bias: b1");
    require_finite(s.b2, "m_bias: b2");
    if (!(s.sigma_c > 0.0)) throw std::invalid_argument("m_bias: sigma_c must be > 0");
    if (!(s.sigma_y >= 0.0)) throw std::invalid_argument("m_bias: sigma_y must be >= 0");
    if (s.d_noise < 0) throw std::invalid_argument("m_bias: d_noise must be >= 0");
}

void validate_spec(const UnmeasuredConfounderSpec& s) {
    require_finite(s.tau, "unmeasured_confounder: tau");
    require_finite(s.propensity_intercept, "unmeasured_confounder: propensity_intercept");
    require_finite(s.x_coef_t, "unmeasured_confounder: x_coef_t");
    require_finite(s.lambda_t, "unmeasured_confounder: lambda_t");
    require_finite(s.x_coef_y, "unmeasured_confounder: x_coef_y");
    require_finite(s.lambda_y, "unmeasured_confounder: lambda_y");
    if (!(s.sigma_y >= 0.0))
        throw std::invalid_argument("unmeasured_confounder: sigma_y must be >= 0");
}

void validate_spec(const SmoothNonparamSpec& s) {
    if (s.d < 1) throw std::invalid_argument("smooth_nonparam: d must be >= 1");
    require_finite(s.tau, "smooth_nonparam: tau");
    require_finite(s.mu_freq, "smooth_nonparam: mu_freq");
    require_finite(s.mu_amp, "smooth_nonparam: mu_amp");
    require_finite(s.pi_freq, "smooth_nonparam: pi_freq");
    require_finite(s.pi_amp, "smooth_nonparam: pi_amp");
    if (!(s.sigma_y >= 0.0)) throw std::invalid_argument("smooth_nonparam: sigma_y must be >= 0");
    if (s.d_noise < 0) throw std::invalid_argument("smooth_nonparam: d_noise must be >= 0");
}

void validate_dgp(const DGPSpec& dgp) {
    std::visit([](const auto& s) { validate_spec(s); }, dgp);
}

std::vector<std::string> numbered_names(const std::string& stem, int from, int count) {
    std::vector<std::string> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) out.push_back(stem + std::to_string(from + i));
    return out;
}

// ---- single-shot draws (no arm-degeneracy retry; see gen_with_retries) ----

Dataset gen_once(const LinearGaussianSpec& s, int n, std::uint64_t stream_seed) {
    std::mt19937_64 rng(stream_seed);
    std::normal_distribution<double> N(0.0, 1.0);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    const int cols = s.d + s.d_noise;
    Eigen::MatrixXd X(n, cols);
    Eigen::VectorXd y(n);
    Eigen::VectorXi t(n);
    for (int i = 0; i < n; ++i) {
        double logit = s.logit_intercept;
        double mean_y = s.outcome_intercept;
        for (int j = 0; j < s.d; ++j) {
            const double v = N(rng);
            X(i, j) = v;
            logit += s.logit_coefs[static_cast<std::size_t>(j)] * v;
            mean_y += s.outcome_coefs[static_cast<std::size_t>(j)] * v;
        }
        for (int j = s.d; j < cols; ++j) X(i, j) = N(rng);
        t(i) = U(rng) < expit_d(logit) ? 1 : 0;
        y(i) = mean_y + s.tau * t(i) + s.noise_sd * N(rng);
    }
    auto names = numbered_names("x", 1, s.d);
    auto wn = numbered_names("w", 1, s.d_noise);
    names.insert(names.end(), wn.begin(), wn.end());
    return make_dataset(std::move(y), std::move(t), std::move(X), std::move(names));
}

Dataset gen_once(const MBiasSpec& s, int n, std::uint64_t stream_seed) {
    std::mt19937_64 rng(stream_seed);
    std::normal_distribution<double> N(0.0, 1.0);
    const int cols = 1 + s.d_noise;
    Eigen::MatrixXd X(n, cols);
    Eigen::VectorXd y(n);
    Eigen::VectorXi t(n);
    for (int i = 0; i < n; ++i) {
        const double u1 = N(rng), u2 = N(rng);
        const double ec = N(rng), et = N(rng), ey = N(rng);
        X(i, 0) = s.a1 * u1 + s.b1 * u2 + s.sigma_c * ec;
        t(i) = s.a2 * u1 + et > 0.0 ? 1 : 0;
        y(i) = s.tau * t(i) + s.b2 * u2 + s.sigma_y * ey;
        for (int j = 1; j < cols; ++j) X(i, j) = N(rng);
    }
    std::vector<std::string> names{"c"};
    auto wn = numbered_names("w", 1, s.d_noise);
    names.insert(names.end(), wn.begin(), wn.end());
    return make_dataset(std::move(y), std::move(t), std::move(X), std::move(names));
}

Dataset gen_once(const UnmeasuredConfounderSpec& s, int n, std::uint64_t stream_seed) {
    std::mt19937_64 rng(stream_seed);
    std::normal_distribution<double> N(0.0, 1.0);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    Eigen::MatrixXd X(n, 1);
    Eigen::VectorXd y(n);
    Eigen::VectorXi t(n);
    for (int i = 0; i < n; ++i) {
        const double x = N(rng), u = N(rng);
        X(i, 0) = x;
        const double p = expit_d(s.propensity_intercept + s.x_coef_t * x + s.lambda_t * u);
        t(i) = U(rng) < p ? 1 : 0;
        y(i) = s.tau * t(i) + s.x_coef_y * x + s.lambda_y * u + s.sigma_y * N(rng);
    }
    return make_dataset(std::move(y), std::move(t), std::move(X), {"x1"});
}

Dataset gen_once(const SmoothNonparamSpec& s, int n, std::uint64_t stream_seed) {
    std::mt19937_64 rng(stream_seed);
    std::normal_distribution<double> N(0.0, 1.0);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    const int cols = s.d + s.d_noise;
    const double scale = 1.0 / std::sqrt(static_cast<double>(s.d));
    Eigen::MatrixXd X(n, cols);
    Eigen::VectorXd y(n);
    Eigen::VectorXi t(n);
    for (int i = 0; i < n; ++i) {
        double idx = 0.0;
        for (int j = 0; j < s.d; ++j) {
            const double x = U(rng);
            X(i, j) = x;
            idx += (x - 0.5) * scale;
        }
        for (int j = s.d; j < cols; ++j) X(i, j) = U(rng);
        const double p = expit_d(s.pi_amp * std::sin(2.0 * kPi * s.pi_freq * idx));
        t(i) = U(rng) < p ? 1 : 0;
        y(i) = s.mu_amp * std::sin(2.0 * kPi * s.mu_freq * idx) + s.tau * t(i) +
               s.sigma_y * N(rng);
    }
    auto names = numbered_names("x", 1, s.d);
    auto wn = numbered_names("w", 1, s.d_noise);
    names.insert(names.end(), wn.begin(), wn.end());
    return make_dataset(std::move(y), std::move(t), std::move(X), std::move(names));
}

Dataset gen_dispatch(const DGPSpec& dgp, int n, std::uint64_t stream_seed) {
    return std::visit([&](const auto& s) { return gen_once(s, n, stream_seed); }, dgp);
}

Dataset gen_with_retries(const DGPSpec& dgp, int n, std::uint64_t seed) {
    if (n < 2) throw std::invalid_argument("generate: n must be >= 2");
    for (int attempt = 0; attempt < 100; ++attempt) {
        Dataset ds = gen_dispatch(dgp, n, derive_seed(seed, static_cast<std::uint64_t>(attempt)));
        const int ones = ds.treatment.sum();
        if (ones > 0 && ones < n) return ds;
    }
    throw std::runtime_error("generate: degenerate treatment arm after 100 attempts (" +
                             dgp_name(dgp) + ", n=" + std::to_string(n) + ")");
}

// ---- numeric oracles ----

// Conditional law of (U1, U2) given C = c on a tensor Gauss-Hermite grid;
// exponent-stabilized so extreme c stays finite.
struct MBiasOracle {
    MBiasSpec s;
    Eigen::VectorXd sij;   // a1*u1_i + b1*u2_j
    Eigen::VectorXd wij;   // w_i * w_j
    Eigen::VectorXd p1ij;  // P(T=1 | u1_i) = Phi(a2 * u1_i)
    Eigen::VectorXd u2ij;  // u2_j
    Eigen::VectorXd p1u2;  // p1ij .* u2ij
    double inv2s2 = 0.0;

    explicit MBiasOracle(const MBiasSpec& spec, int points = 48) : s(spec) {
        const GaussHermiteRule rule = gauss_hermite_normal(points);
        const Eigen::Index m = rule.nodes.size();
        sij.resize(m * m);
        wij.resize(m * m);
        p1ij.resize(m * m);
        u2ij.resize(m * m);
        for (Eigen::Index i = 0; i < m; ++i) {
            const double p1 = normal_cdf(s.a2 * rule.nodes(i));
            for (Eigen::Index j = 0; j < m; ++j) {
                const Eigen::Index k = i * m + j;
                sij(k) = s.a1 * rule.nodes(i) + s.b1 * rule.nodes(j);
                wij(k) = rule.weights(i) * rule.weights(j);
                p1ij(k) = p1;
                u2ij(k) = rule.nodes(j);
            }
        }
        p1u2 = p1ij.cwiseProduct(u2ij);
        inv2s2 = 1.0 / (2.0 * s.sigma_c * s.sigma_c);
    }

    // pi(c), E[U2 | C=c, T=0], E[U2 | C=c, T=1]
    void moments(const Eigen::VectorXd& c, Eigen::VectorXd& pi, Eigen::VectorXd& m0,
                 Eigen::VectorXd& m1) const {
        const Eigen::Index n = c.size(), m = sij.size();
        pi.resize(n);
        m0.resize(n);
        m1.resize(n);
        const Eigen::Index block = 256;
        for (Eigen::Index start = 0; start < n; start += block) {
            const Eigen::Index b = std::min(block, n - start);
            Eigen::MatrixXd E = c.segment(start, b).replicate(1, m);
            E.rowwise() -= sij.transpose();
            E = (-inv2s2 * E.array().square()).matrix();
            const Eigen::VectorXd rowmax = E.rowwise().maxCoeff();
            E.colwise() -= rowmax;
            Eigen::MatrixXd W = E.array().exp().matrix();
            W.array().rowwise() *= wij.transpose().array();
            const Eigen::VectorXd den = W.rowwise().sum();
            const Eigen::VectorXd s1 = W * p1ij;
            const Eigen::VectorXd su = W * u2ij;
            const Eigen::VectorXd s1u = W * p1u2;
            pi.segment(start, b) = s1.cwiseQuotient(den);
            m1.segment(start, b) = s1u.cwiseQuotient(s1);
            m0.segment(start, b) = (su - s1u).cwiseQuotient(den - s1);
        }
    }
};

// Conditional law of the unobserved U given X = x and T = t under a logistic
// treatment link, on a 1-d Gauss-Hermite grid.
struct UConfOracle {
    UnmeasuredConfounderSpec s;
    Eigen::VectorXd u, w;
    double wu_total = 0.0;

    explicit UConfOracle(const UnmeasuredConfounderSpec& spec, int points = 80) : s(spec) {
        const GaussHermiteRule rule = gauss_hermite_normal(points);
        u = rule.nodes;
        w = rule.weights;
        wu_total = w.dot(u);
    }

    void moments(const Eigen::VectorXd& x, Eigen::VectorXd& pi, Eigen::VectorXd& m0,
                 Eigen::VectorXd& m1) const {
        const Eigen::Index n = x.size(), m = u.size();
        pi.resize(n);
        m0.resize(n);
        m1.resize(n);
        const Eigen::VectorXd wu = w.cwiseProduct(u);
        const Eigen::Index block = 4096;
        for (Eigen::Index start = 0; start < n; start += block) {
            const Eigen::Index b = std::min(block, n - start);
            Eigen::MatrixXd L = (s.lambda_t * u).transpose().replicate(b, 1);
            L.colwise() += (s.propensity_intercept + s.x_coef_t * x.segment(start, b).array())
                               .matrix();
            const Eigen::MatrixXd P =
                (1.0 / (1.0 + (-L.array()).exp())).matrix(); // expit, args are O(10)
            const Eigen::VectorXd den1 = P * w;
            const Eigen::VectorXd num1 = P * wu;
            pi.segment(start, b) = den1;
            m1.segment(start, b) = num1.cwiseQuotient(den1);
            m0.segment(start, b) =
                ((wu_total - num1.array()) / (1.0 - den1.array())).matrix();
        }
    }
};

Eigen::VectorXd zeros_like(const Eigen::MatrixXd& X) { return Eigen::VectorXd::Zero(X.rows()); }

GroundTruth truth_of(const LinearGaussianSpec& s) {
    GroundTruth gt;
    gt.beta_star = s.tau;
    gt.beta_observed = s.tau;
    gt.n_relevant = s.d;
    gt.confounded = false;
    Eigen::VectorXd oc = Eigen::Map<const Eigen::VectorXd>(s.outcome_coefs.data(), s.d);
    Eigen::VectorXd lc = Eigen::Map<const Eigen::VectorXd>(s.logit_coefs.data(), s.d);
    const int d = s.d;
    gt.mu0 = [oc, d, b0 = s.outcome_intercept](const Eigen::MatrixXd& X) {
        return ((X.leftCols(d) * oc).array() + b0).matrix().eval();
    };
    gt.mu1 = [oc, d, b0 = s.outcome_intercept, tau = s.tau](const Eigen::MatrixXd& X) {
        return ((X.leftCols(d) * oc).array() + (b0 + tau)).matrix().eval();
    };
    gt.pi = [lc, d, a0 = s.logit_intercept](const Eigen::MatrixXd& X) {
        const Eigen::ArrayXd z = (X.leftCols(d) * lc).array() + a0;
        return (1.0 / (1.0 + (-z).exp())).matrix().eval();
    };
    gt.gamma = [](const Eigen::MatrixXd& X, int) { return zeros_like(X); };
    return gt;
}

GroundTruth truth_of(const MBiasSpec& s) {
    GroundTruth gt;
    auto orc = std::make_shared<MBiasOracle>(s);
    gt.beta_star = s.tau;
    // C is a collider only when both arrows point into it; adjusting for it
    // biases the contrast only when the whole path T <- U1 -> C <- U2 -> Y
    // is open.
    const bool is_collider = s.a1 != 0.0 && s.b1 != 0.0;
    if (is_collider) gt.collider_indices = {0};
    gt.n_relevant = 1;
    gt.confounded = is_collider && s.a2 != 0.0 && s.b2 != 0.0;
    gt.mu0 = [orc](const Eigen::MatrixXd& X) {
        Eigen::VectorXd c = X.col(0), pi, m0, m1;
        orc->moments(c, pi, m0, m1);
        return (orc->s.b2 * m0).eval();
    };
    gt.mu1 = [orc](const Eigen::MatrixXd& X) {
        Eigen::VectorXd c = X.col(0), pi, m0, m1;
        orc->moments(c, pi, m0, m1);
        return ((orc->s.b2 * m1).array() + orc->s.tau).matrix().eval();
    };
    gt.pi = [orc](const Eigen::MatrixXd& X) {
        Eigen::VectorXd c = X.col(0), pi, m0, m1;
        orc->moments(c, pi, m0, m1);
        return pi;
    };
    gt.gamma = [orc](const Eigen::MatrixXd& X, int) {
        Eigen::VectorXd c = X.col(0), pi, m0, m1;
        orc->moments(c, pi, m0, m1);
        return (orc->s.b2 * (m1 - m0)).eval();
    };
    // E{mu1(C) - mu0(C)} over C ~ N(0, a1^2 + b1^2 + sigma_c^2)
    const double sd_c =
        std::sqrt(s.a1 * s.a1 + s.b1 * s.b1 + s.sigma_c * s.sigma_c);
    const GaussHermiteRule outer = gauss_hermite_normal(64);
    Eigen::VectorXd cg = sd_c * outer.nodes, pi, m0, m1;
    MBiasOracle& o = *orc;
    o.moments(cg, pi, m0, m1);
    gt.beta_observed = s.tau + s.b2 * outer.weights.dot(m1 - m0);
    return gt;
}

GroundTruth truth_of(const UnmeasuredConfounderSpec& s) {
    GroundTruth gt;
    auto orc = std::make_shared<UConfOracle>(s);
    gt.beta_star = s.tau;
    gt.n_relevant = 1;
    gt.confounded = true;
    gt.mu0 = [orc](const Eigen::MatrixXd& X) {
        Eigen::VectorXd x = X.col(0), pi, m0, m1;
        orc->moments(x, pi, m0, m1);
        return (orc->s.x_coef_y * x + orc->s.lambda_y * m0).eval();
    };
    gt.mu1 = [orc](const Eigen::MatrixXd& X) {
        Eigen::VectorXd x = X.col(0), pi, m0, m1;
        orc->moments(x, pi, m0, m1);
        return ((orc->s.x_coef_y * x + orc->s.lambda_y * m1).array() + orc->s.tau).matrix().eval();
    };
    gt.pi = [orc](const Eigen::MatrixXd& X) {
        Eigen::VectorXd x = X.col(0), pi, m0, m1;
        orc->moments(x, pi, m0, m1);
        return pi;
    };
    gt.gamma = [orc](const Eigen::MatrixXd& X, int) {
        Eigen::VectorXd x = X.col(0), pi, m0, m1;
        orc->moments(x, pi, m0, m1);
        return (orc->s.lambda_y * (m1 - m0)).eval();
    };
    const GaussHermiteRule outer = gauss_hermite_normal(80);
    Eigen::VectorXd pi, m0, m1;
    orc->moments(outer.nodes, pi, m0, m1);
    gt.beta_observed = s.tau + s.lambda_y * outer.weights.dot(m1 - m0);
    return gt;
}

GroundTruth truth_of(const SmoothNonparamSpec& s) {
    GroundTruth gt;
    gt.beta_star = s.tau;
    gt.beta_observed = s.tau;
    gt.n_relevant = s.d;
    gt.confounded = false;
    const int d = s.d;
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    auto index_of = [d, scale](const Eigen::MatrixXd& X) {
        return ((X.leftCols(d).array() - 0.5).rowwise().sum() * scale).matrix().eval();
    };
    gt.mu0 = [index_of, f = s.mu_freq, a = s.mu_amp](const Eigen::MatrixXd& X) {
        Eigen::VectorXd idx = index_of(X);
        return (a * (2.0 * kPi * f * idx.array()).sin()).matrix().eval();
    };
    gt.mu1 = [index_of, f = s.mu_freq, a = s.mu_amp, tau = s.tau](const Eigen::MatrixXd& X) {
        Eigen::VectorXd idx = index_of(X);
        return ((a * (2.0 * kPi * f * idx.array()).sin()) + tau).matrix().eval();
    };
    gt.pi = [index_of, f = s.pi_freq, a = s.pi_amp](const Eigen::MatrixXd& X) {
        Eigen::VectorXd idx = index_of(X);
        const Eigen::ArrayXd z = a * (2.0 * kPi * f * idx.array()).sin();
        return (1.0 / (1.0 + (-z).exp())).matrix().eval();
    };
    gt.gamma = [](const Eigen::MatrixXd& X, int) { return zeros_like(X); };
    return gt;
}

} // namespace

std::string dgp_name(const DGPSpec& dgp) {
    struct Visitor {
        std::string operator()(const LinearGaussianSpec&) const { return "linear_gaussian"; }
        std::string operator()(const MBiasSpec&) const { return "m_bias"; }
        std::string operator()(const UnmeasuredConfounderSpec&) const {
            return "unmeasured_confounder";
        }
        std::string operator()(const SmoothNonparamSpec&) const { return "smooth_nonparam"; }
    };
    return std::visit(Visitor{}, dgp);
}

GroundTruth make_ground_truth(const DGPSpec& dgp) {
    validate_dgp(dgp);
    return std::visit([](const auto& s) { return truth_of(s); }, dgp);
}

std::pair<Dataset, GroundTruth> generate(const DGPSpec& dgp, int n, std::uint64_t seed) {
    validate_dgp(dgp);
    GroundTruth gt = make_ground_truth(dgp);
    Dataset ds = gen_with_retries(dgp, n, seed);
    return {std::move(ds), std::move(gt)};
}

McMoment mc_beta_star(const DGPSpec& dgp, int n_draws, std::uint64_t seed) {
    validate_dgp(dgp);
    if (n_draws < 1) throw std::invalid_argument("mc_beta_star: n_draws must be >= 1");
    std::mt19937_64 rng(derive_seed(seed, 0x6274u));
    std::normal_distribution<double> N(0.0, 1.0);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    Eigen::VectorXd diff(n_draws);

    struct Visitor {
        std::mt19937_64& rng;
        std::normal_distribution<double>& N;
        std::uniform_real_distribution<double>& U;
        double operator()(const LinearGaussianSpec& s) {
            double mean_y = s.outcome_intercept;
            for (int j = 0; j < s.d; ++j) mean_y += s.outcome_coefs[static_cast<std::size_t>(j)] * N(rng);
            const double e = s.noise_sd * N(rng);
            const double y0 = mean_y + e, y1 = mean_y + s.tau + e;
            return y1 - y0;
        }
        double operator()(const MBiasSpec& s) {
            N(rng); // u1 (enters T only)
            const double u2 = N(rng);
            const double ey = s.sigma_y * N(rng);
            const double y0 = s.b2 * u2 + ey;
            return s.tau + s.b2 * u2 + ey - y0;
        }
        double operator()(const UnmeasuredConfounderSpec& s) {
            const double x = N(rng), u = N(rng);
            const double ey = s.sigma_y * N(rng);
            const double y0 = s.x_coef_y * x + s.lambda_y * u + ey;
            return s.tau + s.x_coef_y * x + s.lambda_y * u + ey - y0;
        }
        double operator()(const SmoothNonparamSpec& s) {
            double idx = 0.0;
            const double scale = 1.0 / std::sqrt(static_cast<double>(s.d));
            for (int j = 0; j < s.d; ++j) idx += (U(rng) - 0.5) * scale;
            const double base = s.mu_amp * std::sin(2.0 * kPi * s.mu_freq * idx);
            const double ey = s.sigma_y * N(rng);
            return base + s.tau + ey - (base + ey);
        }
    } visitor{rng, N, U};

    for (int i = 0; i < n_draws; ++i) diff(i) = std::visit(visitor, dgp);
    return moment_of(diff);
}

McMoment mc_gamma_expectation(const DGPSpec& dgp, int n_draws, std::uint64_t seed) {
    validate_dgp(dgp);
    if (n_draws < 2) throw std::invalid_argument("mc_gamma_expectation: n_draws must be >= 2");
    const GroundTruth gt = make_ground_truth(dgp);
    const Dataset ds = gen_with_retries(dgp, n_draws, derive_seed(seed, 0x6761u));
    const Eigen::VectorXd g0 = gt.gamma(ds.covariates, 0);
    const Eigen::VectorXd g1 = gt.gamma(ds.covariates, 1);
    Eigen::VectorXd v(n_draws);
    for (int i = 0; i < n_draws; ++i) v(i) = ds.treatment(i) == 1 ? g0(i) : g1(i);
    return moment_of(v);
}

GammaRange gamma_essential_range(const DGPSpec& dgp, int grid_points) {
    validate_dgp(dgp);
    if (grid_points < 2) throw std::invalid_argument("gamma_essential_range: need >= 2 points");
    GammaRange out;
    const GroundTruth gt = make_ground_truth(dgp);

    double span = 0.0; // +- span covers ~8 sd of the covariate index
    if (std::holds_alternative<UnmeasuredConfounderSpec>(dgp)) {
        span = 8.0;
    } else if (const auto* mb = std::get_if<MBiasSpec>(&dgp)) {
        span = 8.0 * std::sqrt(mb->a1 * mb->a1 + mb->b1 * mb->b1 + mb->sigma_c * mb->sigma_c);
    } else {
        return out; // unconfounded variants: gamma is identically zero
    }

    Eigen::MatrixXd grid(grid_points, 1);
    for (int i = 0; i < grid_points; ++i)
        grid(i, 0) = -span + 2.0 * span * static_cast<double>(i) /
                                 static_cast<double>(grid_points - 1);
    const Eigen::VectorXd g0 = gt.gamma(grid, 0);
    const Eigen::VectorXd g1 = gt.gamma(grid, 1);
    out.lower0 = g0.minCoeff();
    out.upper0 = g0.maxCoeff();
    out.lower1 = g1.minCoeff();
    out.upper1 = g1.maxCoeff();
    return out;
}

// ---- Monte Carlo engine ----

namespace {

struct RepSlot {
    std::vector<EffectEstimate> ests; // per method; valid when err is empty
    std::vector<std::string> err;
};

void validate_methods(const std::vector<MethodConfig>& methods) {
    if (methods.empty()) throw std::invalid_argument("run_monte_carlo: no methods given");
    OracleBindings dummy;
    dummy.mu0 = dummy.mu1 = dummy.pi = [](const Eigen::MatrixXd& X) { return zeros_like(X); };
    std::set<std::string> names;
    for (const auto& m : methods) {
        if (m.name.empty()) throw std::invalid_argument("run_monte_carlo: method needs a name");
        if (!names.insert(m.name).second)
            throw std::invalid_argument("run_monte_carlo: duplicate method name '" + m.name + "'");
        if (m.method != "dr" && m.method != "ipw" && m.method != "plugin" && m.method != "psm")
            throw std::invalid_argument("run_monte_carlo: unknown method '" + m.method + "'");
        if (m.folds < 2) throw std::invalid_argument("run_monte_carlo: folds must be >= 2");
        if (!(m.clip_epsilon >= 0.0) || m.clip_epsilon >= 0.5)
            throw std::invalid_argument("run_monte_carlo: clip_epsilon must be in [0, 0.5)");
        if (m.bootstrap_B < 0 || m.bootstrap_B == 1)
            throw std::invalid_argument("run_monte_carlo: bootstrap_B must be 0 or >= 2");
        make_outcome_learner(m.outcome_learner, dummy);        // validates the spec string
        make_propensity_learner(m.propensity_learner, dummy);  // ditto
    }
}

struct NuisanceGroup {
    std::string outcome, propensity;
    int folds = 0;
    double eps = 0.0;
    std::vector<std::size_t> members; // method indices
};

std::vector<NuisanceGroup> group_methods(const std::vector<MethodConfig>& methods) {
    std::map<std::tuple<std::string, std::string, int, double>, std::size_t> seen;
    std::vector<NuisanceGroup> groups;
    for (std::size_t m = 0; m < methods.size(); ++m) {
        const auto key = std::make_tuple(methods[m].outcome_learner,
                                         methods[m].propensity_learner, methods[m].folds,
                                         methods[m].clip_epsilon);
        auto it = seen.find(key);
        if (it == seen.end()) {
            seen.emplace(key, groups.size());
            groups.push_back(NuisanceGroup{methods[m].outcome_learner,
                                           methods[m].propensity_learner, methods[m].folds,
                                           methods[m].clip_epsilon,
                                           {m}});
        } else {
            groups[it->second].members.push_back(m);
        }
    }
    return groups;
}

} // namespace

SlopeFit fit_rate_slope(const std::vector<std::pair<double, double>>& points) {
    if (points.size() < 3)
        throw std::invalid_argument("fit_rate_slope: need at least 3 points");
    const auto m = static_cast<double>(points.size());
    double sx = 0.0, sy = 0.0;
    for (const auto& [n, rmse] : points) {
        if (!(n > 0.0) || !(rmse > 0.0))
            throw std::invalid_argument("fit_rate_slope: points must be strictly positive");
        sx += std::log(n);
        sy += std::log(rmse);
    }
    const double xbar = sx / m, ybar = sy / m;
    double sxx = 0.0, sxy = 0.0;
    for (const auto& [n, rmse] : points) {
        const double dx = std::log(n) - xbar;
        sxx += dx * dx;
        sxy += dx * (std::log(rmse) - ybar);
    }
    if (sxx == 0.0) throw std::invalid_argument("fit_rate_slope: sample sizes are all equal");
    SlopeFit fit;
    fit.slope = sxy / sxx;
    double rss = 0.0;
    for (const auto& [n, rmse] : points) {
        const double resid =
            std::log(rmse) - ybar - fit.slope * (std::log(n) - xbar);
        rss += resid * resid;
    }
    fit.slope_se = std::sqrt(std::max(rss, 0.0) / (m - 2.0) / sxx);
    return fit;
}

SimReport run_monte_carlo(const MonteCarloConfig& cfg) {
    validate_dgp(cfg.dgp);
    if (cfg.R < 2) throw std::invalid_argument("run_monte_carlo: R must be >= 2");
    if (cfg.n_grid.empty()) throw std::invalid_argument("run_monte_carlo: empty n_grid");
    for (int n : cfg.n_grid)
        if (n < 2) throw std::invalid_argument("run_monte_carlo: every n must be >= 2");
    validate_methods(cfg.methods);

    const GroundTruth gt = make_ground_truth(cfg.dgp);
    const auto groups = group_methods(cfg.methods);
    const std::size_t M = cfg.methods.size();
    const std::size_t n_cells = cfg.n_grid.size();
    const auto R = static_cast<std::size_t>(cfg.R);

    std::vector<RepSlot> slots(n_cells * R);
    parallel_for(slots.size(), cfg.jobs, [&](std::size_t idx) {
        const std::size_t n_idx = idx / R;
        const std::size_t r = idx % R;
        const int n = cfg.n_grid[n_idx];
        const std::uint64_t rep_seed = cfg.seed ^ static_cast<std::uint64_t>(r);
        RepSlot& slot = slots[idx];
        slot.ests.resize(M);
        slot.err.assign(M, "");

        Dataset ds;
        try {
            ds = gen_with_retries(cfg.dgp, n, rep_seed);
        } catch (const std::exception& e) {
            for (std::size_t m = 0; m < M; ++m) slot.err[m] = e.what();
            return;
        }
        OracleBindings bindings{gt.mu0, gt.mu1, gt.pi, rep_seed};
        for (const auto& g : groups) {
            NuisanceEstimates nuis;
            try {
                const auto outcome = make_outcome_learner(g.outcome, bindings);
                const auto propensity = make_propensity_learner(g.propensity, bindings);
                nuis = crossfit_nuisances(ds, outcome, propensity, g.folds, g.eps, rep_seed);
            } catch (const std::exception& e) {
                for (std::size_t m : g.members) slot.err[m] = e.what();
                continue;
            }
            for (std::size_t m : g.members) {
                const MethodConfig& mc = cfg.methods[m];
                BootstrapConfig bs;
                bs.B = mc.bootstrap_B;
                bs.refit = true;
                bs.seed = rep_seed;
                bs.jobs = 1; // replications are already the parallel unit
                try {
                    slot.ests[m] = estimate_by_name(mc.method, ds, nuis, bs);
                } catch (const std::exception& e) {
                    slot.err[m] = e.what();
                }
            }
        }
    });

    SimReport report;
    report.config = cfg;
    report.beta_star = gt.beta_star;
    report.beta_observed = gt.beta_observed;
    for (std::size_t n_idx = 0; n_idx < n_cells; ++n_idx) {
        for (std::size_t m = 0; m < M; ++m) {
            CellStats cell;
            cell.method = cfg.methods[m].name;
            cell.n = cfg.n_grid[n_idx];
            cell.R_total = cfg.R;
            std::vector<double> points, ses;
            int covered = 0;
            for (std::size_t r = 0; r < R; ++r) {
                const RepSlot& slot = slots[n_idx * R + r];
                if (!slot.err[m].empty()) {
                    ++cell.R_failed;
                    report.failures.push_back("(replication " + std::to_string(r) + ", n=" +
                                              std::to_string(cell.n) + ", method " + cell.method +
                                              "): " + slot.err[m]);
                    continue;
                }
                const EffectEstimate& e = slot.ests[m];
                points.push_back(e.point);
                ses.push_back(e.se);
                if (e.ci_lower <= gt.beta_star && gt.beta_star <= e.ci_upper) ++covered;
            }
            cell.R_used = static_cast<int>(points.size());
            if (cell.R_used > 0) {
                const auto used = static_cast<double>(cell.R_used);
                double sp = 0.0, sse = 0.0, se2 = 0.0, s_sq = 0.0;
                for (double p : points) {
                    sp += p;
                    const double e = p - gt.beta_star;
                    sse += e * e;
                }
                for (double s : ses) s_sq += s;
                const double mean_point = sp / used;
                cell.mean_bias = mean_point - gt.beta_star;
                cell.mean_bias_observed = mean_point - gt.beta_observed;
                cell.rmse = std::sqrt(sse / used);
                cell.mean_se = s_sq / used;
                cell.coverage = static_cast<double>(covered) / used;
                if (cell.R_used > 1) {
                    double vp = 0.0;
                    for (double p : points) vp += (p - mean_point) * (p - mean_point);
                    vp /= used - 1.0;
                    cell.mc_se_bias = std::sqrt(vp / used);
                    const double mean_e2 = sse / used;
                    for (double p : points) {
                        const double e2 = (p - gt.beta_star) * (p - gt.beta_star);
                        se2 += (e2 - mean_e2) * (e2 - mean_e2);
                    }
                    se2 = std::sqrt(se2 / (used - 1.0) / used);
                    cell.mc_se_rmse = cell.rmse > 0.0 ? se2 / (2.0 * cell.rmse) : 0.0;
                }
                cell.mc_se_coverage =
                    std::sqrt(cell.coverage * (1.0 - cell.coverage) / used);
            }
            report.cells.push_back(std::move(cell));
        }
    }

    if (n_cells >= 3) {
        for (std::size_t m = 0; m < M; ++m) {
            std::vector<std::pair<double, double>> pts;
            for (std::size_t n_idx = 0; n_idx < n_cells; ++n_idx) {
                const CellStats& cell = report.cells[n_idx * M + m];
                if (cell.R_used < 1 || !(cell.rmse > 0.0)) break;
                pts.emplace_back(static_cast<double>(cell.n), cell.rmse);
            }
            if (pts.size() == n_cells)
                report.slopes.push_back(MethodSlope{cfg.methods[m].name, fit_rate_slope(pts)});
        }
    }
    return report;
}

// ---- screening experiment ----

namespace {

struct ScreenSlot {
    double l2_screened = 0.0, l2_full = 0.0;
    std::vector<bool> rejected;
    int retained = 0;
};

Eigen::VectorXd residualize(const Eigen::HouseholderQR<Eigen::MatrixXd>& qr,
                            const Eigen::MatrixXd& Z, const Eigen::VectorXd& v) {
    return v - Z * qr.solve(v);
}

} // namespace

ScreeningReport screening_experiment(const ScreeningConfig& cfg) {
    validate_dgp(cfg.dgp);
    if (cfg.R < 2) throw std::invalid_argument("screening_experiment: R must be >= 2");
    if (cfg.n_grid.empty()) throw std::invalid_argument("screening_experiment: empty n_grid");
    if (!(cfg.level > 0.0 && cfg.level < 1.0))
        throw std::invalid_argument("screening_experiment: level must be in (0,1)");
    if (cfg.eval_points < 2)
        throw std::invalid_argument("screening_experiment: eval_points must be >= 2");

    const GroundTruth gt = make_ground_truth(cfg.dgp);
    const int d_v = gt.n_relevant;
    const double zcrit = normal_quantile(1.0 - cfg.level / 2.0);
    const auto R = static_cast<std::size_t>(cfg.R);

    // probe the covariate width once
    const int d_total = gen_with_retries(cfg.dgp, 2, cfg.seed).d();
    const int d_w = d_total - d_v;
    if (d_w < 0) throw std::invalid_argument("screening_experiment: dgp has no W block");

    std::vector<ScreenSlot> slots(cfg.n_grid.size() * R);
    parallel_for(slots.size(), cfg.jobs, [&](std::size_t idx) {
        const std::size_t n_idx = idx / R;
        const std::size_t r = idx % R;
        const int n = cfg.n_grid[n_idx];
        const std::uint64_t rep_seed = cfg.seed ^ static_cast<std::uint64_t>(r);
        ScreenSlot& slot = slots[idx];

        const Dataset ds = gen_with_retries(cfg.dgp, n, rep_seed);
        const Dataset eval =
            gen_with_retries(cfg.dgp, cfg.eval_points, derive_seed(rep_seed, 0xe7a1u));
        const Eigen::VectorXd mu1_true = gt.mu1(eval.covariates);

        // Fisher-z screen of each W column given (T, V)
        Eigen::MatrixXd Z(n, 2 + d_v);
        Z.col(0).setOnes();
        Z.col(1) = ds.treatment.cast<double>();
        Z.rightCols(d_v) = ds.covariates.leftCols(d_v);
        const Eigen::HouseholderQR<Eigen::MatrixXd> qr(Z);
        const Eigen::VectorXd ry = residualize(qr, Z, ds.outcome);
        const double ry_norm = ry.norm();
        slot.rejected.assign(static_cast<std::size_t>(d_w), false);
        std::vector<int> kept;
        const double dof = static_cast<double>(n - (d_v + 1) - 3);
        for (int j = 0; j < d_w; ++j) {
            const Eigen::VectorXd rw = residualize(qr, Z, ds.covariates.col(d_v + j));
            const double denom = rw.norm() * ry_norm;
            double rho = denom > 0.0 ? rw.dot(ry) / denom : 0.0;
            rho = std::clamp(rho, -1.0 + 1e-12, 1.0 - 1e-12);
            const double z = std::atanh(rho) * std::sqrt(std::max(dof, 0.0));
            if (std::abs(z) > zcrit) {
                slot.rejected[static_cast<std::size_t>(j)] = true;
                kept.push_back(d_v + j);
            }
        }
        slot.retained = static_cast<int>(kept.size());

        // pipeline fits on treated rows only (mu_1)
        std::vector<int> treated;
        for (int i = 0; i < n; ++i)
            if (ds.treatment(i) == 1) treated.push_back(i);
        std::vector<int> cols_a(static_cast<std::size_t>(d_v));
        for (int j = 0; j < d_v; ++j) cols_a[static_cast<std::size_t>(j)] = j;
        cols_a.insert(cols_a.end(), kept.begin(), kept.end());

        auto take = [&](const Eigen::MatrixXd& X, const std::vector<int>& rows,
                        const std::vector<int>& cols) {
            Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()),
                                static_cast<Eigen::Index>(cols.size()));
            for (std::size_t a = 0; a < rows.size(); ++a)
                for (std::size_t b = 0; b < cols.size(); ++b)
                    out(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
                        X(rows[a], cols[b]);
            return out;
        };
        auto take_cols = [&](const Eigen::MatrixXd& X, const std::vector<int>& cols) {
            Eigen::MatrixXd out(X.rows(), static_cast<Eigen::Index>(cols.size()));
            for (std::size_t b = 0; b < cols.size(); ++b)
                out.col(static_cast<Eigen::Index>(b)) = X.col(cols[b]);
            return out;
        };
        Eigen::VectorXd y_treated(static_cast<Eigen::Index>(treated.size()));
        for (std::size_t a = 0; a < treated.size(); ++a)
            y_treated(static_cast<Eigen::Index>(a)) = ds.outcome(treated[a]);

        const auto fit_a = fit_kernel(take(ds.covariates, treated, cols_a), y_treated,
                                      cfg.bandwidth);
        const Eigen::VectorXd pred_a = fit_a->predict(take_cols(eval.covariates, cols_a));
        slot.l2_screened = std::sqrt((pred_a - mu1_true).squaredNorm() /
                                     static_cast<double>(cfg.eval_points));

        std::vector<int> all_rows_cols(static_cast<std::size_t>(d_total));
        for (int j = 0; j < d_total; ++j) all_rows_cols[static_cast<std::size_t>(j)] = j;
        const auto fit_b = fit_kernel(take(ds.covariates, treated, all_rows_cols), y_treated,
                                      cfg.bandwidth);
        const Eigen::VectorXd pred_b = fit_b->predict(eval.covariates);
        slot.l2_full = std::sqrt((pred_b - mu1_true).squaredNorm() /
                                 static_cast<double>(cfg.eval_points));
    });

    ScreeningReport report;
    report.config = cfg;
    for (std::size_t n_idx = 0; n_idx < cfg.n_grid.size(); ++n_idx) {
        ScreeningCell cell;
        cell.n = cfg.n_grid[n_idx];
        cell.R_total = cfg.R;
        cell.rejection_rate.assign(static_cast<std::size_t>(d_w), 0.0);
        Eigen::VectorXd l2a(cfg.R), l2b(cfg.R);
        double retained = 0.0;
        for (std::size_t r = 0; r < R; ++r) {
            const ScreenSlot& slot = slots[n_idx * R + r];
            l2a(static_cast<Eigen::Index>(r)) = slot.l2_screened;
            l2b(static_cast<Eigen::Index>(r)) = slot.l2_full;
            retained += slot.retained;
            for (int j = 0; j < d_w; ++j)
                if (slot.rejected[static_cast<std::size_t>(j)])
                    cell.rejection_rate[static_cast<std::size_t>(j)] += 1.0;
        }
        for (int j = 0; j < d_w; ++j)
            cell.rejection_rate[static_cast<std::size_t>(j)] /= static_cast<double>(cfg.R);
        const McMoment ma = moment_of(l2a), mb = moment_of(l2b);
        cell.mean_l2_screened = ma.mean;
        cell.mc_se_l2_screened = ma.mc_se;
        cell.mean_l2_full = mb.mean;
        cell.mc_se_l2_full = mb.mc_se;
        cell.mean_retained = retained / static_cast<double>(cfg.R);
        report.cells.push_back(std::move(cell));
    }
    return report;
}

} // namespace drbounds
