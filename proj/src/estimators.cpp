#include "drbounds/estimators.hpp"

#include "drbounds/parallel.hpp"
#include "drbounds/seeding.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <stdexcept>

namespace drbounds {

namespace {

double sample_sd(const Eigen::VectorXd& v) {
    const auto n = v.size();
    if (n < 2) return 0.0;
    const double mean = v.mean();
    return std::sqrt((v.array() - mean).square().sum() / static_cast<double>(n - 1));
}

EffectEstimate finish_influence_estimate(Eigen::VectorXd phi, const std::string& method,
                                         const NuisanceEstimates& nuis) {
    EffectEstimate est;
    est.n = static_cast<int>(phi.size());
    est.point = phi.mean();
    est.se = sample_sd(phi) / std::sqrt(static_cast<double>(est.n));
    est.ci_lower = est.point - 1.96 * est.se;
    est.ci_upper = est.point + 1.96 * est.se;
    est.influence = std::move(phi);
    est.method = method;
    est.clip_epsilon = nuis.clip_epsilon;
    est.clipped_count = nuis.clipped_count;
    est.folds = nuis.folds.K;
    est.seed = nuis.seed;
    return est;
}

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& X, const std::vector<int>& rows) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), X.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = X.row(rows[i]);
    return out;
}

Eigen::VectorXd take(const Eigen::VectorXd& v, const std::vector<int>& rows) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) out(static_cast<Eigen::Index>(i)) = v(rows[i]);
    return out;
}

Eigen::VectorXi take(const Eigen::VectorXi& v, const std::vector<int>& rows) {
    Eigen::VectorXi out(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) out(static_cast<Eigen::Index>(i)) = v(rows[i]);
    return out;
}

void check_lengths(const Dataset& ds, const NuisanceEstimates& nuis) {
    if (nuis.mu0_hat.size() != ds.n() || nuis.mu1_hat.size() != ds.n() ||
        nuis.pi_hat.size() != ds.n())
        throw std::invalid_argument("nuisance estimates do not match dataset length");
}

// Resample row indices within each fold so the fold structure is preserved.
std::vector<int> fold_preserving_resample(const FoldAssignment& fa,
                                          const std::vector<std::vector<int>>& fold_rows,
                                          std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<int> idx(fa.fold_of.size());
    for (std::size_t i = 0; i < fa.fold_of.size(); ++i) {
        const auto& pool = fold_rows[static_cast<std::size_t>(fa.fold_of[i])];
        std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
        idx[i] = pool[pick(rng)];
    }
    return idx;
}

Dataset resampled_dataset(const Dataset& ds, const std::vector<int>& idx) {
    Dataset out;
    out.outcome = take(ds.outcome, idx);
    out.treatment = take(ds.treatment, idx);
    out.covariates = take_rows(ds.covariates, idx);
    out.names = ds.names;
    out.outcome_name = ds.outcome_name;
    out.treatment_name = ds.treatment_name;
    return out;
}

// Nearest-opposite-arm match on the propensity scale; ties go to the lowest
// original index, including ties that straddle both sides of the query.
std::vector<int> match_1nn(const Eigen::VectorXd& pi, const Eigen::VectorXi& t) {
    const int n = static_cast<int>(pi.size());
    struct Entry {
        double p;
        int idx;
    };
    std::array<std::vector<Entry>, 2> arm;
    for (int i = 0; i < n; ++i) arm[t(i)].push_back({pi(i), i});
    for (auto& v : arm)
        std::sort(v.begin(), v.end(), [](const Entry& a, const Entry& b) {
            return a.p < b.p || (a.p == b.p && a.idx < b.idx);
        });
    if (arm[0].empty() || arm[1].empty())
        throw std::runtime_error("psm: one treatment arm is empty");
    // run_min[k] = smallest original index within the maximal run of equal
    // propensity values containing position k
    std::array<std::vector<int>, 2> run_min;
    for (int a = 0; a < 2; ++a) {
        const auto& v = arm[a];
        run_min[a].resize(v.size());
        for (std::size_t k = 0; k < v.size(); ++k) {
            if (k > 0 && v[k].p == v[k - 1].p)
                run_min[a][k] = std::min(run_min[a][k - 1], v[k].idx);
            else
                run_min[a][k] = v[k].idx;
        }
        for (std::size_t k = v.size(); k-- > 1;)
            if (v[k].p == v[k - 1].p) run_min[a][k - 1] = run_min[a][k];
    }
    std::vector<int> match(n);
    for (int i = 0; i < n; ++i) {
        const auto& v = arm[1 - t(i)];
        const auto& rm = run_min[1 - t(i)];
        const double p = pi(i);
        auto it = std::lower_bound(v.begin(), v.end(), p,
                                   [](const Entry& e, double val) { return e.p < val; });
        const std::size_t right = static_cast<std::size_t>(it - v.begin());
        double best = std::numeric_limits<double>::infinity();
        int best_idx = -1;
        if (right < v.size()) {
            best = v[right].p - p;
            best_idx = rm[right];
        }
        if (right > 0) {
            const double dl = p - v[right - 1].p;
            if (dl < best || (dl == best && rm[right - 1] < best_idx)) {
                best = dl;
                best_idx = rm[right - 1];
            }
        }
        match[i] = best_idx;
    }
    return match;
}

double psm_point(const Dataset& ds, const Eigen::VectorXd& pi) {
    const auto match = match_1nn(pi, ds.treatment);
    double acc = 0.0;
    for (int i = 0; i < ds.n(); ++i) {
        const double sign = ds.treatment(i) == 1 ? 1.0 : -1.0;
        acc += sign * (ds.outcome(i) - ds.outcome(match[i]));
    }
    return acc / static_cast<double>(ds.n());
}

// Shared bootstrap loop for the two non-influence-function estimators.
EffectEstimate bootstrap_estimate(const Dataset& ds, const NuisanceEstimates& nuis,
                                  const BootstrapConfig& bs, const std::string& method,
                                  double point,
                                  const std::function<double(const Dataset&, const Eigen::VectorXd&)>&
                                      statistic) {
    if (bs.B < 0 || bs.B == 1)
        throw std::invalid_argument("bootstrap B must be 0 or >= 2");
    EffectEstimate est;
    est.point = point;
    est.method = method;
    est.n = ds.n();
    est.clip_epsilon = nuis.clip_epsilon;
    est.clipped_count = nuis.clipped_count;
    est.folds = nuis.folds.K;
    est.seed = nuis.seed;
    if (bs.B == 0) {
        est.ci_lower = est.ci_upper = point;
        return est;
    }
    std::vector<std::vector<int>> fold_rows(static_cast<std::size_t>(nuis.folds.K));
    for (std::size_t i = 0; i < nuis.folds.fold_of.size(); ++i)
        fold_rows[static_cast<std::size_t>(nuis.folds.fold_of[i])].push_back(static_cast<int>(i));

    Eigen::VectorXd points(bs.B);
    parallel_for(static_cast<std::size_t>(bs.B), bs.jobs, [&](std::size_t b) {
        const auto idx =
            fold_preserving_resample(nuis.folds, fold_rows, derive_seed(bs.seed, 0xb0075 + b));
        const Dataset dsb = resampled_dataset(ds, idx);
        if (bs.refit) {
            const auto nb = crossfit_nuisances(dsb, nuis.outcome_learner, nuis.propensity_learner,
                                               nuis.folds, nuis.clip_epsilon);
            points(static_cast<Eigen::Index>(b)) =
                statistic(dsb, method == "plugin" ? (nb.mu1_hat - nb.mu0_hat).eval() : nb.pi_hat);
        } else {
            Eigen::VectorXd stored = method == "plugin"
                                         ? (nuis.mu1_hat - nuis.mu0_hat).eval()
                                         : nuis.pi_hat;
            points(static_cast<Eigen::Index>(b)) = statistic(dsb, take(stored, idx));
        }
    });
    est.se = sample_sd(points);
    est.ci_lower = est.point - 1.96 * est.se;
    est.ci_upper = est.point + 1.96 * est.se;
    return est;
}

} // namespace

ClipResult clip_propensities(const Eigen::VectorXd& pi, double eps) {
    if (!(eps >= 0.0 && eps < 0.5))
        throw std::invalid_argument("clip epsilon must lie in [0, 0.5)");
    if (!pi.allFinite()) throw std::invalid_argument("propensities must be finite");
    ClipResult out;
    out.pi = pi.cwiseMax(eps).cwiseMin(1.0 - eps);
    out.clipped_count = static_cast<int>((out.pi.array() != pi.array()).count());
    return out;
}

NuisanceEstimates crossfit_nuisances(const Dataset& ds,
                                     std::shared_ptr<const OutcomeLearner> outcome,
                                     std::shared_ptr<const PropensityLearner> propensity,
                                     const FoldAssignment& folds, double clip_epsilon) {
    if (!outcome || !propensity) throw std::invalid_argument("crossfit: null learner");
    if (static_cast<int>(folds.fold_of.size()) != ds.n())
        throw std::invalid_argument("crossfit: fold assignment length mismatch");
    if (!(clip_epsilon >= 0.0 && clip_epsilon < 0.5))
        throw std::invalid_argument("clip epsilon must lie in [0, 0.5)");

    const int n = ds.n();
    Eigen::VectorXd mu0(n), mu1(n), pi_raw(n);
    for (int k = 0; k < folds.K; ++k) {
        std::vector<int> hold, train0, train1, train;
        for (int i = 0; i < n; ++i) {
            if (folds.fold_of[i] == k) {
                hold.push_back(i);
            } else {
                train.push_back(i);
                (ds.treatment(i) == 0 ? train0 : train1).push_back(i);
            }
        }
        if (hold.empty()) continue;
        if (train0.empty() || train1.empty())
            throw std::runtime_error("crossfit: training complement of fold " + std::to_string(k) +
                                     " lacks a treatment arm");
        const auto m0 = outcome->fit(take_rows(ds.covariates, train0), take(ds.outcome, train0), 0);
        const auto m1 = outcome->fit(take_rows(ds.covariates, train1), take(ds.outcome, train1), 1);
        const auto mp = propensity->fit(take_rows(ds.covariates, train), take(ds.treatment, train));
        const Eigen::MatrixXd Xh = take_rows(ds.covariates, hold);
        const Eigen::VectorXd p0 = m0->predict(Xh);
        const Eigen::VectorXd p1 = m1->predict(Xh);
        const Eigen::VectorXd pp = mp->predict(Xh);
        for (std::size_t j = 0; j < hold.size(); ++j) {
            mu0(hold[j]) = p0(static_cast<Eigen::Index>(j));
            mu1(hold[j]) = p1(static_cast<Eigen::Index>(j));
            pi_raw(hold[j]) = pp(static_cast<Eigen::Index>(j));
        }
    }
    if (!mu0.allFinite() || !mu1.allFinite() || !pi_raw.allFinite())
        throw std::runtime_error("crossfit: learner produced non-finite predictions");

    NuisanceEstimates nuis;
    auto clipped = clip_propensities(pi_raw, clip_epsilon);
    nuis.mu0_hat = std::move(mu0);
    nuis.mu1_hat = std::move(mu1);
    nuis.pi_hat = std::move(clipped.pi);
    nuis.clipped_count = clipped.clipped_count;
    nuis.clip_epsilon = clip_epsilon;
    nuis.folds = folds;
    nuis.outcome_desc = outcome->descriptor();
    nuis.propensity_desc = propensity->descriptor();
    nuis.seed = folds.seed;
    nuis.outcome_learner = std::move(outcome);
    nuis.propensity_learner = std::move(propensity);
    return nuis;
}

NuisanceEstimates crossfit_nuisances(const Dataset& ds,
                                     std::shared_ptr<const OutcomeLearner> outcome,
                                     std::shared_ptr<const PropensityLearner> propensity,
                                     int K, double clip_epsilon, std::uint64_t seed) {
    return crossfit_nuisances(ds, std::move(outcome), std::move(propensity),
                              split_folds(ds.n(), K, seed), clip_epsilon);
}

EffectEstimate estimate_dr(const Dataset& ds, const NuisanceEstimates& nuis) {
    check_lengths(ds, nuis);
    const int n = ds.n();
    Eigen::VectorXd phi(n);
    for (int i = 0; i < n; ++i) {
        const double t = ds.treatment(i);
        const double sign = 2.0 * t - 1.0;
        const double denom = sign * nuis.pi_hat(i) + (1.0 - t); // = pi if T=1, 1-pi if T=0
        if (denom == 0.0)
            throw std::runtime_error("estimate_dr: zero denominator at row " + std::to_string(i));
        const double mu_t = t == 1.0 ? nuis.mu1_hat(i) : nuis.mu0_hat(i);
        phi(i) = sign * (ds.outcome(i) - mu_t) / denom + nuis.mu1_hat(i) - nuis.mu0_hat(i);
    }
    return finish_influence_estimate(std::move(phi), "dr", nuis);
}

EffectEstimate estimate_ipw(const Dataset& ds, const NuisanceEstimates& nuis) {
    check_lengths(ds, nuis);
    const int n = ds.n();
    Eigen::VectorXd phi(n);
    for (int i = 0; i < n; ++i) {
        const double t = ds.treatment(i);
        const double denom = t == 1.0 ? nuis.pi_hat(i) : 1.0 - nuis.pi_hat(i);
        if (denom == 0.0)
            throw std::runtime_error("estimate_ipw: zero denominator at row " + std::to_string(i));
        phi(i) = (2.0 * t - 1.0) * ds.outcome(i) / denom;
    }
    return finish_influence_estimate(std::move(phi), "ipw", nuis);
}

EffectEstimate estimate_plugin(const Dataset& ds, const NuisanceEstimates& nuis,
                               const BootstrapConfig& bs) {
    check_lengths(ds, nuis);
    const double point = (nuis.mu1_hat - nuis.mu0_hat).mean();
    return bootstrap_estimate(ds, nuis, bs, "plugin", point,
                              [](const Dataset&, const Eigen::VectorXd& mudiff) {
                                  return mudiff.mean();
                              });
}

EffectEstimate estimate_psm_1nn(const Dataset& ds, const NuisanceEstimates& nuis,
                                const BootstrapConfig& bs) {
    check_lengths(ds, nuis);
    const double point = psm_point(ds, nuis.pi_hat);
    return bootstrap_estimate(ds, nuis, bs, "psm", point,
                              [](const Dataset& d, const Eigen::VectorXd& pi) {
                                  return psm_point(d, pi);
                              });
}

EffectEstimate estimate_by_name(const std::string& method, const Dataset& ds,
                                const NuisanceEstimates& nuis, const BootstrapConfig& bs) {
    if (method == "dr") return estimate_dr(ds, nuis);
    if (method == "ipw") return estimate_ipw(ds, nuis);
    if (method == "plugin") return estimate_plugin(ds, nuis, bs);
    if (method == "psm") return estimate_psm_1nn(ds, nuis, bs);
    throw std::invalid_argument("unknown method '" + method +
                                "' (expected dr, ipw, plugin, or psm)");
}

} // namespace drbounds
