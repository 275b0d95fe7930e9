#include "drbounds/collider_bounds.hpp"
#include "drbounds/dataset.hpp"
#include "drbounds/estimators.hpp"
#include "drbounds/rates.hpp"
#include "drbounds/report.hpp"
#include "drbounds/sensitivity.hpp"
#include "drbounds/simlab.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace {

using drbounds::BiasBound;
using nlohmann::json;

int default_jobs() {
    if (const char* env = std::getenv("DRBOUNDS_JOBS")) {
        try {
            const int v = std::stoi(env);
            if (v >= 1) return v;
        } catch (const std::exception&) {
        }
        throw std::invalid_argument("DRBOUNDS_JOBS must be a positive integer");
    }
    return 1;
}

struct CommonEstimateFlags {
    std::string outcome_col = "y";
    std::string treatment_col = "t";
    std::string method = "dr";
    std::string outcome_learner = "kernel";
    std::string propensity_learner = "logistic";
    int folds = 5;
    double clip_epsilon = 0.01;
    std::uint64_t seed = 0;
    int bootstrap_B = 200;
    bool no_refit = false;
    std::string data_path;
    std::string output = "drbounds_report.json";
    int jobs = 1;

    void attach(CLI::App* cmd) {
        cmd->add_option("data", data_path, "input CSV file")->required();
        cmd->add_option("--outcome", outcome_col, "outcome column name")->capture_default_str();
        cmd->add_option("--treatment", treatment_col, "treatment column name")
            ->capture_default_str();
        cmd->add_option("--method", method, "estimator: dr | ipw | plugin | psm")
            ->capture_default_str();
        cmd->add_option("--outcome-learner", outcome_learner,
                        "outcome learner spec (linear | mean | kernel | kernel(bw=...))")
            ->capture_default_str();
        cmd->add_option("--propensity-learner", propensity_learner,
                        "propensity learner spec (logistic | const | kernel)")
            ->capture_default_str();
        cmd->add_option("--folds,-K", folds, "cross-fitting folds")->capture_default_str();
        cmd->add_option("--clip-epsilon", clip_epsilon, "propensity clip epsilon")
            ->capture_default_str();
        cmd->add_option("--seed", seed, "RNG seed")->capture_default_str();
        cmd->add_option("--bootstrap-B", bootstrap_B,
                        "bootstrap draws for plugin/psm standard errors")
            ->capture_default_str();
        cmd->add_flag("--no-refit", no_refit, "bootstrap reuses stored nuisance predictions");
        cmd->add_option("--output,-o", output, "report file")->capture_default_str();
        cmd->add_option("--jobs", jobs, "worker threads (env DRBOUNDS_JOBS)")
            ->capture_default_str();
    }

    void validate() const {
        if (method != "dr" && method != "ipw" && method != "plugin" && method != "psm")
            throw std::invalid_argument("estimate: unknown method '" + method + "'");
        if (folds < 2) throw std::invalid_argument("estimate: --folds must be >= 2");
        if (!(clip_epsilon >= 0.0) || clip_epsilon >= 0.5)
            throw std::invalid_argument("estimate: --clip-epsilon must be in [0, 0.5)");
        if (bootstrap_B < 0 || bootstrap_B == 1)
            throw std::invalid_argument("estimate: --bootstrap-B must be 0 or >= 2");
        if (jobs < 1) throw std::invalid_argument("--jobs must be >= 1");
        drbounds::make_outcome_learner(outcome_learner);      // rejects bad specs up front
        drbounds::make_propensity_learner(propensity_learner);
    }

    json config_echo() const {
        return json{{"data", data_path},
                    {"outcome", outcome_col},
                    {"treatment", treatment_col},
                    {"method", method},
                    {"outcome_learner", outcome_learner},
                    {"propensity_learner", propensity_learner},
                    {"folds", folds},
                    {"clip_epsilon", clip_epsilon},
                    {"seed", seed},
                    {"bootstrap_B", bootstrap_B},
                    {"refit", !no_refit},
                    {"output", output}};
    }

    drbounds::EffectEstimate run(const drbounds::Dataset& ds) const {
        const auto outcome = drbounds::make_outcome_learner(outcome_learner);
        const auto propensity = drbounds::make_propensity_learner(propensity_learner);
        const auto nuis = drbounds::crossfit_nuisances(ds, outcome, propensity, folds,
                                                       clip_epsilon, seed);
        drbounds::BootstrapConfig bs;
        bs.B = bootstrap_B;
        bs.refit = !no_refit;
        bs.seed = seed;
        bs.jobs = jobs;
        return drbounds::estimate_by_name(method, ds, nuis, bs);
    }
};

std::string csv_sibling(const std::string& output) {
    const std::string suffix = ".json";
    if (output.size() > suffix.size() &&
        output.compare(output.size() - suffix.size(), suffix.size(), suffix) == 0)
        return output.substr(0, output.size() - suffix.size()) + ".csv";
    return output + ".csv";
}

double parse_rate_arg(const std::string& text, std::optional<drbounds::Rational>& exact,
                      const char* flag) {
    exact = drbounds::parse_rational(text);
    if (exact) {
        if (!(exact->value() > 0.0))
            throw std::invalid_argument(std::string(flag) + " must be positive");
        return exact->value();
    }
    try {
        std::size_t pos = 0;
        const double v = std::stod(text, &pos);
        if (pos != text.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw std::invalid_argument(std::string(flag) + ": cannot parse '" + text + "'");
    }
}

int run_cli(int argc, char** argv) {
    CLI::App app{"doubly robust treatment-effect estimation with sensitivity and "
                 "collider-robust bounds"};
    app.require_subcommand(1);
    const int env_jobs = default_jobs();

    // ---- estimate ----
    auto* est_cmd = app.add_subcommand("estimate", "cross-fitted effect estimate");
    auto est_flags = std::make_shared<CommonEstimateFlags>();
    est_flags->jobs = env_jobs;
    est_flags->attach(est_cmd);
    est_cmd->callback([est_flags]() {
        est_flags->validate();
        const auto ds =
            drbounds::load_csv(est_flags->data_path, est_flags->outcome_col,
                               est_flags->treatment_col);
        const auto est = est_flags->run(ds);
        json result = drbounds::to_json(est);
        result["warnings"] = ds.warnings;
        const json report = drbounds::make_report("estimate", est_flags->config_echo(),
                                                  std::move(result));
        drbounds::write_report_file(est_flags->output, report);
        std::printf("%s estimate: %.6f (se %.6f, 95%% CI [%.6f, %.6f], n=%d)\n",
                    est.method.c_str(), est.point, est.se, est.ci_lower, est.ci_upper, est.n);
        std::printf("report written to %s\n", est_flags->output.c_str());
    });

    // ---- sensitivity ----
    auto* sens_cmd = app.add_subcommand("sensitivity",
                                        "effect bounds under a confounding-bias budget");
    auto sens_flags = std::make_shared<CommonEstimateFlags>();
    sens_flags->jobs = env_jobs;
    sens_flags->attach(sens_cmd);
    auto delta = std::make_shared<double>(-1.0);
    auto gamma0 = std::make_shared<std::vector<double>>();
    auto gamma1 = std::make_shared<std::vector<double>>();
    auto sign = std::make_shared<std::string>();
    auto cap = std::make_shared<double>(-1.0);
    auto tipping_grid = std::make_shared<std::vector<double>>();
    sens_cmd->add_option("--delta", *delta, "symmetric bias bound |gamma| <= delta");
    sens_cmd->add_option("--gamma0", *gamma0, "bounds l,u on gamma(.,0)")
        ->delimiter(',')
        ->expected(2);
    sens_cmd->add_option("--gamma1", *gamma1, "bounds l,u on gamma(.,1)")
        ->delimiter(',')
        ->expected(2);
    sens_cmd->add_option("--sign", *sign,
                         "bias sign restriction: nonneg(ative) | nonpos(itive)");
    sens_cmd->add_option("--cap", *cap, "magnitude cap for --sign");
    sens_cmd->add_option("--tipping-grid", *tipping_grid,
                         "comma-separated deltas for the tipping-point scan")
        ->delimiter(',');
    sens_cmd->callback([sens_flags, delta, gamma0, gamma1, sign, cap, tipping_grid]() {
        sens_flags->validate();
        const bool have_arm = !gamma0->empty() || !gamma1->empty();
        const int given = (*delta >= 0.0 ? 1 : 0) + (have_arm ? 1 : 0) +
                          (sign->empty() ? 0 : 1);
        if (given != 1)
            throw std::invalid_argument(
                "sensitivity: give exactly one of --delta, --gamma0/--gamma1, or "
                "--sign with --cap");
        BiasBound bound;
        if (*delta >= 0.0) {
            bound = BiasBound::symmetric(*delta);
        } else if (have_arm) {
            if (gamma0->size() != 2 || gamma1->size() != 2)
                throw std::invalid_argument(
                    "sensitivity: per-arm bounds need both --gamma0 l,u and --gamma1 l,u");
            bound = BiasBound::per_arm((*gamma0)[0], (*gamma0)[1], (*gamma1)[0],
                                       (*gamma1)[1]);
        } else {
            if (*sign != "nonneg" && *sign != "nonnegative" && *sign != "nonpos" &&
                *sign != "nonpositive")
                throw std::invalid_argument(
                    "sensitivity: --sign must be nonneg(ative) or nonpos(itive)");
            if (*cap <= 0.0)
                throw std::invalid_argument("sensitivity: --sign requires --cap > 0");
            const bool nonneg = *sign == "nonneg" || *sign == "nonnegative";
            bound = BiasBound::sign_bound(nonneg ? BiasBound::Sign::nonnegative
                                                 : BiasBound::Sign::nonpositive,
                                          *cap);
        }
        bound.validate();

        const auto ds = drbounds::load_csv(sens_flags->data_path, sens_flags->outcome_col,
                                           sens_flags->treatment_col);
        const auto est = sens_flags->run(ds);
        const double p1_hat = ds.treatment.cast<double>().mean();
        const auto interval = drbounds::bound_effect(est, bound, p1_hat);

        json config = sens_flags->config_echo();
        config["bound"] = drbounds::to_json(bound);
        config["tipping_grid"] = *tipping_grid;
        json result{{"estimate", drbounds::to_json(est, /*with_influence=*/false)},
                    {"interval", drbounds::to_json(interval)}};
        if (!tipping_grid->empty())
            result["tipping"] =
                drbounds::to_json(drbounds::tipping_point(est, *tipping_grid));
        const json report =
            drbounds::make_report("sensitivity", std::move(config), std::move(result));
        drbounds::write_report_file(sens_flags->output, report);
        std::printf("beta_hat=%.6f (se %.6f); effect interval under %s: [%.6f, %.6f]\n",
                    est.point, est.se, bound.describe().c_str(), interval.lower,
                    interval.upper);
        std::printf("report written to %s\n", sens_flags->output.c_str());
    });

    // ---- bounds ----
    auto* bounds_cmd = app.add_subcommand("bounds",
                                          "leave-k-out collider-robust partial identification");
    auto bounds_flags = std::make_shared<CommonEstimateFlags>();
    bounds_flags->jobs = env_jobs;
    bounds_flags->attach(bounds_cmd);
    auto max_colliders = std::make_shared<int>(1);
    auto knc_names = std::make_shared<std::vector<std::string>>();
    auto enum_cap = std::make_shared<std::size_t>(10000);
    bounds_cmd->add_option("--max-colliders,-k", *max_colliders,
                           "sweep subsets excluding at most k covariates")
        ->capture_default_str();
    bounds_cmd->add_option("--known-non-colliders", *knc_names,
                           "comma-separated covariate names never excluded")
        ->delimiter(',');
    bounds_cmd->add_option("--enum-cap", *enum_cap, "maximum number of subsets")
        ->capture_default_str();
    bounds_cmd->callback([bounds_flags, max_colliders, knc_names, enum_cap]() {
        bounds_flags->validate();
        if (*max_colliders < 0)
            throw std::invalid_argument("bounds: --max-colliders must be >= 0");
        if (*enum_cap < 1) throw std::invalid_argument("bounds: --enum-cap must be >= 1");
        const auto ds = drbounds::load_csv(bounds_flags->data_path, bounds_flags->outcome_col,
                                           bounds_flags->treatment_col);
        drbounds::BoundsConfig cfg;
        cfg.max_colliders = *max_colliders;
        for (const auto& name : *knc_names) {
            const auto it = std::find(ds.names.begin(), ds.names.end(), name);
            if (it == ds.names.end())
                throw std::invalid_argument("bounds: unknown covariate '" + name + "'");
            cfg.known_non_colliders.push_back(
                static_cast<int>(it - ds.names.begin()));
        }
        cfg.method = bounds_flags->method;
        cfg.outcome_learner = bounds_flags->outcome_learner;
        cfg.propensity_learner = bounds_flags->propensity_learner;
        cfg.folds = bounds_flags->folds;
        cfg.clip_epsilon = bounds_flags->clip_epsilon;
        cfg.seed = bounds_flags->seed;
        cfg.bootstrap_B = bounds_flags->bootstrap_B;
        cfg.enum_cap = *enum_cap;
        cfg.jobs = bounds_flags->jobs;

        const auto res = drbounds::estimate_bounds(ds, cfg);
        json config = bounds_flags->config_echo();
        config["max_colliders"] = *max_colliders;
        config["known_non_colliders"] = *knc_names;
        config["enum_cap"] = *enum_cap;
        const json report =
            drbounds::make_report("bounds", std::move(config), drbounds::to_json(res));
        drbounds::write_report_file(bounds_flags->output, report);
        std::printf("%zu subsets; point bounds [%.6f, %.6f]; outer 95%% CI [%.6f, %.6f]\n",
                    res.entries.size(), res.point_lower, res.point_upper, res.outer_ci_lower,
                    res.outer_ci_upper);
        std::printf("report written to %s\n", bounds_flags->output.c_str());
    });

    // ---- simulate ----
    auto* sim_cmd = app.add_subcommand("simulate", "Monte Carlo study from a JSON config");
    auto sim_config_path = std::make_shared<std::string>();
    auto sim_output = std::make_shared<std::string>("drbounds_report.json");
    auto sim_csv = std::make_shared<std::string>();
    auto plot_spec_path = std::make_shared<std::string>();
    auto sim_jobs = std::make_shared<int>(env_jobs);
    sim_cmd->add_option("config", *sim_config_path, "JSON config file")->required();
    sim_cmd->add_option("--output,-o", *sim_output, "report file")->capture_default_str();
    sim_cmd->add_option("--csv", *sim_csv, "per-cell CSV table (defaults next to the report)");
    sim_cmd->add_option("--emit-plot-spec", *plot_spec_path,
                        "write a declarative chart-spec JSON here");
    sim_cmd->add_option("--jobs", *sim_jobs, "worker threads (env DRBOUNDS_JOBS)")
        ->capture_default_str();
    sim_cmd->callback([sim_config_path, sim_output, sim_csv, plot_spec_path, sim_jobs]() {
        if (*sim_jobs < 1) throw std::invalid_argument("--jobs must be >= 1");
        std::ifstream in(*sim_config_path);
        if (!in)
            throw std::invalid_argument("simulate: cannot open config '" + *sim_config_path +
                                        "'");
        json raw;
        try {
            in >> raw;
        } catch (const json::parse_error& e) {
            throw std::invalid_argument(std::string("simulate: config is not valid JSON: ") +
                                        e.what());
        }
        const std::string mode =
            raw.is_object() ? raw.value("mode", std::string("monte_carlo")) : "monte_carlo";
        const std::string csv_path = sim_csv->empty() ? csv_sibling(*sim_output) : *sim_csv;

        if (mode == "monte_carlo") {
            auto cfg = drbounds::mc_config_from_json(raw);
            cfg.jobs = *sim_jobs;
            const auto report = drbounds::run_monte_carlo(cfg);
            const json body = drbounds::make_report("simulate", drbounds::to_json(cfg),
                                                    drbounds::to_json(report));
            drbounds::write_report_file(*sim_output, body);
            std::ofstream csv(csv_path, std::ios::binary | std::ios::trunc);
            if (!csv) throw std::runtime_error("cannot open CSV file '" + csv_path + "'");
            csv << drbounds::sim_report_csv(report);
            if (!plot_spec_path->empty())
                drbounds::write_report_file(*plot_spec_path, drbounds::plot_spec(report));
            std::printf("simulated %zu cells (%zu failures); beta*=%.6f\n",
                        report.cells.size(), report.failures.size(), report.beta_star);
            for (const auto& s : report.slopes)
                std::printf("  %s: rate slope %.3f (se %.3f)\n", s.method.c_str(),
                            s.fit.slope, s.fit.slope_se);
            std::printf("report written to %s (table: %s)\n", sim_output->c_str(),
                        csv_path.c_str());
        } else if (mode == "screening") {
            auto cfg = drbounds::screening_config_from_json(raw);
            cfg.jobs = *sim_jobs;
            const auto report = drbounds::screening_experiment(cfg);
            const json body = drbounds::make_report("simulate", drbounds::to_json(cfg),
                                                    drbounds::to_json(report));
            drbounds::write_report_file(*sim_output, body);
            std::ofstream csv(csv_path, std::ios::binary | std::ios::trunc);
            if (!csv) throw std::runtime_error("cannot open CSV file '" + csv_path + "'");
            csv << drbounds::screening_report_csv(report);
            if (!plot_spec_path->empty()) {
                json series = json::array();
                json pa = json::array(), pb = json::array();
                for (const auto& c : report.cells) {
                    pa.push_back(json::array({c.n, c.mean_l2_screened}));
                    pb.push_back(json::array({c.n, c.mean_l2_full}));
                }
                series.push_back(json{{"label", "screened"}, {"points", std::move(pa)}});
                series.push_back(json{{"label", "full"}, {"points", std::move(pb)}});
                const json spec{
                    {"charts",
                     json::array({json{{"title", "L2 error of mu_1 vs n"},
                                       {"x", json{{"field", "n"}, {"scale", "log"}}},
                                       {"y", json{{"field", "l2"}, {"scale", "log"}}},
                                       {"series", std::move(series)}}})}};
                drbounds::write_report_file(*plot_spec_path, spec);
            }
            std::printf("screening over %zu cells written to %s (table: %s)\n",
                        report.cells.size(), sim_output->c_str(), csv_path.c_str());
        } else {
            throw std::invalid_argument("simulate: unknown mode '" + mode +
                                        "' (expected monte_carlo or screening)");
        }
    });

    // ---- rates ----
    auto* rates_cmd = app.add_subcommand("rates", "minimax rate exponent calculator");
    auto alpha_s = std::make_shared<std::string>();
    auto zeta_s = std::make_shared<std::string>();
    auto dim = std::make_shared<int>(0);
    auto mu_err = std::make_shared<double>(-1.0);
    auto pi_err = std::make_shared<double>(-1.0);
    auto rates_output = std::make_shared<std::string>("drbounds_report.json");
    rates_cmd->add_option("--alpha", *alpha_s, "Holder smoothness of pi (number or p/q)")
        ->required();
    rates_cmd->add_option("--zeta", *zeta_s, "Holder smoothness of mu_t (number or p/q)")
        ->required();
    rates_cmd->add_option("--d", *dim, "covariate dimension")->required();
    rates_cmd->add_option("--mu-err", *mu_err, "L2 error of mu_t for the remainder bound");
    rates_cmd->add_option("--pi-err", *pi_err, "L2 error of pi for the remainder bound");
    rates_cmd->add_option("--output,-o", *rates_output, "report file")->capture_default_str();
    rates_cmd->callback([alpha_s, zeta_s, dim, mu_err, pi_err, rates_output]() {
        drbounds::RateInputs inp;
        inp.alpha = parse_rate_arg(*alpha_s, inp.alpha_exact, "--alpha");
        inp.zeta = parse_rate_arg(*zeta_s, inp.zeta_exact, "--zeta");
        inp.d = *dim;
        const auto rate = drbounds::minimax_rate_exponent(inp);
        json result = drbounds::to_json(rate);
        if (*mu_err >= 0.0 || *pi_err >= 0.0) {
            if (*mu_err < 0.0 || *pi_err < 0.0)
                throw std::invalid_argument("rates: give both --mu-err and --pi-err");
            result["remainder_bound"] = drbounds::remainder_bound(*mu_err, *pi_err);
        }
        const json config{{"alpha", *alpha_s},
                          {"zeta", *zeta_s},
                          {"d", *dim},
                          {"mu_err", *mu_err >= 0.0 ? json(*mu_err) : json(nullptr)},
                          {"pi_err", *pi_err >= 0.0 ? json(*pi_err) : json(nullptr)},
                          {"output", *rates_output}};
        const json report = drbounds::make_report("rates", config, std::move(result));
        drbounds::write_report_file(*rates_output, report);
        std::printf("xi = %.10g%s, in_root_n_regime = %s\n", rate.xi.value,
                    rate.xi.exact ? (" (= " + rate.xi.exact->str() + ")").c_str() : "",
                    rate.in_root_n_regime ? "true" : "false");
        std::printf("report written to %s\n", rates_output->c_str());
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run_cli(argc, argv);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
