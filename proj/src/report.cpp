#include "drbounds/report.hpp"

#include <algorithm>
#include <charconv>
#include <ctime>
#include <fstream>
#include <stdexcept>

namespace drbounds {

namespace {

using nlohmann::json;

std::string fmt_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const std::string& context) {
    if (!j.is_object()) throw std::invalid_argument(context + ": expected a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* key : allowed)
            if (it.key() == key) {
                ok = true;
                break;
            }
        if (!ok) throw std::invalid_argument(context + ": unknown key '" + it.key() + "'");
    }
}

std::string iso_utc_now() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

} // namespace

json to_json(const EffectEstimate& est, bool with_influence) {
    json j{{"method", est.method},
           {"point", est.point},
           {"se", est.se},
           {"ci", json::array({est.ci_lower, est.ci_upper})},
           {"n", est.n},
           {"clip_epsilon", est.clip_epsilon},
           {"clipped_count", est.clipped_count},
           {"folds", est.folds},
           {"seed", est.seed}};
    if (with_influence) {
        json arr = json::array();
        for (Eigen::Index i = 0; i < est.influence.size(); ++i) arr.push_back(est.influence(i));
        j["influence"] = std::move(arr);
    }
    return j;
}

json to_json(const BiasBound& bound) {
    switch (bound.kind) {
    case BiasBound::Kind::symmetric:
        return json{{"kind", "symmetric"}, {"delta", bound.delta}};
    case BiasBound::Kind::per_arm:
        return json{{"kind", "per_arm"},
                    {"l0", bound.l0},
                    {"u0", bound.u0},
                    {"l1", bound.l1},
                    {"u1", bound.u1}};
    case BiasBound::Kind::sign:
        return json{{"kind", "sign"},
                    {"sign", bound.sign == BiasBound::Sign::nonnegative ? "nonnegative"
                                                                        : "nonpositive"},
                    {"cap", bound.cap}};
    }
    throw std::logic_error("unreachable bias bound kind");
}

json to_json(const SensitivityInterval& iv) {
    return json{{"lower", iv.lower},
                {"upper", iv.upper},
                {"beta_point", iv.beta_point},
                {"beta_se", iv.beta_se},
                {"p1_hat", iv.p1_hat},
                {"bracket_lower", iv.bracket_lower},
                {"bracket_upper", iv.bracket_upper}};
}

json to_json(const TippingPoint& tp) {
    json j;
    j["delta_point"] = tp.delta_point ? json(*tp.delta_point) : json(nullptr);
    j["delta_ci"] = tp.delta_ci ? json(*tp.delta_ci) : json(nullptr);
    return j;
}

json to_json(const SubsetIndex& s) {
    return json{{"excluded", s.excluded}, {"label", s.str()}};
}

json to_json(const BoundsConfig& cfg) {
    return json{{"max_colliders", cfg.max_colliders},
                {"known_non_colliders", cfg.known_non_colliders},
                {"method", cfg.method},
                {"outcome_learner", cfg.outcome_learner},
                {"propensity_learner", cfg.propensity_learner},
                {"folds", cfg.folds},
                {"clip_epsilon", cfg.clip_epsilon},
                {"seed", cfg.seed},
                {"bootstrap_B", cfg.bootstrap_B},
                {"enum_cap", cfg.enum_cap}};
}

json to_json(const PartialIdentificationResult& res) {
    json entries = json::array();
    for (const auto& e : res.entries)
        entries.push_back(json{{"subset", to_json(e.subset)},
                               {"estimate", to_json(e.estimate, /*with_influence=*/false)}});
    return json{{"entries", std::move(entries)},
                {"point_bounds", json::array({res.point_lower, res.point_upper})},
                {"outer_ci", json::array({res.outer_ci_lower, res.outer_ci_upper})},
                {"argmin", res.argmin},
                {"argmax", res.argmax},
                {"argmin_subset", to_json(res.entries[res.argmin].subset)},
                {"argmax_subset", to_json(res.entries[res.argmax].subset)},
                {"config", to_json(res.config)}};
}

json to_json(const RateValue& rv) {
    json j{{"value", rv.value}, {"is_limit", rv.is_limit}};
    j["exact"] = rv.exact ? json(rv.exact->str()) : json(nullptr);
    return j;
}

// Flat shape: floats are primary, exact rationals ride along as strings.
json to_json(const MinimaxRate& mr) {
    json j{{"xi", mr.xi.value},
           {"term_pi", mr.term_pi.value},
           {"term_mu", mr.term_mu.value},
           {"term_pi_is_limit", mr.term_pi.is_limit},
           {"term_mu_is_limit", mr.term_mu.is_limit},
           {"in_root_n_regime", mr.in_root_n_regime}};
    j["xi_exact"] = mr.xi.exact ? json(mr.xi.exact->str()) : json(nullptr);
    j["term_pi_exact"] = mr.term_pi.exact ? json(mr.term_pi.exact->str()) : json(nullptr);
    j["term_mu_exact"] = mr.term_mu.exact ? json(mr.term_mu.exact->str()) : json(nullptr);
    return j;
}

json to_json(const MethodConfig& mc) {
    return json{{"name", mc.name},
                {"method", mc.method},
                {"outcome_learner", mc.outcome_learner},
                {"propensity_learner", mc.propensity_learner},
                {"folds", mc.folds},
                {"clip_epsilon", mc.clip_epsilon},
                {"bootstrap_B", mc.bootstrap_B}};
}

// Note: jobs is execution infrastructure, not statistical configuration; it is
// deliberately left out of echoes so reports are identical across job counts.
json to_json(const MonteCarloConfig& cfg) {
    json methods = json::array();
    for (const auto& m : cfg.methods) methods.push_back(to_json(m));
    return json{{"mode", "monte_carlo"},
                {"dgp", dgp_to_json(cfg.dgp)},
                {"methods", std::move(methods)},
                {"n_grid", cfg.n_grid},
                {"R", cfg.R},
                {"seed", cfg.seed}};
}

json to_json(const SimReport& report) {
    json cells = json::array();
    for (const auto& c : report.cells)
        cells.push_back(json{{"method", c.method},
                             {"n", c.n},
                             {"R_total", c.R_total},
                             {"R_used", c.R_used},
                             {"R_failed", c.R_failed},
                             {"mean_bias", c.mean_bias},
                             {"mean_bias_observed", c.mean_bias_observed},
                             {"rmse", c.rmse},
                             {"mean_se", c.mean_se},
                             {"coverage", c.coverage},
                             {"mc_se_bias", c.mc_se_bias},
                             {"mc_se_rmse", c.mc_se_rmse},
                             {"mc_se_coverage", c.mc_se_coverage}});
    json slopes = json::array();
    for (const auto& s : report.slopes)
        slopes.push_back(json{{"method", s.method},
                              {"slope", s.fit.slope},
                              {"slope_se", s.fit.slope_se}});
    return json{{"config", to_json(report.config)},
                {"beta_star", report.beta_star},
                {"beta_observed", report.beta_observed},
                {"cells", std::move(cells)},
                {"slopes", std::move(slopes)},
                {"failures", report.failures}};
}

json to_json(const ScreeningConfig& cfg) {
    json j{{"mode", "screening"},
           {"dgp", dgp_to_json(cfg.dgp)},
           {"n_grid", cfg.n_grid},
           {"R", cfg.R},
           {"level", cfg.level},
           {"seed", cfg.seed},
           {"eval_points", cfg.eval_points}};
    j["bandwidth"] = cfg.bandwidth ? json(*cfg.bandwidth) : json(nullptr);
    return j;
}

json to_json(const ScreeningReport& report) {
    json cells = json::array();
    for (const auto& c : report.cells)
        cells.push_back(json{{"n", c.n},
                             {"R_total", c.R_total},
                             {"mean_l2_screened", c.mean_l2_screened},
                             {"mean_l2_full", c.mean_l2_full},
                             {"mc_se_l2_screened", c.mc_se_l2_screened},
                             {"mc_se_l2_full", c.mc_se_l2_full},
                             {"rejection_rate", c.rejection_rate},
                             {"mean_retained", c.mean_retained}});
    return json{{"config", to_json(report.config)}, {"cells", std::move(cells)}};
}

json dgp_to_json(const DGPSpec& dgp) {
    struct Visitor {
        json operator()(const LinearGaussianSpec& s) const {
            return json{{"variant", "linear_gaussian"},
                        {"d", s.d},
                        {"tau", s.tau},
                        {"outcome_coefs", s.outcome_coefs},
                        {"logit_coefs", s.logit_coefs},
                        {"outcome_intercept", s.outcome_intercept},
                        {"logit_intercept", s.logit_intercept},
                        {"noise_sd", s.noise_sd},
                        {"d_noise", s.d_noise}};
        }
        json operator()(const MBiasSpec& s) const {
            return json{{"variant", "m_bias"},
                        {"tau", s.tau},
                        {"a1", s.a1},
                        {"a2", s.a2},
                        {"b1", s.b1},
                        {"b2", s.b2},
                        {"sigma_c", s.sigma_c},
                        {"sigma_y", s.sigma_y},
                        {"d_noise", s.d_noise}};
        }
        json operator()(const UnmeasuredConfounderSpec& s) const {
            return json{{"variant", "unmeasured_confounder"},
                        {"tau", s.tau},
                        {"propensity_intercept", s.propensity_intercept},
                        {"x_coef_t", s.x_coef_t},
                        {"lambda_t", s.lambda_t},
                        {"x_coef_y", s.x_coef_y},
                        {"lambda_y", s.lambda_y},
                        {"sigma_y", s.sigma_y}};
        }
        json operator()(const SmoothNonparamSpec& s) const {
            return json{{"variant", "smooth_nonparam"},
                        {"d", s.d},
                        {"tau", s.tau},
                        {"mu_freq", s.mu_freq},
                        {"mu_amp", s.mu_amp},
                        {"pi_freq", s.pi_freq},
                        {"pi_amp", s.pi_amp},
                        {"sigma_y", s.sigma_y},
                        {"d_noise", s.d_noise}};
        }
    };
    return std::visit(Visitor{}, dgp);
}

DGPSpec dgp_from_json(const json& j) {
    if (!j.is_object() || !j.contains("variant"))
        throw std::invalid_argument("dgp: missing 'variant'");
    const std::string variant = j.at("variant").get<std::string>();
    if (variant == "linear_gaussian") {
        check_keys(j,
                   {"variant", "d", "tau", "outcome_coefs", "logit_coefs", "outcome_intercept",
                    "logit_intercept", "noise_sd", "d_noise"},
                   "dgp linear_gaussian");
        LinearGaussianSpec s;
        s.d = j.value("d", s.d);
        s.tau = j.value("tau", s.tau);
        s.outcome_coefs = j.value("outcome_coefs", s.outcome_coefs);
        s.logit_coefs = j.value("logit_coefs", s.logit_coefs);
        s.outcome_intercept = j.value("outcome_intercept", s.outcome_intercept);
        s.logit_intercept = j.value("logit_intercept", s.logit_intercept);
        s.noise_sd = j.value("noise_sd", s.noise_sd);
        s.d_noise = j.value("d_noise", s.d_noise);
        return s;
    }
    if (variant == "m_bias") {
        check_keys(j, {"variant", "tau", "a1", "a2", "b1", "b2", "sigma_c", "sigma_y", "d_noise"},
                   "dgp m_bias");
        MBiasSpec s;
        s.tau = j.value("tau", s.tau);
        s.a1 = j.value("a1", s.a1);
        s.a2 = j.value("a2", s.a2);
        s.b1 = j.value("b1", s.b1);
        s.b2 = j.value("b2", s.b2);
        s.sigma_c = j.value("sigma_c", s.sigma_c);
        s.sigma_y = j.value("sigma_y", s.sigma_y);
        s.d_noise = j.value("d_noise", s.d_noise);
        return s;
    }
    if (variant == "unmeasured_confounder") {
        check_keys(j,
                   {"variant", "tau", "propensity_intercept", "x_coef_t", "lambda_t", "x_coef_y",
                    "lambda_y", "sigma_y"},
                   "dgp unmeasured_confounder");
        UnmeasuredConfounderSpec s;
        s.tau = j.value("tau", s.tau);
        s.propensity_intercept = j.value("propensity_intercept", s.propensity_intercept);
        s.x_coef_t = j.value("x_coef_t", s.x_coef_t);
        s.lambda_t = j.value("lambda_t", s.lambda_t);
        s.x_coef_y = j.value("x_coef_y", s.x_coef_y);
        s.lambda_y = j.value("lambda_y", s.lambda_y);
        s.sigma_y = j.value("sigma_y", s.sigma_y);
        return s;
    }
    if (variant == "smooth_nonparam") {
        check_keys(
            j, {"variant", "d", "tau", "mu_freq", "mu_amp", "pi_freq", "pi_amp", "sigma_y",
                "d_noise"},
            "dgp smooth_nonparam");
        SmoothNonparamSpec s;
        s.d = j.value("d", s.d);
        s.tau = j.value("tau", s.tau);
        s.mu_freq = j.value("mu_freq", s.mu_freq);
        s.mu_amp = j.value("mu_amp", s.mu_amp);
        s.pi_freq = j.value("pi_freq", s.pi_freq);
        s.pi_amp = j.value("pi_amp", s.pi_amp);
        s.sigma_y = j.value("sigma_y", s.sigma_y);
        s.d_noise = j.value("d_noise", s.d_noise);
        return s;
    }
    throw std::invalid_argument("dgp: unknown variant '" + variant + "'");
}

MethodConfig method_config_from_json(const json& j) {
    check_keys(j,
               {"name", "method", "outcome_learner", "propensity_learner", "folds",
                "clip_epsilon", "bootstrap_B"},
               "method");
    MethodConfig m;
    m.name = j.value("name", std::string());
    m.method = j.value("method", m.method);
    if (m.name.empty()) m.name = m.method;
    m.outcome_learner = j.value("outcome_learner", m.outcome_learner);
    m.propensity_learner = j.value("propensity_learner", m.propensity_learner);
    m.folds = j.value("folds", m.folds);
    m.clip_epsilon = j.value("clip_epsilon", m.clip_epsilon);
    m.bootstrap_B = j.value("bootstrap_B", m.bootstrap_B);
    return m;
}

MonteCarloConfig mc_config_from_json(const json& j) {
    check_keys(j, {"mode", "dgp", "methods", "n_grid", "R", "seed"}, "simulate config");
    MonteCarloConfig cfg;
    if (!j.contains("dgp")) throw std::invalid_argument("simulate config: missing 'dgp'");
    cfg.dgp = dgp_from_json(j.at("dgp"));
    if (!j.contains("methods") || !j.at("methods").is_array() || j.at("methods").empty())
        throw std::invalid_argument("simulate config: 'methods' must be a nonempty array");
    for (const auto& m : j.at("methods")) cfg.methods.push_back(method_config_from_json(m));
    cfg.n_grid = j.value("n_grid", std::vector<int>{});
    if (cfg.n_grid.empty())
        throw std::invalid_argument("simulate config: 'n_grid' must be a nonempty array");
    cfg.R = j.value("R", cfg.R);
    cfg.seed = j.value("seed", cfg.seed);
    return cfg;
}

ScreeningConfig screening_config_from_json(const json& j) {
    check_keys(j, {"mode", "dgp", "n_grid", "R", "level", "seed", "eval_points", "bandwidth"},
               "screening config");
    ScreeningConfig cfg;
    if (!j.contains("dgp")) throw std::invalid_argument("screening config: missing 'dgp'");
    cfg.dgp = dgp_from_json(j.at("dgp"));
    cfg.n_grid = j.value("n_grid", std::vector<int>{});
    if (cfg.n_grid.empty())
        throw std::invalid_argument("screening config: 'n_grid' must be a nonempty array");
    cfg.R = j.value("R", cfg.R);
    cfg.level = j.value("level", cfg.level);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.eval_points = j.value("eval_points", cfg.eval_points);
    if (j.contains("bandwidth") && !j.at("bandwidth").is_null())
        cfg.bandwidth = j.at("bandwidth").get<double>();
    return cfg;
}

std::string sim_report_csv(const SimReport& report) {
    std::string out = "method,n,R_total,R_used,R_failed,mean_bias,mean_bias_observed,rmse,"
                      "mean_se,coverage,mc_se_bias,mc_se_rmse,mc_se_coverage\n";
    for (const auto& c : report.cells) {
        out += c.method + ',' + std::to_string(c.n) + ',' + std::to_string(c.R_total) + ',' +
               std::to_string(c.R_used) + ',' + std::to_string(c.R_failed) + ',' +
               fmt_double(c.mean_bias) + ',' + fmt_double(c.mean_bias_observed) + ',' +
               fmt_double(c.rmse) + ',' + fmt_double(c.mean_se) + ',' + fmt_double(c.coverage) +
               ',' + fmt_double(c.mc_se_bias) + ',' + fmt_double(c.mc_se_rmse) + ',' +
               fmt_double(c.mc_se_coverage) + '\n';
    }
    return out;
}

std::string screening_report_csv(const ScreeningReport& report) {
    std::string out = "n,R_total,mean_l2_screened,mean_l2_full,mc_se_l2_screened,"
                      "mc_se_l2_full,mean_retained,rejection_rates\n";
    for (const auto& c : report.cells) {
        std::string rates;
        for (std::size_t j = 0; j < c.rejection_rate.size(); ++j) {
            if (j > 0) rates += ';';
            rates += fmt_double(c.rejection_rate[j]);
        }
        out += std::to_string(c.n) + ',' + std::to_string(c.R_total) + ',' +
               fmt_double(c.mean_l2_screened) + ',' + fmt_double(c.mean_l2_full) + ',' +
               fmt_double(c.mc_se_l2_screened) + ',' + fmt_double(c.mc_se_l2_full) + ',' +
               fmt_double(c.mean_retained) + ',' + rates + '\n';
    }
    return out;
}

json plot_spec(const SimReport& report) {
    struct Channel {
        const char* title;
        const char* field;
        const char* y_scale;
    };
    const Channel channels[] = {{"RMSE vs n", "rmse", "log"},
                                {"Mean bias vs n", "mean_bias", "linear"},
                                {"95% CI coverage vs n", "coverage", "linear"}};
    std::vector<std::string> methods;
    for (const auto& c : report.cells)
        if (std::find(methods.begin(), methods.end(), c.method) == methods.end())
            methods.push_back(c.method);

    json charts = json::array();
    for (const auto& ch : channels) {
        json series = json::array();
        for (const auto& m : methods) {
            json points = json::array();
            for (const auto& c : report.cells) {
                if (c.method != m) continue;
                double v = 0.0;
                if (std::string(ch.field) == "rmse") v = c.rmse;
                else if (std::string(ch.field) == "mean_bias") v = c.mean_bias;
                else v = c.coverage;
                points.push_back(json::array({c.n, v}));
            }
            series.push_back(json{{"label", m}, {"points", std::move(points)}});
        }
        json chart{{"title", ch.title},
                   {"x", json{{"field", "n"}, {"scale", "log"}}},
                   {"y", json{{"field", ch.field}, {"scale", ch.y_scale}}},
                   {"series", std::move(series)}};
        if (std::string(ch.field) == "coverage") chart["reference"] = 0.95;
        charts.push_back(std::move(chart));
    }
    return json{{"charts", std::move(charts)}};
}

json make_report(const std::string& command, json config, json result) {
    return json{{"schema_version", "1"},
                {"command", command},
                {"config", std::move(config)},
                {"result", std::move(result)},
                {"timestamp", iso_utc_now()}};
}

void write_report_file(const std::string& path, const json& report) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open output file '" + path + "'");
    out << report.dump(2) << '\n';
    if (!out) throw std::runtime_error("failed writing output file '" + path + "'");
}

} // namespace drbounds
