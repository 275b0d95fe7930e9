#include "drbounds/dataset.hpp"
#include "drbounds/simlab.hpp"

#include <doctest.h>
#include <json.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unistd.h>

// End-to-end tests that drive the installed binary through /bin/sh, the same
// way a user would. The test runner exports DRBOUNDS_BIN; outside ctest we
// fall back to ./drbounds in the working directory.

using nlohmann::json;
using namespace drbounds;

namespace {

const std::string& cli_binary() {
    static const std::string bin = [] {
        if (const char* p = std::getenv("DRBOUNDS_BIN")) return std::string(p);
        return std::string("./drbounds");
    }();
    return bin;
}

const std::string& scratch() {
    static const std::string dir = [] {
        const auto d = std::filesystem::temp_directory_path() /
                       ("drbounds_cli_" + std::to_string(::getpid()));
        std::filesystem::create_directories(d);
        return d.string();
    }();
    return dir;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json load_json(const std::string& path) {
    std::ifstream in(path);
    REQUIRE_MESSAGE(bool(in), "missing report file " << path);
    json j;
    in >> j;
    return j;
}

struct CliResult {
    int code = -1;
    std::string out;
    std::string err;
};

CliResult run_cli(const std::string& args, const std::string& env_prefix = "") {
    static int call = 0;
    const std::string tag = scratch() + "/io_" + std::to_string(call++);
    const std::string cmd = env_prefix + "\"" + cli_binary() + "\" " + args + " > \"" + tag +
                            ".out\" 2> \"" + tag + ".err\"";
    const int raw = std::system(cmd.c_str());
    CliResult res;
    if (raw != -1 && WIFEXITED(raw)) res.code = WEXITSTATUS(raw);
    res.out = slurp(tag + ".out");
    res.err = slurp(tag + ".err");
    return res;
}

// Deterministic linear-Gaussian sample written out as a CSV fixture.
std::string make_linear_csv(const std::string& name, int n, int d, std::uint64_t seed) {
    LinearGaussianSpec spec;
    spec.d = d;
    spec.outcome_coefs.assign(static_cast<std::size_t>(d), 0.8);
    spec.logit_coefs.assign(static_cast<std::size_t>(d), 0.5);
    const auto ds = generate(spec, n, seed).first;
    const std::string path = scratch() + "/" + name;
    write_csv(ds, path);
    return path;
}

json report_sans_timestamp(const std::string& path) {
    json j = load_json(path);
    j.erase("timestamp");
    return j;
}

} // namespace

TEST_CASE("cli estimate writes a conformant report") {
    const std::string csv = make_linear_csv("est.csv", 80, 2, 7);
    const std::string rep = scratch() + "/est_rep.json";

    SUBCASE("default dr run") {
        const auto r = run_cli("estimate \"" + csv + "\" --seed 3 -o \"" + rep + "\"");
        CHECK(r.code == 0);
        CHECK(r.out.find("dr estimate:") != std::string::npos);
        CHECK(r.out.find("report written to") != std::string::npos);

        const json j = load_json(rep);
        CHECK(j.at("schema_version") == "1");
        CHECK(j.at("command") == "estimate");
        CHECK(j.at("timestamp").is_string());

        const json& cfg = j.at("config");
        CHECK(cfg.at("method") == "dr");
        CHECK(cfg.at("outcome_learner") == "kernel");
        CHECK(cfg.at("propensity_learner") == "logistic");
        CHECK(cfg.at("folds") == 5);
        CHECK(cfg.at("clip_epsilon") == 0.01);
        CHECK(cfg.at("seed") == 3);
        CHECK(cfg.at("bootstrap_B") == 200);
        CHECK(cfg.at("refit") == true);
        CHECK_FALSE(cfg.contains("jobs")); // execution detail, not configuration

        const json& res = j.at("result");
        CHECK(res.at("method") == "dr");
        CHECK(res.at("n") == 80);
        REQUIRE(res.at("ci").is_array());
        REQUIRE(res.at("ci").size() == 2);
        const double point = res.at("point").get<double>();
        CHECK(res.at("ci")[0].get<double>() <= point);
        CHECK(point <= res.at("ci")[1].get<double>());
        CHECK(res.at("se").get<double>() > 0.0);
        CHECK(res.at("influence").size() == 80);
        CHECK(res.at("warnings").is_array());
    }

    SUBCASE("same invocation twice is bit-identical modulo timestamp") {
        REQUIRE(run_cli("estimate \"" + csv + "\" --seed 3 -o \"" + rep + "\"").code == 0);
        const json first = report_sans_timestamp(rep);
        REQUIRE(run_cli("estimate \"" + csv + "\" --seed 3 -o \"" + rep + "\"").code == 0);
        CHECK(first == report_sans_timestamp(rep));
    }

    SUBCASE("plugin bootstrap matches across --jobs") {
        const std::string args = "estimate \"" + csv +
                                 "\" --method plugin --outcome-learner linear "
                                 "--bootstrap-B 16 --seed 5 -o \"" + rep + "\"";
        REQUIRE(run_cli(args + " --jobs 1").code == 0);
        const json one = report_sans_timestamp(rep);
        REQUIRE(run_cli(args + " --jobs 3").code == 0);
        CHECK(one == report_sans_timestamp(rep));
        CHECK(one.at("result").at("method") == "plugin");
    }

    SUBCASE("ipw method selection shows up in the result") {
        const auto r = run_cli("estimate \"" + csv + "\" --method ipw -o \"" + rep + "\"");
        CHECK(r.code == 0);
        CHECK(load_json(rep).at("result").at("method") == "ipw");
    }

    SUBCASE("custom column names") {
        const std::string path = scratch() + "/renamed.csv";
        {
            std::ofstream f(path);
            f << "resp,arm,x1\n";
            for (int i = 0; i < 20; ++i)
                f << 0.25 * i << "," << i % 2 << "," << 0.1 * i - 1.0 << "\n";
        }
        const auto r = run_cli("estimate \"" + path + "\" --outcome resp --treatment arm -o \"" +
                               rep + "\"");
        CHECK(r.code == 0);
        CHECK(load_json(rep).at("config").at("outcome") == "resp");
    }
}

TEST_CASE("cli exit codes distinguish validation from runtime failures") {
    const std::string csv = make_linear_csv("codes.csv", 40, 1, 11);

    SUBCASE("validation errors exit 1") {
        CHECK(run_cli("estimate /nonexistent/file.csv").code == 1);
        CHECK(run_cli("estimate \"" + csv + "\" --method banana").code == 1);
        CHECK(run_cli("estimate \"" + csv + "\" --folds 1").code == 1);
        CHECK(run_cli("estimate \"" + csv + "\" --clip-epsilon 0.6").code == 1);
        CHECK(run_cli("estimate \"" + csv + "\" --bootstrap-B 1").code == 1);
        CHECK(run_cli("estimate \"" + csv + "\" --outcome-learner forest").code == 1);
        CHECK(run_cli("estimate \"" + csv + "\" --jobs 0").code == 1);
    }

    SUBCASE("unknown flags are hard errors") {
        const auto r = run_cli("estimate \"" + csv + "\" --frobnicate 3");
        CHECK(r.code == 1);
        const auto r2 = run_cli("rates --alpha 1 --zeta 1 --d 4 --bogus");
        CHECK(r2.code == 1);
    }

    SUBCASE("help and missing subcommand") {
        CHECK(run_cli("--help").code == 0);
        CHECK(run_cli("").code == 1);
        CHECK(run_cli("frobnicate").code == 1);
    }

    SUBCASE("runtime failure exits 2") {
        // one treated unit: some training complement has no treated arm
        const std::string path = scratch() + "/one_treated.csv";
        {
            std::ofstream f(path);
            f << "y,t,x1\n";
            for (int i = 0; i < 11; ++i) f << 0.1 * i << ",0," << 0.3 * i << "\n";
            f << "2.5,1,0.7\n";
        }
        const auto r = run_cli("estimate \"" + path + "\" --folds 2");
        CHECK(r.code == 2);
        CHECK(r.err.find("error:") != std::string::npos);
    }

    SUBCASE("DRBOUNDS_JOBS env fallback") {
        CHECK(run_cli("rates --alpha 1 --zeta 1 --d 4 -o \"" + scratch() + "/envr.json\"",
                      "DRBOUNDS_JOBS=2 ")
                  .code == 0);
        const auto bad = run_cli("rates --alpha 1 --zeta 1 --d 4", "DRBOUNDS_JOBS=abc ");
        CHECK(bad.code == 1);
        CHECK(bad.err.find("DRBOUNDS_JOBS") != std::string::npos);
    }
}

TEST_CASE("cli sensitivity") {
    const std::string csv = make_linear_csv("sens.csv", 80, 2, 13);
    const std::string rep = scratch() + "/sens_rep.json";
    const std::string base = "sensitivity \"" + csv + "\" --seed 2 -o \"" + rep + "\"";

    SUBCASE("symmetric delta budget") {
        const auto r = run_cli(base + " --delta 0.25");
        CHECK(r.code == 0);
        const json j = load_json(rep);
        CHECK(j.at("command") == "sensitivity");
        CHECK(j.at("config").at("bound").at("kind") == "symmetric");

        const json& iv = j.at("result").at("interval");
        const double beta = iv.at("beta_point").get<double>();
        // interval endpoints are exactly beta -/+ the bracket ends
        CHECK(iv.at("lower").get<double>() == beta - iv.at("bracket_upper").get<double>());
        CHECK(iv.at("upper").get<double>() == beta - iv.at("bracket_lower").get<double>());
        CHECK(iv.at("lower").get<double>() == doctest::Approx(beta - 0.25).epsilon(1e-12));
        CHECK(iv.at("upper").get<double>() == doctest::Approx(beta + 0.25).epsilon(1e-12));
        CHECK_FALSE(j.at("result").at("estimate").contains("influence"));
        CHECK_FALSE(j.at("result").contains("tipping"));
    }

    SUBCASE("per-arm bounds") {
        const auto r = run_cli(base + " --gamma0 0,0.2 --gamma1 -0.1,0.1");
        CHECK(r.code == 0);
        const json j = load_json(rep);
        CHECK(j.at("config").at("bound").at("kind") == "per_arm");
        const json& iv = j.at("result").at("interval");
        CHECK(iv.at("lower").get<double>() <= iv.at("upper").get<double>());
        const double p1 = iv.at("p1_hat").get<double>();
        CHECK(p1 >= 0.0);
        CHECK(p1 <= 1.0);
    }

    SUBCASE("sign restriction with cap") {
        const auto r = run_cli(base + " --sign nonpositive --cap 0.5");
        CHECK(r.code == 0);
        const json iv = load_json(rep).at("result").at("interval");
        const double beta = iv.at("beta_point").get<double>();
        CHECK(iv.at("lower").get<double>() == beta); // bias <= 0 cannot inflate beta
        CHECK(iv.at("upper").get<double>() == doctest::Approx(beta + 0.5).epsilon(1e-12));
    }

    SUBCASE("tipping grid adds the scan block") {
        const auto r = run_cli(base + " --delta 2 --tipping-grid 0,0.5,1,2");
        CHECK(r.code == 0);
        const json j = load_json(rep);
        REQUIRE(j.at("result").contains("tipping"));
        CHECK(j.at("result").at("tipping").contains("delta_point"));
        CHECK(j.at("result").at("tipping").contains("delta_ci"));
    }

    SUBCASE("exactly one bound family is required") {
        CHECK(run_cli(base).code == 1);
        CHECK(run_cli(base + " --delta 0.1 --gamma0 0,1 --gamma1 0,1").code == 1);
        CHECK(run_cli(base + " --delta 0.1 --sign nonneg --cap 1").code == 1);
        CHECK(run_cli(base + " --gamma0 0,1").code == 1);       // gamma1 missing
        CHECK(run_cli(base + " --gamma0 0.1 --gamma1 0,1").code == 1); // wrong arity
        CHECK(run_cli(base + " --sign nonneg").code == 1);      // cap missing
        CHECK(run_cli(base + " --sign sideways --cap 1").code == 1);
        CHECK(run_cli(base + " --delta -0.5").code == 1);
    }
}

TEST_CASE("cli bounds") {
    const std::string csv = make_linear_csv("bounds.csv", 150, 3, 17);
    const std::string rep = scratch() + "/bounds_rep.json";
    const std::string base = "bounds \"" + csv +
                             "\" --outcome-learner linear --folds 3 --bootstrap-B 0 -o \"" +
                             rep + "\"";

    SUBCASE("three covariates at k=1 give four entries") {
        const auto r = run_cli(base + " --max-colliders 1");
        CHECK(r.code == 0);
        CHECK(r.out.find("4 subsets") != std::string::npos);
        const json j = load_json(rep);
        CHECK(j.at("command") == "bounds");
        CHECK(j.at("config").at("max_colliders") == 1);

        const json& res = j.at("result");
        REQUIRE(res.at("entries").size() == 4);
        CHECK(res.at("entries")[0].at("subset").at("label") == "{}");
        const double lo = res.at("point_bounds")[0].get<double>();
        const double hi = res.at("point_bounds")[1].get<double>();
        CHECK(lo <= hi);
        CHECK(res.at("outer_ci")[0].get<double>() <= lo);
        CHECK(hi <= res.at("outer_ci")[1].get<double>());
        for (const auto& e : res.at("entries")) {
            const double p = e.at("estimate").at("point").get<double>();
            CHECK(lo <= p);
            CHECK(p <= hi);
        }
    }

    SUBCASE("known non-colliders shrink the sweep") {
        const auto r = run_cli(base + " -k 1 --known-non-colliders x1,x3");
        CHECK(r.code == 0);
        const json res = load_json(rep).at("result");
        REQUIRE(res.at("entries").size() == 2);
        CHECK(res.at("entries")[1].at("subset").at("excluded") == json::array({1}));
    }

    SUBCASE("unknown covariate name is a validation error") {
        const auto r = run_cli(base + " --known-non-colliders nope");
        CHECK(r.code == 1);
        CHECK(r.err.find("unknown covariate") != std::string::npos);
    }

    SUBCASE("enumeration cap") {
        const auto r = run_cli(base + " -k 3 --enum-cap 2");
        CHECK(r.code == 1);
        CHECK(r.err.find("lower k or add known non-colliders") != std::string::npos);
    }

    SUBCASE("subset failures name the subset") {
        const auto r = run_cli("bounds \"" + csv +
                               "\" --outcome-learner linear --bootstrap-B 0 -k 1 --folds 1000");
        CHECK(r.code == 1);
        CHECK(r.err.find("subset {") != std::string::npos);
    }
}

TEST_CASE("cli rates") {
    const std::string rep = scratch() + "/rates_rep.json";

    SUBCASE("the 1/3 example") {
        const auto r = run_cli("rates --alpha 1 --zeta 1 --d 4 -o \"" + rep + "\"");
        CHECK(r.code == 0);
        CHECK(r.out.find("(= 1/3)") != std::string::npos);
        CHECK(r.out.find("in_root_n_regime = false") != std::string::npos);
        const json res = load_json(rep).at("result");
        CHECK(res.at("xi").get<double>() == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
        CHECK(res.at("xi_exact") == "1/3");
        CHECK(res.at("in_root_n_regime") == false);
    }

    SUBCASE("alpha=zeta=d pins 1/2") {
        const auto r = run_cli("rates --alpha 2 --zeta 2 --d 2 -o \"" + rep + "\"");
        CHECK(r.code == 0);
        const json res = load_json(rep).at("result");
        CHECK(res.at("xi").get<double>() == 0.5);
        CHECK(res.at("xi_exact") == "1/2");
        CHECK(res.at("in_root_n_regime") == true);
    }

    SUBCASE("rational arguments") {
        const auto r = run_cli("rates --alpha 3/4 --zeta 5/4 --d 2 -o \"" + rep + "\"");
        CHECK(r.code == 0);
        CHECK(load_json(rep).at("result").at("xi_exact").is_string());
    }

    SUBCASE("remainder bound needs both errors") {
        const auto r =
            run_cli("rates --alpha 1 --zeta 1 --d 4 --mu-err 0.1 --pi-err 0.2 -o \"" + rep +
                    "\"");
        CHECK(r.code == 0);
        CHECK(load_json(rep).at("result").at("remainder_bound").get<double>() ==
              doctest::Approx(0.02).epsilon(1e-12));
        CHECK(run_cli("rates --alpha 1 --zeta 1 --d 4 --mu-err 0.1").code == 1);
    }

    SUBCASE("bad inputs") {
        CHECK(run_cli("rates --alpha 0 --zeta 1 --d 4").code == 1);
        CHECK(run_cli("rates --alpha -1/2 --zeta 1 --d 4").code == 1);
        CHECK(run_cli("rates --alpha abc --zeta 1 --d 4").code == 1);
        CHECK(run_cli("rates --alpha 1 --zeta 1").code == 1); // --d required
    }
}

TEST_CASE("cli simulate") {
    const std::string rep = scratch() + "/sim_rep.json";
    const std::string cfg_path = scratch() + "/sim_cfg.json";
    {
        const json cfg{{"mode", "monte_carlo"},
                       {"dgp", {{"variant", "linear_gaussian"}}},
                       {"methods", json::array({json{{"name", "dr"},
                                                     {"method", "dr"},
                                                     {"outcome_learner", "linear"},
                                                     {"propensity_learner", "logistic"},
                                                     {"folds", 2},
                                                     {"bootstrap_B", 0}}})},
                       {"n_grid", json::array({60})},
                       {"R", 3},
                       {"seed", 5}};
        std::ofstream f(cfg_path);
        f << cfg.dump(2) << "\n";
    }

    SUBCASE("monte carlo run and config echo round-trip") {
        const auto r = run_cli("simulate \"" + cfg_path + "\" -o \"" + rep + "\" --jobs 1");
        CHECK(r.code == 0);
        CHECK(r.out.find("simulated 1 cells") != std::string::npos);
        const json first = load_json(rep);
        CHECK(first.at("command") == "simulate");
        CHECK(first.at("result").at("beta_star") == 1.0);
        REQUIRE(first.at("result").at("cells").size() == 1);
        CHECK(first.at("result").at("cells")[0].at("R_used") == 3);
        CHECK(std::filesystem::exists(scratch() + "/sim_rep.csv")); // default sibling
        const std::string header = slurp(scratch() + "/sim_rep.csv");
        CHECK(header.rfind("method,", 0) == 0);

        // the echoed config must reproduce the report, at any job count
        const std::string echo_path = scratch() + "/sim_echo.json";
        {
            std::ofstream f(echo_path);
            f << first.at("config").dump(2) << "\n";
        }
        const std::string rep2 = scratch() + "/sim_rep2.json";
        REQUIRE(run_cli("simulate \"" + echo_path + "\" -o \"" + rep2 + "\" --jobs 2").code ==
                0);
        json a = first, b = load_json(rep2);
        a.erase("timestamp");
        b.erase("timestamp");
        CHECK(a == b);
    }

    SUBCASE("plot spec and explicit csv path") {
        const std::string plot = scratch() + "/plot.json";
        const std::string csv = scratch() + "/cells_table.csv";
        const auto r = run_cli("simulate \"" + cfg_path + "\" -o \"" + rep + "\" --csv \"" +
                               csv + "\" --emit-plot-spec \"" + plot + "\"");
        CHECK(r.code == 0);
        CHECK(std::filesystem::exists(csv));
        CHECK(load_json(plot).contains("charts"));
    }

    SUBCASE("screening mode with round-trip") {
        const std::string scfg = scratch() + "/scr_cfg.json";
        {
            const json cfg{{"mode", "screening"},
                           {"dgp", {{"variant", "smooth_nonparam"}, {"d_noise", 2}}},
                           {"n_grid", json::array({80})},
                           {"R", 2},
                           {"level", 0.05},
                           {"seed", 3},
                           {"eval_points", 5}};
            std::ofstream f(scfg);
            f << cfg.dump(2) << "\n";
        }
        const auto r = run_cli("simulate \"" + scfg + "\" -o \"" + rep + "\"");
        CHECK(r.code == 0);
        const json first = load_json(rep);
        CHECK(first.at("config").at("mode") == "screening");
        REQUIRE(first.at("result").at("cells").size() == 1);
        CHECK(first.at("result").at("cells")[0].contains("mean_l2_screened"));

        const std::string echo_path = scratch() + "/scr_echo.json";
        {
            std::ofstream f(echo_path);
            f << first.at("config").dump(2) << "\n";
        }
        const std::string rep2 = scratch() + "/scr_rep2.json";
        REQUIRE(run_cli("simulate \"" + echo_path + "\" -o \"" + rep2 + "\" --jobs 2").code ==
                0);
        json a = first, b = load_json(rep2);
        a.erase("timestamp");
        b.erase("timestamp");
        CHECK(a == b);
    }

    SUBCASE("config validation") {
        CHECK(run_cli("simulate /nonexistent/cfg.json").code == 1);

        const std::string bad = scratch() + "/bad_cfg.json";
        std::ofstream(bad) << "{ not json";
        CHECK(run_cli("simulate \"" + bad + "\"").code == 1);

        std::ofstream(bad) << R"({"mode":"quantum","dgp":{"variant":"linear_gaussian"}})";
        CHECK(run_cli("simulate \"" + bad + "\"").code == 1);

        std::ofstream(bad) << R"({"dgp":{"variant":"linear_gaussian"},)"
                              R"("methods":[{"name":"a","method":"tmle"}],)"
                              R"("n_grid":[50],"R":2,"seed":0})";
        const auto r = run_cli("simulate \"" + bad + "\"");
        CHECK(r.code == 1);
        CHECK(r.err.find("tmle") != std::string::npos);
    }
}
