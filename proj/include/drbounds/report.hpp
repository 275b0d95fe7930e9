#pragma once

#include "drbounds/collider_bounds.hpp"
#include "drbounds/estimators.hpp"
#include "drbounds/rates.hpp"
#include "drbounds/sensitivity.hpp"
#include "drbounds/simlab.hpp"

#include <json.hpp>

#include <string>

namespace drbounds {

// JSON views of result/config types. nlohmann::json keeps object keys sorted
// and prints shortest round-trip numbers, so serialization is deterministic.
nlohmann::json to_json(const EffectEstimate& est, bool with_influence = true);
nlohmann::json to_json(const BiasBound& bound);
nlohmann::json to_json(const SensitivityInterval& iv);
nlohmann::json to_json(const TippingPoint& tp);
nlohmann::json to_json(const SubsetIndex& s);
nlohmann::json to_json(const BoundsConfig& cfg);
nlohmann::json to_json(const PartialIdentificationResult& res);
nlohmann::json to_json(const RateValue& rv);
nlohmann::json to_json(const MinimaxRate& mr);
nlohmann::json to_json(const MethodConfig& mc);
nlohmann::json to_json(const MonteCarloConfig& cfg);
nlohmann::json to_json(const SimReport& report);
nlohmann::json to_json(const ScreeningConfig& cfg);
nlohmann::json to_json(const ScreeningReport& report);

nlohmann::json dgp_to_json(const DGPSpec& dgp);
DGPSpec dgp_from_json(const nlohmann::json& j);
MethodConfig method_config_from_json(const nlohmann::json& j);
MonteCarloConfig mc_config_from_json(const nlohmann::json& j);
ScreeningConfig screening_config_from_json(const nlohmann::json& j);

// Flat per-cell tables for external plotting.
std::string sim_report_csv(const SimReport& report);
std::string screening_report_csv(const ScreeningReport& report);

// Declarative chart description (bias / rmse / coverage curves over n).
nlohmann::json plot_spec(const SimReport& report);

// Wraps a result in the report envelope: schema_version, command, config echo,
// result body. The (non-deterministic) timestamp lives in its own field so
// consumers can compare reports modulo time.
nlohmann::json make_report(const std::string& command, nlohmann::json config,
                           nlohmann::json result);

// Serializes with sorted keys + trailing newline and writes atomically-ish.
void write_report_file(const std::string& path, const nlohmann::json& report);

} // namespace drbounds
