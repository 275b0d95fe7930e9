#pragma once

#include "drbounds/estimators.hpp"

#include <optional>
#include <string>
#include <vector>

namespace drbounds {

// User-specified bounds on the confounding-bias function gamma(x,t).
struct BiasBound {
    enum class Kind { symmetric, per_arm, sign };
    enum class Sign { nonnegative, nonpositive };

    Kind kind = Kind::symmetric;
    double delta = 0.0;                      // symmetric: |gamma| <= delta
    double l0 = 0.0, u0 = 0.0, l1 = 0.0, u1 = 0.0; // per_arm: gamma(.,t) in [l_t,u_t]
    Sign sign = Sign::nonnegative;           // sign kind, with required cap M
    double cap = 0.0;

    static BiasBound symmetric(double delta);
    static BiasBound per_arm(double l0, double u0, double l1, double u1);
    static BiasBound sign_bound(Sign sign, double cap);

    // resolved per-arm constants [l_t, u_t]
    void resolve(double& lo0, double& hi0, double& lo1, double& hi1) const;
    void validate() const;
    std::string describe() const;
};

// Interval of values compatible with the causal effect given the bound on
// the bias function: the decomposition beta* = beta - E{gamma(X, 1-T)}.
struct SensitivityInterval {
    double lower = 0.0, upper = 0.0;
    double beta_point = 0.0, beta_se = 0.0;
    double p1_hat = 0.0;
    double bracket_lower = 0.0, bracket_upper = 0.0; // bracket on E{gamma(X,1-T)}
};

// Treated units contribute gamma(.,0), controls gamma(.,1):
//   E{gamma(X,1-T)} in [p1*l0 + (1-p1)*l1, p1*u0 + (1-p1)*u1],
// interval = [beta - upper bracket, beta - lower bracket].
SensitivityInterval bound_effect(const EffectEstimate& est, const BiasBound& bound, double p1_hat);

struct TippingPoint {
    std::optional<double> delta_point; // smallest grid delta whose interval contains 0
    std::optional<double> delta_ci;    // same, for [beta-1.96se-delta, beta+1.96se+delta]
};

TippingPoint tipping_point(const EffectEstimate& est, const std::vector<double>& delta_grid);

} // namespace drbounds
