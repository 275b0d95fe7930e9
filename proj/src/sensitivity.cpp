#include "drbounds/sensitivity.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace drbounds {

BiasBound BiasBound::symmetric(double delta) {
    BiasBound b;
    b.kind = Kind::symmetric;
    b.delta = delta;
    b.validate();
    return b;
}

BiasBound BiasBound::per_arm(double l0, double u0, double l1, double u1) {
    BiasBound b;
    b.kind = Kind::per_arm;
    b.l0 = l0;
    b.u0 = u0;
    b.l1 = l1;
    b.u1 = u1;
    b.validate();
    return b;
}

BiasBound BiasBound::sign_bound(Sign sign, double cap) {
    BiasBound b;
    b.kind = Kind::sign;
    b.sign = sign;
    b.cap = cap;
    b.validate();
    return b;
}

void BiasBound::validate() const {
    switch (kind) {
        case Kind::symmetric:
            if (!(delta >= 0.0) || !std::isfinite(delta))
                throw std::invalid_argument("symmetric bound needs delta >= 0");
            break;
        case Kind::per_arm:
            if (!(l0 <= u0) || !(l1 <= u1))
                throw std::invalid_argument("per-arm bound needs l_t <= u_t");
            if (!std::isfinite(l0) || !std::isfinite(u0) || !std::isfinite(l1) || !std::isfinite(u1))
                throw std::invalid_argument("per-arm bound must be finite");
            break;
        case Kind::sign:
            if (!(cap > 0.0) || !std::isfinite(cap))
                throw std::invalid_argument("sign bound needs a finite cap M > 0");
            break;
    }
}

void BiasBound::resolve(double& lo0, double& hi0, double& lo1, double& hi1) const {
    validate();
    switch (kind) {
        case Kind::symmetric:
            lo0 = lo1 = -delta;
            hi0 = hi1 = delta;
            break;
        case Kind::per_arm:
            lo0 = l0;
            hi0 = u0;
            lo1 = l1;
            hi1 = u1;
            break;
        case Kind::sign:
            if (sign == Sign::nonnegative) {
                lo0 = lo1 = 0.0;
                hi0 = hi1 = cap;
            } else {
                lo0 = lo1 = -cap;
                hi0 = hi1 = 0.0;
            }
            break;
    }
}

std::string BiasBound::describe() const {
    std::ostringstream os;
    switch (kind) {
        case Kind::symmetric:
            os << "symmetric(delta=" << delta << ")";
            break;
        case Kind::per_arm:
            os << "per_arm(gamma0=[" << l0 << "," << u0 << "],gamma1=[" << l1 << "," << u1 << "])";
            break;
        case Kind::sign:
            os << "sign(" << (sign == Sign::nonnegative ? "nonnegative" : "nonpositive")
               << ",cap=" << cap << ")";
            break;
    }
    return os.str();
}

SensitivityInterval bound_effect(const EffectEstimate& est, const BiasBound& bound, double p1_hat) {
    if (!(p1_hat >= 0.0 && p1_hat <= 1.0))
        throw std::invalid_argument("p1_hat must lie in [0,1]");
    double lo0, hi0, lo1, hi1;
    bound.resolve(lo0, hi0, lo1, hi1);
    SensitivityInterval out;
    out.bracket_lower = p1_hat * lo0 + (1.0 - p1_hat) * lo1;
    out.bracket_upper = p1_hat * hi0 + (1.0 - p1_hat) * hi1;
    out.lower = est.point - out.bracket_upper;
    out.upper = est.point - out.bracket_lower;
    out.beta_point = est.point;
    out.beta_se = est.se;
    out.p1_hat = p1_hat;
    return out;
}

TippingPoint tipping_point(const EffectEstimate& est, const std::vector<double>& delta_grid) {
    if (delta_grid.empty()) throw std::invalid_argument("tipping_point: empty grid");
    for (std::size_t i = 0; i < delta_grid.size(); ++i) {
        if (!(delta_grid[i] >= 0.0))
            throw std::invalid_argument("tipping_point: grid must be nonnegative");
        if (i > 0 && !(delta_grid[i] > delta_grid[i - 1]))
            throw std::invalid_argument("tipping_point: grid must be increasing");
    }
    TippingPoint tp;
    for (double delta : delta_grid) {
        if (!tp.delta_point && est.point - delta <= 0.0 && est.point + delta >= 0.0)
            tp.delta_point = delta;
        if (!tp.delta_ci && est.point - 1.96 * est.se - delta <= 0.0 &&
            est.point + 1.96 * est.se + delta >= 0.0)
            tp.delta_ci = delta;
        if (tp.delta_point && tp.delta_ci) break;
    }
    return tp;
}

} // namespace drbounds
