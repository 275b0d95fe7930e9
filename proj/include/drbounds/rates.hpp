#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace drbounds {

// Exact fraction with normalized sign and gcd-reduced terms. Used so the
// rate calculators return exact values for rational inputs.
struct Rational {
    long long num = 0;
    long long den = 1;

    Rational() = default;
    Rational(long long n, long long d);

    Rational operator+(const Rational& o) const;
    bool operator<(const Rational& o) const;
    bool operator==(const Rational& o) const;
    double value() const { return static_cast<double>(num) / static_cast<double>(den); }
    std::string str() const;
};

// Parses "p/q", "p" or a decimal literal. Decimals are accepted exactly when
// they are exactly representable as a fraction with denominator <= 10^12
// (e.g. "0.5"); otherwise returns nullopt.
std::optional<Rational> parse_rational(const std::string& text);

// Exact rational view of a double if one exists with denominator <= 2^40.
std::optional<Rational> rational_from_double(double x);

struct RateValue {
    double value = 0.0;
    std::optional<Rational> exact;
    bool is_limit = false; // holder_rate smoothness treated as the s->inf limit
};

// s/(2s+d); for s > 1e12 reports the supremum 1/2 with is_limit set.
RateValue holder_rate(double s, int d);

struct RateInputs {
    double alpha = 0.0; // Holder smoothness of pi
    double zeta = 0.0;  // Holder smoothness of mu_t
    int d = 0;
    // optional exact views (e.g. parsed from "1/3"); doubles stay authoritative
    // for the float result
    std::optional<Rational> alpha_exact, zeta_exact;
};

struct MinimaxRate {
    RateValue xi;       // (alpha/(2alpha+d) + zeta/(2zeta+d)) ^ 1/2 cap
    RateValue term_pi;  // alpha/(2alpha+d)
    RateValue term_mu;  // zeta/(2zeta+d)
    bool in_root_n_regime = false; // sum >= 1/2
};

MinimaxRate minimax_rate_exponent(const RateInputs& inp);

// Variable part of the second-order remainder bound: mu_err * pi_err.
double remainder_bound(double mu_err, double pi_err);

} // namespace drbounds
