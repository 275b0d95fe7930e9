#include "drbounds/rates.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace drbounds {

namespace {

using int128 = __int128;

std::optional<Rational> reduce128(int128 num, int128 den) {
    if (den == 0) return std::nullopt;
    if (den < 0) {
        num = -num;
        den = -den;
    }
    int128 a = num < 0 ? -num : num;
    int128 b = den;
    while (b != 0) {
        const int128 r = a % b;
        a = b;
        b = r;
    }
    if (a > 1) {
        num /= a;
        den /= a;
    }
    constexpr int128 lim = 0x7fffffffffffffffLL;
    if (num > lim || num < -lim || den > lim) return std::nullopt;
    return Rational(static_cast<long long>(num), static_cast<long long>(den));
}

} // namespace

Rational::Rational(long long n, long long d) {
    if (d == 0) throw std::invalid_argument("rational with zero denominator");
    if (d < 0) {
        n = -n;
        d = -d;
    }
    const long long g = std::gcd(n < 0 ? -n : n, d);
    num = g > 0 ? n / g : n;
    den = g > 0 ? d / g : d;
}

Rational Rational::operator+(const Rational& o) const {
    const auto r = reduce128(static_cast<int128>(num) * o.den + static_cast<int128>(o.num) * den,
                             static_cast<int128>(den) * o.den);
    if (!r) throw std::overflow_error("rational addition overflow");
    return *r;
}

bool Rational::operator<(const Rational& o) const {
    return static_cast<int128>(num) * o.den < static_cast<int128>(o.num) * den;
}

bool Rational::operator==(const Rational& o) const { return num == o.num && den == o.den; }

std::string Rational::str() const {
    if (den == 1) return std::to_string(num);
    return std::to_string(num) + "/" + std::to_string(den);
}

std::optional<Rational> parse_rational(const std::string& text) {
    if (text.empty()) return std::nullopt;
    const auto slash = text.find('/');
    try {
        if (slash != std::string::npos) {
            std::size_t p1 = 0, p2 = 0;
            const long long num = std::stoll(text.substr(0, slash), &p1);
            const long long den = std::stoll(text.substr(slash + 1), &p2);
            if (p1 != slash || p2 != text.size() - slash - 1) return std::nullopt;
            return Rational(num, den);
        }
        const auto dot = text.find('.');
        if (dot == std::string::npos) {
            std::size_t pos = 0;
            const long long v = std::stoll(text, &pos);
            if (pos != text.size()) return std::nullopt;
            return Rational(v, 1);
        }
        const std::string whole = text.substr(0, dot);
        const std::string frac = text.substr(dot + 1);
        if (frac.size() > 12 || frac.empty()) return std::nullopt;
        for (char ch : frac)
            if (ch < '0' || ch > '9') return std::nullopt;
        std::size_t pos = 0;
        const long long w = whole.empty() || whole == "-" ? 0 : std::stoll(whole, &pos);
        if (!whole.empty() && whole != "-" && pos != whole.size()) return std::nullopt;
        long long den = 1;
        for (std::size_t i = 0; i < frac.size(); ++i) den *= 10;
        long long fnum = std::stoll(frac);
        const bool neg = !whole.empty() && whole[0] == '-';
        long long num = (neg ? -1 : 1) * ((w < 0 ? -w : w) * den + fnum);
        return Rational(num, den);
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

std::optional<Rational> rational_from_double(double x) {
    if (!std::isfinite(x)) return std::nullopt;
    if (x == 0.0) return Rational(0, 1);
    int exp = 0;
    const double mant = std::frexp(x, &exp); // x = mant * 2^exp, |mant| in [0.5,1)
    long long m = static_cast<long long>(std::ldexp(mant, 53));
    int den_pow = 53 - exp;
    while (m != 0 && (m & 1) == 0 && den_pow > 0) {
        m >>= 1;
        --den_pow;
    }
    if (den_pow > 40) return std::nullopt; // not a small dyadic rational
    if (den_pow >= 0) return Rational(m, 1LL << den_pow);
    if (-den_pow > 10) return std::nullopt; // enormous integer; keep float path
    return Rational(m << -den_pow, 1);
}

RateValue holder_rate(double s, int d) {
    if (!(s > 0.0)) throw std::invalid_argument("holder_rate: smoothness must be positive");
    if (d < 1) throw std::invalid_argument("holder_rate: dimension must be >= 1");
    RateValue out;
    if (s > 1e12) {
        out.value = 0.5;
        out.exact = Rational(1, 2);
        out.is_limit = true;
        return out;
    }
    out.value = s / (2.0 * s + static_cast<double>(d));
    if (const auto r = rational_from_double(s)) {
        const auto exact = reduce128(static_cast<int128>(r->num),
                                     static_cast<int128>(2) * r->num +
                                         static_cast<int128>(r->den) * d);
        if (exact) out.exact = *exact;
    }
    return out;
}

namespace {

RateValue holder_rate_with_hint(double s, int d, const std::optional<Rational>& hint) {
    RateValue out = holder_rate(s, d);
    if (!out.exact && hint) {
        const auto exact = reduce128(static_cast<int128>(hint->num),
                                     static_cast<int128>(2) * hint->num +
                                         static_cast<int128>(hint->den) * d);
        if (exact) {
            out.exact = *exact;
            out.value = exact->value();
        }
    }
    return out;
}

} // namespace

MinimaxRate minimax_rate_exponent(const RateInputs& inp) {
    if (!(inp.alpha > 0.0) || !(inp.zeta > 0.0))
        throw std::invalid_argument("minimax_rate_exponent: smoothness must be positive");
    if (inp.d < 1) throw std::invalid_argument("minimax_rate_exponent: dimension must be >= 1");
    MinimaxRate out;
    out.term_pi = holder_rate_with_hint(inp.alpha, inp.d, inp.alpha_exact);
    out.term_mu = holder_rate_with_hint(inp.zeta, inp.d, inp.zeta_exact);
    const Rational half(1, 2);
    if (out.term_pi.exact && out.term_mu.exact) {
        const Rational sum = *out.term_pi.exact + *out.term_mu.exact;
        out.in_root_n_regime = !(sum < half);
        out.xi.exact = out.in_root_n_regime ? half : sum;
        out.xi.value = out.xi.exact->value();
    } else {
        const double sum = out.term_pi.value + out.term_mu.value;
        out.in_root_n_regime = sum >= 0.5;
        out.xi.value = std::min(sum, 0.5);
        if (out.in_root_n_regime) out.xi.exact = half;
    }
    return out;
}

double remainder_bound(double mu_err, double pi_err) {
    if (!(mu_err >= 0.0) || !(pi_err >= 0.0))
        throw std::invalid_argument("remainder_bound: errors must be nonnegative");
    return mu_err * pi_err;
}

} // namespace drbounds
