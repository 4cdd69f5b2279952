#pragma once

#include <cmath>

namespace aloha {

/// Tuning knobs for closed-form evaluation. Defaults are what every public
/// evaluator uses unless told otherwise.
struct EvalOptions {
    /// Powers whose exponent exceeds this are taken as exp(e * log(b)).
    double log_space_threshold = 64.0;
    /// Geometric sums with at most this many terms are summed term by term;
    /// longer ones use the (1 - x^n) / (1 - x) ratio.
    int geometric_sum_limit = 128;
};

namespace detail {

/// base^exponent for base in [0, 1] and exponent >= 0, with 0^0 = 1.
inline double power(double base, double exponent, const EvalOptions& opt = {}) {
    if (exponent == 0.0) return 1.0;
    if (base == 0.0) return 0.0;
    if (exponent > opt.log_space_threshold) return std::exp(exponent * std::log(base));
    return std::pow(base, exponent);
}

/// sum_{s=0}^{terms-1} x^s, zero for terms <= 0.
inline double geometric_sum(double x, long terms, const EvalOptions& opt = {}) {
    if (terms <= 0) return 0.0;
    const double denom = 1.0 - x;
    if (terms <= opt.geometric_sum_limit || std::abs(denom) < 1e-14) {
        double sum = 0.0;
        double term = 1.0;
        for (long s = 0; s < terms; ++s) {
            sum += term;
            term *= x;
        }
        return sum;
    }
    return (1.0 - power(x, static_cast<double>(terms), opt)) / denom;
}

/// 1 - (1 - q)^n without cancellation for small q.
inline double one_minus_pow_complement(double q, double n) {
    if (n == 0.0) return 0.0;
    return -std::expm1(n * std::log1p(-q));
}

/// sum_{s=0}^{terms-1} (1-q)^s, evaluated as (1 - (1-q)^terms) / q for long sums.
inline double geometric_sum_complement(double q, long terms, const EvalOptions& opt = {}) {
    if (terms <= opt.geometric_sum_limit) return geometric_sum(1.0 - q, terms, opt);
    return one_minus_pow_complement(q, static_cast<double>(terms)) / q;
}

}  // namespace detail
}  // namespace aloha
