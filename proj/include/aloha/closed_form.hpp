// Closed-form delivery probabilities for a tagged message and the
// corresponding system-wide delivery frequencies.
//
// Notation used in the comments below: r = 1 - q, a = r^(N-1) (probability
// that the N-1 other sources are all silent in one slot given they were in
// state 0), C = (1+q)^-(N-1) * r^((N-1)K) (other sources silent over the
// K+1 slots that can interfere with one transmission), G(x, n) = sum of the
// first n powers of x.
#pragma once

#include <cmath>

#include "aloha/detail/numeric.hpp"
#include "aloha/model.hpp"

namespace aloha {

/// A system-level delivery frequency. The formula is not capped, so the raw
/// value is kept and callers can surface `above_one` as a warning.
struct SystemProbability {
    double value = 0.0;
    bool above_one = false;

    static SystemProbability of(double v) noexcept { return {v, v > 1.0}; }
};

namespace detail {

struct FiniteTerms {
    double r;            // 1 - q
    double a;            // r^(N-1)
    double one_minus_a;  // 1 - r^(N-1)
    double c;            // (1+q)^-(N-1) r^((N-1)K)
};

inline FiniteTerms finite_terms(const FiniteModel& m, const EvalOptions& opt) {
    const double others = m.n_users - 1;
    const double r = 1.0 - m.q;
    FiniteTerms t{};
    t.r = r;
    t.a = power(r, others, opt);
    t.one_minus_a = one_minus_pow_complement(m.q, others);
    const double silent_exponent = others * m.k_retx;
    if (others + silent_exponent > opt.log_space_threshold) {
        t.c = std::exp(-others * std::log1p(m.q) + silent_exponent * std::log1p(-m.q));
    } else {
        t.c = power(1.0 / (1.0 + m.q), others, opt) * power(r, silent_exponent, opt);
    }
    return t;
}

}  // namespace detail

/// Individual delivery probability V for the preemptive finite-user system.
inline double v_finite(const FiniteModel& m, const EvalOptions& opt = {}) {
    validate(m);
    const auto t = detail::finite_terms(m, opt);
    const double e = m.epsilon;
    const int k = m.k_retx;
    const double r_n = t.r * t.a;  // r^N
    const double noisy_tail = e * t.a * detail::geometric_sum(e * r_n, k, opt);
    const double later_starts =
        detail::geometric_sum_complement(m.q, k, opt) -
        e * detail::power(t.r, m.n_users + k - 1.0, opt) * detail::geometric_sum(e * t.a, k, opt);
    const double bracket = 1.0 + noisy_tail + t.one_minus_a / (1.0 - e * r_n) * later_starts;
    return (1.0 - e) * t.c * bracket;
}

/// System delivery frequency W = N q/(1+q) V.
inline SystemProbability w_finite(const FiniteModel& m, const EvalOptions& opt = {}) {
    return SystemProbability::of(arrival_rate(m) * v_finite(m, opt));
}

/// Delivery probability when messages carry the source's recent state
/// history, so a new activation never cuts an earlier burst short.
inline double v_finite_history(const FiniteModel& m, const EvalOptions& opt = {}) {
    validate(m);
    const auto t = detail::finite_terms(m, opt);
    const double e = m.epsilon;
    const int k = m.k_retx;
    const double ea = e * t.a;
    const double bracket = detail::geometric_sum(ea, k + 1, opt) +
                           t.one_minus_a / (1.0 - ea) * (k - ea * detail::geometric_sum(ea, k, opt));
    return (1.0 - e) * t.c * bracket;
}

inline SystemProbability w_finite_history(const FiniteModel& m, const EvalOptions& opt = {}) {
    return SystemProbability::of(arrival_rate(m) * v_finite_history(m, opt));
}

/// Noiseless special case of v_finite; epsilon in the model is ignored.
inline double v_finite_noiseless(const FiniteModel& m, const EvalOptions& opt = {}) {
    validate(m);
    const auto t = detail::finite_terms(m, opt);
    return t.c * (1.0 + t.one_minus_a * detail::geometric_sum_complement(m.q, m.k_retx, opt));
}

/// Individual delivery probability in the Poisson (infinite-user) limit.
inline double v_infinite(const PoissonModel& m) {
    validate(m);
    const double e = m.epsilon;
    const double lam = m.lambda;
    const double attempts = m.k_retx + 1.0;
    const double idle = std::exp(-lam);  // no arrival in one slot
    const double b = (1.0 - e) / (1.0 - e * idle);
    const double rho = e * idle;
    const double one_minus_rho_pow =
        rho == 0.0 ? 1.0 : -std::expm1(attempts * std::log(rho));
    const double bracket = -std::expm1(-lam) * attempts + b * idle * one_minus_rho_pow;
    return b * std::exp(-attempts * lam) * bracket;
}

/// W_inf = lambda * V_inf.
inline double w_infinite(const PoissonModel& m) {
    return m.lambda * v_infinite(m);
}

}  // namespace aloha
