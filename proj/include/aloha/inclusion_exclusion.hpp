// Second evaluation route for the preemptive delivery probabilities: the
// inclusion-exclusion expansion of P(union_i F_i D_i) over the tagged
// message's transmission slots i = 0..K, before any summation is collapsed
// into closed form.
//
// Two facts make the expansion tractable. Successes at slots i and i+j force
// success at every slot in between, so any intersection of F's equals the
// pairwise event for its outermost slots. Collecting all intersections that
// share the same outermost pair, the alternating coefficients add up to
// -(1-eps)^2 eps^(j-1). What remains is
//
//   (1-eps) sum_i P(F_i) - (1-eps)^2 sum_{j>=1} eps^(j-1) sum_i P(F_i F_{i+j}).
//
// These routines are O(K^2) on purpose: they are reference evaluators for
// the closed forms, not production paths.
#pragma once

#include <cmath>

#include "aloha/detail/numeric.hpp"
#include "aloha/model.hpp"

namespace aloha {

/// P(F_i): the tagged message (born at slot 0) is the only transmission in slot i.
///
/// Other sources must stay silent on slots i-K..i; the tagged source must not
/// be preempted on slots 2..i (slot 1 is forced idle by the chain).
inline double finite_single_success(const FiniteModel& m, int i, const EvalOptions& opt = {}) {
    const double others = m.n_users - 1;
    const double r = 1.0 - m.q;
    const double log_others = -others * std::log1p(m.q) + others * m.k_retx * std::log1p(-m.q);
    const double own = i == 0 ? 1.0 : detail::power(r, i - 1.0, opt);
    return std::exp(log_others) * own;
}

/// P(F_i F_{i+j}) for j >= 1: others silent on i-K..i+j, tagged source not
/// preempted on 2..i+j.
inline double finite_pair_success(const FiniteModel& m, int i, int j, const EvalOptions& opt = {}) {
    const double others = m.n_users - 1;
    const double r = 1.0 - m.q;
    const double log_others =
        -others * std::log1p(m.q) + others * (m.k_retx + j) * std::log1p(-m.q);
    return std::exp(log_others) * detail::power(r, i + j - 1.0, opt);
}

inline double v_finite_incl_excl(const FiniteModel& m, const EvalOptions& opt = {}) {
    validate(m);
    const int k = m.k_retx;
    const double e = m.epsilon;
    double singles = 0.0;
    for (int i = 0; i <= k; ++i) singles += finite_single_success(m, i, opt);
    double pairs = 0.0;
    for (int j = 1; j <= k; ++j) {
        double row = 0.0;
        for (int i = 0; i + j <= k; ++i) row += finite_pair_success(m, i, j, opt);
        pairs += detail::power(e, j - 1.0, opt) * row;
    }
    return (1.0 - e) * singles - (1.0 - e) * (1.0 - e) * pairs;
}

/// P(F_i) in the Poisson limit: no other arrival on the K+1 slots i-K..i.
inline double poisson_single_success(const PoissonModel& m, int /*i*/) {
    return std::exp(-m.lambda * (m.k_retx + 1.0));
}

/// P(F_i F_{i+j}) in the Poisson limit: no other arrival on i-K..i+j, which
/// is K+j+1 slots whatever i is.
inline double poisson_pair_success(const PoissonModel& m, int /*i*/, int j) {
    return std::exp(-m.lambda * (m.k_retx + j + 1.0));
}

inline double v_infinite_incl_excl(const PoissonModel& m) {
    validate(m);
    const int k = m.k_retx;
    const double e = m.epsilon;
    double singles = 0.0;
    for (int i = 0; i <= k; ++i) singles += poisson_single_success(m, i);
    double pairs = 0.0;
    for (int j = 1; j <= k; ++j) {
        double row = 0.0;
        for (int i = 0; i + j <= k; ++i) row += poisson_pair_success(m, i, j);
        pairs += detail::power(e, j - 1.0) * row;
    }
    return (1.0 - e) * singles - (1.0 - e) * (1.0 - e) * pairs;
}

}  // namespace aloha
