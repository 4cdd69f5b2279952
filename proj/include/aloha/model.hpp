// Parameter bundles for the noisy slotted random-access model and the
// validation shared by every evaluator.
#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace aloha {

/// Thrown when a parameter bundle violates its invariants.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Thrown when an exhaustive computation is asked for an instance it cannot enumerate.
class SizeError : public std::length_error {
public:
    using std::length_error::length_error;
};

/// Finite population of N Markov sources, each activating with probability q
/// from state 0 and returning to state 0 deterministically.
struct FiniteModel {
    int n_users = 1;
    double q = 0.0;
    double epsilon = 0.0;
    int k_retx = 0;
};

/// Infinite-user limit: Poisson(lambda) new messages per slot.
struct PoissonModel {
    double lambda = 0.0;
    double epsilon = 0.0;
    int k_retx = 0;
};

/// Whether a source's new message cancels the rest of its previous burst.
enum class Variant { preemptive, history };

inline const char* to_string(Variant v) noexcept {
    return v == Variant::preemptive ? "preemptive" : "history";
}

inline Variant parse_variant(const std::string& s) {
    if (s == "preemptive") return Variant::preemptive;
    if (s == "history") return Variant::history;
    throw DomainError("unknown variant '" + s + "' (expected preemptive|history)");
}

/// Stationary law of the two-state source chain (p01 = q, p10 = 1).
struct StationaryDistribution {
    double pi0;
    double pi1;

    static StationaryDistribution of(double q) noexcept {
        return {1.0 / (1.0 + q), q / (1.0 + q)};
    }
};

inline void validate_epsilon(double epsilon) {
    if (!(epsilon >= 0.0 && epsilon < 1.0))
        throw DomainError("epsilon must lie in [0, 1), got " + std::to_string(epsilon));
}

inline void validate_k(int k) {
    if (k < 0) throw DomainError("K must be non-negative, got " + std::to_string(k));
}

inline void validate(const FiniteModel& m) {
    if (m.n_users < 1) throw DomainError("N must be at least 1, got " + std::to_string(m.n_users));
    if (!(m.q > 0.0 && m.q < 1.0)) throw DomainError("q must lie in (0, 1), got " + std::to_string(m.q));
    validate_epsilon(m.epsilon);
    validate_k(m.k_retx);
}

inline void validate(const PoissonModel& m) {
    if (!(m.lambda > 0.0) || !std::isfinite(m.lambda))
        throw DomainError("lambda must be positive and finite, got " + std::to_string(m.lambda));
    validate_epsilon(m.epsilon);
    validate_k(m.k_retx);
}

/// Aggregate new-message rate N q / (1 + q) of a finite population.
inline double arrival_rate(const FiniteModel& m) noexcept {
    return m.n_users * m.q / (1.0 + m.q);
}

/// Per-user q that makes the finite population's rate equal lambda.
inline double q_for_rate(int n_users, double lambda) {
    if (!(lambda > 0.0) || !(lambda < n_users))
        throw DomainError("need 0 < lambda < N to match a finite population");
    return lambda / (n_users - lambda);
}

}  // namespace aloha
