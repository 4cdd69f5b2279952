// Optimal retransmission count: exact integer scans over K, the continuous
// Newton relaxation, and the (epsilon, lambda) optimal-region grid.
#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "aloha/closed_form.hpp"
#include "aloha/model.hpp"

namespace aloha {

/// Receives advisory messages (e.g. Newton disagreeing with the scan).
using WarningSink = std::function<void(const std::string&)>;

/// Values closer than this are treated as a tie; ties go to the smaller K.
inline constexpr double kArgmaxTieTolerance = 1e-12;

/// Index in [0, k_cap] maximising objective(k), ties toward smaller k.
template <typename Objective>
    requires std::invocable<Objective&, int>
int argmax_k(Objective&& objective, int k_cap) {
    if (k_cap < 0) throw DomainError("k_cap must be non-negative");
    int best = 0;
    double best_value = objective(0);
    for (int k = 1; k <= k_cap; ++k) {
        const double v = objective(k);
        if (v > best_value + kArgmaxTieTolerance) {
            best = k;
            best_value = v;
        }
    }
    return best;
}

/// Scan cap used when the caller does not give one: max(64, ceil(4 / lambda)).
inline int default_k_cap(double lambda) {
    return std::max(64, static_cast<int>(std::ceil(4.0 / lambda)));
}

// ---------------------------------------------------------------------------
// Continuous relaxation. With rho = eps e^-lambda, V_inf(K) is proportional to
//   g(x) = e^{-x lambda} ((1 - e^-lambda) x + e^-lambda (1-eps)/(1-rho) (1 - rho^x))
// at x = K + 1, and g'(x) = 0 reduces to F(x) = 0 below.
// ---------------------------------------------------------------------------

namespace detail {

inline void validate_relaxation(double x, double lambda, double epsilon) {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw DomainError("lambda must be positive");
    if (!(epsilon > 0.0 && epsilon < 1.0))
        throw DomainError("the root equation needs epsilon in (0, 1)");
    if (!(x >= 0.0)) throw DomainError("x must be non-negative");
}

inline double relaxation_constant(double lambda, double epsilon) {
    const double idle = std::exp(-lambda);
    return (1.0 - epsilon) / (1.0 - epsilon * idle) * idle / -std::expm1(-lambda);
}

}  // namespace detail

/// F(x) = x - 1/lambda + A (1 - (1 - log(rho)/lambda) rho^x),
/// A = (1-eps)/(1-rho) * e^-lambda / (1 - e^-lambda).
inline double f_objective(double x, double lambda, double epsilon) {
    detail::validate_relaxation(x, lambda, epsilon);
    const double a = detail::relaxation_constant(lambda, epsilon);
    const double log_rho = std::log(epsilon) - lambda;
    return x - 1.0 / lambda + a * (1.0 - (1.0 - log_rho / lambda) * std::exp(x * log_rho));
}

/// F'(x) = 1 + A (2 - log(eps)/lambda) (lambda - log eps) rho^x.
inline double f_derivative(double x, double lambda, double epsilon) {
    detail::validate_relaxation(x, lambda, epsilon);
    const double a = detail::relaxation_constant(lambda, epsilon);
    const double log_eps = std::log(epsilon);
    return 1.0 + a * (2.0 - log_eps / lambda) * (lambda - log_eps) *
                     std::exp(x * (log_eps - lambda));
}

struct RootSolveResult {
    double x_star = 0.0;
    int iterations = 0;
    double residual = 0.0;
    bool converged = false;
    /// |F| at x0, x1, ... up to the returned iterate.
    std::vector<double> residual_history;
};

struct NewtonOptions {
    std::optional<double> x0;  // defaults to 1 / lambda
    double tolerance = 1e-10;
    int max_iter = 100;
};

/// Newton-Raphson on F(x) = 0. F is increasing and concave with F(0) < 0, so
/// after at most one overshoot to the left the iterates climb monotonically
/// to the unique positive root. A negative iterate is replaced by half the
/// previous one.
inline RootSolveResult solve_xstar(double lambda, double epsilon, const NewtonOptions& opt = {}) {
    double x = opt.x0.value_or(1.0 / lambda);
    detail::validate_relaxation(x, lambda, epsilon);
    RootSolveResult out;
    double fx = f_objective(x, lambda, epsilon);
    out.residual_history.push_back(std::abs(fx));
    while (std::abs(fx) > opt.tolerance && out.iterations < opt.max_iter) {
        double next = x - fx / f_derivative(x, lambda, epsilon);
        if (next < 0.0) next = x / 2.0;
        ++out.iterations;
        if (next == x) break;
        x = next;
        fx = f_objective(x, lambda, epsilon);
        out.residual_history.push_back(std::abs(fx));
    }
    out.x_star = x;
    out.residual = std::abs(fx);
    out.converged = out.residual <= opt.tolerance && x > 0.0;
    return out;
}

/// K suggested by the relaxation: round(x* - 1), floored at 0.
inline int newton_k(const RootSolveResult& r) {
    return std::max(0, static_cast<int>(std::lround(r.x_star - 1.0)));
}

/// Integer argmax of V_inf over K in [0, k_cap]. The Newton relaxation is
/// consulted only to emit a warning when it lands more than one step away.
inline int optimal_k_infinite(double lambda, double epsilon, std::optional<int> k_cap = {},
                              const WarningSink& warn = {}) {
    validate(PoissonModel{lambda, epsilon, 0});
    const int cap = k_cap.value_or(default_k_cap(lambda));
    if (cap < 0) throw DomainError("k_cap must be non-negative");
    if (epsilon == 0.0) return 0;
    const int best =
        argmax_k([&](int k) { return v_infinite(PoissonModel{lambda, epsilon, k}); }, cap);
    if (warn) {
        const auto root = solve_xstar(lambda, epsilon);
        if (!root.converged || std::abs((root.x_star - 1.0) - best) > 1.0) {
            std::ostringstream msg;
            msg << "newton relaxation x*=" << root.x_star << " (converged=" << root.converged
                << ") is more than one step from scanned K*=" << best << " at lambda=" << lambda
                << " epsilon=" << epsilon;
            warn(msg.str());
        }
    }
    return best;
}

/// Integer argmax of V over K for a finite population; the same K maximises
/// W because W / V does not depend on K. `model.k_retx` is ignored.
inline int optimal_k_finite(FiniteModel model, std::optional<int> k_cap = {}) {
    model.k_retx = 0;
    validate(model);
    const int cap = k_cap.value_or(default_k_cap(arrival_rate(model)));
    if (cap < 0) throw DomainError("k_cap must be non-negative");
    if (model.epsilon == 0.0) return 0;
    return argmax_k(
        [&](int k) {
            model.k_retx = k;
            return v_finite(model);
        },
        cap);
}

/// Same scan for the history-carrying variant.
inline int optimal_k_finite_history(FiniteModel model, std::optional<int> k_cap = {}) {
    model.k_retx = 0;
    validate(model);
    const int cap = k_cap.value_or(default_k_cap(arrival_rate(model)));
    return argmax_k(
        [&](int k) {
            model.k_retx = k;
            return v_finite_history(model);
        },
        cap);
}

// ---------------------------------------------------------------------------
// Optimal regions
// ---------------------------------------------------------------------------

struct AxisRange {
    double lo;
    double hi;
    int points;
};

/// Evenly spaced axis with both endpoints included.
inline std::vector<double> linspace(const AxisRange& r) {
    std::vector<double> out(static_cast<std::size_t>(r.points));
    for (int i = 0; i < r.points; ++i)
        out[i] = r.points == 1 ? r.lo : r.lo + (r.hi - r.lo) * i / (r.points - 1);
    return out;
}

struct RegionGrid {
    std::vector<double> epsilon_axis;
    std::vector<double> lambda_axis;
    /// Row-major, epsilon by lambda.
    std::vector<int> k_star;
    /// Per-cell scan cap, or -1 when each cell used default_k_cap(lambda).
    int k_cap = -1;

    int at(std::size_t eps_index, std::size_t lambda_index) const {
        return k_star.at(eps_index * lambda_axis.size() + lambda_index);
    }
};

struct RegionOptions {
    std::optional<int> k_cap;
    unsigned threads = 1;
};

inline RegionGrid region_grid(const AxisRange& eps, const AxisRange& lam,
                              const RegionOptions& opt = {}) {
    if (eps.points < 2 || lam.points < 2) throw DomainError("each axis needs at least 2 points");
    if (!(eps.lo > 0.0 && eps.hi < 1.0 && eps.lo <= eps.hi))
        throw DomainError("epsilon range must lie within (0, 1)");
    if (!(lam.lo > 0.0 && std::isfinite(lam.hi) && lam.lo <= lam.hi))
        throw DomainError("lambda range must lie within (0, inf)");
    if (opt.k_cap && *opt.k_cap < 0) throw DomainError("k_cap must be non-negative");

    RegionGrid grid;
    grid.epsilon_axis = linspace(eps);
    grid.lambda_axis = linspace(lam);
    grid.k_cap = opt.k_cap.value_or(-1);
    const std::size_t cols = grid.lambda_axis.size();
    const std::size_t cells = grid.epsilon_axis.size() * cols;
    grid.k_star.assign(cells, 0);

    auto fill = [&](std::size_t begin, std::size_t end) {
        for (std::size_t c = begin; c < end; ++c)
            grid.k_star[c] =
                optimal_k_infinite(grid.lambda_axis[c % cols], grid.epsilon_axis[c / cols], opt.k_cap);
    };
    const unsigned workers = std::max(1u, std::min<unsigned>(opt.threads, static_cast<unsigned>(cells)));
    if (workers == 1) {
        fill(0, cells);
    } else {
        std::vector<std::thread> pool;
        const std::size_t chunk = (cells + workers - 1) / workers;
        for (unsigned w = 0; w < workers; ++w) {
            const std::size_t b = w * chunk;
            const std::size_t e = std::min(cells, b + chunk);
            if (b < e) pool.emplace_back(fill, b, e);
        }
        for (auto& t : pool) t.join();
    }
    return grid;
}

}  // namespace aloha
