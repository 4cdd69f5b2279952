// Recomputes the five worked examples: headline numbers next to their
// reference values, plus the non-delivery curves behind each figure.
#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "aloha/closed_form.hpp"
#include "aloha/io.hpp"
#include "aloha/optimizer.hpp"

namespace aloha::reproduce {

using io::OutputRecord;

struct ExampleReport {
    int id = 0;
    std::string title;
    /// Headline values; those with a reference counterpart carry
    /// `reference` and `abs_diff` extras.
    std::vector<OutputRecord> headlines;
    /// One row per (curve, K).
    std::vector<OutputRecord> curves;
    std::vector<std::string> notes;
};

inline constexpr int kNumExamples = 5;

namespace detail {

inline std::string scenario_name(int id) { return "example" + std::to_string(id); }

inline OutputRecord finite_record(int id, const FiniteModel& m, Variant v, std::string metric,
                                  double value, std::string provenance = "analytic") {
    OutputRecord r;
    r.scenario = scenario_name(id);
    r.family = "finite";
    r.n = m.n_users;
    r.q = m.q;
    r.lambda = arrival_rate(m);
    r.epsilon = m.epsilon;
    r.k = m.k_retx;
    r.variant = to_string(v);
    r.metric = std::move(metric);
    r.value = value;
    r.provenance = std::move(provenance);
    return r;
}

inline OutputRecord poisson_record(int id, const PoissonModel& m, std::string metric, double value,
                                   std::string provenance = "analytic") {
    OutputRecord r;
    r.scenario = scenario_name(id);
    r.family = "poisson";
    r.lambda = m.lambda;
    r.epsilon = m.epsilon;
    r.k = m.k_retx;
    r.variant = "none";
    r.metric = std::move(metric);
    r.value = value;
    r.provenance = std::move(provenance);
    return r;
}

inline OutputRecord with_reference(OutputRecord r, double reference) {
    r.extras.emplace_back("reference", reference);
    r.extras.emplace_back("abs_diff", std::abs(r.value - reference));
    return r;
}

inline FiniteModel at_k(FiniteModel m, int k) {
    m.k_retx = k;
    return m;
}

inline PoissonModel at_k(PoissonModel m, int k) {
    m.k_retx = k;
    return m;
}

inline double miss_inf(const PoissonModel& m, int k) { return 1.0 - v_infinite(at_k(m, k)); }
inline double miss(const FiniteModel& m, int k) { return 1.0 - v_finite(at_k(m, k)); }
inline double miss_history(const FiniteModel& m, int k) { return 1.0 - v_finite_history(at_k(m, k)); }

inline void add_curve_inf(ExampleReport& rep, const PoissonModel& m, int k_max) {
    for (int k = 0; k <= k_max; ++k)
        rep.curves.push_back(poisson_record(rep.id, at_k(m, k), "1-V_inf", miss_inf(m, k)));
}

inline void add_curve_finite(ExampleReport& rep, const FiniteModel& m, Variant v, int k_max) {
    for (int k = 0; k <= k_max; ++k) {
        const double value = v == Variant::preemptive ? miss(m, k) : miss_history(m, k);
        rep.curves.push_back(
            finite_record(rep.id, at_k(m, k), v, v == Variant::preemptive ? "1-V" : "1-V_hist", value));
    }
}

/// Headlines shared by the two "infinite vs two users" examples.
/// `k_shown` is the K at which the single reference values are indexed,
/// `k_ratio` the K used by the reference reduction factors.
struct PairedFigure {
    double lambda;
    double epsilon;
    int k_shown;
    int k_ratio;
    double miss_inf_0, miss_inf_k, miss_0, miss_k;
    double reduction_inf, reduction;
    std::optional<int> k_star_reference;
};

inline void paired_example(ExampleReport& rep, const PairedFigure& fig) {
    const PoissonModel inf{fig.lambda, fig.epsilon, 0};
    const FiniteModel fin{2, q_for_rate(2, fig.lambda), fig.epsilon, 0};
    const int ks = fig.k_shown;
    const int kr = fig.k_ratio;
    const auto mi = [&](int k) { return miss_inf(inf, k); };
    const auto mf = [&](int k) { return miss(fin, k); };
    const auto ks_str = std::to_string(ks);
    const auto kr_str = std::to_string(kr);

    rep.headlines.push_back(with_reference(poisson_record(rep.id, inf, "1-V_inf(0)", mi(0)), fig.miss_inf_0));
    rep.headlines.push_back(with_reference(
        poisson_record(rep.id, at_k(inf, ks), "1-V_inf(" + ks_str + ")", mi(ks)), fig.miss_inf_k));
    rep.headlines.push_back(with_reference(finite_record(rep.id, fin, Variant::preemptive, "1-V(0)", mf(0)), fig.miss_0));
    rep.headlines.push_back(with_reference(
        finite_record(rep.id, at_k(fin, ks), Variant::preemptive, "1-V(" + ks_str + ")", mf(ks)), fig.miss_k));
    rep.headlines.push_back(with_reference(
        poisson_record(rep.id, at_k(inf, kr), "reduction_inf(" + kr_str + ")", mi(0) / mi(kr)),
        fig.reduction_inf));
    rep.headlines.push_back(with_reference(
        finite_record(rep.id, at_k(fin, kr), Variant::preemptive, "reduction(" + kr_str + ")", mf(0) / mf(kr)),
        fig.reduction));

    const int k_inf = optimal_k_infinite(fig.lambda, fig.epsilon);
    const int k_fin = optimal_k_finite(fin);
    auto k_inf_rec = poisson_record(rep.id, at_k(inf, k_inf), "K_star_inf", k_inf, "optimizer");
    auto k_fin_rec = finite_record(rep.id, at_k(fin, k_fin), Variant::preemptive, "K_star", k_fin, "optimizer");
    if (fig.k_star_reference) {
        k_inf_rec = with_reference(k_inf_rec, *fig.k_star_reference);
        k_fin_rec = with_reference(k_fin_rec, *fig.k_star_reference);
    }
    rep.headlines.push_back(k_inf_rec);
    rep.headlines.push_back(k_fin_rec);
    rep.headlines.push_back(poisson_record(rep.id, at_k(inf, k_inf), "1-V_inf(K_star)", mi(k_inf)));
    rep.headlines.push_back(
        finite_record(rep.id, at_k(fin, k_fin), Variant::preemptive, "1-V(K_star)", mf(k_fin)));
    rep.headlines.push_back(poisson_record(rep.id, at_k(inf, k_inf), "reduction_inf(K_star)", mi(0) / mi(k_inf)));
    rep.headlines.push_back(
        finite_record(rep.id, at_k(fin, k_fin), Variant::preemptive, "reduction(K_star)", mf(0) / mf(k_fin)));

    std::ostringstream note;
    note << "integer scan gives K*=" << k_inf << " (infinite) and K*=" << k_fin << " (N=2)";
    if (fig.k_star_reference && (k_inf != *fig.k_star_reference || k_fin != *fig.k_star_reference))
        note << "; reference optimum is K=" << *fig.k_star_reference;
    rep.notes.push_back(note.str());
    if (ks != kr) {
        std::ostringstream idx;
        idx << "reference single values are indexed K=" << ks << " but the reference reduction factors use K="
            << kr << "; both are reported, and the factor at the scanned optimum is reduction(K_star)";
        rep.notes.push_back(idx.str());
    }
    rep.notes.push_back("reduction(K) is (1-V(0)) / (1-V(K)), the factor by which non-delivery falls");

    add_curve_inf(rep, inf, 30);
    add_curve_finite(rep, fin, Variant::preemptive, 30);
}

}  // namespace detail

inline ExampleReport example(int id) {
    using namespace detail;
    ExampleReport rep;
    rep.id = id;
    switch (id) {
        case 1:
            rep.title = "lambda=0.02, eps=0.4: infinite population vs N=2";
            paired_example(rep, {0.02, 0.4, 7, 7, 0.4119, 0.0521, 0.406, 0.0298, 7.9, 13.6, 7});
            break;
        case 2: {
            rep.title = "lambda=0.02, eps=0.4: infinite population vs N=10";
            const PoissonModel inf{0.02, 0.4, 0};
            const FiniteModel fin{10, q_for_rate(10, 0.02), 0.4, 0};
            double gap = 0.0;
            int gap_k = 0;
            for (int k = 0; k <= 30; ++k) {
                const double d = std::abs(miss_inf(inf, k) - miss(fin, k));
                if (d > gap) {
                    gap = d;
                    gap_k = k;
                }
            }
            rep.headlines.push_back(finite_record(id, at_k(fin, gap_k), Variant::preemptive,
                                                  "max_gap_vs_inf(K<=30)", gap));
            const int k_inf = optimal_k_infinite(inf.lambda, inf.epsilon);
            const int k_fin = optimal_k_finite(fin);
            rep.headlines.push_back(poisson_record(id, at_k(inf, k_inf), "K_star_inf", k_inf, "optimizer"));
            rep.headlines.push_back(finite_record(id, at_k(fin, k_fin), Variant::preemptive, "K_star", k_fin, "optimizer"));
            rep.headlines.push_back(finite_record(id, at_k(fin, k_fin), Variant::preemptive, "abs_gap_at_K_star",
                                                  std::abs(miss_inf(inf, k_fin) - miss(fin, k_fin))));
            std::ostringstream note;
            note << "largest |(1-V_inf) - (1-V)| over K=0..30 is " << io::format_number(gap, 4) << " at K="
                 << gap_k;
            rep.notes.push_back(note.str());
            add_curve_inf(rep, inf, 30);
            add_curve_finite(rep, fin, Variant::preemptive, 30);
            break;
        }
        case 3:
            rep.title = "lambda=0.005, eps=0.3: infinite population vs N=2";
            paired_example(rep, {0.005, 0.3, 7, 8, 0.3035, 0.0098, 0.3017, 0.0053, 30.76, 58.0, std::nullopt});
            break;
        case 4:
        case 5: {
            const FiniteModel fin = id == 4 ? FiniteModel{2, 0.01, 0.4, 0} : FiniteModel{2, 0.0526, 0.99, 0};
            const int k_max = id == 4 ? 30 : 200;
            rep.title = id == 4 ? "N=2, q=0.01, eps=0.4: preemptive vs history messages"
                                : "N=2, q=0.0526, eps=0.99: preemptive vs history messages";
            const int k_pre = optimal_k_finite(fin, k_max);
            const int k_hist = optimal_k_finite_history(fin, k_max);
            rep.headlines.push_back(finite_record(id, at_k(fin, k_pre), Variant::preemptive, "K_star", k_pre, "optimizer"));
            rep.headlines.push_back(finite_record(id, at_k(fin, k_hist), Variant::history, "K_star", k_hist, "optimizer"));
            rep.headlines.push_back(finite_record(id, at_k(fin, k_pre), Variant::preemptive, "min_1-V", miss(fin, k_pre)));
            rep.headlines.push_back(
                finite_record(id, at_k(fin, k_hist), Variant::history, "min_1-V_hist", miss_history(fin, k_hist)));
            int history_not_lower = 0;
            for (int k = 0; k <= k_max; ++k)
                if (miss_history(fin, k) >= miss(fin, k) - 1e-15) ++history_not_lower;
            rep.headlines.push_back(finite_record(id, fin, Variant::history, "K_with_1-V_hist>=1-V",
                                                  history_not_lower));
            std::ostringstream note;
            note << "argmax differs between formats: " << (k_pre != k_hist ? "yes" : "no")
                 << "; history format lowers the minimum non-delivery: "
                 << (miss_history(fin, k_hist) < miss(fin, k_pre) ? "yes" : "no") << "; 1-V_hist >= 1-V holds at "
                 << history_not_lower << " of " << k_max + 1 << " K values";
            rep.notes.push_back(note.str());
            add_curve_finite(rep, fin, Variant::preemptive, k_max);
            add_curve_finite(rep, fin, Variant::history, k_max);
            break;
        }
        default:
            throw DomainError("example must be between 1 and " + std::to_string(kNumExamples));
    }
    return rep;
}

}  // namespace aloha::reproduce
