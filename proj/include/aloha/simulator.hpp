// Slot-synchronous Monte Carlo simulation of the random-access channel, for
// finite Markov populations and for Poisson arrivals.
//
// Each replication owns its random streams, derived from (seed, replication,
// stream id), so results do not depend on how replications are scheduled
// across threads.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "aloha/closed_form.hpp"
#include "aloha/enumerate.hpp"
#include "aloha/model.hpp"

namespace aloha {

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

inline constexpr std::int64_t kMinHorizonSlots = 1000;

struct SimConfig {
    std::variant<FiniteModel, PoissonModel> model;
    Variant variant = Variant::preemptive;
    /// Slots simulated by each replication.
    std::int64_t horizon_slots = 0;
    /// Leading slots of each replication whose arrivals are not tallied.
    /// Defaults to 10 (K + 1).
    std::optional<std::int64_t> warmup_slots;
    /// Required; there is no ambient-entropy fallback.
    std::optional<std::uint64_t> seed;
    int replications = 1;
    /// Worker threads; has no effect on results.
    unsigned threads = 1;
};

inline int k_retx_of(const SimConfig& c) {
    return std::visit([](const auto& m) { return m.k_retx; }, c.model);
}

inline double epsilon_of(const SimConfig& c) {
    return std::visit([](const auto& m) { return m.epsilon; }, c.model);
}

inline std::int64_t warmup_of(const SimConfig& c) {
    return c.warmup_slots.value_or(10 * (static_cast<std::int64_t>(k_retx_of(c)) + 1));
}

inline void validate(const SimConfig& c) {
    std::visit([](const auto& m) { validate(m); }, c.model);
    if (!c.seed) throw ConfigError("simulation seed must be given explicitly");
    if (c.horizon_slots < kMinHorizonSlots)
        throw ConfigError("horizon must be at least " + std::to_string(kMinHorizonSlots) +
                          " slots per replication");
    const auto warmup = warmup_of(c);
    if (warmup < 0 || warmup >= c.horizon_slots)
        throw ConfigError("warmup must satisfy 0 <= warmup < horizon");
    if (c.replications < 1) throw ConfigError("replications must be positive");
}

// ---------------------------------------------------------------------------
// Channel outcome of a single slot
// ---------------------------------------------------------------------------

enum class SlotKind { idle, conflict, success, delivered };

struct SlotOutcome {
    SlotKind kind = SlotKind::idle;
    int transmitter_count = 0;
};

/// Delivered is a Success whose noise draw passed.
inline SlotOutcome classify_slot(int transmitters, bool noise_ok) {
    if (transmitters < 0) throw std::invalid_argument("negative transmitter count");
    if (transmitters == 0) return {SlotKind::idle, 0};
    if (transmitters >= 2) return {SlotKind::conflict, transmitters};
    return {noise_ok ? SlotKind::delivered : SlotKind::success, 1};
}

// ---------------------------------------------------------------------------
// Tallies
// ---------------------------------------------------------------------------

/// Raw counts from one replication. Slot counts cover [warmup, horizon);
/// message counts cover arrivals in [warmup, horizon - K - 1].
struct ReplicationTally {
    std::int64_t slots = 0;
    std::int64_t warmup = 0;
    std::int64_t arrivals = 0;
    std::int64_t delivered_messages = 0;
    std::int64_t preempted_messages = 0;
    /// Arrivals in [warmup, horizon), including ones whose window is cut by the horizon.
    std::int64_t activations = 0;
    std::int64_t idle_slots = 0;
    std::int64_t conflict_slots = 0;
    /// Single-transmitter slots, delivered or not.
    std::int64_t success_slots = 0;
    std::int64_t delivered_slots = 0;

    double v_hat() const { return arrivals ? double(delivered_messages) / arrivals : 0.0; }
    double w_hat() const { return double(delivered_messages) / double(slots - warmup); }
};

struct DeliveryStats {
    std::int64_t arrivals = 0;
    std::int64_t delivered_messages = 0;
    std::int64_t total_slots = 0;
    std::int64_t warmup_slots = 0;
    double v_hat = 0.0;
    double w_hat = 0.0;
    double v_stderr = 0.0;
    double w_stderr = 0.0;

    std::int64_t preempted_messages = 0;
    std::int64_t activations = 0;
    std::int64_t idle_slots = 0;
    std::int64_t conflict_slots = 0;
    std::int64_t success_slots = 0;
    std::int64_t delivered_slots = 0;
    /// Sources in the finite model; 0 for Poisson arrivals.
    int sources = 0;

    std::vector<ReplicationTally> replications;

    std::int64_t measured_slots() const { return total_slots - warmup_slots; }
};

namespace detail {

inline double batch_stderr(const std::vector<double>& xs) {
    const auto n = xs.size();
    if (n < 2) return 0.0;
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= double(n);
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / double(n - 1) / double(n));
}

}  // namespace detail

/// Merges replication tallies in index order. Standard errors are batch
/// means across replications; with a single replication they fall back to
/// the binomial (for V) and Poisson (for W) approximations.
inline DeliveryStats merge_tallies(std::vector<ReplicationTally> reps, int sources) {
    DeliveryStats s;
    s.sources = sources;
    std::vector<double> vs, ws;
    for (const auto& r : reps) {
        s.arrivals += r.arrivals;
        s.delivered_messages += r.delivered_messages;
        s.total_slots += r.slots;
        s.warmup_slots += r.warmup;
        s.preempted_messages += r.preempted_messages;
        s.activations += r.activations;
        s.idle_slots += r.idle_slots;
        s.conflict_slots += r.conflict_slots;
        s.success_slots += r.success_slots;
        s.delivered_slots += r.delivered_slots;
        vs.push_back(r.v_hat());
        ws.push_back(r.w_hat());
    }
    s.v_hat = s.arrivals ? double(s.delivered_messages) / double(s.arrivals) : 0.0;
    s.w_hat = double(s.delivered_messages) / double(s.measured_slots());
    if (reps.size() >= 2) {
        s.v_stderr = detail::batch_stderr(vs);
        s.w_stderr = detail::batch_stderr(ws);
    } else {
        s.v_stderr = s.arrivals ? std::sqrt(s.v_hat * (1.0 - s.v_hat) / double(s.arrivals)) : 0.0;
        s.w_stderr = std::sqrt(double(s.delivered_messages)) / double(s.measured_slots());
    }
    s.replications = std::move(reps);
    return s;
}

// ---------------------------------------------------------------------------
// Engine
// ---------------------------------------------------------------------------

/// Independent engine for (seed, replication, stream). Stream 0 is the
/// channel noise; finite sources use 1..N, Poisson arrivals use 1.
inline std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t replication,
                                   std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(replication),
                      static_cast<std::uint32_t>(replication >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    return std::mt19937_64(seq);
}

namespace detail {

// Per-slot channel state: low two bits hold min(transmitters, 2), bit 2
// marks a delivered slot.
inline constexpr std::uint8_t kCountMask = 0x3;
inline constexpr std::uint8_t kDeliveredBit = 0x4;

struct MessageWindow {
    std::int64_t start;
    std::int64_t end;  // last slot on air, inclusive
    std::int64_t multiplicity;
};

class ChannelTrace {
public:
    explicit ChannelTrace(std::int64_t slots) : state_(static_cast<std::size_t>(slots), 0) {}

    void add_transmitters(std::int64_t from, std::int64_t to, std::int64_t count) {
        to = std::min<std::int64_t>(to, static_cast<std::int64_t>(state_.size()) - 1);
        for (std::int64_t s = from; s <= to; ++s) {
            auto& c = state_[static_cast<std::size_t>(s)];
            c = static_cast<std::uint8_t>(std::min<std::int64_t>(c + count, 2));
        }
    }

    /// Draws noise on each single-transmitter slot and tallies slot kinds
    /// from `first_measured` on.
    void resolve(std::mt19937_64& rng, double epsilon, std::int64_t first_measured,
                 ReplicationTally& tally) {
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        for (std::size_t s = 0; s < state_.size(); ++s) {
            auto& c = state_[s];
            const int count = c & kCountMask;
            bool ok = false;
            if (count == 1) {
                ok = unif(rng) >= epsilon;
                if (ok) c |= kDeliveredBit;
            }
            if (static_cast<std::int64_t>(s) < first_measured) continue;
            switch (classify_slot(count, ok).kind) {
                case SlotKind::idle: ++tally.idle_slots; break;
                case SlotKind::conflict: ++tally.conflict_slots; break;
                case SlotKind::delivered: ++tally.delivered_slots; [[fallthrough]];
                case SlotKind::success: ++tally.success_slots; break;
            }
        }
    }

    /// True when some slot of [from, to] carried a lone, noise-free transmission.
    bool delivered_in(std::int64_t from, std::int64_t to) const {
        for (std::int64_t s = from; s <= to; ++s)
            if (state_[static_cast<std::size_t>(s)] == (1 | kDeliveredBit)) return true;
        return false;
    }

private:
    std::vector<std::uint8_t> state_;
};

inline void tally_messages(const std::vector<MessageWindow>& msgs, const ChannelTrace& trace,
                           int k, ReplicationTally& tally) {
    for (const auto& m : msgs) {
        tally.arrivals += m.multiplicity;
        if (m.end < m.start + k) tally.preempted_messages += m.multiplicity;
        // Several messages born in the same slot collide on every slot of their burst.
        if (m.multiplicity == 1 && trace.delivered_in(m.start, m.end)) ++tally.delivered_messages;
    }
}

inline ReplicationTally simulate_finite_replication(const FiniteModel& m, Variant variant,
                                                    std::int64_t horizon, std::int64_t warmup,
                                                    std::uint64_t seed, std::uint64_t rep) {
    ReplicationTally tally;
    tally.slots = horizon;
    tally.warmup = warmup;
    const int k = m.k_retx;
    ChannelTrace trace(horizon);
    std::vector<MessageWindow> msgs;
    const auto st = StationaryDistribution::of(m.q);

    for (int u = 0; u < m.n_users; ++u) {
        auto rng = make_stream(seed, rep, static_cast<std::uint64_t>(u) + 1);
        std::bernoulli_distribution active_at_start(st.pi1);
        std::geometric_distribution<std::int64_t> idle_run(m.q);  // failures before an arrival
        // From state 0 the next arrival is 1 + idle_run slots away; after an
        // arrival the following slot is forced idle.
        std::int64_t arrival = active_at_start(rng) ? 0 : 1 + idle_run(rng);
        std::int64_t covered_to = -1;
        while (arrival < horizon) {
            const std::int64_t next = arrival + 2 + idle_run(rng);
            const std::int64_t burst_end = arrival + k;
            if (burst_end > covered_to) {
                trace.add_transmitters(std::max(arrival, covered_to + 1), burst_end, 1);
                covered_to = burst_end;
            }
            if (arrival >= warmup) {
                ++tally.activations;
                if (burst_end < horizon) {
                    const std::int64_t end =
                        variant == Variant::preemptive ? std::min(burst_end, next - 1) : burst_end;
                    msgs.push_back({arrival, end, 1});
                }
            }
            arrival = next;
        }
    }

    auto channel = make_stream(seed, rep, 0);
    trace.resolve(channel, m.epsilon, warmup, tally);
    tally_messages(msgs, trace, k, tally);
    return tally;
}

inline ReplicationTally simulate_poisson_replication(const PoissonModel& m, std::int64_t horizon,
                                                     std::int64_t warmup, std::uint64_t seed,
                                                     std::uint64_t rep) {
    ReplicationTally tally;
    tally.slots = horizon;
    tally.warmup = warmup;
    const int k = m.k_retx;
    ChannelTrace trace(horizon);
    std::vector<MessageWindow> msgs;
    auto rng = make_stream(seed, rep, 1);
    std::poisson_distribution<std::int64_t> arrivals(m.lambda);

    for (std::int64_t slot = 0; slot < horizon; ++slot) {
        const std::int64_t n = arrivals(rng);
        if (n == 0) continue;
        trace.add_transmitters(slot, slot + k, n);
        if (slot >= warmup) {
            tally.activations += n;
            if (slot + k < horizon) msgs.push_back({slot, slot + k, n});
        }
    }

    auto channel = make_stream(seed, rep, 0);
    trace.resolve(channel, m.epsilon, warmup, tally);
    tally_messages(msgs, trace, k, tally);
    return tally;
}

template <typename Fn>
std::vector<ReplicationTally> run_replications(const SimConfig& c, Fn&& one) {
    const int reps = c.replications;
    std::vector<ReplicationTally> out(static_cast<std::size_t>(reps));
    const unsigned workers = std::max(1u, std::min<unsigned>(c.threads, static_cast<unsigned>(reps)));
    if (workers == 1) {
        for (int r = 0; r < reps; ++r) out[r] = one(static_cast<std::uint64_t>(r));
        return out;
    }
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (int r = static_cast<int>(w); r < reps; r += static_cast<int>(workers))
                out[r] = one(static_cast<std::uint64_t>(r));
        });
    }
    for (auto& t : pool) t.join();
    return out;
}

}  // namespace detail

/// Simulates a finite population. Preemptive sources abandon the rest of a
/// burst when a new message arrives; history sources never do.
inline DeliveryStats run_finite(const SimConfig& c) {
    validate(c);
    const auto* m = std::get_if<FiniteModel>(&c.model);
    if (!m) throw ConfigError("run_finite needs a finite model");
    const auto warmup = warmup_of(c);
    auto reps = detail::run_replications(c, [&](std::uint64_t r) {
        return detail::simulate_finite_replication(*m, c.variant, c.horizon_slots, warmup, *c.seed, r);
    });
    return merge_tallies(std::move(reps), m->n_users);
}

/// Simulates Poisson arrivals; every message has its own source, so the
/// variant does not matter.
inline DeliveryStats run_poisson(const SimConfig& c) {
    validate(c);
    const auto* m = std::get_if<PoissonModel>(&c.model);
    if (!m) throw ConfigError("run_poisson needs a Poisson model");
    const auto warmup = warmup_of(c);
    auto reps = detail::run_replications(c, [&](std::uint64_t r) {
        return detail::simulate_poisson_replication(*m, c.horizon_slots, warmup, *c.seed, r);
    });
    return merge_tallies(std::move(reps), 0);
}

inline DeliveryStats run(const SimConfig& c) {
    return std::holds_alternative<FiniteModel>(c.model) ? run_finite(c) : run_poisson(c);
}

// ---------------------------------------------------------------------------
// Comparison with the closed forms
// ---------------------------------------------------------------------------

inline constexpr double kZThreshold = 3.0;

struct ComparisonReport {
    DeliveryStats stats;
    double v_analytic = 0.0;
    double w_analytic = 0.0;
    /// Present when the instance is small enough for exhaustive enumeration.
    std::optional<double> v_enumerated;
    double z_v = 0.0;
    double z_w = 0.0;
    bool pass_v = false;
    bool pass_w = false;

    bool pass() const { return pass_v && pass_w; }
};

/// (estimate - expected) / stderr; 0 when both agree exactly, infinite when
/// they differ with zero spread.
inline double z_score(double estimate, double expected, double stderr_) {
    const double diff = estimate - expected;
    if (stderr_ > 0.0) return diff / stderr_;
    return std::abs(diff) <= 1e-12 ? 0.0 : std::copysign(INFINITY, diff);
}

inline ComparisonReport compare_with_analytic(const SimConfig& c) {
    ComparisonReport rep;
    rep.stats = run(c);
    if (const auto* m = std::get_if<FiniteModel>(&c.model)) {
        rep.v_analytic = c.variant == Variant::preemptive ? v_finite(*m) : v_finite_history(*m);
        rep.w_analytic = arrival_rate(*m) * rep.v_analytic;
        if (m->n_users <= kEnumerateMaxUsers && m->k_retx <= kEnumerateMaxK)
            rep.v_enumerated = exact_v_enumerate(*m, c.variant);
    } else {
        const auto& p = std::get<PoissonModel>(c.model);
        rep.v_analytic = v_infinite(p);
        rep.w_analytic = w_infinite(p);
    }
    rep.z_v = z_score(rep.stats.v_hat, rep.v_analytic, rep.stats.v_stderr);
    rep.z_w = z_score(rep.stats.w_hat, rep.w_analytic, rep.stats.w_stderr);
    rep.pass_v = std::abs(rep.z_v) <= kZThreshold;
    rep.pass_w = std::abs(rep.z_w) <= kZThreshold;
    return rep;
}

}  // namespace aloha
