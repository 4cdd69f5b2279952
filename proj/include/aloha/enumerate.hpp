// Brute-force delivery probability for tiny instances, obtained by summing
// over every realisation of the slotted process rather than from any
// formula. Used as ground truth for the closed forms.
#pragma once

#include <cstdint>
#include <vector>

#include "aloha/model.hpp"

namespace aloha {

inline constexpr int kEnumerateMaxUsers = 3;
inline constexpr int kEnumerateMaxK = 3;

namespace detail {

/// Probability weight of a 0/1 path of the source chain whose first entry is
/// drawn from the stationary law.
inline double stationary_path_weight(std::uint32_t bits, int length, double q) {
    const auto st = StationaryDistribution::of(q);
    int prev = bits & 1u;
    double w = prev ? st.pi1 : st.pi0;
    for (int t = 1; t < length; ++t) {
        const int cur = (bits >> t) & 1u;
        if (prev == 1) {
            if (cur == 1) return 0.0;
        } else {
            w *= cur ? q : 1.0 - q;
        }
        prev = cur;
    }
    return w;
}

/// Distribution of one other source's busy pattern over the tagged slots
/// 0..K. Bit s of the index is set when the source transmits in slot s.
///
/// The path covers slots -2K-1..K; its first entry is the stationary start.
inline std::vector<double> busy_mask_distribution(double q, int k) {
    const int length = 3 * k + 2;
    const int origin = 2 * k + 1;  // path index of slot 0
    std::vector<double> dist(std::size_t{1} << (k + 1), 0.0);
    for (std::uint32_t bits = 0; bits < (1u << length); ++bits) {
        const double w = stationary_path_weight(bits, length, q);
        if (w == 0.0) continue;
        std::uint32_t mask = 0;
        for (int s = 0; s <= k; ++s) {
            for (int u = s - k; u <= s; ++u) {
                if ((bits >> (origin + u)) & 1u) {
                    mask |= 1u << s;
                    break;
                }
            }
        }
        dist[mask] += w;
    }
    return dist;
}

}  // namespace detail

/// Exact delivery probability of a message born at slot 0, by exhaustive
/// summation over other sources' paths, the tagged source's later
/// activations and every noise outcome on the tagged slots.
///
/// Limited to n_users <= 3 and k_retx <= 3; larger instances throw SizeError.
inline double exact_v_enumerate(const FiniteModel& m, Variant variant) {
    validate(m);
    if (m.n_users > kEnumerateMaxUsers || m.k_retx > kEnumerateMaxK)
        throw SizeError("exhaustive enumeration is limited to N <= 3 and K <= 3");

    const int k = m.k_retx;
    const int slots = k + 1;
    const std::uint32_t full = (1u << slots) - 1;

    // Joint busy mask of all other sources: union of independent masks.
    std::vector<double> busy(std::size_t{1} << slots, 0.0);
    busy[0] = 1.0;
    const auto single = detail::busy_mask_distribution(m.q, k);
    for (int u = 1; u < m.n_users; ++u) {
        std::vector<double> next(busy.size(), 0.0);
        for (std::uint32_t x = 0; x <= full; ++x)
            for (std::uint32_t y = 0; y <= full; ++y) next[x | y] += busy[x] * single[y];
        busy = std::move(next);
    }

    // Tagged source after slot 0: the chain is in state 1 at slot 0, so a
    // path over slots 1..K is weighted from there. The window is the set of
    // slots in which the tagged message is still on air.
    std::vector<double> window(std::size_t{1} << slots, 0.0);
    for (std::uint32_t path = 0; path < (1u << k); ++path) {
        double w = 1.0;
        int prev = 1;
        int first_arrival = slots;
        for (int s = 1; s <= k; ++s) {
            const int cur = (path >> (s - 1)) & 1u;
            if (prev == 1) {
                if (cur == 1) w = 0.0;
            } else {
                w *= cur ? m.q : 1.0 - m.q;
            }
            if (cur == 1 && first_arrival == slots) first_arrival = s;
            prev = cur;
        }
        if (w == 0.0) continue;
        const int end = variant == Variant::preemptive ? first_arrival : slots;
        window[(1u << end) - 1] += w;
    }

    double delivered = 0.0;
    for (std::uint32_t noise_ok = 0; noise_ok <= full; ++noise_ok) {
        const int ok = __builtin_popcount(noise_ok);
        double w_noise = 1.0;
        for (int s = 0; s < ok; ++s) w_noise *= 1.0 - m.epsilon;
        for (int s = ok; s < slots; ++s) w_noise *= m.epsilon;
        if (w_noise == 0.0) continue;
        for (std::uint32_t busy_mask = 0; busy_mask <= full; ++busy_mask) {
            if (busy[busy_mask] == 0.0) continue;
            for (std::uint32_t win = 0; win <= full; ++win) {
                if (window[win] == 0.0) continue;
                if ((win & ~busy_mask & noise_ok) != 0)
                    delivered += w_noise * busy[busy_mask] * window[win];
            }
        }
    }
    return delivered;
}

}  // namespace aloha
