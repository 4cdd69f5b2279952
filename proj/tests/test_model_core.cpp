#include <cmath>
#include <limits>
#include <vector>

#include <gtest/gtest.h>

#include "aloha/closed_form.hpp"
#include "aloha/enumerate.hpp"
#include "aloha/inclusion_exclusion.hpp"
#include "aloha/model.hpp"

using namespace aloha;

namespace {

double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

FiniteModel two_users(double lambda, double eps, int k) { return {2, q_for_rate(2, lambda), eps, k}; }

}  // namespace

// Values frozen from a 50-digit evaluation of the inclusion-exclusion sums.
TEST(ClosedForm, MatchesHighPrecisionOracle) {
    EXPECT_NEAR(v_finite({2, 0.1, 0.5, 3}), 0.68605982897727273, 1e-14);
    EXPECT_NEAR(v_finite({5, 0.01, 0.3, 10}), 0.85960591483518083, 1e-14);
    EXPECT_NEAR(v_finite({20, 0.001, 0.9, 10}), 0.57569649000689249, 1e-14);
    EXPECT_NEAR(v_finite_history({3, 0.1, 0.2, 2}), 0.6936328240661157, 1e-14);
    EXPECT_NEAR(v_finite_history({2, 0.01, 0.4, 5}), 0.97242606649435827, 1e-14);
    EXPECT_NEAR(v_infinite({0.02, 0.4, 7}), 0.94642218860415503, 1e-14);
    EXPECT_NEAR(v_infinite({0.1, 0.6, 4}), 0.65299156072622496, 1e-14);
}

TEST(ClosedForm, SingleUserSingleAttempt) {
    EXPECT_DOUBLE_EQ(v_finite({1, 0.3, 0.25, 0}), 0.75);
    EXPECT_DOUBLE_EQ(v_finite({1, 0.3, 0.0, 0}), 1.0);
}

TEST(ClosedForm, SingleAttemptIsProductOfIdleAndClean) {
    // K = 0: every other source idle at slot 0, no noise.
    for (int n : {2, 3, 7}) {
        for (double q : {0.01, 0.2}) {
            const double expected = 0.6 * std::pow(1.0 / (1.0 + q), n - 1);
            EXPECT_NEAR(v_finite({n, q, 0.4, 0}), expected, 1e-15);
        }
    }
    EXPECT_NEAR(v_infinite({0.3, 0.2, 0}), 0.8 * std::exp(-0.3), 1e-15);
}

TEST(ClosedForm, SystemProbabilityIsRateTimesIndividual) {
    for (const FiniteModel m : {FiniteModel{2, 0.1, 0.5, 3}, FiniteModel{10, 0.002, 0.4, 7}}) {
        EXPECT_DOUBLE_EQ(w_finite(m).value, arrival_rate(m) * v_finite(m));
        EXPECT_DOUBLE_EQ(w_finite_history(m).value, arrival_rate(m) * v_finite_history(m));
    }
    const PoissonModel p{0.02, 0.4, 7};
    EXPECT_DOUBLE_EQ(w_infinite(p), 0.02 * v_infinite(p));
}

TEST(ClosedForm, SystemProbabilityAboveOneIsFlaggedNotClamped) {
    const auto w = SystemProbability::of(1.25);
    EXPECT_TRUE(w.above_one);
    EXPECT_DOUBLE_EQ(w.value, 1.25);
    EXPECT_FALSE(w_finite({2, 0.1, 0.5, 3}).above_one);
}

TEST(ClosedForm, NoiselessDegeneration) {
    int checked = 0;
    for (int n : {1, 2, 3, 10, 100}) {
        for (double q : {1e-4, 0.01, 0.1, 0.5, 0.999}) {
            for (int k : {0, 1, 5, 40, 200}) {
                const FiniteModel m{n, q, 0.0, k};
                EXPECT_LE(rel_err(v_finite(m), v_finite_noiseless(m)), 1e-12) << n << ' ' << q << ' ' << k;
                ++checked;
            }
        }
    }
    EXPECT_EQ(checked, 125);
}

TEST(ClosedForm, NoiselessIsNonIncreasingInK) {
    for (int n : {2, 5, 50}) {
        for (double q : {0.001, 0.05, 0.7}) {
            double prev = 2.0;
            for (int k = 0; k <= 60; ++k) {
                const double v = v_finite_noiseless({n, q, 0.0, k});
                EXPECT_LE(v, prev + 1e-15);
                prev = v;
            }
        }
    }
    for (double lambda : {0.001, 0.1, 2.0}) {
        double prev = 2.0;
        for (int k = 0; k <= 60; ++k) {
            const double v = v_infinite({lambda, 0.0, k});
            EXPECT_LE(v, prev + 1e-15);
            prev = v;
        }
    }
}

TEST(ClosedForm, InclusionExclusionGrid) {
    int cases = 0;
    for (int n : {1, 2, 5, 20})
        for (double q : {0.001, 0.01, 0.1})
            for (double e : {0.0, 0.3, 0.9})
                for (int k : {0, 1, 3, 10}) {
                    const FiniteModel m{n, q, e, k};
                    EXPECT_LE(rel_err(v_finite(m), v_finite_incl_excl(m)), 1e-10)
                        << n << ' ' << q << ' ' << e << ' ' << k;
                    ++cases;
                }
    EXPECT_EQ(cases, 144);
    for (double lambda : {0.001, 0.02, 0.1, 0.75})
        for (double e : {0.0, 0.3, 0.9})
            for (int k : {0, 1, 3, 10}) {
                const PoissonModel m{lambda, e, k};
                EXPECT_LE(rel_err(v_infinite(m), v_infinite_incl_excl(m)), 1e-10) << lambda << ' ' << e << ' ' << k;
            }
}

TEST(ClosedForm, PoissonPairTermIgnoresPosition) {
    const PoissonModel m{0.05, 0.3, 5};
    for (int i = 0; i < 5; ++i) {
        EXPECT_DOUBLE_EQ(poisson_pair_success(m, i, 1), std::exp(-0.05 * 7));
        EXPECT_DOUBLE_EQ(poisson_single_success(m, i), std::exp(-0.05 * 6));
    }
}

TEST(ClosedForm, ExhaustiveEnumerationGrid) {
    int cases = 0;
    for (int n = 1; n <= 3; ++n)
        for (int k = 0; k <= 3; ++k)
            for (double q : {0.05, 0.2, 0.5})
                for (double e : {0.0, 0.3, 0.7}) {
                    const FiniteModel m{n, q, e, k};
                    EXPECT_NEAR(v_finite(m), exact_v_enumerate(m, Variant::preemptive), 1e-10)
                        << n << ' ' << k << ' ' << q << ' ' << e;
                    EXPECT_NEAR(v_finite_history(m), exact_v_enumerate(m, Variant::history), 1e-10)
                        << n << ' ' << k << ' ' << q << ' ' << e;
                    ++cases;
                }
    EXPECT_EQ(cases, 108);
}

TEST(ClosedForm, EnumerationRejectsLargeInstances) {
    EXPECT_THROW(exact_v_enumerate({4, 0.1, 0.2, 1}, Variant::preemptive), SizeError);
    EXPECT_THROW(exact_v_enumerate({2, 0.1, 0.2, 4}, Variant::history), SizeError);
}

TEST(ClosedForm, LimitConvergence) {
    for (double lambda : {0.005, 0.02, 0.1})
        for (double e : {0.0, 0.4})
            for (int k : {0, 7}) {
                const FiniteModel m{1000, q_for_rate(1000, lambda), e, k};
                EXPECT_NEAR(arrival_rate(m), lambda, 1e-15);
                EXPECT_LE(std::abs(v_finite(m) - v_infinite({lambda, e, k})), 1e-3);
            }
}

TEST(ClosedForm, HistoryEqualsPreemptiveAtZeroRetransmissions) {
    for (int n : {1, 2, 9})
        for (double q : {0.01, 0.3})
            for (double e : {0.0, 0.5}) {
                const FiniteModel m{n, q, e, 0};
                EXPECT_NEAR(v_finite_history(m), v_finite(m), 1e-12);
            }
}

TEST(ClosedForm, OutputsAreProbabilities) {
    for (int n : {1, 2, 30, 5000})
        for (double q : {1e-6, 0.01, 0.5, 0.999})
            for (double e : {0.0, 0.5, 0.999})
                for (int k : {0, 3, 64, 500}) {
                    const FiniteModel m{n, q, e, k};
                    for (double v : {v_finite(m), v_finite_history(m), v_finite_noiseless(m)}) {
                        EXPECT_TRUE(std::isfinite(v));
                        EXPECT_GE(v, 0.0);
                        EXPECT_LE(v, 1.0 + 1e-12);
                    }
                }
    for (double lambda : {1e-6, 0.3, 5.0})
        for (double e : {0.0, 0.999})
            for (int k : {0, 1000}) {
                const double v = v_infinite({lambda, e, k});
                EXPECT_GE(v, 0.0);
                EXPECT_LE(v, 1.0 + 1e-12);
            }
}

TEST(ClosedForm, LogSpacePathAgreesWithDirectPowers) {
    // Exponent (N-1)(K+1) straddles the switch to exp-of-logs.
    EvalOptions direct;
    direct.log_space_threshold = 1e9;
    EvalOptions logs;
    logs.log_space_threshold = 0.0;
    for (const FiniteModel m : {FiniteModel{40, 0.003, 0.6, 9}, FiniteModel{3, 0.2, 0.3, 50}}) {
        EXPECT_LE(rel_err(v_finite(m, direct), v_finite(m, logs)), 1e-12);
        EXPECT_LE(rel_err(v_finite_history(m, direct), v_finite_history(m, logs)), 1e-12);
    }
}

TEST(ClosedForm, GeometricSumFormsAgree) {
    EvalOptions sum_form;
    sum_form.geometric_sum_limit = 1 << 20;
    EvalOptions ratio_form;
    ratio_form.geometric_sum_limit = 0;
    for (const FiniteModel m : {FiniteModel{2, 0.01, 0.4, 150}, FiniteModel{2, 0.0526, 0.99, 200}}) {
        EXPECT_LE(rel_err(v_finite(m, sum_form), v_finite(m, ratio_form)), 1e-11);
        EXPECT_LE(rel_err(v_finite_history(m, sum_form), v_finite_history(m, ratio_form)), 1e-11);
    }
}

TEST(ClosedForm, NearSingularDenominator) {
    // eps (1-q)^N close to 1: the ratio form would divide by ~1e-9.
    const FiniteModel m{1, 1e-9, 1.0 - 1e-9, 20};
    const double v = v_finite(m);
    EXPECT_TRUE(std::isfinite(v));
    EXPECT_NEAR(v, v_finite_incl_excl(m), 1e-12);
}

TEST(ClosedForm, ExampleOneValues) {
    const PoissonModel inf{0.02, 0.4, 0};
    EXPECT_NEAR(1.0 - v_infinite(inf), 0.4119, 5e-5);
    EXPECT_NEAR(1.0 - v_finite(two_users(0.02, 0.4, 0)), 0.406, 5e-4);
    // Model values at K = 7 (oracle) and K = 6, where the reference values land.
    EXPECT_NEAR(1.0 - v_infinite({0.02, 0.4, 7}), 0.053577811395844968, 1e-13);
    EXPECT_NEAR(1.0 - v_finite(two_users(0.02, 0.4, 7)), 0.030163671089510959, 1e-13);
    EXPECT_NEAR(1.0 - v_infinite({0.02, 0.4, 6}), 0.0521, 1e-4);
    EXPECT_NEAR(1.0 - v_finite(two_users(0.02, 0.4, 6)), 0.0298, 1e-4);
}

TEST(ClosedForm, ExampleThreeValues) {
    EXPECT_NEAR(1.0 - v_infinite({0.005, 0.3, 0}), 0.3035, 5e-5);
    EXPECT_NEAR(1.0 - v_finite(two_users(0.005, 0.3, 0)), 0.30175, 1e-12);
    EXPECT_NEAR(1.0 - v_finite(two_users(0.005, 0.3, 7)), 0.0053, 5e-5);
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

TEST(Model, StationaryDistribution) {
    const auto s = StationaryDistribution::of(0.25);
    EXPECT_DOUBLE_EQ(s.pi1, 0.2);
    EXPECT_DOUBLE_EQ(s.pi0, 0.8);
}

TEST(Model, RateRoundTrip) {
    for (int n : {2, 10, 1000})
        for (double lambda : {0.005, 0.5, 1.5}) {
            if (lambda >= n) continue;
            EXPECT_NEAR(arrival_rate(FiniteModel{n, q_for_rate(n, lambda), 0.0, 0}), lambda, 1e-14);
        }
    EXPECT_THROW(q_for_rate(2, 2.0), DomainError);
    EXPECT_THROW(q_for_rate(2, 0.0), DomainError);
}

TEST(Model, RejectsInvalidParameters) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(v_finite({0, 0.1, 0.1, 1}), DomainError);
    EXPECT_THROW(v_finite({2, 0.0, 0.1, 1}), DomainError);
    EXPECT_THROW(v_finite({2, 1.5, 0.1, 1}), DomainError);
    EXPECT_THROW(v_finite({2, 1.0, 0.1, 1}), DomainError);
    EXPECT_THROW(v_finite({2, nan, 0.1, 1}), DomainError);
    EXPECT_THROW(v_finite({2, 0.1, 1.0, 1}), DomainError);
    EXPECT_THROW(v_finite({2, 0.1, -0.1, 1}), DomainError);
    EXPECT_THROW(v_finite({2, 0.1, 0.1, -1}), DomainError);
    EXPECT_THROW(v_finite_history({2, 0.1, nan, 1}), DomainError);
    EXPECT_THROW(v_infinite({0.0, 0.1, 1}), DomainError);
    EXPECT_THROW(v_infinite({-1.0, 0.1, 1}), DomainError);
    EXPECT_THROW(v_infinite({0.1, 1.0, 1}), DomainError);
    EXPECT_THROW(v_infinite({std::numeric_limits<double>::infinity(), 0.1, 1}), DomainError);
    EXPECT_THROW(parse_variant("greedy"), DomainError);
}

TEST(Model, VariantNames) {
    EXPECT_EQ(parse_variant("preemptive"), Variant::preemptive);
    EXPECT_EQ(parse_variant("history"), Variant::history);
    EXPECT_STREQ(to_string(Variant::history), "history");
}
