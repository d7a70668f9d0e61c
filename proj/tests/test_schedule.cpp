// Copyright (C) 2026 The latcorr Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "latcorr/grid.hpp"
#include "latcorr/rng.hpp"
#include "latcorr/schedule.hpp"

namespace latcorr {
namespace {

TEST(LinearSchedule, CleanLevelIsOne) {
    for (auto T : {1u, 10u, 1000u}) EXPECT_EQ(make_linear_schedule(T, 1e-3, 1e-2, 1, 0.0).alpha_bar()[0], 1.0);
}

TEST(LinearSchedule, SingleStep) {
    auto s = make_linear_schedule(1, 0.1, 0.1, 1, 0.0);
    EXPECT_DOUBLE_EQ(s.alpha_bar()[1], 0.9);
    EXPECT_EQ(s.sample_steps(), std::vector<std::size_t>{1});
}

TEST(LinearSchedule, FinalAlphaBarMatchesHighPrecisionProduct) {
    // 50-digit product of (1 - beta_s), beta linear from 1e-4 to 2e-2 over 1000 steps.
    constexpr double kOracle = 4.0358297653756833148e-5;
    auto s = make_linear_schedule(1000, 1e-4, 0.02, 50, 0.0);
    EXPECT_NEAR(s.alpha_bar()[1000] / kOracle, 1.0, 1e-12);
    EXPECT_NEAR(s.alpha_bar()[181], 0.70962505157184229735, 1e-14);
    EXPECT_NEAR(s.alpha_bar()[381], 0.22675005200321169032, 1e-14);
}

TEST(LinearSchedule, SampleStepsEvenlySpaced) {
    auto s = default_schedule();
    ASSERT_EQ(s.num_sample_steps(), 50u);
    EXPECT_EQ(s.sample_steps().front(), 1u);
    EXPECT_EQ(s.sample_steps().back(), 981u);
    for (std::size_t i = 1; i < 50; ++i) EXPECT_EQ(s.sample_steps()[i] - s.sample_steps()[i - 1], 20u);
}

TEST(LinearSchedule, RejectsBadParameters) {
    EXPECT_THROW(make_linear_schedule(1000, 0.0, 0.02, 50, 0.0), ParameterError);
    EXPECT_THROW(make_linear_schedule(1000, 0.03, 0.02, 50, 0.0), ParameterError);
    EXPECT_THROW(make_linear_schedule(1000, 1e-4, 1.0, 50, 0.0), ParameterError);
    EXPECT_THROW(make_linear_schedule(10, 1e-4, 0.02, 11, 0.0), ParameterError);
    EXPECT_THROW(make_linear_schedule(10, 1e-4, 0.02, 5, -1.0), ParameterError);
}

TEST(Coeffs, DegenerateRepeatedStepIsIdentity) {
    auto c = ddim_coeffs(0.5, 0.5, 0.0);
    EXPECT_DOUBLE_EQ(c.phi, 1.0);
    EXPECT_NEAR(c.psi, 0.0, 1e-15);
    EXPECT_EQ(c.p, 0.0);
}

TEST(Coeffs, HandEvaluatedClosedForm) {
    auto c = ddim_coeffs(0.36, 0.64, 0.0);
    EXPECT_NEAR(c.phi, 4.0 / 3.0, 1e-14);
    EXPECT_NEAR(c.psi, 0.6 - 16.0 / 15.0, 1e-14);
    EXPECT_EQ(c.p, 0.0);
    EXPECT_NEAR(c.phi_fwd, 0.6, 1e-15);
    EXPECT_NEAR(c.p_fwd, 0.8, 1e-15);
}

TEST(Coeffs, DeterministicScheduleHasNoNoise) {
    auto s = default_schedule();
    for (std::size_t i = 0; i < s.num_sample_steps(); ++i) EXPECT_EQ(coeffs_at(s, i).p, 0.0);
}

TEST(Coeffs, StochasticScheduleHasNoiseExceptAtFirstStep) {
    auto s = make_linear_schedule(1000, 1e-4, 0.02, 50, 1.0);
    EXPECT_EQ(coeffs_at(s, 0).p, 0.0);
    for (std::size_t i = 1; i < s.num_sample_steps(); ++i) EXPECT_GT(coeffs_at(s, i).p, 0.0);
}

TEST(Coeffs, OutOfRangeIndexThrows) {
    EXPECT_THROW(coeffs_at(default_schedule(), 50), ParameterError);
}

TEST(Coeffs, ForwardMarginalNormalizedAndMonotone) {
    auto s = default_schedule();
    double prev_phi = 2.0, prev_p = -1.0;
    for (std::size_t i = 0; i < s.num_sample_steps(); ++i) {
        auto c = coeffs_at(s, i);
        EXPECT_NEAR(c.phi_fwd * c.phi_fwd + c.p_fwd * c.p_fwd, 1.0, 1e-6);
        EXPECT_GT(c.phi, 0.0);
        EXPECT_LT(c.phi_fwd, prev_phi);
        EXPECT_GT(c.p_fwd, prev_p);
        prev_phi = c.phi_fwd;
        prev_p = c.p_fwd;
    }
}

TEST(Coeffs, SamplingThenInversionFormulaIsIdentity) {
    // z' = phi z + psi e + p n, then z = (z' - psi e - p n) / phi, same e and n.
    for (double eta : {0.0, 0.5, 1.0}) {
        auto s = make_linear_schedule(1000, 1e-4, 0.02, 50, eta);
        for (std::size_t i = 0; i < s.num_sample_steps(); ++i) {
            auto c = coeffs_at(s, i);
            auto z = normal_grid(2, 4, 4, 100 + i);
            auto e = normal_grid(2, 4, 4, 200 + i);
            auto n = normal_grid(2, 4, 4, 300 + i);
            auto prev = lincomb(1.0, lincomb(c.phi, z, c.psi, e), c.p, n);
            auto back = scaled(lincomb(1.0, lincomb(1.0, prev, -c.psi, e), -c.p, n), 1.0 / c.phi);
            ASSERT_LT(relative_l2(back, z), 1e-6) << "eta=" << eta << " step=" << i;
        }
    }
}

TEST(Coeffs, BitReproducible) {
    auto a = default_schedule(), b = default_schedule();
    for (std::size_t i = 0; i < 50; ++i) EXPECT_EQ(coeffs_at(a, i), coeffs_at(b, i));
}

}  // namespace
}  // namespace latcorr
