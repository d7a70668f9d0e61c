// Copyright (C) 2026 The latcorr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "latcorr/denoiser.hpp"
#include "latcorr/error.hpp"
#include "latcorr/grid.hpp"
#include "latcorr/rng.hpp"
#include "latcorr/schedule.hpp"

namespace latcorr {

struct InversionConfig {
    std::size_t invert_steps = 10;
    std::size_t renoise_iters = 4;
    double renoise_tol = 1e-4;
    std::uint64_t seed = 0;

    void validate(const NoiseSchedule& sched) const {
        if (invert_steps > sched.num_sample_steps())
            throw ParameterError("invert_steps " + std::to_string(invert_steps) + " exceeds the " +
                                 std::to_string(sched.num_sample_steps()) + " sample steps");
        if (renoise_iters < 1) throw ParameterError("renoise_iters must be >= 1");
        if (!(renoise_tol >= 0.0)) throw ParameterError("renoise_tol must be >= 0");
    }
};

struct TrajectoryEntry {
    std::size_t depth = 0;  // 0 = clean latent
    LatentGrid latent;
};

struct Trajectory {
    std::vector<TrajectoryEntry> entries;
    // residuals[i][k]: relative fixed-point residual after iteration k of the
    // inversion step that produced entries[i + 1].
    std::vector<std::vector<double>> residuals;
    std::vector<std::string> warnings;

    const LatentGrid& last() const { return entries.back().latent; }
    std::size_t final_depth() const { return entries.back().depth; }
};

// Seed for the sampler noise at a given step; shared by invert and resample
// so a stochastic round trip replays identical noise.
inline std::uint64_t step_noise_seed(std::uint64_t seed, std::size_t step_index) {
    return derive_seed(seed, 0x5354455000000000ULL + step_index);
}

namespace detail {

inline void require_finite(const LatentGrid& g, const char* op, std::size_t step_index) {
    if (!g.all_finite())
        throw NumericError(std::string(op) + ": non-finite latent at step " + std::to_string(step_index),
                           static_cast<int>(step_index));
}

}  // namespace detail

// Inverts z0 through the first `invert_steps` sampler steps. Each step solves
//   z_t = (z_prev - psi * eps(z_t) - p * noise) / phi
// by fixed-point iteration starting from (z_prev - p * noise) / phi.
inline Trajectory invert(const LatentGrid& z0, DenoiserHandle& d, const NoiseSchedule& sched,
                         const InversionConfig& cfg) {
    cfg.validate(sched);
    detail::require_finite(z0, "invert", 0);
    Trajectory traj;
    if (sched.eta() > 0.0)
        traj.warnings.push_back("eta > 0: inversion replays seeded sampler noise; exact only with the same seed");
    traj.entries.push_back({0, z0});

    LatentGrid current = z0;
    for (std::size_t i = 0; i < cfg.invert_steps; ++i) {
        const StepCoeffs c = coeffs_at(sched, i);
        LatentGrid rhs = current;
        if (c.p > 0.0) rhs = lincomb(1.0, rhs, -c.p, normal_like(rhs, step_noise_seed(cfg.seed, i)));

        LatentGrid z = scaled(rhs, 1.0 / c.phi);
        std::vector<double> res;
        for (std::size_t k = 0; k < cfg.renoise_iters; ++k) {
            LatentGrid eps = predict_eps(d, z, i, sched);
            LatentGrid next = scaled(lincomb(1.0, rhs, -c.psi, eps), 1.0 / c.phi);
            detail::require_finite(next, "invert", i);
            res.push_back(relative_l2(z, next));
            z = std::move(next);
            if (res.back() < cfg.renoise_tol) break;
        }
        traj.residuals.push_back(std::move(res));
        traj.entries.push_back({i + 1, z});
        current = std::move(z);
    }
    return traj;
}

// Runs the sampler from `start_depth` down to the clean level:
//   z_prev = phi * z + psi * eps(z) + p * noise
inline LatentGrid resample(const LatentGrid& zt, std::size_t start_depth, DenoiserHandle& d,
                           const NoiseSchedule& sched, std::uint64_t seed) {
    if (start_depth > sched.num_sample_steps())
        throw ParameterError("resample: start depth " + std::to_string(start_depth) + " exceeds the " +
                             std::to_string(sched.num_sample_steps()) + " sample steps");
    detail::require_finite(zt, "resample", start_depth);
    LatentGrid z = zt;
    for (std::size_t i = start_depth; i-- > 0;) {
        const StepCoeffs c = coeffs_at(sched, i);
        LatentGrid eps = predict_eps(d, z, i, sched);
        LatentGrid next = lincomb(c.phi, z, c.psi, eps);
        if (c.p > 0.0) next = lincomb(1.0, next, c.p, normal_like(next, step_noise_seed(seed, i)));
        detail::require_finite(next, "resample", i);
        z = std::move(next);
    }
    return z;
}

}  // namespace latcorr
