// Copyright (C) 2026 The latcorr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "latcorr/error.hpp"

namespace latcorr {

// Coefficients of one sampler transition from noise level t down to t'.
//   sampling:  z_{t'} = phi * z_t + psi * eps_theta(z_t) + p * noise
//   forward:   z_t    = phi_fwd * z_0 + p_fwd * noise
struct StepCoeffs {
    double phi = 1.0;
    double psi = 0.0;
    double p = 0.0;
    double phi_fwd = 1.0;
    double p_fwd = 0.0;

    bool operator==(const StepCoeffs&) const = default;
};

// Discrete noise schedule plus the DDIM sampling subsequence.
//
// alpha_bar has T + 1 entries; alpha_bar[0] = 1 is the clean level and
// alpha_bar[t] = prod_{s=1..t} (1 - beta_s). sample_steps lists the training
// timesteps the sampler visits, in increasing order. A latent at "depth" d
// (0 <= d <= S) sits at timestep sample_steps[d - 1], or is clean for d = 0.
class NoiseSchedule {
public:
    NoiseSchedule() = default;

    NoiseSchedule(std::vector<double> alpha_bar, std::vector<std::size_t> sample_steps, double eta)
        : alpha_bar_(std::move(alpha_bar)), sample_steps_(std::move(sample_steps)), eta_(eta) {
        if (alpha_bar_.empty() || alpha_bar_[0] != 1.0)
            throw ParameterError("NoiseSchedule: alpha_bar[0] must be exactly 1");
        for (std::size_t t = 1; t < alpha_bar_.size(); ++t)
            if (!(alpha_bar_[t] > 0.0 && alpha_bar_[t] < alpha_bar_[t - 1]))
                throw ParameterError("NoiseSchedule: alpha_bar must be strictly decreasing within (0,1]");
        for (std::size_t i = 0; i < sample_steps_.size(); ++i) {
            if (sample_steps_[i] == 0 || sample_steps_[i] > total_train_steps())
                throw ParameterError("NoiseSchedule: sample step " + std::to_string(sample_steps_[i]) +
                                     " outside [1, T]");
            if (i > 0 && sample_steps_[i] <= sample_steps_[i - 1])
                throw ParameterError("NoiseSchedule: sample steps must be strictly increasing");
        }
        if (!(eta_ >= 0.0) || !std::isfinite(eta_)) throw ParameterError("NoiseSchedule: eta must be >= 0");
    }

    std::size_t total_train_steps() const noexcept { return alpha_bar_.size() - 1; }
    std::size_t num_sample_steps() const noexcept { return sample_steps_.size(); }
    const std::vector<double>& alpha_bar() const noexcept { return alpha_bar_; }
    const std::vector<std::size_t>& sample_steps() const noexcept { return sample_steps_; }
    double eta() const noexcept { return eta_; }

    double alpha_bar_at(std::size_t timestep) const {
        if (timestep >= alpha_bar_.size()) throw ParameterError("alpha_bar_at: timestep out of range");
        return alpha_bar_[timestep];
    }

    // Timestep of the sampler step with the given index.
    std::size_t timestep(std::size_t step_index) const {
        check_index(step_index);
        return sample_steps_[step_index];
    }

    // alpha_bar of the level a latent at `depth` sits at (1 for depth 0).
    double alpha_bar_at_depth(std::size_t depth) const {
        if (depth > sample_steps_.size()) throw ParameterError("alpha_bar_at_depth: depth out of range");
        return depth == 0 ? 1.0 : alpha_bar_[sample_steps_[depth - 1]];
    }

    void check_index(std::size_t step_index) const {
        if (step_index >= sample_steps_.size())
            throw ParameterError("step index " + std::to_string(step_index) + " outside [0, " +
                                 std::to_string(sample_steps_.size()) + ")");
    }

private:
    std::vector<double> alpha_bar_{1.0};
    std::vector<std::size_t> sample_steps_;
    double eta_ = 0.0;
};

// Linear-beta schedule over T training steps with S evenly spaced sampler
// steps at 1 + floor(i * T / S).
inline NoiseSchedule make_linear_schedule(std::size_t train_steps, double beta_start, double beta_end,
                                          std::size_t sample_steps, double eta) {
    if (train_steps == 0) throw ParameterError("make_linear_schedule: T must be positive");
    if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0))
        throw ParameterError("make_linear_schedule: need 0 < beta_start <= beta_end < 1");
    if (sample_steps > train_steps) throw ParameterError("make_linear_schedule: S must not exceed T");

    std::vector<double> alpha_bar(train_steps + 1);
    alpha_bar[0] = 1.0;
    long double prod = 1.0L;
    for (std::size_t s = 1; s <= train_steps; ++s) {
        const long double frac =
            train_steps == 1 ? 0.0L : static_cast<long double>(s - 1) / static_cast<long double>(train_steps - 1);
        const long double beta = beta_start + frac * (static_cast<long double>(beta_end) - beta_start);
        prod *= 1.0L - beta;
        alpha_bar[s] = static_cast<double>(prod);
    }

    std::vector<std::size_t> steps(sample_steps);
    for (std::size_t i = 0; i < sample_steps; ++i) steps[i] = 1 + i * train_steps / sample_steps;
    return NoiseSchedule(std::move(alpha_bar), std::move(steps), eta);
}

inline NoiseSchedule default_schedule() { return make_linear_schedule(1000, 1e-4, 0.02, 50, 0.0); }

// Parameters of a linear schedule, kept alongside the built schedule for
// provenance.
struct ScheduleParams {
    std::size_t train_steps = 1000;
    double beta_start = 1e-4;
    double beta_end = 0.02;
    std::size_t sample_steps = 50;
    double eta = 0.0;

    NoiseSchedule build() const { return make_linear_schedule(train_steps, beta_start, beta_end, sample_steps, eta); }
};

// DDIM transition coefficients given the two alpha_bar levels directly.
inline StepCoeffs ddim_coeffs(double alpha_bar_t, double alpha_bar_prev, double eta) {
    StepCoeffs c;
    double var = 0.0;
    if (eta > 0.0 && alpha_bar_prev < 1.0) {
        var = eta * eta * ((1.0 - alpha_bar_prev) / (1.0 - alpha_bar_t)) * (1.0 - alpha_bar_t / alpha_bar_prev);
        var = std::max(var, 0.0);
    }
    c.phi = std::sqrt(alpha_bar_prev / alpha_bar_t);
    c.psi = std::sqrt(std::max(1.0 - alpha_bar_prev - var, 0.0)) -
            std::sqrt(alpha_bar_prev * (1.0 - alpha_bar_t) / alpha_bar_t);
    c.p = std::sqrt(var);
    c.phi_fwd = std::sqrt(alpha_bar_t);
    c.p_fwd = std::sqrt(1.0 - alpha_bar_t);
    return c;
}

inline StepCoeffs coeffs_at(const NoiseSchedule& sched, std::size_t step_index) {
    sched.check_index(step_index);
    return ddim_coeffs(sched.alpha_bar_at_depth(step_index + 1), sched.alpha_bar_at_depth(step_index), sched.eta());
}

}  // namespace latcorr
