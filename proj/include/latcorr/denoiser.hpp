// Copyright (C) 2026 The latcorr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "latcorr/error.hpp"
#include "latcorr/grid.hpp"
#include "latcorr/schedule.hpp"
#include "latcorr/wire.hpp"

namespace latcorr {

enum class DenoiserKind { Zero, AnalyticGaussian, Remote };

inline std::string to_string(DenoiserKind k) {
    switch (k) {
        case DenoiserKind::Zero: return "zero";
        case DenoiserKind::AnalyticGaussian: return "analytic";
        case DenoiserKind::Remote: return "remote";
    }
    return "?";
}

inline DenoiserKind parse_denoiser_kind(const std::string& s) {
    if (s == "zero") return DenoiserKind::Zero;
    if (s == "analytic" || s == "analytic_gaussian") return DenoiserKind::AnalyticGaussian;
    if (s == "remote") return DenoiserKind::Remote;
    throw ParameterError("unknown denoiser kind '" + s + "' (expected zero|analytic|remote)");
}

// Data model for the analytic denoiser: x ~ N(mean[c], scale^2) independently
// per cell. A single-entry mean is broadcast across channels.
struct GaussianPrior {
    std::vector<double> mean{0.0};
    double scale = 1.0;
};

// Plain-value description of a denoiser. Turning it into a handle is cheap
// for the local kinds; a remote handle owns its own connection.
struct DenoiserConfig {
    DenoiserKind kind = DenoiserKind::Zero;
    GaussianPrior prior;
    std::string endpoint;
    std::string conditioning;
    std::chrono::milliseconds deadline = std::chrono::seconds(120);
    int retries = 1;

    void validate() const {
        if (kind == DenoiserKind::AnalyticGaussian) {
            if (!(prior.scale > 0.0)) throw ParameterError("analytic denoiser: scale must be > 0");
            if (prior.mean.empty()) throw ParameterError("analytic denoiser: mean must not be empty");
        }
        if (kind == DenoiserKind::Remote && !wire::parse_endpoint(endpoint))
            throw ParameterError("remote denoiser: malformed endpoint '" + endpoint + "' (expected host:port)");
    }
};

// Posterior-mean noise estimate for Gaussian data at noise level alpha_bar:
//   m   = (sqrt(ab) s^2 z + (1 - ab) mu) / (ab s^2 + 1 - ab)
//   eps = (z - sqrt(ab) m) / sqrt(1 - ab)
inline LatentGrid analytic_eps(const GaussianPrior& prior, const LatentGrid& z, double alpha_bar) {
    if (!(alpha_bar > 0.0 && alpha_bar < 1.0)) throw ParameterError("analytic_eps: alpha_bar must lie in (0,1)");
    if (prior.mean.size() != 1 && prior.mean.size() != z.channels())
        throw ShapeError("analytic_eps: prior has " + std::to_string(prior.mean.size()) + " means for " +
                         std::to_string(z.channels()) + " channels");
    const double sa = std::sqrt(alpha_bar);
    const double s2 = prior.scale * prior.scale;
    const double denom = alpha_bar * s2 + 1.0 - alpha_bar;
    const double inv_noise = 1.0 / std::sqrt(1.0 - alpha_bar);
    LatentGrid out(z.channels(), z.height(), z.width());
    const std::size_t plane = z.height() * z.width();
    for (std::size_t c = 0; c < z.channels(); ++c) {
        const double mu = prior.mean.size() == 1 ? prior.mean[0] : prior.mean[c];
        for (std::size_t i = 0; i < plane; ++i) {
            const double zi = z.data()[c * plane + i];
            const double m = (sa * s2 * zi + (1.0 - alpha_bar) * mu) / denom;
            out.data()[c * plane + i] = (zi - sa * m) * inv_noise;
        }
    }
    return out;
}

// Typed client for the denoiser/VAE bridge protocol.
class BridgeClient {
public:
    BridgeClient(const std::string& endpoint, std::chrono::milliseconds deadline, int retries)
        : client_(require_endpoint(endpoint), deadline, retries) {}

    std::uint32_t ping() { return client_.ping(); }

    LatentGrid predict_eps(std::uint32_t timestep, const std::string& conditioning, const LatentGrid& z) {
        auto reply = wire::parse_tensor_payload(client_.call(wire::predict_eps_request(timestep, conditioning, z)));
        if (!reply.same_shape(z))
            throw ProtocolError("PREDICT_EPS reply shape " + reply.shape_string() + " != request " + z.shape_string(),
                                wire::kShapeMismatch);
        return reply;
    }

    LatentGrid encode(const LatentGrid& image) { return tensor_call(wire::Opcode::Encode, image); }
    LatentGrid decode(const LatentGrid& latent) { return tensor_call(wire::Opcode::Decode, latent); }

    ScoreMap score_regions(const LatentGrid& image) {
        auto g = tensor_call(wire::Opcode::ScoreRegions, image);
        if (g.channels() != 1 || g.spatial() != image.spatial())
            throw ProtocolError("SCORE_REGIONS reply shape " + g.shape_string() + " does not match image",
                                wire::kShapeMismatch);
        try {
            return ScoreMap(g.height(), g.width(), {g.data().begin(), g.data().end()});
        } catch (const Error& e) {
            throw ProtocolError(std::string("SCORE_REGIONS: ") + e.what(), wire::kShapeMismatch);
        }
    }

private:
    static wire::Endpoint require_endpoint(const std::string& s) {
        auto ep = wire::parse_endpoint(s);
        if (!ep) throw ParameterError("malformed endpoint '" + s + "'");
        return *ep;
    }

    LatentGrid tensor_call(wire::Opcode op, const LatentGrid& g) {
        return wire::parse_tensor_payload(client_.call(wire::tensor_frame(op, g)));
    }

    wire::Client client_;
};

// Handle to an eps_theta(z, t, c) implementation. Move-only: a remote handle
// owns one connection, so each worker creates its own handle.
class DenoiserHandle {
public:
    explicit DenoiserHandle(DenoiserConfig cfg) : cfg_(std::move(cfg)) {
        cfg_.validate();
        if (cfg_.kind == DenoiserKind::Remote)
            remote_ = std::make_unique<BridgeClient>(cfg_.endpoint, cfg_.deadline, cfg_.retries);
    }

    static DenoiserHandle zero() { return DenoiserHandle(DenoiserConfig{}); }

    static DenoiserHandle analytic(double mean, double scale) {
        DenoiserConfig c;
        c.kind = DenoiserKind::AnalyticGaussian;
        c.prior = {{mean}, scale};
        return DenoiserHandle(std::move(c));
    }

    DenoiserHandle(DenoiserHandle&&) noexcept = default;
    DenoiserHandle& operator=(DenoiserHandle&&) noexcept = default;

    const DenoiserConfig& config() const noexcept { return cfg_; }
    DenoiserKind kind() const noexcept { return cfg_.kind; }

    // Noise prediction at an explicit (timestep, alpha_bar) level.
    LatentGrid predict_at(const LatentGrid& z, std::size_t timestep, double alpha_bar) {
        switch (cfg_.kind) {
            case DenoiserKind::Zero: return LatentGrid(z.channels(), z.height(), z.width());
            case DenoiserKind::AnalyticGaussian: return analytic_eps(cfg_.prior, z, alpha_bar);
            case DenoiserKind::Remote:
                return remote_->predict_eps(static_cast<std::uint32_t>(timestep), cfg_.conditioning, z);
        }
        throw ParameterError("unreachable denoiser kind");
    }

    // Bridge access for VAE/scorer calls; null for local kinds.
    BridgeClient* bridge() noexcept { return remote_.get(); }

private:
    DenoiserConfig cfg_;
    std::unique_ptr<BridgeClient> remote_;
};

inline LatentGrid predict_eps(DenoiserHandle& d, const LatentGrid& z, std::size_t step_index,
                              const NoiseSchedule& sched) {
    if (!z.all_finite()) throw NumericError("predict_eps: non-finite input", static_cast<int>(step_index));
    const std::size_t t = sched.timestep(step_index);
    return d.predict_at(z, t, sched.alpha_bar_at(t));
}

}  // namespace latcorr
