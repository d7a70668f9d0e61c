// Copyright (C) 2026 The latcorr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "latcorr/error.hpp"
#include "latcorr/grid.hpp"
#include "latcorr/rng.hpp"
#include "latcorr/schedule.hpp"

namespace latcorr {

enum class CorruptionMethod { Proposed, GaussianReplace, Blur, Rotate90, Downscale8x };

inline constexpr std::array kAllMethods{CorruptionMethod::Proposed, CorruptionMethod::GaussianReplace,
                                        CorruptionMethod::Blur, CorruptionMethod::Rotate90,
                                        CorruptionMethod::Downscale8x};

inline std::string to_string(CorruptionMethod m) {
    switch (m) {
        case CorruptionMethod::Proposed: return "proposed";
        case CorruptionMethod::GaussianReplace: return "gaussian_replace";
        case CorruptionMethod::Blur: return "blur";
        case CorruptionMethod::Rotate90: return "rotate90";
        case CorruptionMethod::Downscale8x: return "downscale8x";
    }
    return "?";
}

inline CorruptionMethod parse_method(const std::string& s) {
    for (auto m : kAllMethods)
        if (to_string(m) == s) return m;
    throw ParameterError("unknown corruption method '" + s +
                         "' (expected proposed|gaussian_replace|blur|rotate90|downscale8x)");
}

inline bool is_geometric(CorruptionMethod m) {
    return m == CorruptionMethod::Rotate90 || m == CorruptionMethod::Downscale8x;
}

// corrupt_step counts sampler steps already taken out of S (0 = pure noise,
// S = clean), so the corruption happens at depth S - corrupt_step. The default
// 40 of 50 leaves 10 resampling steps, matching the 10-step inversion.
struct CorruptionSpec {
    CorruptionMethod method = CorruptionMethod::Proposed;
    std::size_t corrupt_step = 40;
    std::optional<std::size_t> resample_steps;  // unset: proposed -> S - corrupt_step, others -> 20
    std::uint64_t seed = 0;

    // Depth (number of inversion / resampling steps) at which the latent is
    // corrupted.
    std::size_t depth(std::size_t num_sample_steps) const {
        if (corrupt_step > num_sample_steps)
            throw ParameterError("corrupt_step " + std::to_string(corrupt_step) + " exceeds " +
                                 std::to_string(num_sample_steps) + " sample steps");
        if (method == CorruptionMethod::Proposed) {
            const std::size_t d = num_sample_steps - corrupt_step;
            if (resample_steps && *resample_steps != d)
                throw ParameterError("proposed method: resample_steps " + std::to_string(*resample_steps) +
                                     " inconsistent with corrupt_step " + std::to_string(corrupt_step));
            return d;
        }
        const std::size_t d = resample_steps.value_or(20);
        if (d > num_sample_steps) throw ParameterError("resample_steps exceeds the number of sample steps");
        return d;
    }
};

// Provenance row for one corrupted output.
struct CorruptionRecord {
    std::string input_id;
    std::string mask_id;
    CorruptionMethod method = CorruptionMethod::Proposed;
    std::size_t corrupt_step = 0;
    std::size_t depth = 0;
    std::uint64_t seed = 0;
    std::string output_id;
};

// Proposed region corruption with an explicit noise grid:
//   (1 - M) * z_t + M * (phi_fwd * z0 + p_fwd * noise)
inline LatentGrid corrupt_region_with_noise(const LatentGrid& z_t, const LatentGrid& z0, const BinaryMask& mask,
                                            double phi_fwd, double p_fwd, const LatentGrid& noise) {
    require_same_shape(z_t, z0, "corrupt_region");
    require_same_shape(z_t, noise, "corrupt_region");
    require_mask_fits(mask, z_t, "corrupt_region");
    return blend(mask, z_t, lincomb(phi_fwd, z0, p_fwd, noise));
}

// z_t must be the inverted latent at `depth` (>= 1); the selected region is
// replaced by the image latent forward-noised to the same level.
inline LatentGrid corrupt_region(const LatentGrid& z_t, const LatentGrid& z0, const BinaryMask& mask,
                                 const NoiseSchedule& sched, std::size_t depth, std::uint64_t seed) {
    const double ab = sched.alpha_bar_at_depth(depth);
    return corrupt_region_with_noise(z_t, z0, mask, std::sqrt(ab), std::sqrt(1.0 - ab), normal_like(z_t, seed));
}

struct BlurParams {
    int radius = 3;
    double sigma = 1.5;
};

inline std::vector<double> gaussian_kernel(const BlurParams& p) {
    if (p.radius < 0 || !(p.sigma > 0.0)) throw ParameterError("blur: need radius >= 0 and sigma > 0");
    std::vector<double> k(2 * p.radius + 1);
    double sum = 0.0;
    for (int i = -p.radius; i <= p.radius; ++i) {
        k[i + p.radius] = std::exp(-0.5 * i * i / (p.sigma * p.sigma));
        sum += k[i + p.radius];
    }
    for (double& v : k) v /= sum;
    return k;
}

// Separable Gaussian blur over the whole grid, edges clamped.
inline LatentGrid gaussian_blur(const LatentGrid& g, const BlurParams& p = {}) {
    const auto k = gaussian_kernel(p);
    const long h = static_cast<long>(g.height()), w = static_cast<long>(g.width());
    auto clampi = [](long v, long hi) { return v < 0 ? 0 : (v > hi ? hi : v); };
    LatentGrid tmp(g.channels(), g.height(), g.width());
    LatentGrid out(g.channels(), g.height(), g.width());
    for (std::size_t c = 0; c < g.channels(); ++c) {
        for (long y = 0; y < h; ++y)
            for (long x = 0; x < w; ++x) {
                double s = 0.0;
                for (int i = -p.radius; i <= p.radius; ++i) s += k[i + p.radius] * g.at(c, y, clampi(x + i, w - 1));
                tmp.at(c, y, x) = s;
            }
        for (long y = 0; y < h; ++y)
            for (long x = 0; x < w; ++x) {
                double s = 0.0;
                for (int i = -p.radius; i <= p.radius; ++i)
                    s += k[i + p.radius] * tmp.at(c, clampi(y + i, h - 1), x);
                out.at(c, y, x) = s;
            }
    }
    return out;
}

namespace detail {

// Rotates the largest centred square of the mask's bounding box by 90 degrees
// clockwise; only masked cells take the rotated values.
inline LatentGrid rotate90_in_mask(const LatentGrid& z, const BinaryMask& mask, const BoundingBox& box) {
    const std::size_t side = std::min(box.height(), box.width());
    const std::size_t oy = box.y0 + (box.height() - side) / 2;
    const std::size_t ox = box.x0 + (box.width() - side) / 2;
    LatentGrid out = z;
    for (std::size_t c = 0; c < z.channels(); ++c)
        for (std::size_t r = 0; r < side; ++r)
            for (std::size_t col = 0; col < side; ++col)
                if (mask.at(oy + r, ox + col)) out.at(c, oy + r, ox + col) = z.at(c, oy + side - 1 - col, ox + r);
    return out;
}

// Average-pools the bounding-box content in 8x8 blocks anchored at the box
// origin (edge blocks average what they cover) and upsamples back by
// nearest neighbour; only masked cells are written.
inline LatentGrid downscale8x_in_mask(const LatentGrid& z, const BinaryMask& mask, const BoundingBox& box) {
    constexpr std::size_t f = 8;
    LatentGrid out = z;
    for (std::size_t c = 0; c < z.channels(); ++c)
        for (std::size_t by = box.y0; by < box.y1; by += f)
            for (std::size_t bx = box.x0; bx < box.x1; bx += f) {
                const std::size_t ey = std::min(by + f, box.y1), ex = std::min(bx + f, box.x1);
                double s = 0.0;
                for (std::size_t y = by; y < ey; ++y)
                    for (std::size_t x = bx; x < ex; ++x) s += z.at(c, y, x);
                const double mean = s / static_cast<double>((ey - by) * (ex - bx));
                for (std::size_t y = by; y < ey; ++y)
                    for (std::size_t x = bx; x < ex; ++x)
                        if (mask.at(y, x)) out.at(c, y, x) = mean;
            }
    return out;
}

}  // namespace detail

// Baseline corruptions, each confined to the mask.
inline LatentGrid corrupt_baseline(const LatentGrid& z_t, const BinaryMask& mask, CorruptionMethod method,
                                   std::uint64_t seed, const BlurParams& blur = {}) {
    require_mask_fits(mask, z_t, "corrupt_baseline");
    switch (method) {
        case CorruptionMethod::GaussianReplace: return blend(mask, z_t, normal_like(z_t, seed));
        case CorruptionMethod::Blur: return blend(mask, z_t, gaussian_blur(z_t, blur));
        case CorruptionMethod::Rotate90:
        case CorruptionMethod::Downscale8x: {
            const BoundingBox box = bounding_box(mask);
            if (box.empty()) throw ParameterError(to_string(method) + ": mask is empty");
            return method == CorruptionMethod::Rotate90 ? detail::rotate90_in_mask(z_t, mask, box)
                                                        : detail::downscale8x_in_mask(z_t, mask, box);
        }
        case CorruptionMethod::Proposed: break;
    }
    throw ParameterError("corrupt_baseline: 'proposed' is not a baseline method; use corrupt_region");
}

// Negative control: Gaussian replacement on the clean image latent with no
// inversion and no resampling.
inline LatentGrid corrupt_image_latent_direct(const LatentGrid& z0, const BinaryMask& mask, std::uint64_t seed) {
    return corrupt_baseline(z0, mask, CorruptionMethod::GaussianReplace, seed);
}

}  // namespace latcorr
