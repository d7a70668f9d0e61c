// Copyright (C) 2026 The latcorr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "latcorr/corruption.hpp"
#include "latcorr/denoiser.hpp"
#include "latcorr/diffusion.hpp"
#include "latcorr/grid.hpp"
#include "latcorr/rng.hpp"
#include "latcorr/schedule.hpp"

namespace latcorr {

// Settings of the fixed-point solver used by every inversion in a run.
struct RenoiseSettings {
    std::size_t iters = 4;
    double tol = 1e-4;
};

struct CorruptionOutcome {
    std::size_t depth = 0;
    Trajectory trajectory;
    LatentGrid corrupted;  // before resampling
    LatentGrid output;     // after resampling to the clean level
    bool mask_empty = false;
};

// invert -> corrupt inside the mask -> resample, for one latent and a mask
// already at latent resolution. An empty mask skips the corruption op.
inline CorruptionOutcome corrupt_latent(const LatentGrid& z0, const BinaryMask& mask, const CorruptionSpec& spec,
                                        DenoiserHandle& d, const NoiseSchedule& sched,
                                        const RenoiseSettings& renoise = {}, const BlurParams& blur = {}) {
    require_mask_fits(mask, z0, "corrupt_latent");
    CorruptionOutcome out;
    out.depth = spec.depth(sched.num_sample_steps());
    out.trajectory = invert(z0, d, sched, {out.depth, renoise.iters, renoise.tol, spec.seed});
    const LatentGrid& zt = out.trajectory.last();
    out.mask_empty = mask.empty();
    if (out.mask_empty) {
        out.corrupted = zt;
    } else if (spec.method == CorruptionMethod::Proposed) {
        out.corrupted = corrupt_region(zt, z0, mask, sched, out.depth, derive_seed(spec.seed, "region-noise"));
    } else {
        out.corrupted = corrupt_baseline(zt, mask, spec.method, derive_seed(spec.seed, "baseline-noise"), blur);
    }
    out.output = resample(out.corrupted, out.depth, d, sched, spec.seed);
    return out;
}

// Image <-> latent mapping. The toy codec is the identity; the bridge codec
// calls ENCODE/DECODE on a remote VAE.
class Codec {
public:
    virtual ~Codec() = default;
    virtual LatentGrid encode(const LatentGrid& image) = 0;
    virtual LatentGrid decode(const LatentGrid& latent) = 0;
};

class IdentityCodec final : public Codec {
public:
    LatentGrid encode(const LatentGrid& image) override { return image; }
    LatentGrid decode(const LatentGrid& latent) override { return latent; }
};

class BridgeCodec final : public Codec {
public:
    explicit BridgeCodec(BridgeClient& client) : client_(client) {}
    LatentGrid encode(const LatentGrid& image) override { return client_.encode(image); }
    LatentGrid decode(const LatentGrid& latent) override { return client_.decode(latent); }

private:
    BridgeClient& client_;
};

// Mean absolute per-cell change inside and outside a spatial mask, averaged
// over channels. Either side is 0 when it has no cells.
struct RegionChange {
    double masked = 0.0;
    double unmasked = 0.0;
    std::size_t masked_cells = 0;
    std::size_t unmasked_cells = 0;
    double masked_sum = 0.0;
    double unmasked_sum = 0.0;
};

inline RegionChange region_change(const LatentGrid& before, const LatentGrid& after, const BinaryMask& mask) {
    require_same_shape(before, after, "region_change");
    require_mask_fits(mask, before, "region_change");
    RegionChange r;
    const std::size_t plane = before.height() * before.width();
    for (std::size_t c = 0; c < before.channels(); ++c)
        for (std::size_t i = 0; i < plane; ++i) {
            const double d = std::abs(after.data()[c * plane + i] - before.data()[c * plane + i]);
            if (mask.bits()[i]) {
                r.masked_sum += d;
                ++r.masked_cells;
            } else {
                r.unmasked_sum += d;
                ++r.unmasked_cells;
            }
        }
    r.masked = r.masked_cells ? r.masked_sum / static_cast<double>(r.masked_cells) : 0.0;
    r.unmasked = r.unmasked_cells ? r.unmasked_sum / static_cast<double>(r.unmasked_cells) : 0.0;
    return r;
}

}  // namespace latcorr
