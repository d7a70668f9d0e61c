// Copyright (C) 2026 The latcorr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "latcorr/error.hpp"

namespace latcorr {

struct SpatialShape {
    std::size_t height = 0;
    std::size_t width = 0;

    std::size_t cells() const noexcept { return height * width; }
    bool operator==(const SpatialShape&) const = default;
};

inline std::string to_string(SpatialShape s) {
    return std::to_string(s.height) + "x" + std::to_string(s.width);
}

// Dense C x H x W grid of reals, stored row-major in (channel, row, column)
// order. This is also the serialization order of the .lat format and of
// tensors on the wire.
class LatentGrid {
public:
    LatentGrid() = default;

    LatentGrid(std::size_t channels, std::size_t height, std::size_t width, double fill = 0.0)
        : channels_(channels), height_(height), width_(width), data_(channels * height * width, fill) {
        if (!std::isfinite(fill)) throw NumericError("LatentGrid: non-finite fill value", -1);
    }

    LatentGrid(std::size_t channels, std::size_t height, std::size_t width, std::vector<double> data)
        : channels_(channels), height_(height), width_(width), data_(std::move(data)) {
        if (data_.size() != channels_ * height_ * width_)
            throw ShapeError("LatentGrid: data length " + std::to_string(data_.size()) + " != " +
                             std::to_string(channels_) + "*" + std::to_string(height_) + "*" +
                             std::to_string(width_));
        if (!all_finite()) throw NumericError("LatentGrid: non-finite value in data", -1);
    }

    std::size_t channels() const noexcept { return channels_; }
    std::size_t height() const noexcept { return height_; }
    std::size_t width() const noexcept { return width_; }
    std::size_t size() const noexcept { return data_.size(); }
    SpatialShape spatial() const noexcept { return {height_, width_}; }

    std::span<const double> data() const noexcept { return data_; }
    std::span<double> data() noexcept { return data_; }

    std::size_t index(std::size_t c, std::size_t y, std::size_t x) const noexcept {
        return (c * height_ + y) * width_ + x;
    }
    double at(std::size_t c, std::size_t y, std::size_t x) const { return data_[index(c, y, x)]; }
    double& at(std::size_t c, std::size_t y, std::size_t x) { return data_[index(c, y, x)]; }

    bool same_shape(const LatentGrid& o) const noexcept {
        return channels_ == o.channels_ && height_ == o.height_ && width_ == o.width_;
    }

    bool all_finite() const noexcept {
        return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
    }

    std::string shape_string() const {
        return std::to_string(channels_) + "x" + std::to_string(height_) + "x" + std::to_string(width_);
    }

    bool operator==(const LatentGrid&) const = default;

private:
    std::size_t channels_ = 0;
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::vector<double> data_;
};

// H x W grid of {0,1}.
class BinaryMask {
public:
    BinaryMask() = default;

    BinaryMask(std::size_t height, std::size_t width, bool fill = false)
        : height_(height), width_(width), bits_(height * width, fill ? 1 : 0) {}

    BinaryMask(std::size_t height, std::size_t width, std::vector<std::uint8_t> bits)
        : height_(height), width_(width), bits_(std::move(bits)) {
        if (bits_.size() != height_ * width_) throw ShapeError("BinaryMask: bit count does not match dimensions");
        for (auto b : bits_)
            if (b > 1) throw ParameterError("BinaryMask: cell value other than 0 or 1");
    }

    std::size_t height() const noexcept { return height_; }
    std::size_t width() const noexcept { return width_; }
    SpatialShape spatial() const noexcept { return {height_, width_}; }
    std::span<const std::uint8_t> bits() const noexcept { return bits_; }

    bool at(std::size_t y, std::size_t x) const { return bits_[y * width_ + x] != 0; }
    void set(std::size_t y, std::size_t x, bool v) { bits_[y * width_ + x] = v ? 1 : 0; }

    std::size_t count() const noexcept {
        return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
    }
    bool empty() const noexcept { return count() == 0; }

    BinaryMask inverted() const {
        BinaryMask out = *this;
        for (auto& b : out.bits_) b = 1 - b;
        return out;
    }

    bool operator==(const BinaryMask&) const = default;

private:
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::vector<std::uint8_t> bits_;
};

// H x W field of region-selection scores in [0,1].
class ScoreMap {
public:
    ScoreMap() = default;

    ScoreMap(std::size_t height, std::size_t width, std::vector<double> scores)
        : height_(height), width_(width), scores_(std::move(scores)) {
        if (scores_.size() != height_ * width_) throw ShapeError("ScoreMap: score count does not match dimensions");
        for (double s : scores_)
            if (!(s >= 0.0 && s <= 1.0)) throw ParameterError("ScoreMap: score outside [0,1]");
    }

    std::size_t height() const noexcept { return height_; }
    std::size_t width() const noexcept { return width_; }
    std::span<const double> scores() const noexcept { return scores_; }
    double at(std::size_t y, std::size_t x) const { return scores_[y * width_ + x]; }

private:
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::vector<double> scores_;
};

struct BoundingBox {
    std::size_t y0 = 0, x0 = 0, y1 = 0, x1 = 0;  // half-open [y0,y1) x [x0,x1)

    std::size_t height() const noexcept { return y1 - y0; }
    std::size_t width() const noexcept { return x1 - x0; }
    bool empty() const noexcept { return y1 <= y0 || x1 <= x0; }
};

inline BoundingBox bounding_box(const BinaryMask& mask) {
    BoundingBox box{mask.height(), mask.width(), 0, 0};
    for (std::size_t y = 0; y < mask.height(); ++y)
        for (std::size_t x = 0; x < mask.width(); ++x)
            if (mask.at(y, x)) {
                box.y0 = std::min(box.y0, y);
                box.x0 = std::min(box.x0, x);
                box.y1 = std::max(box.y1, y + 1);
                box.x1 = std::max(box.x1, x + 1);
            }
    if (box.empty()) return {};
    return box;
}

inline void require_same_shape(const LatentGrid& a, const LatentGrid& b, const char* op) {
    if (!a.same_shape(b))
        throw ShapeError(std::string(op) + ": grid shapes differ (" + a.shape_string() + " vs " +
                         b.shape_string() + ")");
}

inline void require_mask_fits(const BinaryMask& mask, const LatentGrid& g, const char* op) {
    if (mask.spatial() != g.spatial())
        throw ShapeError(std::string(op) + ": mask " + to_string(mask.spatial()) + " does not match grid " +
                         to_string(g.spatial()));
}

// Cell-wise select: `a` where the mask is 0, `b` where it is 1. The mask is
// broadcast over channels.
inline LatentGrid blend(const BinaryMask& mask, const LatentGrid& a, const LatentGrid& b) {
    require_same_shape(a, b, "blend");
    require_mask_fits(mask, a, "blend");
    LatentGrid out = a;
    const std::size_t plane = a.height() * a.width();
    auto bits = mask.bits();
    auto src = b.data();
    auto dst = out.data();
    for (std::size_t c = 0; c < a.channels(); ++c)
        for (std::size_t i = 0; i < plane; ++i)
            if (bits[i]) dst[c * plane + i] = src[c * plane + i];
    return out;
}

// Max-pool a mask down to (target_h, target_w). A target cell is set iff any
// source cell it covers is set; non-divisible sizes use overlapping covers so
// that no source cell is left uncovered.
inline BinaryMask downsample_mask(const BinaryMask& mask, std::size_t target_h, std::size_t target_w) {
    if (target_h == 0 || target_w == 0) throw ShapeError("downsample_mask: zero target dimension");
    if (target_h > mask.height() || target_w > mask.width())
        throw ShapeError("downsample_mask: target " + std::to_string(target_h) + "x" + std::to_string(target_w) +
                         " larger than source " + to_string(mask.spatial()));
    if (target_h == mask.height() && target_w == mask.width()) return mask;

    BinaryMask out(target_h, target_w);
    const std::size_t sh = mask.height(), sw = mask.width();
    for (std::size_t ty = 0; ty < target_h; ++ty) {
        const std::size_t ylo = ty * sh / target_h;
        const std::size_t yhi = ((ty + 1) * sh + target_h - 1) / target_h;
        for (std::size_t tx = 0; tx < target_w; ++tx) {
            const std::size_t xlo = tx * sw / target_w;
            const std::size_t xhi = ((tx + 1) * sw + target_w - 1) / target_w;
            bool any = false;
            for (std::size_t y = ylo; y < yhi && !any; ++y)
                for (std::size_t x = xlo; x < xhi; ++x)
                    if (mask.at(y, x)) {
                        any = true;
                        break;
                    }
            out.set(ty, tx, any);
        }
    }
    return out;
}

// Region selection: cell = 1 iff score >= tau (inclusive).
inline BinaryMask threshold_scores(const ScoreMap& scores, double tau) {
    if (!(tau >= 0.0 && tau <= 1.0)) throw ParameterError("threshold_scores: tau must lie in [0,1]");
    std::vector<std::uint8_t> bits(scores.scores().size());
    std::transform(scores.scores().begin(), scores.scores().end(), bits.begin(),
                   [tau](double s) -> std::uint8_t { return s >= tau ? 1 : 0; });
    return BinaryMask(scores.height(), scores.width(), std::move(bits));
}

// --- element-wise algebra ---------------------------------------------------

inline LatentGrid scaled(const LatentGrid& g, double k) {
    LatentGrid out = g;
    for (double& v : out.data()) v *= k;
    return out;
}

// alpha * x + beta * y
inline LatentGrid lincomb(double alpha, const LatentGrid& x, double beta, const LatentGrid& y) {
    require_same_shape(x, y, "lincomb");
    LatentGrid out = x;
    auto d = out.data();
    auto ys = y.data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = alpha * d[i] + beta * ys[i];
    return out;
}

inline double l2_norm(const LatentGrid& g) {
    double s = 0.0;
    for (double v : g.data()) s += v * v;
    return std::sqrt(s);
}

inline double l2_distance(const LatentGrid& a, const LatentGrid& b) {
    require_same_shape(a, b, "l2_distance");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a.data()[i] - b.data()[i];
        s += d * d;
    }
    return std::sqrt(s);
}

// ||a - ref|| / ||ref||; falls back to the absolute distance when ref is zero.
inline double relative_l2(const LatentGrid& a, const LatentGrid& ref) {
    const double n = l2_norm(ref);
    const double d = l2_distance(a, ref);
    return n > 0.0 ? d / n : d;
}

}  // namespace latcorr
