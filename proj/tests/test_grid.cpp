// Copyright (C) 2026 The latcorr Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "latcorr/grid.hpp"
#include "latcorr/io.hpp"
#include "latcorr/rng.hpp"

namespace latcorr {
namespace {

BinaryMask random_mask(std::mt19937& rng, std::size_t h, std::size_t w, double p = 0.5) {
    std::bernoulli_distribution bit(p);
    BinaryMask m(h, w);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) m.set(y, x, bit(rng));
    return m;
}

TEST(Blend, AllZeroMaskGivesA) {
    auto a = normal_grid(2, 3, 4, 1);
    auto b = normal_grid(2, 3, 4, 2);
    EXPECT_EQ(blend(BinaryMask(3, 4, false), a, b), a);
}

TEST(Blend, AllOneMaskGivesB) {
    auto a = normal_grid(2, 3, 4, 1);
    auto b = normal_grid(2, 3, 4, 2);
    EXPECT_EQ(blend(BinaryMask(3, 4, true), a, b), b);
}

TEST(Blend, HandEvaluatedCheckerboard) {
    LatentGrid a(1, 2, 2, std::vector<double>{1, 2, 3, 4});
    LatentGrid b(1, 2, 2, 9.0);
    BinaryMask m(2, 2, std::vector<std::uint8_t>{0, 1, 1, 0});
    EXPECT_EQ(blend(m, a, b), LatentGrid(1, 2, 2, std::vector<double>{1, 9, 9, 4}));
}

TEST(Blend, ShapeMismatchThrows) {
    EXPECT_THROW(blend(BinaryMask(2, 2), LatentGrid(1, 2, 2), LatentGrid(2, 2, 2)), ShapeError);
    EXPECT_THROW(blend(BinaryMask(3, 2), LatentGrid(1, 2, 2), LatentGrid(1, 2, 2)), ShapeError);
}

TEST(Blend, PropertyCellwiseSelection) {
    std::mt19937 rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t c = 1 + rng() % 4, h = 1 + rng() % 12, w = 1 + rng() % 12;
        auto a = normal_grid(c, h, w, rng());
        auto b = normal_grid(c, h, w, rng());
        auto m = random_mask(rng, h, w);
        auto out = blend(m, a, b);
        for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t y = 0; y < h; ++y)
                for (std::size_t x = 0; x < w; ++x)
                    ASSERT_EQ(out.at(ch, y, x), m.at(y, x) ? b.at(ch, y, x) : a.at(ch, y, x));
        ASSERT_EQ(blend(m, a, a), a);
    }
}

TEST(DownsampleMask, AllZeroStaysZero) {
    auto d = downsample_mask(BinaryMask(4, 4), 2, 2);
    EXPECT_EQ(d, BinaryMask(2, 2));
}

TEST(DownsampleMask, SingleCellLandsInCoveringCell) {
    for (std::size_t y = 0; y < 4; ++y)
        for (std::size_t x = 0; x < 4; ++x) {
            BinaryMask m(4, 4);
            m.set(y, x, true);
            auto d = downsample_mask(m, 2, 2);
            EXPECT_EQ(d.count(), 1u);
            EXPECT_TRUE(d.at(y / 2, x / 2));
        }
}

TEST(DownsampleMask, CheckerboardToSingleCell) {
    BinaryMask m(8, 8);
    for (std::size_t y = 0; y < 8; ++y)
        for (std::size_t x = 0; x < 8; ++x) m.set(y, x, (x + y) % 2 == 1);
    EXPECT_EQ(downsample_mask(m, 1, 1), BinaryMask(1, 1, true));
}

TEST(DownsampleMask, LargerTargetThrows) {
    EXPECT_THROW(downsample_mask(BinaryMask(4, 4), 8, 4), ShapeError);
    EXPECT_THROW(downsample_mask(BinaryMask(4, 4), 0, 4), ShapeError);
}

TEST(DownsampleMask, PropertyNeverDropsCoverage) {
    std::mt19937 rng(11);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t h = 1 + rng() % 20, w = 1 + rng() % 20;
        const std::size_t th = 1 + rng() % h, tw = 1 + rng() % w;
        auto m = random_mask(rng, h, w, 0.05);
        auto d = downsample_mask(m, th, tw);
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x)
                if (m.at(y, x)) ASSERT_TRUE(d.at(y * th / h, x * tw / w)) << y << "," << x;
        if (m.empty()) ASSERT_TRUE(d.empty());
    }
}

TEST(ThresholdScores, Basic) {
    ScoreMap s(1, 2, {0.2, 0.8});
    EXPECT_EQ(threshold_scores(s, 0.5), BinaryMask(1, 2, std::vector<std::uint8_t>{0, 1}));
}

TEST(ThresholdScores, ZeroTauSelectsEverything) {
    ScoreMap s(2, 2, {0.0, 0.3, 1.0, 0.7});
    EXPECT_EQ(threshold_scores(s, 0.0), BinaryMask(2, 2, true));
}

TEST(ThresholdScores, BoundaryInclusive) {
    EXPECT_EQ(threshold_scores(ScoreMap(1, 1, {0.5}), 0.5), BinaryMask(1, 1, true));
}

TEST(ThresholdScores, RejectsTauOutsideUnitInterval) {
    EXPECT_THROW(threshold_scores(ScoreMap(1, 1, {0.5}), 1.5), ParameterError);
    EXPECT_THROW(ScoreMap(1, 1, {1.5}), ParameterError);
}

TEST(ThresholdScores, PropertyMonotoneInTau) {
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> v(64);
        for (double& x : v) x = u(rng);
        ScoreMap s(8, 8, v);
        double lo = u(rng), hi = u(rng);
        if (lo > hi) std::swap(lo, hi);
        auto a = threshold_scores(s, lo), b = threshold_scores(s, hi);
        for (std::size_t i = 0; i < 64; ++i) ASSERT_LE(b.bits()[i], a.bits()[i]);
    }
}

TEST(Grid, RejectsBadConstruction) {
    EXPECT_THROW(LatentGrid(1, 2, 2, std::vector<double>{1, 2, 3}), ShapeError);
    EXPECT_THROW(LatentGrid(1, 1, 1, std::vector<double>{std::nan("")}), NumericError);
    EXPECT_THROW(BinaryMask(1, 2, std::vector<std::uint8_t>{0, 2}), ParameterError);
}

TEST(LatFormat, ExactHeaderLayout) {
    LatentGrid g(1, 1, 2, std::vector<double>{1.0, -2.0});
    auto bytes = encode_lat(g);
    const std::vector<std::uint8_t> expected{'L', 'A', 'T', '1', 1, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0,
                                             0x00, 0x00, 0x80, 0x3f, 0x00, 0x00, 0x00, 0xc0};
    EXPECT_EQ(bytes, expected);
}

TEST(LatFormat, PropertyRoundTripOfF32Values) {
    std::mt19937 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        auto g = normal_grid(1 + rng() % 4, 1 + rng() % 9, 1 + rng() % 9, rng());
        for (double& v : g.data()) v = static_cast<float>(v);
        ASSERT_EQ(decode_lat(encode_lat(g)), g);
    }
}

TEST(LatFormat, RejectsMalformed) {
    std::vector<std::uint8_t> bad{'L', 'A', 'T', '2', 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0};
    EXPECT_THROW(decode_lat(bad), FormatError);
    auto ok = encode_lat(LatentGrid(1, 2, 2));
    ok.pop_back();
    EXPECT_THROW(decode_lat(ok), FormatError);
}

TEST(PngMask, RoundTripWritesZeroAnd255) {
    auto dir = std::filesystem::temp_directory_path() / "latcorr_test_grid";
    std::filesystem::create_directories(dir);
    std::mt19937 rng(9);
    auto m = random_mask(rng, 13, 7);
    write_mask_png(dir / "m.png", m);
    EXPECT_EQ(read_mask_png(dir / "m.png"), m);
    auto im = read_png(dir / "m.png");
    for (auto p : im.pixels) EXPECT_TRUE(p == 0 || p == 255);
}

TEST(ImageGrid, QuantizationRoundTrip) {
    Image8 im{3, 2, 2, {0, 10, 20, 127, 128, 129, 200, 254, 255, 1, 2, 3}};
    EXPECT_EQ(grid_to_image(image_to_grid(im)), im);
}

}  // namespace
}  // namespace latcorr
