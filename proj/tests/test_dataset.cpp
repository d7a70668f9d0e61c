// Copyright (C) 2026 The latcorr Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "latcorr/dataset.hpp"
#include "latcorr/mock_server.hpp"
#include "test_support.hpp"

namespace latcorr {
namespace {

using testing_support::slurp;
using testing_support::snapshot;
using testing_support::TempDir;
using testing_support::write_fixtures;

// Three annotators over 8 cells; cell k carries vote pattern k (bit a set
// means annotator a marked it), covering every pattern once.
TEST(Binarize, ExhaustiveTruthTable) {
    AnnotatorStack stack;
    for (int a = 0; a < 3; ++a) {
        BinaryMask m(1, 8);
        for (int k = 0; k < 8; ++k) m.set(0, k, (k >> a) & 1);
        stack.maps.push_back(m);
    }
    auto out = binarize_labels(stack);
    ASSERT_TRUE(out);
    for (int k = 0; k < 8; ++k) EXPECT_EQ(out->at(0, k), __builtin_popcount(k) >= 2) << "pattern " << k;
}

TEST(Binarize, TooFewAnnotatorsExcluded) {
    EXPECT_FALSE(binarize_labels({}));
    EXPECT_FALSE(binarize_labels({{BinaryMask(2, 2, true), BinaryMask(2, 2, true)}}));
}

TEST(Binarize, DimensionMismatch) {
    EXPECT_THROW(binarize_labels({{BinaryMask(2, 2), BinaryMask(2, 2), BinaryMask(2, 3)}}), ShapeError);
    EXPECT_THROW(binarize_labels({{BinaryMask(2, 2), BinaryMask(3, 2)}}), ShapeError);
}

class BuildTest : public ::testing::Test {
protected:
    BuildOptions options(const std::vector<Fixture>& fixtures, const std::string& out = "out") {
        write_fixtures(tmp / "src", fixtures);
        BuildOptions o;
        o.inputs = list_png_inputs(tmp / "src/images");
        o.masks.dir = tmp / "src/masks";
        o.out_dir = tmp / out;
        o.spec.seed = 1234;
        return o;
    }

    static DenoiserConfig analytic() {
        DenoiserConfig d;
        d.kind = DenoiserKind::AnalyticGaussian;
        d.prior = {{0.0}, 0.5};
        return d;
    }

    TempDir tmp;
};

TEST_F(BuildTest, EmptyInputGivesValidEmptyManifest) {
    fs::create_directories(tmp / "empty");
    BuildOptions o;
    o.inputs = list_png_inputs(tmp / "empty");
    o.out_dir = tmp / "out";
    auto r = build_dataset(o);
    EXPECT_TRUE(r.manifest.entries.empty());
    EXPECT_TRUE(r.failures.empty());
    auto m = read_manifest(tmp / "out/manifest.jsonl");
    EXPECT_EQ(m.header["inputs"], 0);
    EXPECT_TRUE(validate_manifest(tmp / "out/manifest.jsonl").ok());
}

TEST_F(BuildTest, EmptyMaskLeavesImageUnchanged) {
    auto fx = standard_fixtures(1, 32);
    fx[0].mask = BinaryMask(32, 32);
    auto r = build_dataset(options(fx));
    ASSERT_EQ(r.manifest.entries.size(), 1u);
    EXPECT_EQ(read_png(tmp / "out/images/fixture_00.png"), read_png(tmp / "src/images/fixture_00.png"));
    EXPECT_EQ(r.manifest.entries[0].stats.masked_cells, 0u);
}

TEST_F(BuildTest, ZeroDenoiserConfinesChangesToMask) {
    auto r = build_dataset(options(standard_fixtures(4, 32)));
    ASSERT_EQ(r.manifest.entries.size(), 4u);
    for (const auto& e : r.manifest.entries) {
        auto in = image_to_grid(read_png(tmp / "src/images" / (e.id + ".png")));
        auto out = image_to_grid(read_png(tmp / "out" / e.image));
        auto mask = read_mask_png(tmp / "out" / e.mask);
        for (std::size_t c = 0; c < in.channels(); ++c)
            for (std::size_t y = 0; y < in.height(); ++y)
                for (std::size_t x = 0; x < in.width(); ++x)
                    if (!mask.at(y, x)) ASSERT_NEAR(out.at(c, y, x), in.at(c, y, x), 1e-5) << e.id;
        EXPECT_GT(e.stats.masked_change, 0.0);
    }
}

TEST_F(BuildTest, AnalyticDenoiserMaskedChangeDominates) {
    auto o = options(standard_fixtures(10, 32));
    o.denoiser = analytic();
    auto r = build_dataset(o);
    ASSERT_EQ(r.manifest.entries.size(), 10u);
    int separated = 0;
    for (const auto& e : r.manifest.entries) separated += e.stats.masked_change > e.stats.unmasked_change;
    EXPECT_GE(separated, 9);
    EXPECT_TRUE(validate_manifest(tmp / "out/manifest.jsonl").ok());
}

TEST_F(BuildTest, FailuresAreRecordedAndCounted) {
    auto o = options(standard_fixtures(3, 16));
    write_file_bytes(tmp / "src/images/broken.png", std::vector<std::uint8_t>{'n', 'o', 'p', 'e'});
    auto lonely = standard_fixtures(1, 16)[0];
    write_png(tmp / "src/images/nomask.png", grid_to_image(lonely.image));
    o.inputs = list_png_inputs(tmp / "src/images");
    auto r = build_dataset(o);
    EXPECT_EQ(r.inputs(), 5u);
    EXPECT_EQ(r.manifest.entries.size(), 3u);
    ASSERT_EQ(r.failures.size(), 2u);
    EXPECT_EQ(r.failures[0].source, "broken.png");
    EXPECT_EQ(r.failures[0].kind, "format");
    EXPECT_EQ(r.failures[0].exit_code, kExitIo);
    EXPECT_EQ(r.failures[1].source, "nomask.png");
    auto lines = slurp(tmp / "out/failures.jsonl");
    EXPECT_NE(lines.find("broken.png"), std::string::npos);
    EXPECT_EQ(read_manifest(tmp / "out/manifest.jsonl").header["inputs"], 5);
}

TEST_F(BuildTest, MaskDimensionMismatchIsFailure) {
    auto o = options(standard_fixtures(1, 16));
    write_mask_png(tmp / "src/masks/fixture_00.png", BinaryMask(8, 8, true));
    auto r = build_dataset(o);
    ASSERT_EQ(r.failures.size(), 1u);
    EXPECT_EQ(r.failures[0].kind, "shape");
}

TEST_F(BuildTest, RerunsAreByteIdenticalAcrossWorkerCounts) {
    auto o = options(standard_fixtures(6, 24), "a");
    o.denoiser = analytic();
    o.jobs = 1;
    build_dataset(o);
    o.out_dir = tmp / "b";
    o.jobs = 3;
    build_dataset(o);
    EXPECT_EQ(snapshot(tmp / "a"), snapshot(tmp / "b"));
    o.out_dir = tmp / "c";
    o.spec.seed = 99;
    build_dataset(o);
    EXPECT_NE(slurp(tmp / "a/manifest.jsonl"), slurp(tmp / "c/manifest.jsonl"));
}

TEST_F(BuildTest, PerImageSeedsComeFromId) {
    auto o = options(standard_fixtures(2, 16));
    auto r = build_dataset(o);
    for (const auto& e : r.manifest.entries) EXPECT_EQ(e.record.seed, derive_seed(1234, e.id));
    EXPECT_NE(r.manifest.entries[0].record.seed, r.manifest.entries[1].record.seed);
}

TEST_F(BuildTest, ManifestRoundTrips) {
    auto o = options(standard_fixtures(2, 16));
    o.test_percent = 50;
    auto r = build_dataset(o);
    const auto text = slurp(tmp / "out/manifest.jsonl");
    EXPECT_EQ(render_manifest(parse_manifest(text)), text);
    for (const auto& e : r.manifest.entries) EXPECT_TRUE(e.split == "train" || e.split == "test");
}

TEST_F(BuildTest, BridgeCodecAndRemoteScorer) {
    MockBackend backend;
    backend.prior = {{0.0}, 0.5};
    backend.vae_factor = 2;
    MockServer server(backend);
    auto o = options(standard_fixtures(2, 32));
    o.denoiser.kind = DenoiserKind::Remote;
    o.denoiser.endpoint = server.endpoint();
    o.codec = CodecKind::Bridge;
    o.masks = {MaskSourceKind::RemoteScorer, {}, 0.6, {}};
    o.jobs = 2;
    auto r = build_dataset(o);
    ASSERT_EQ(r.failures.size(), 0u) << r.failures[0].message;
    ASSERT_EQ(r.manifest.entries.size(), 2u);
    for (const auto& e : r.manifest.entries) {
        auto mask = read_mask_png(tmp / "out" / e.mask);
        auto img = image_to_grid(read_png(tmp / "src/images" / (e.id + ".png")));
        const auto scores = backend.score(img);
        auto expected = threshold_scores(ScoreMap(32, 32, {scores.data().begin(), scores.data().end()}), 0.6);
        EXPECT_EQ(mask, expected);
    }
    EXPECT_TRUE(validate_manifest(tmp / "out/manifest.jsonl").ok());
}

TEST_F(BuildTest, UnreachableDenoiserRecordsConnectivityFailures) {
    std::string endpoint;
    {
        MockServer gone(MockBackend{});
        endpoint = gone.endpoint();
    }
    auto o = options(standard_fixtures(2, 16));
    o.denoiser.kind = DenoiserKind::Remote;
    o.denoiser.endpoint = endpoint;
    o.denoiser.retries = 0;
    auto r = build_dataset(o);
    ASSERT_EQ(r.failures.size(), 2u);
    EXPECT_EQ(r.failures[0].kind, "connectivity");
    EXPECT_EQ(r.failures[0].exit_code, kExitRemote);
}

TEST_F(BuildTest, RejectsContradictoryOptions) {
    auto o = options(standard_fixtures(1, 16));
    o.spec.resample_steps = 20;  // proposed at corrupt_step 40 means depth 10
    EXPECT_THROW(build_dataset(o), ParameterError);
    o.spec.resample_steps.reset();
    o.codec = CodecKind::Bridge;
    EXPECT_THROW(build_dataset(o), ParameterError);
}

class ValidateTest : public BuildTest {
protected:
    void SetUp() override {
        auto o = options(standard_fixtures(3, 16));
        build_dataset(o);
        manifest = tmp / "out/manifest.jsonl";
    }
    fs::path manifest;
};

TEST_F(ValidateTest, FreshManifestIsClean) {
    auto r = validate_manifest(manifest);
    EXPECT_EQ(r.entries, 3u);
    EXPECT_TRUE(r.ok());
}

TEST_F(ValidateTest, DeletedMaskIsOneMissingPath) {
    fs::remove(tmp / "out/masks/fixture_01.png");
    auto r = validate_manifest(manifest);
    ASSERT_EQ(r.violations.size(), 1u);
    EXPECT_EQ(r.violations[0].kind, "missing-path");
    EXPECT_EQ(r.violations[0].id, "fixture_01");
}

TEST_F(ValidateTest, DuplicatedIdIsOneUniquenessViolation) {
    auto text = slurp(manifest);
    const auto last = text.rfind('\n', text.size() - 2);
    write_text_file(manifest, text + text.substr(last + 1));
    auto r = validate_manifest(manifest);
    ASSERT_EQ(r.violations.size(), 1u);
    EXPECT_EQ(r.violations[0].kind, "duplicate-id");
}

TEST_F(ValidateTest, DimensionMismatch) {
    write_mask_png(tmp / "out/masks/fixture_02.png", BinaryMask(4, 4));
    auto r = validate_manifest(manifest);
    ASSERT_EQ(r.violations.size(), 1u);
    EXPECT_EQ(r.violations[0].kind, "dimension-mismatch");
}

TEST_F(ValidateTest, UnreadableManifestIsFormatError) {
    write_text_file(manifest, "{not json\n");
    EXPECT_THROW(validate_manifest(manifest), FormatError);
    write_text_file(manifest, "{\"id\":\"x\",\"image\":\"a\",\"mask\":\"b\"}\n");
    EXPECT_THROW(validate_manifest(manifest), FormatError);
    EXPECT_THROW(validate_manifest(tmp / "nowhere.jsonl"), FormatError);
}

}  // namespace
}  // namespace latcorr
