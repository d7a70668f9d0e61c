// Copyright (C) 2026 The latcorr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "latcorr/corruption.hpp"
#include "latcorr/dataset.hpp"
#include "latcorr/denoiser.hpp"
#include "latcorr/io.hpp"
#include "latcorr/metrics.hpp"
#include "latcorr/pipeline.hpp"
#include "latcorr/rng.hpp"
#include "latcorr/schedule.hpp"

namespace latcorr {

struct Fixture {
    std::string id;
    LatentGrid image;  // toy latent, values in [-1, 1]
    BinaryMask mask;
};

// Synthetic images: a few low-frequency sinusoids per channel plus mild
// texture, squashed into [-1, 1]. Masks alternate ellipses and rectangles of
// 8 to 16 cells radius so every fixture has a nonempty masked region.
inline std::vector<Fixture> standard_fixtures(std::size_t count = 10, std::size_t size = 64, std::uint64_t seed = 7,
                                              std::size_t channels = 3) {
    std::vector<Fixture> out;
    for (std::size_t n = 0; n < count; ++n) {
        NormalSource src(derive_seed(seed, n));
        LatentGrid img(channels, size, size);
        const double inv = 1.0 / static_cast<double>(size);
        for (std::size_t c = 0; c < channels; ++c) {
            struct Wave {
                double fy, fx, phase, amp;
            };
            std::vector<Wave> waves;
            for (int k = 0; k < 3; ++k)
                waves.push_back({1.0 + 3.0 * src.uniform(), 1.0 + 3.0 * src.uniform(),
                                 2.0 * std::numbers::pi * src.uniform(), 0.3 + 0.4 * src.uniform()});
            const double offset = 0.4 * (src.uniform() - 0.5);
            for (std::size_t y = 0; y < size; ++y)
                for (std::size_t x = 0; x < size; ++x) {
                    double v = offset;
                    for (const auto& w : waves)
                        v += w.amp * std::sin(2.0 * std::numbers::pi * (w.fy * y + w.fx * x) * inv + w.phase);
                    v += 0.05 * src.next();
                    img.at(c, y, x) = std::tanh(v);
                }
        }
        BinaryMask mask(size, size);
        const double cy = size * (0.3 + 0.4 * src.uniform()), cx = size * (0.3 + 0.4 * src.uniform());
        const double ry = 8.0 + 8.0 * src.uniform(), rx = 8.0 + 8.0 * src.uniform();
        for (std::size_t y = 0; y < size; ++y)
            for (std::size_t x = 0; x < size; ++x) {
                const double dy = (y + 0.5 - cy) / ry, dx = (x + 0.5 - cx) / rx;
                const bool in = n % 2 == 0 ? dy * dy + dx * dx <= 1.0 : std::abs(dy) <= 1.0 && std::abs(dx) <= 1.0;
                if (in) mask.set(y, x, true);
            }
        std::ostringstream id;
        id << "fixture_" << std::setw(2) << std::setfill('0') << n;
        out.push_back({id.str(), std::move(img), std::move(mask)});
    }
    return out;
}

// Fixtures from <images>/<id>.png and <masks>/<id>.png (toy codec).
inline std::vector<Fixture> load_fixtures(const fs::path& images, const fs::path& masks) {
    std::vector<Fixture> out;
    for (const auto& p : list_png_inputs(images)) {
        const std::string id = p.stem().string();
        auto img = image_to_grid(read_png(p));
        auto mask = read_mask_png(masks / (id + ".png"));
        if (mask.spatial() != img.spatial()) throw ShapeError(id + ": mask and image dimensions differ");
        out.push_back({id, std::move(img), std::move(mask)});
    }
    return out;
}

struct CompareOptions {
    ScheduleParams schedule;
    DenoiserConfig denoiser;
    RenoiseSettings renoise;
    BlurParams blur;
    std::uint64_t seed = 0;
    std::size_t corrupt_step = 40;
    std::optional<std::size_t> baseline_depth;  // unset: 20
    std::vector<std::size_t> sweep{45, 40, 35, 30};
    std::optional<fs::path> pred_root;  // <pred_root>/<row key>/<id>.png
    std::optional<fs::path> gt_dir;
    MiouMode miou_mode = MiouMode::TwoClassMean;
};

struct CompareRow {
    std::string table;  // "methods" | "sweep" | "latent"
    std::string key;    // stable identifier, also the prediction subdirectory
    std::string label;
    CorruptionMethod method = CorruptionMethod::Proposed;
    std::size_t corrupt_step = 0;
    std::size_t depth = 0;
    double masked_change = 0.0;
    double unmasked_change = 0.0;
    double latent_unmasked_change = 0.0;  // before resampling, toy latent units
    std::string output_hash;
    std::optional<double> miou;
};

struct CompareReport {
    std::size_t fixtures = 0;
    std::vector<CompareRow> rows;

    const CompareRow* find(const std::string& key) const {
        for (const auto& r : rows)
            if (r.key == key) return &r;
        return nullptr;
    }
};

inline std::string hex64(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

namespace detail {

struct RowAccumulator {
    double masked_sum = 0.0, unmasked_sum = 0.0, latent_unmasked_sum = 0.0;
    std::size_t masked_cells = 0, unmasked_cells = 0;
    std::uint64_t hash = 0xcbf29ce484222325ULL;

    void add(const Fixture& f, const LatentGrid& corrupted_before, const LatentGrid& inverted, const LatentGrid& out) {
        const auto rc = region_change(f.image, out, f.mask);
        masked_sum += rc.masked_sum;
        unmasked_sum += rc.unmasked_sum;
        masked_cells += rc.masked_cells;
        unmasked_cells += rc.unmasked_cells;
        latent_unmasked_sum += region_change(inverted, corrupted_before, f.mask).unmasked_sum;
        for (auto b : encode_lat(out)) hash = (hash ^ b) * 0x100000001b3ULL;
    }

    void finish(CompareRow& r) const {
        r.masked_change = masked_cells ? masked_sum / static_cast<double>(masked_cells) : 0.0;
        r.unmasked_change = unmasked_cells ? unmasked_sum / static_cast<double>(unmasked_cells) : 0.0;
        r.latent_unmasked_change = latent_unmasked_sum;
        r.output_hash = hex64(hash);
    }
};

inline std::optional<double> row_miou(const CompareOptions& o, const std::string& key) {
    if (!o.pred_root || !o.gt_dir) return std::nullopt;
    const fs::path dir = *o.pred_root / key;
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) return std::nullopt;
    MaskSet preds, gts;
    for (const auto& p : list_png_inputs(dir)) preds.emplace(p.stem().string(), read_mask_png(p));
    for (const auto& p : list_png_inputs(*o.gt_dir)) gts.emplace(p.stem().string(), read_mask_png(p));
    return evaluate(preds, gts, o.miou_mode).miou;
}

}  // namespace detail

// Runs every corruption method, a corrupt-step sweep of the proposed method,
// and a direct image-latent corruption over the fixtures with one seed.
inline CompareReport compare_corruptions(const std::vector<Fixture>& fixtures, const CompareOptions& o) {
    const NoiseSchedule sched = o.schedule.build();
    DenoiserHandle d(o.denoiser);
    CompareReport report;
    report.fixtures = fixtures.size();

    auto run = [&](CompareRow row, const CorruptionSpec& spec) {
        detail::RowAccumulator acc;
        for (const auto& f : fixtures) {
            CorruptionSpec s = spec;
            s.seed = derive_seed(o.seed, f.id);
            auto out = corrupt_latent(f.image, f.mask, s, d, sched, o.renoise, o.blur);
            acc.add(f, out.corrupted, out.trajectory.last(), out.output);
            row.depth = out.depth;
        }
        acc.finish(row);
        row.miou = detail::row_miou(o, row.key);
        report.rows.push_back(std::move(row));
    };

    struct MethodRow {
        CorruptionMethod method;
        const char* key;
        const char* label;
    };
    const MethodRow methods[] = {
        {CorruptionMethod::Rotate90, "rotate90", "Rotation"},
        {CorruptionMethod::Blur, "blur", "Blur"},
        {CorruptionMethod::Downscale8x, "downscale8x", "Downscale 8x"},
        {CorruptionMethod::GaussianReplace, "gaussian_replace", "Gaussian"},
        {CorruptionMethod::Proposed, "proposed", "Proposed"},
    };
    for (const auto& m : methods) {
        CorruptionSpec spec{m.method, o.corrupt_step, std::nullopt, 0};
        if (m.method != CorruptionMethod::Proposed) spec.resample_steps = o.baseline_depth;
        CompareRow row;
        row.table = "methods";
        row.key = m.key;
        row.label = m.label;
        row.method = m.method;
        row.corrupt_step = o.corrupt_step;
        run(std::move(row), spec);
    }

    for (std::size_t step : o.sweep) {
        CompareRow row;
        row.table = "sweep";
        row.key = "corr" + std::to_string(step);
        row.label = "Corr. (" + std::to_string(step) + ")";
        row.corrupt_step = step;
        run(std::move(row), CorruptionSpec{CorruptionMethod::Proposed, step, std::nullopt, 0});
    }

    // Image latent: noise is blended into the clean latent with no inversion
    // or resampling, against the intermediate-latent proposed method.
    {
        CompareRow row;
        row.table = "latent";
        row.key = "image_latent";
        row.label = "Image latent";
        row.corrupt_step = sched.num_sample_steps();
        detail::RowAccumulator acc;
        for (const auto& f : fixtures) {
            auto out = f.mask.empty() ? f.image : corrupt_image_latent_direct(f.image, f.mask, derive_seed(o.seed, f.id));
            acc.add(f, out, f.image, out);
        }
        acc.finish(row);
        row.miou = detail::row_miou(o, row.key);
        report.rows.push_back(std::move(row));
        CompareRow inter = *report.find("proposed");
        inter.table = "latent";
        inter.key = "intermediate_latent";
        inter.label = "Intermediate latent";
        inter.miou = detail::row_miou(o, inter.key);
        report.rows.push_back(std::move(inter));
    }
    return report;
}

inline nlohmann::ordered_json to_json(const CompareReport& r) {
    nlohmann::ordered_json j{{"fixtures", r.fixtures}, {"rows", nlohmann::ordered_json::array()}};
    for (const auto& row : r.rows) {
        nlohmann::ordered_json x{{"table", row.table},
                                 {"key", row.key},
                                 {"label", row.label},
                                 {"method", to_string(row.method)},
                                 {"corrupt_step", row.corrupt_step},
                                 {"depth", row.depth},
                                 {"masked_change", row.masked_change},
                                 {"unmasked_change", row.unmasked_change},
                                 {"latent_unmasked_change", row.latent_unmasked_change},
                                 {"output_hash", row.output_hash}};
        x["miou"] = row.miou ? nlohmann::ordered_json(*row.miou) : nlohmann::ordered_json(nullptr);
        j["rows"].push_back(std::move(x));
    }
    return j;
}

inline std::string to_text(const CompareReport& r) {
    auto fmt = [](double v) {
        std::ostringstream os;
        os << std::fixed << std::setprecision(4) << v;
        return os.str();
    };
    std::ostringstream os;
    auto section = [&](const std::string& table, const std::string& title, const std::string& corner) {
        MiouTable t;
        t.columns = {"depth", "masked change", "unmasked change", "mIoU (%)", "output hash"};
        for (const auto& row : r.rows)
            if (row.table == table)
                t.rows.push_back({row.label,
                                  {std::to_string(row.depth), fmt(row.masked_change), fmt(row.unmasked_change),
                                   row.miou ? percent(*row.miou) : "-", row.output_hash}});
        os << title << "\n" << t.render(corner) << "\n";
    };
    os << "fixtures: " << r.fixtures << "\n\n";
    section("methods", "Corruption methods", "Method");
    section("sweep", "Corruption step sweep (proposed)", "Config.");
    section("latent", "Corrupted latent", "Latent");
    return os.str();
}

}  // namespace latcorr
