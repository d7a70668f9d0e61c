// Copyright (C) 2026 The latcorr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <json.hpp>

#include "latcorr/corruption.hpp"
#include "latcorr/denoiser.hpp"
#include "latcorr/error.hpp"
#include "latcorr/grid.hpp"
#include "latcorr/io.hpp"
#include "latcorr/pipeline.hpp"
#include "latcorr/rng.hpp"
#include "latcorr/schedule.hpp"

namespace latcorr {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

// --- label binarization -------------------------------------------------------

inline constexpr std::size_t kMinAnnotators = 3;
inline constexpr std::size_t kMinVotes = 2;

struct AnnotatorStack {
    std::vector<BinaryMask> maps;

    std::size_t annotator_count() const noexcept { return maps.size(); }
};

// nullopt means the image is excluded for having too few annotators.
inline std::optional<BinaryMask> binarize_labels(const AnnotatorStack& stack) {
    for (const auto& m : stack.maps)
        if (m.spatial() != stack.maps.front().spatial())
            throw ShapeError("annotator maps disagree: " + to_string(m.spatial()) + " vs " +
                             to_string(stack.maps.front().spatial()));
    if (stack.annotator_count() < kMinAnnotators) return std::nullopt;
    const auto shape = stack.maps.front().spatial();
    std::vector<std::uint8_t> bits(shape.cells());
    for (std::size_t i = 0; i < bits.size(); ++i) {
        std::size_t votes = 0;
        for (const auto& m : stack.maps) votes += m.bits()[i];
        bits[i] = votes >= kMinVotes ? 1 : 0;
    }
    return BinaryMask(shape.height, shape.width, std::move(bits));
}

// --- build options --------------------------------------------------------------

enum class MaskSourceKind { FileDir, RemoteScorer };

struct MaskSource {
    MaskSourceKind kind = MaskSourceKind::FileDir;
    fs::path dir;          // FileDir: <dir>/<id>.png
    double tau = 0.5;      // RemoteScorer threshold
    std::string endpoint;  // RemoteScorer; empty -> denoiser endpoint
};

enum class CodecKind { Toy, Bridge };

inline std::string to_string(CodecKind k) { return k == CodecKind::Toy ? "toy" : "bridge"; }

inline CodecKind parse_codec_kind(const std::string& s) {
    if (s == "toy") return CodecKind::Toy;
    if (s == "bridge") return CodecKind::Bridge;
    throw ParameterError("unknown codec '" + s + "' (expected toy|bridge)");
}

struct BuildOptions {
    std::vector<fs::path> inputs;
    MaskSource masks;
    CorruptionSpec spec;  // spec.seed is the run seed
    ScheduleParams schedule;
    RenoiseSettings renoise;
    BlurParams blur;
    DenoiserConfig denoiser;
    CodecKind codec = CodecKind::Toy;
    fs::path out_dir;
    std::size_t jobs = 1;
    unsigned test_percent = 0;  // share of ids assigned to the test split
};

// Regular *.png files directly inside `dir`, sorted by name.
inline std::vector<fs::path> list_png_inputs(const fs::path& dir) {
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) throw IoError(dir.string() + ": not a directory");
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".png") out.push_back(e.path());
    std::sort(out.begin(), out.end());
    return out;
}

// --- manifest -------------------------------------------------------------------

inline constexpr int kManifestVersion = 1;
inline constexpr const char* kManifestFile = "manifest.jsonl";
inline constexpr const char* kFailureFile = "failures.jsonl";

struct EntryStats {
    double masked_change = 0.0;
    double unmasked_change = 0.0;
    std::size_t masked_cells = 0;
    std::size_t unmasked_cells = 0;
};

struct ManifestEntry {
    std::string id;
    std::string image;  // relative to the manifest directory
    std::string mask;
    std::string source;
    std::string split = "train";
    CorruptionRecord record;
    EntryStats stats;
};

struct FailureRecord {
    std::string id;
    std::string source;
    std::string kind;
    std::string message;
    int exit_code = kExitIo;
};

struct DatasetManifest {
    ojson header;
    std::vector<ManifestEntry> entries;
};

inline ojson to_json(const CorruptionRecord& r) {
    return {{"input_id", r.input_id}, {"mask_id", r.mask_id},   {"method", to_string(r.method)},
            {"corrupt_step", r.corrupt_step}, {"depth", r.depth}, {"seed", r.seed},
            {"output_id", r.output_id}};
}

inline ojson to_json(const ManifestEntry& e) {
    return {{"id", e.id},
            {"image", e.image},
            {"mask", e.mask},
            {"source", e.source},
            {"split", e.split},
            {"record", to_json(e.record)},
            {"stats",
             {{"masked_change", e.stats.masked_change},
              {"unmasked_change", e.stats.unmasked_change},
              {"masked_cells", e.stats.masked_cells},
              {"unmasked_cells", e.stats.unmasked_cells}}}};
}

inline ojson to_json(const FailureRecord& f) {
    return {{"id", f.id}, {"source", f.source}, {"kind", f.kind}, {"message", f.message}};
}

inline ManifestEntry entry_from_json(const ojson& j) {
    try {
        ManifestEntry e;
        e.id = j.at("id").get<std::string>();
        e.image = j.at("image").get<std::string>();
        e.mask = j.at("mask").get<std::string>();
        e.source = j.value("source", "");
        e.split = j.value("split", "train");
        if (j.contains("record")) {
            const auto& r = j.at("record");
            e.record.input_id = r.value("input_id", "");
            e.record.mask_id = r.value("mask_id", "");
            e.record.method = parse_method(r.value("method", "proposed"));
            e.record.corrupt_step = r.value("corrupt_step", std::size_t{0});
            e.record.depth = r.value("depth", std::size_t{0});
            e.record.seed = r.value("seed", std::uint64_t{0});
            e.record.output_id = r.value("output_id", "");
        }
        if (j.contains("stats")) {
            const auto& s = j.at("stats");
            e.stats.masked_change = s.value("masked_change", 0.0);
            e.stats.unmasked_change = s.value("unmasked_change", 0.0);
            e.stats.masked_cells = s.value("masked_cells", std::size_t{0});
            e.stats.unmasked_cells = s.value("unmasked_cells", std::size_t{0});
        }
        return e;
    } catch (const nlohmann::json::exception& ex) {
        throw FormatError(std::string("manifest entry: ") + ex.what());
    } catch (const ParameterError& ex) {
        throw FormatError(std::string("manifest entry: ") + ex.what());
    }
}

inline std::string render_manifest(const DatasetManifest& m) {
    std::string out = m.header.dump() + "\n";
    for (const auto& e : m.entries) out += to_json(e).dump() + "\n";
    return out;
}

inline DatasetManifest parse_manifest(const std::string& text, const std::string& origin = "manifest") {
    DatasetManifest m;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        ojson j;
        try {
            j = ojson::parse(line);
        } catch (const nlohmann::json::exception& ex) {
            throw FormatError(origin + ":" + std::to_string(lineno) + ": " + ex.what());
        }
        if (!j.is_object()) throw FormatError(origin + ":" + std::to_string(lineno) + ": not an object");
        if (!have_header) {
            if (j.value("kind", "") != "header")
                throw FormatError(origin + ": first line must be the run header");
            m.header = std::move(j);
            have_header = true;
            continue;
        }
        m.entries.push_back(entry_from_json(j));
    }
    if (!have_header) throw FormatError(origin + ": missing run header");
    return m;
}

inline DatasetManifest read_manifest(const fs::path& path) {
    std::error_code ec;
    if (!fs::is_regular_file(path, ec)) throw FormatError(path.string() + ": manifest not readable");
    auto bytes = read_file_bytes(path);
    return parse_manifest(std::string(bytes.begin(), bytes.end()), path.string());
}

inline ojson schedule_json(const ScheduleParams& s) {
    return {{"train_steps", s.train_steps}, {"beta_start", s.beta_start}, {"beta_end", s.beta_end},
            {"sample_steps", s.sample_steps}, {"eta", s.eta}};
}

inline ojson denoiser_json(const DenoiserConfig& d) {
    ojson j{{"kind", to_string(d.kind)}};
    if (d.kind == DenoiserKind::AnalyticGaussian) {
        j["mean"] = d.prior.mean;
        j["scale"] = d.prior.scale;
    }
    if (d.kind == DenoiserKind::Remote) {
        j["endpoint"] = d.endpoint;
        j["conditioning"] = d.conditioning;
    }
    return j;
}

inline ojson run_header(const BuildOptions& o, std::size_t depth) {
    ojson spec{{"method", to_string(o.spec.method)}, {"corrupt_step", o.spec.corrupt_step}, {"depth", depth}};
    ojson masks{{"source", o.masks.kind == MaskSourceKind::FileDir ? "file_dir" : "remote_scorer"}};
    if (o.masks.kind == MaskSourceKind::RemoteScorer) masks["tau"] = o.masks.tau;
    return {{"kind", "header"},
            {"version", kManifestVersion},
            {"seed", o.spec.seed},
            {"schedule", schedule_json(o.schedule)},
            {"spec", spec},
            {"renoise", {{"iters", o.renoise.iters}, {"tol", o.renoise.tol}}},
            {"blur", {{"radius", o.blur.radius}, {"sigma", o.blur.sigma}}},
            {"denoiser", denoiser_json(o.denoiser)},
            {"masks", masks},
            {"codec", to_string(o.codec)},
            {"inputs", o.inputs.size()}};
}

// --- build ----------------------------------------------------------------------

struct BuildResult {
    DatasetManifest manifest;
    std::vector<FailureRecord> failures;

    std::size_t inputs() const noexcept { return manifest.entries.size() + failures.size(); }
};

namespace detail {

// Per-worker resources: one denoiser connection, plus a bridge connection for
// VAE/scorer calls when the denoiser itself is local.
struct WorkerContext {
    DenoiserHandle denoiser;
    std::unique_ptr<BridgeClient> aux;

    BridgeClient& bridge(const std::string& endpoint) {
        if (auto* b = denoiser.bridge(); b && (endpoint.empty() || endpoint == denoiser.config().endpoint)) return *b;
        if (!aux) {
            const auto& cfg = denoiser.config();
            aux = std::make_unique<BridgeClient>(endpoint.empty() ? cfg.endpoint : endpoint, cfg.deadline,
                                                 cfg.retries);
        }
        return *aux;
    }
};

inline ManifestEntry build_one(const fs::path& input, WorkerContext& ctx, const BuildOptions& o,
                               const NoiseSchedule& sched) {
    const std::string id = input.stem().string();
    const Image8 img = read_png(input);
    const LatentGrid pixels = image_to_grid(img);

    BinaryMask mask(img.height, img.width);
    if (o.masks.kind == MaskSourceKind::FileDir) {
        mask = read_mask_png(o.masks.dir / (id + ".png"));
        if (mask.spatial() != pixels.spatial())
            throw ShapeError(id + ": mask " + to_string(mask.spatial()) + " vs image " + to_string(pixels.spatial()));
    } else {
        mask = threshold_scores(ctx.bridge(o.masks.endpoint).score_regions(pixels), o.masks.tau);
    }

    IdentityCodec toy;
    std::unique_ptr<BridgeCodec> remote;
    Codec* codec = &toy;
    if (o.codec == CodecKind::Bridge) {
        remote = std::make_unique<BridgeCodec>(ctx.bridge(""));
        codec = remote.get();
    }

    const LatentGrid z0 = codec->encode(pixels);
    const BinaryMask latent_mask =
        z0.spatial() == mask.spatial() ? mask : downsample_mask(mask, z0.height(), z0.width());

    CorruptionSpec spec = o.spec;
    spec.seed = derive_seed(o.spec.seed, id);
    auto outcome = corrupt_latent(z0, latent_mask, spec, ctx.denoiser, sched, o.renoise, o.blur);
    const LatentGrid decoded = codec->decode(outcome.output);
    if (decoded.channels() != img.channels || decoded.spatial() != pixels.spatial())
        throw ShapeError(id + ": decoded shape " + decoded.shape_string() + " does not match input " +
                         pixels.shape_string());
    const Image8 out = grid_to_image(decoded);

    ManifestEntry e;
    e.id = id;
    e.image = "images/" + id + ".png";
    e.mask = "masks/" + id + ".png";
    e.source = input.filename().string();
    e.split = (stable_hash(id) % 100) < o.test_percent ? "test" : "train";
    e.record = {id, id, spec.method, spec.corrupt_step, outcome.depth, spec.seed, id};
    const auto rc = region_change(pixels, image_to_grid(out), mask);
    e.stats = {rc.masked, rc.unmasked, rc.masked_cells, rc.unmasked_cells};

    write_png(o.out_dir / e.image, out);
    write_mask_png(o.out_dir / e.mask, mask);
    return e;
}

}  // namespace detail

inline void write_build_outputs(const BuildResult& r, const fs::path& out_dir) {
    write_text_file(out_dir / kManifestFile, render_manifest(r.manifest));
    std::string failures;
    for (const auto& f : r.failures) failures += to_json(f).dump() + "\n";
    write_text_file(out_dir / kFailureFile, failures);
}

// Corrupts every input independently on a worker pool; per-image failures are
// recorded, not raised. Entries keep input order regardless of scheduling.
inline BuildResult build_dataset(const BuildOptions& o) {
    const NoiseSchedule sched = o.schedule.build();
    const std::size_t depth = o.spec.depth(sched.num_sample_steps());
    o.denoiser.validate();
    if (o.codec == CodecKind::Bridge && o.denoiser.endpoint.empty())
        throw ParameterError("bridge codec requires an endpoint");
    if (o.masks.kind == MaskSourceKind::RemoteScorer) {
        if (!(o.masks.tau >= 0.0 && o.masks.tau <= 1.0)) throw ParameterError("mask threshold tau must lie in [0,1]");
        if (o.masks.endpoint.empty() && o.denoiser.endpoint.empty())
            throw ParameterError("remote mask scorer requires an endpoint");
    }
    if (o.test_percent > 100) throw ParameterError("test_percent must be <= 100");

    std::set<std::string> ids;
    for (const auto& p : o.inputs)
        if (!ids.insert(p.stem().string()).second) throw ParameterError("duplicate input id '" + p.stem().string() + "'");

    std::error_code ec;
    fs::create_directories(o.out_dir / "images", ec);
    if (!ec) fs::create_directories(o.out_dir / "masks", ec);
    if (ec) throw IoError(o.out_dir.string() + ": " + ec.message());

    using Slot = std::variant<std::monostate, ManifestEntry, FailureRecord>;
    std::vector<Slot> slots(o.inputs.size());
    std::atomic<std::size_t> next{0};

    auto work = [&] {
        detail::WorkerContext ctx{DenoiserHandle(o.denoiser), nullptr};
        for (std::size_t i; (i = next.fetch_add(1)) < o.inputs.size();) {
            const auto& input = o.inputs[i];
            try {
                slots[i] = detail::build_one(input, ctx, o, sched);
            } catch (const std::exception& e) {
                slots[i] = FailureRecord{input.stem().string(), input.filename().string(), error_kind(e), e.what(),
                                         exit_code_for(e)};
            }
        }
    };

    const std::size_t jobs = std::clamp<std::size_t>(o.jobs, 1, std::max<std::size_t>(1, o.inputs.size()));
    if (jobs == 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < jobs; ++w) pool.emplace_back(work);
    }

    BuildResult r;
    r.manifest.header = run_header(o, depth);
    for (auto& s : slots) {
        if (auto* e = std::get_if<ManifestEntry>(&s)) r.manifest.entries.push_back(std::move(*e));
        if (auto* f = std::get_if<FailureRecord>(&s)) r.failures.push_back(std::move(*f));
    }
    write_build_outputs(r, o.out_dir);
    return r;
}

// --- validation -----------------------------------------------------------------

struct Violation {
    std::string kind;  // missing-path | dimension-mismatch | duplicate-id
    std::string id;
    std::string detail;
};

struct ValidationReport {
    std::size_t entries = 0;
    std::vector<Violation> violations;

    bool ok() const noexcept { return violations.empty(); }
};

inline std::optional<SpatialShape> png_shape(const fs::path& p) {
    try {
        auto im = read_png(p);
        return SpatialShape{im.height, im.width};
    } catch (const Error&) {
        return std::nullopt;
    }
}

inline ValidationReport validate_manifest(const DatasetManifest& m, const fs::path& root) {
    ValidationReport r;
    r.entries = m.entries.size();
    std::set<std::string> seen;
    for (const auto& e : m.entries) {
        if (!seen.insert(e.id).second) r.violations.push_back({"duplicate-id", e.id, "id appears more than once"});
        bool present = true;
        for (const auto* rel : {&e.image, &e.mask}) {
            std::error_code ec;
            if (!fs::is_regular_file(root / *rel, ec)) {
                r.violations.push_back({"missing-path", e.id, *rel});
                present = false;
            }
        }
        if (!present) continue;
        auto is = png_shape(root / e.image), ms = png_shape(root / e.mask);
        if (!is || !ms) {
            r.violations.push_back({"unreadable", e.id, !is ? e.image : e.mask});
        } else if (*is != *ms) {
            r.violations.push_back({"dimension-mismatch", e.id, "image " + to_string(*is) + " vs mask " + to_string(*ms)});
        }
    }
    return r;
}

inline ValidationReport validate_manifest(const fs::path& manifest_path) {
    return validate_manifest(read_manifest(manifest_path), manifest_path.parent_path());
}

}  // namespace latcorr
