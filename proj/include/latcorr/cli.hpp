// Copyright (C) 2026 The latcorr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "latcorr/compare.hpp"
#include "latcorr/config.hpp"
#include "latcorr/dataset.hpp"
#include "latcorr/diffusion.hpp"
#include "latcorr/error.hpp"
#include "latcorr/io.hpp"
#include "latcorr/metrics.hpp"
#include "latcorr/pipeline.hpp"

namespace latcorr::cli {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

// Flags shared by every command. Unset values leave the config file (or the
// built-in default) in place.
struct GlobalFlags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> jobs;
    bool strict = false;
    std::optional<std::string> denoiser;
    std::optional<std::string> endpoint;
    std::optional<double> eta;
    std::optional<std::size_t> corrupt_step;
    std::optional<std::size_t> invert_steps;
    std::optional<std::string> method;
    std::optional<std::size_t> resample_steps;
    std::optional<std::size_t> renoise_iters;
    std::optional<double> renoise_tol;
    std::optional<std::vector<double>> prior_mean;
    std::optional<double> prior_scale;
    std::optional<std::string> conditioning;
    std::optional<long> deadline_ms;
    std::optional<int> retries;

    void attach(CLI::App& app) {
        app.add_option("--config", config, "Run config file (flat key = value with [sections])");
        app.add_option("--seed", seed, "Run seed");
        app.add_option("--jobs", jobs, "Worker count (default: available cores)");
        app.add_flag("--strict", strict, "Treat any per-image failure as a run failure");
        app.add_option("--denoiser", denoiser, "zero | analytic | remote");
        app.add_option("--endpoint", endpoint, "Bridge endpoint host:port");
        app.add_option("--eta", eta, "Sampler stochasticity");
        app.add_option("--corrupt-step", corrupt_step, "Sampler steps taken before corruption");
        app.add_option("--invert-steps", invert_steps, "Inversion depth");
        app.add_option("--method", method, "proposed | gaussian_replace | blur | rotate90 | downscale8x");
        app.add_option("--resample-steps", resample_steps, "Depth used by baseline methods");
        app.add_option("--renoise-iters", renoise_iters, "Fixed-point iterations per inversion step");
        app.add_option("--renoise-tol", renoise_tol, "Fixed-point relative tolerance");
        app.add_option("--prior-mean", prior_mean, "Analytic denoiser mean (one value or one per channel)")
            ->delimiter(',');
        app.add_option("--prior-scale", prior_scale, "Analytic denoiser standard deviation");
        app.add_option("--conditioning", conditioning, "Conditioning id sent to a remote denoiser");
        app.add_option("--deadline-ms", deadline_ms, "Remote call deadline");
        app.add_option("--retries", retries, "Remote retries on a fresh connection");
    }

    RunConfig resolve() const {
        RunConfig c = config.empty() ? RunConfig{} : load_run_config(config);
        if (seed) c.seed = *seed;
        if (jobs) c.jobs = *jobs;
        if (strict) c.strict = true;
        if (denoiser) c.denoiser = parse_denoiser_kind(*denoiser);
        if (endpoint) c.endpoint = *endpoint;
        if (eta) c.schedule.eta = *eta;
        if (corrupt_step) c.corrupt_step = *corrupt_step;
        if (invert_steps) c.invert_steps = *invert_steps;
        if (method) c.method = parse_method(*method);
        if (resample_steps) c.resample_steps = *resample_steps;
        if (renoise_iters) c.renoise.iters = *renoise_iters;
        if (renoise_tol) c.renoise.tol = *renoise_tol;
        if (prior_mean) c.prior_mean = *prior_mean;
        if (prior_scale) c.prior_scale = *prior_scale;
        if (conditioning) c.conditioning = *conditioning;
        if (deadline_ms) c.deadline_ms = *deadline_ms;
        if (retries) c.retries = *retries;
        c.validate();
        return c;
    }
};

inline std::string lat_path(const std::string& prefix, const std::string& suffix = "") {
    return prefix + suffix + ".lat";
}

inline void ensure_parent(const fs::path& p) {
    if (!p.has_parent_path()) return;
    std::error_code ec;
    fs::create_directories(p.parent_path(), ec);
    if (ec) throw IoError(p.parent_path().string() + ": " + ec.message());
}

inline void write_json(const fs::path& p, const ojson& j) {
    ensure_parent(p);
    write_text_file(p, j.dump(2) + "\n");
}

inline std::string fixed(double v, int digits) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << v;
    return os.str();
}

// --- commands ------------------------------------------------------------------

inline int cmd_invert(const RunConfig& c, const std::string& in, const std::string& prefix, bool dump,
                      std::ostream& out, std::ostream& err) {
    const auto sched = c.build_schedule();
    const std::size_t steps = c.invert_steps.value_or(10);
    const auto z0 = read_lat(in);
    DenoiserHandle d(c.denoiser_config());
    const auto traj = invert(z0, d, sched, {steps, c.renoise.iters, c.renoise.tol, c.seed});
    for (const auto& w : traj.warnings) err << "warning: " << w << "\n";

    ensure_parent(lat_path(prefix));
    write_lat(lat_path(prefix), traj.last());
    ojson res{{"invert_steps", steps},
              {"renoise_iters", c.renoise.iters},
              {"renoise_tol", c.renoise.tol},
              {"residuals", traj.residuals},
              {"warnings", traj.warnings}};
    write_json(prefix + ".residuals.json", res);
    if (dump) {
        ojson index = ojson::array();
        for (const auto& e : traj.entries) {
            const std::string file = lat_path(prefix, ".depth" + std::to_string(e.depth));
            write_lat(file, e.latent);
            index.push_back({{"depth", e.depth},
                             {"timestep", e.depth ? sched.timestep(e.depth - 1) : 0},
                             {"file", fs::path(file).filename().string()}});
        }
        write_json(prefix + ".trajectory.json", index);
    }
    out << "inverted " << z0.shape_string() << " to depth " << steps << " -> " << lat_path(prefix) << "\n";
    return kExitOk;
}

inline int cmd_sample(const RunConfig& c, const std::string& in, const std::string& dest,
                      std::optional<std::size_t> start_depth, std::ostream& out) {
    const auto sched = c.build_schedule();
    const std::size_t depth = start_depth.value_or(c.invert_steps.value_or(10));
    DenoiserHandle d(c.denoiser_config());
    const auto z = resample(read_lat(in), depth, d, sched, c.seed);
    ensure_parent(dest);
    write_lat(dest, z);
    out << "resampled from depth " << depth << " -> " << dest << "\n";
    return kExitOk;
}

inline BinaryMask mask_for_latent(const BinaryMask& m, const LatentGrid& z) {
    return m.spatial() == z.spatial() ? m : downsample_mask(m, z.height(), z.width());
}

inline int cmd_corrupt(const RunConfig& c, const std::string& in, const std::string& mask_path,
                       const std::string& prefix, std::ostream& out) {
    const auto sched = c.build_schedule();
    (void)c.pipeline_depth();
    const auto z0 = read_lat(in);
    const auto mask = mask_for_latent(read_mask_png(mask_path), z0);
    DenoiserHandle d(c.denoiser_config());
    const auto spec = c.corruption_spec();
    const auto r = corrupt_latent(z0, mask, spec, d, sched, c.renoise, c.blur);
    ensure_parent(lat_path(prefix));
    write_lat(lat_path(prefix), r.output);
    write_lat(lat_path(prefix, ".corrupted"), r.corrupted);
    const auto rc = region_change(z0, r.output, mask);
    const std::string id = fs::path(in).stem().string();
    ojson rec = to_json(CorruptionRecord{id, fs::path(mask_path).stem().string(), spec.method, spec.corrupt_step,
                                         r.depth, spec.seed, fs::path(prefix).filename().string()});
    write_json(prefix + ".record.json",
               {{"record", rec},
                {"mask_empty", r.mask_empty},
                {"masked_change", rc.masked},
                {"unmasked_change", rc.unmasked}});
    out << to_string(spec.method) << " at depth " << r.depth << ": masked change " << fixed(rc.masked, 6)
        << ", unmasked change " << fixed(rc.unmasked, 6) << "\n";
    return kExitOk;
}

struct BuildArgs {
    std::string input;
    std::string masks;
    std::string out;
    std::optional<std::string> codec;
    std::optional<std::string> mask_source;
    std::optional<double> tau;
    std::optional<unsigned> test_percent;
};

inline int cmd_build_dataset(RunConfig c, const BuildArgs& a, std::ostream& out, std::ostream& err) {
    if (!a.input.empty()) c.input = a.input;
    if (!a.masks.empty()) c.mask_dir = a.masks;
    if (!a.out.empty()) c.out = a.out;
    if (a.codec) c.codec = parse_codec_kind(*a.codec);
    if (a.mask_source) c.mask_source = RunConfig::parse_mask_source(*a.mask_source);
    if (a.tau) c.tau = *a.tau;
    if (a.test_percent) c.test_percent = *a.test_percent;
    c.validate();
    if (c.input.empty()) throw ParameterError("build-dataset: --input is required");
    if (c.out.empty()) throw ParameterError("build-dataset: --out is required");
    if (c.mask_source == MaskSourceKind::FileDir && c.mask_dir.empty())
        throw ParameterError("build-dataset: --masks is required for file_dir masks");
    (void)c.pipeline_depth();

    BuildOptions o;
    o.inputs = list_png_inputs(c.input);
    o.masks = {c.mask_source, c.mask_dir, c.tau, c.mask_endpoint};
    o.spec = c.corruption_spec();
    o.schedule = c.schedule;
    o.renoise = c.renoise;
    o.blur = c.blur;
    o.denoiser = c.denoiser_config();
    o.codec = c.codec;
    o.out_dir = c.out;
    o.jobs = c.effective_jobs();
    o.test_percent = c.test_percent;

    const auto t0 = std::chrono::steady_clock::now();
    const auto r = build_dataset(o);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    std::size_t separated = 0;
    for (const auto& e : r.manifest.entries) separated += e.stats.masked_change > e.stats.unmasked_change;
    out << "entries: " << r.manifest.entries.size() << "\n";
    out << "failures: " << r.failures.size() << "\n";
    out << "masked change > unmasked change: " << separated << " of " << r.manifest.entries.size() << "\n";
    out << "wall time: " << fixed(wall, 3) << " s\n";
    out << "manifest: " << (fs::path(c.out) / kManifestFile).string() << "\n";
    for (const auto& f : r.failures) err << "failed: " << f.source << " (" << f.kind << "): " << f.message << "\n";
    if (c.strict && !r.failures.empty()) {
        err << "strict mode: " << r.failures.size() << " failure(s), see "
            << (fs::path(c.out) / kFailureFile).string() << "\n";
        return r.failures.front().exit_code;
    }
    return kExitOk;
}

struct CompareArgs {
    std::string input;
    std::string masks;
    std::string out;
    std::string pred_root;
    std::string gt;
    std::size_t fixtures = 10;
    bool artifact_only = false;
};

inline int cmd_compare(const RunConfig& c, const CompareArgs& a, std::ostream& out) {
    std::vector<Fixture> fixtures;
    if (!a.input.empty()) {
        if (a.masks.empty()) throw ParameterError("compare-corruptions: --masks is required with --input");
        fixtures = load_fixtures(a.input, a.masks);
    } else {
        fixtures = standard_fixtures(a.fixtures);
    }
    CompareOptions o;
    o.schedule = c.schedule;
    o.denoiser = c.denoiser_config();
    o.renoise = c.renoise;
    o.blur = c.blur;
    o.seed = c.seed;
    o.corrupt_step = c.corrupt_step;
    o.baseline_depth = c.resample_steps;
    if (!a.pred_root.empty()) {
        if (a.gt.empty()) throw ParameterError("compare-corruptions: --gt is required with --pred-root");
        o.pred_root = a.pred_root;
        o.gt_dir = a.gt;
    }
    o.miou_mode = a.artifact_only ? MiouMode::ArtifactOnly : MiouMode::TwoClassMean;
    const auto report = compare_corruptions(fixtures, o);
    const std::string text = to_text(report);
    if (!a.out.empty()) {
        write_json(fs::path(a.out) / "compare.json", to_json(report));
        write_text_file(fs::path(a.out) / "compare.txt", text);
    }
    out << text;
    return kExitOk;
}

inline MaskSet read_mask_dir(const fs::path& dir) {
    MaskSet set;
    for (const auto& p : list_png_inputs(dir)) set.emplace(p.stem().string(), read_mask_png(p));
    return set;
}

struct EvaluateArgs {
    std::string pred;
    std::string gt;
    std::string out;
    bool artifact_only = false;
    std::string config_label = "Predictions";
    std::string arch_label = "mIoU (%)";
};

inline int cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
    const auto report = evaluate(read_mask_dir(a.pred), read_mask_dir(a.gt),
                                 a.artifact_only ? MiouMode::ArtifactOnly : MiouMode::TwoClassMean);
    const std::string text = to_text(report, a.config_label, a.arch_label);
    if (!a.out.empty()) {
        std::error_code ec;
        fs::create_directories(a.out, ec);
        write_text_file(fs::path(a.out) / "eval.json", to_json(report).dump(2) + "\n");
        write_text_file(fs::path(a.out) / "eval.txt", text);
    }
    out << text;
    return kExitOk;
}

// <stack_dir>/<id>/<annotator>.png -> <out_dir>/<id>.png, plus excluded.json
// listing ids with too few annotators.
inline int cmd_binarize_labels(const std::string& stack_dir, const std::string& out_dir, std::ostream& out) {
    std::error_code ec;
    if (!fs::is_directory(stack_dir, ec)) throw IoError(stack_dir + ": not a directory");
    std::vector<fs::path> stacks;
    for (const auto& e : fs::directory_iterator(stack_dir))
        if (e.is_directory()) stacks.push_back(e.path());
    std::sort(stacks.begin(), stacks.end());
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError(out_dir + ": " + ec.message());

    ojson written = ojson::array(), excluded = ojson::array();
    for (const auto& dir : stacks) {
        AnnotatorStack stack;
        for (const auto& p : list_png_inputs(dir)) stack.maps.push_back(read_mask_png(p));
        const std::string id = dir.filename().string();
        if (auto m = binarize_labels(stack)) {
            write_mask_png(fs::path(out_dir) / (id + ".png"), *m);
            written.push_back(id);
        } else {
            excluded.push_back({{"id", id}, {"annotators", stack.annotator_count()}});
        }
    }
    write_text_file(fs::path(out_dir) / "excluded.json",
                    ojson{{"written", written}, {"excluded", excluded}}.dump(2) + "\n");
    out << "binarized: " << written.size() << "\nexcluded: " << excluded.size() << "\n";
    return kExitOk;
}

inline int cmd_validate_manifest(const std::string& path, std::ostream& out) {
    const auto report = validate_manifest(fs::path(path));
    for (const auto& v : report.violations) out << v.kind << "\t" << v.id << "\t" << v.detail << "\n";
    out << "entries: " << report.entries << "\nviolations: " << report.violations.size() << "\n";
    return report.ok() ? kExitOk : kExitIo;
}

// --- entry point ------------------------------------------------------------------

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Localized artifact synthesis by latent corruption", "latcorr"};
    app.require_subcommand(1);
    app.fallthrough();
    GlobalFlags g;
    g.attach(app);

    std::string in, in2, dest;
    bool dump = false;
    std::optional<std::size_t> start_depth;
    BuildArgs build;
    CompareArgs cmp;
    EvaluateArgs ev;

    auto* inv = app.add_subcommand("invert", "Invert a latent with fixed-point refinement");
    inv->add_option("input", in, "Input .lat")->required();
    inv->add_option("prefix", dest, "Output prefix")->required();
    inv->add_flag("--dump-trajectory", dump, "Also write every intermediate latent");

    auto* smp = app.add_subcommand("sample", "Resample a noised latent back to the clean level");
    smp->add_option("input", in, "Input .lat")->required();
    smp->add_option("output", dest, "Output .lat")->required();
    smp->add_option("--start-depth", start_depth, "Depth of the input latent (default: invert steps)");

    auto* cor = app.add_subcommand("corrupt", "Invert, corrupt inside a mask, and resample one latent");
    cor->add_option("input", in, "Input .lat")->required();
    cor->add_option("mask", in2, "Mask PNG")->required();
    cor->add_option("prefix", dest, "Output prefix")->required();

    auto* bld = app.add_subcommand("build-dataset", "Build a corrupted image/mask dataset");
    bld->add_option("--input", build.input, "Directory of input PNG images");
    bld->add_option("--masks", build.masks, "Directory of <id>.png masks");
    bld->add_option("--out", build.out, "Output directory");
    bld->add_option("--codec", build.codec, "toy | bridge");
    bld->add_option("--mask-source", build.mask_source, "file_dir | remote_scorer");
    bld->add_option("--tau", build.tau, "Score threshold for remote masks");
    bld->add_option("--test-percent", build.test_percent, "Share of ids assigned to the test split");

    auto* cmpc = app.add_subcommand("compare-corruptions", "Compare corruption methods on a fixture set");
    cmpc->add_option("--input", cmp.input, "Directory of fixture PNG images (default: built-in fixtures)");
    cmpc->add_option("--masks", cmp.masks, "Directory of fixture masks");
    cmpc->add_option("--fixtures", cmp.fixtures, "Number of built-in fixtures");
    cmpc->add_option("--out", cmp.out, "Directory for compare.json and compare.txt");
    cmpc->add_option("--pred-root", cmp.pred_root, "Prediction masks under <root>/<row key>/");
    cmpc->add_option("--gt", cmp.gt, "Ground-truth masks for the mIoU columns");
    cmpc->add_flag("--artifact-only", cmp.artifact_only, "Report artifact-class IoU instead of the two-class mean");

    auto* evl = app.add_subcommand("evaluate", "IoU/mIoU of predicted masks against ground truth");
    evl->add_option("pred", ev.pred, "Prediction mask directory")->required();
    evl->add_option("gt", ev.gt, "Ground-truth mask directory")->required();
    evl->add_option("--out", ev.out, "Directory for eval.json and eval.txt");
    evl->add_flag("--artifact-only", ev.artifact_only, "Report artifact-class IoU instead of the two-class mean");
    evl->add_option("--config-label", ev.config_label, "Row label of the text table");
    evl->add_option("--arch-label", ev.arch_label, "Column label of the text table");

    auto* bin = app.add_subcommand("binarize-labels", "Majority-vote annotator stacks into masks");
    bin->add_option("stacks", in, "Directory of <id>/ annotator map folders")->required();
    bin->add_option("output", dest, "Output mask directory")->required();

    auto* val = app.add_subcommand("validate-manifest", "Check a dataset manifest");
    val->add_option("manifest", in, "manifest.jsonl")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*evl) return cmd_evaluate(ev, out);
        if (*bin) return cmd_binarize_labels(in, dest, out);
        if (*val) return cmd_validate_manifest(in, out);
        const RunConfig c = g.resolve();
        if (*inv) return cmd_invert(c, in, dest, dump, out, err);
        if (*smp) return cmd_sample(c, in, dest, start_depth, out);
        if (*cor) return cmd_corrupt(c, in, in2, dest, out);
        if (*bld) return cmd_build_dataset(c, build, out, err);
        if (*cmpc) return cmd_compare(c, cmp, out);
    } catch (const NumericError& e) {
        err << "error: " << e.what();
        if (e.step() >= 0) err << " (step " << e.step() << ")";
        err << "\n";
        return exit_code_for(e);
    } catch (const ConnectivityError& e) {
        err << "error: " << e.what() << " after " << e.attempts() << " attempt(s)\n";
        return exit_code_for(e);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return exit_code_for(e);
    }
    return kExitUsage;
}

}  // namespace latcorr::cli
