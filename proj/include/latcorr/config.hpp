// Copyright (C) 2026 The latcorr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <charconv>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "latcorr/corruption.hpp"
#include "latcorr/dataset.hpp"
#include "latcorr/denoiser.hpp"
#include "latcorr/error.hpp"
#include "latcorr/io.hpp"
#include "latcorr/pipeline.hpp"
#include "latcorr/schedule.hpp"

namespace latcorr {

// Flat `key = value` text with `[section]` headers; `#` and `;` start
// comments. Keys are stored as "section.key".
using KeyValues = std::map<std::string, std::string>;

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

inline KeyValues parse_key_values(const std::string& text, const std::string& origin = "config") {
    KeyValues kv;
    std::istringstream in(text);
    std::string line, section;
    for (std::size_t n = 1; std::getline(in, line); ++n) {
        const auto hash = line.find_first_of("#;");
        line = trim(hash == std::string::npos ? line : line.substr(0, hash));
        if (line.empty()) continue;
        const std::string where = origin + ":" + std::to_string(n);
        if (line.front() == '[') {
            if (line.back() != ']') throw ParameterError(where + ": unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParameterError(where + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) throw ParameterError(where + ": empty key");
        const std::string full = section.empty() ? key : section + "." + key;
        if (!kv.emplace(full, trim(line.substr(eq + 1))).second) throw ParameterError(where + ": duplicate key " + full);
    }
    return kv;
}

namespace detail {

template <class T>
T parse_number(const std::string& key, const std::string& v) {
    T out{};
    const auto* end = v.data() + v.size();
    auto [p, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || p != end) throw ParameterError(key + ": invalid number '" + v + "'");
    return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ParameterError(key + ": invalid boolean '" + v + "'");
}

inline std::vector<double> parse_list(const std::string& key, const std::string& v) {
    std::vector<double> out;
    std::istringstream in(v);
    for (std::string item; std::getline(in, item, ',');) out.push_back(parse_number<double>(key, trim(item)));
    if (out.empty()) throw ParameterError(key + ": empty list");
    return out;
}

}  // namespace detail

// Every setting a command may need. Unset optionals fall back to defaults
// at resolve time so that explicit values can be checked for contradictions.
struct RunConfig {
    ScheduleParams schedule;

    CorruptionMethod method = CorruptionMethod::Proposed;
    std::size_t corrupt_step = 40;
    std::optional<std::size_t> resample_steps;
    BlurParams blur;

    std::optional<std::size_t> invert_steps;
    RenoiseSettings renoise;

    DenoiserKind denoiser = DenoiserKind::Zero;
    std::vector<double> prior_mean{0.0};
    double prior_scale = 0.5;
    std::string endpoint;
    std::string conditioning;
    long deadline_ms = 120000;
    int retries = 1;

    MaskSourceKind mask_source = MaskSourceKind::FileDir;
    std::string mask_dir;
    double tau = 0.5;
    std::string mask_endpoint;

    std::uint64_t seed = 0;
    std::size_t jobs = 0;  // 0: available cores
    bool strict = false;
    CodecKind codec = CodecKind::Toy;
    std::string input;
    std::string out;
    unsigned test_percent = 0;

    void apply(const KeyValues& kv) {
        using detail::parse_number;
        for (const auto& [k, v] : kv) {
            if (k == "schedule.train_steps") schedule.train_steps = parse_number<std::size_t>(k, v);
            else if (k == "schedule.beta_start") schedule.beta_start = parse_number<double>(k, v);
            else if (k == "schedule.beta_end") schedule.beta_end = parse_number<double>(k, v);
            else if (k == "schedule.sample_steps") schedule.sample_steps = parse_number<std::size_t>(k, v);
            else if (k == "schedule.eta") schedule.eta = parse_number<double>(k, v);
            else if (k == "corruption.method") method = parse_method(v);
            else if (k == "corruption.corrupt_step") corrupt_step = parse_number<std::size_t>(k, v);
            else if (k == "corruption.resample_steps") resample_steps = parse_number<std::size_t>(k, v);
            else if (k == "corruption.blur_radius") blur.radius = parse_number<int>(k, v);
            else if (k == "corruption.blur_sigma") blur.sigma = parse_number<double>(k, v);
            else if (k == "inversion.invert_steps") invert_steps = parse_number<std::size_t>(k, v);
            else if (k == "inversion.renoise_iters") renoise.iters = parse_number<std::size_t>(k, v);
            else if (k == "inversion.renoise_tol") renoise.tol = parse_number<double>(k, v);
            else if (k == "denoiser.kind") denoiser = parse_denoiser_kind(v);
            else if (k == "denoiser.mean") prior_mean = detail::parse_list(k, v);
            else if (k == "denoiser.scale") prior_scale = parse_number<double>(k, v);
            else if (k == "denoiser.endpoint") endpoint = v;
            else if (k == "denoiser.conditioning") conditioning = v;
            else if (k == "denoiser.deadline_ms") deadline_ms = parse_number<long>(k, v);
            else if (k == "denoiser.retries") retries = parse_number<int>(k, v);
            else if (k == "masks.source") mask_source = parse_mask_source(v);
            else if (k == "masks.dir") mask_dir = v;
            else if (k == "masks.tau") tau = parse_number<double>(k, v);
            else if (k == "masks.endpoint") mask_endpoint = v;
            else if (k == "run.seed") seed = parse_number<std::uint64_t>(k, v);
            else if (k == "run.jobs") jobs = parse_number<std::size_t>(k, v);
            else if (k == "run.strict") strict = detail::parse_bool(k, v);
            else if (k == "run.codec") codec = parse_codec_kind(v);
            else if (k == "run.input") input = v;
            else if (k == "run.out") out = v;
            else if (k == "run.test_percent") test_percent = parse_number<unsigned>(k, v);
            else throw ParameterError("unknown config key '" + k + "'");
        }
    }

    static MaskSourceKind parse_mask_source(const std::string& v) {
        if (v == "file_dir") return MaskSourceKind::FileDir;
        if (v == "remote_scorer") return MaskSourceKind::RemoteScorer;
        throw ParameterError("unknown mask source '" + v + "' (expected file_dir|remote_scorer)");
    }

    NoiseSchedule build_schedule() const { return schedule.build(); }

    CorruptionSpec corruption_spec() const { return {method, corrupt_step, resample_steps, seed}; }

    DenoiserConfig denoiser_config() const {
        DenoiserConfig c;
        c.kind = denoiser;
        c.prior = {prior_mean, prior_scale};
        c.endpoint = endpoint;
        c.conditioning = conditioning;
        c.deadline = std::chrono::milliseconds(deadline_ms);
        c.retries = retries;
        return c;
    }

    std::size_t effective_jobs() const {
        if (jobs) return jobs;
        return std::max(1u, std::thread::hardware_concurrency());
    }

    // Depth of the corruption pipeline; an explicit invert_steps must agree.
    std::size_t pipeline_depth() const {
        const std::size_t d = corruption_spec().depth(schedule.sample_steps);
        if (invert_steps && *invert_steps != d)
            throw ParameterError("invert_steps " + std::to_string(*invert_steps) + " contradicts corruption depth " +
                                 std::to_string(d) + " (method " + to_string(method) + ", corrupt_step " +
                                 std::to_string(corrupt_step) + ")");
        return d;
    }

    // Rejects settings that cannot run together. Commands that corrupt also
    // call pipeline_depth().
    void validate() const {
        (void)build_schedule();
        if (denoiser == DenoiserKind::Remote && endpoint.empty())
            throw ParameterError("remote denoiser requires an endpoint");
        if (codec == CodecKind::Bridge && endpoint.empty()) throw ParameterError("bridge codec requires an endpoint");
        if (mask_source == MaskSourceKind::RemoteScorer && mask_endpoint.empty() && endpoint.empty())
            throw ParameterError("remote mask scorer requires an endpoint");
        if (!(tau >= 0.0 && tau <= 1.0)) throw ParameterError("masks.tau must lie in [0,1]");
        if (renoise.iters == 0) throw ParameterError("renoise_iters must be >= 1");
        if (blur.radius < 0 || !(blur.sigma > 0.0)) throw ParameterError("blur radius must be >= 0 and sigma > 0");
        if (deadline_ms <= 0) throw ParameterError("deadline_ms must be positive");
        if (retries < 0) throw ParameterError("retries must be >= 0");
        if (test_percent > 100) throw ParameterError("test_percent must be <= 100");
        denoiser_config().validate();
    }
};

inline RunConfig load_run_config(const std::filesystem::path& path) {
    std::error_code ec;
    if (!std::filesystem::is_regular_file(path, ec)) throw ParameterError(path.string() + ": config file not found");
    const auto bytes = read_file_bytes(path);
    RunConfig c;
    c.apply(parse_key_values(std::string(bytes.begin(), bytes.end()), path.string()));
    return c;
}

}  // namespace latcorr
