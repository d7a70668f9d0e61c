// Copyright (C) 2026 The latcorr Authors
// SPDX-License-Identifier: Apache-2.0

// Shared test helpers: scratch directories and on-disk toy fixtures.

#pragma once

#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "latcorr/compare.hpp"
#include "latcorr/io.hpp"

namespace latcorr::testing_support {

namespace fs = std::filesystem;

class TempDir {
public:
    TempDir() {
        std::string tmpl = (fs::temp_directory_path() / "latcorr-test-XXXXXX").string();
        if (!::mkdtemp(tmpl.data())) throw IoError("mkdtemp failed");
        path_ = tmpl;
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const noexcept { return path_; }
    fs::path operator/(const std::string& rel) const { return path_ / rel; }

private:
    fs::path path_;
};

// Writes fixtures as <dir>/images/<id>.png and <dir>/masks/<id>.png.
inline void write_fixtures(const fs::path& dir, const std::vector<Fixture>& fixtures) {
    fs::create_directories(dir / "images");
    fs::create_directories(dir / "masks");
    for (const auto& f : fixtures) {
        write_png(dir / "images" / (f.id + ".png"), grid_to_image(f.image));
        write_mask_png(dir / "masks" / (f.id + ".png"), f.mask);
    }
}

inline std::string slurp(const fs::path& p) {
    auto b = read_file_bytes(p);
    return {b.begin(), b.end()};
}

// Every regular file under `root`, keyed by relative path, with contents.
inline std::map<std::string, std::string> snapshot(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = slurp(e.path());
    return out;
}

}  // namespace latcorr::testing_support
