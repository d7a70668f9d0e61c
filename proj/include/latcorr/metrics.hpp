// Copyright (C) 2026 The latcorr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "latcorr/error.hpp"
#include "latcorr/grid.hpp"

namespace latcorr {

inline constexpr int kBackground = 0;
inline constexpr int kArtifact = 1;

struct ClassCounts {
    std::uint64_t intersection = 0;
    std::uint64_t uni = 0;

    // Empty union (class absent from both) counts as a perfect score.
    double iou() const noexcept {
        return uni == 0 ? 1.0 : static_cast<double>(intersection) / static_cast<double>(uni);
    }
};

inline ClassCounts class_counts(const BinaryMask& pred, const BinaryMask& gt, int class_value) {
    if (pred.spatial() != gt.spatial())
        throw ShapeError("iou: prediction " + to_string(pred.spatial()) + " vs ground truth " + to_string(gt.spatial()));
    if (class_value != 0 && class_value != 1) throw ParameterError("iou: class must be 0 or 1");
    const std::uint8_t cv = static_cast<std::uint8_t>(class_value);
    ClassCounts c;
    auto p = pred.bits(), g = gt.bits();
    for (std::size_t i = 0; i < p.size(); ++i) {
        const bool in_p = p[i] == cv, in_g = g[i] == cv;
        c.intersection += in_p && in_g;
        c.uni += in_p || in_g;
    }
    return c;
}

inline double iou(const BinaryMask& pred, const BinaryMask& gt, int class_value) {
    return class_counts(pred, gt, class_value).iou();
}

enum class MiouMode {
    TwoClassMean,  // mean of background and artifact IoU
    ArtifactOnly,
};

struct ImageIou {
    std::string id;
    double background = 0.0;
    double artifact = 0.0;
};

struct EvalReport {
    std::array<ClassCounts, 2> counts{};
    std::array<double, 2> class_iou{};
    double miou = 0.0;
    MiouMode mode = MiouMode::TwoClassMean;
    std::vector<ImageIou> per_image;
};

using MaskSet = std::map<std::string, BinaryMask>;

// Dataset-level IoU: intersections and unions are summed over all images per
// class before dividing.
inline EvalReport evaluate(const MaskSet& preds, const MaskSet& gts, MiouMode mode = MiouMode::TwoClassMean) {
    for (const auto& [id, _] : preds)
        if (!gts.contains(id)) throw PairingError("prediction '" + id + "' has no ground truth");
    for (const auto& [id, _] : gts)
        if (!preds.contains(id)) throw PairingError("ground truth '" + id + "' has no prediction");

    EvalReport r;
    r.mode = mode;
    for (const auto& [id, pred] : preds) {
        const auto& gt = gts.at(id);
        ImageIou row{id, 0.0, 0.0};
        for (int cls : {kBackground, kArtifact}) {
            const auto c = class_counts(pred, gt, cls);
            r.counts[cls].intersection += c.intersection;
            r.counts[cls].uni += c.uni;
            (cls == kArtifact ? row.artifact : row.background) = c.iou();
        }
        r.per_image.push_back(std::move(row));
    }
    for (int cls : {kBackground, kArtifact}) r.class_iou[cls] = r.counts[cls].iou();
    r.miou = mode == MiouMode::ArtifactOnly ? r.class_iou[kArtifact]
                                            : 0.5 * (r.class_iou[kBackground] + r.class_iou[kArtifact]);
    return r;
}

inline nlohmann::json to_json(const EvalReport& r) {
    nlohmann::json j;
    j["miou"] = r.miou;
    j["mode"] = r.mode == MiouMode::ArtifactOnly ? "artifact_only" : "two_class_mean";
    for (int cls : {kBackground, kArtifact}) {
        const char* name = cls == kArtifact ? "artifact" : "background";
        j["classes"][name] = {{"iou", r.class_iou[cls]},
                              {"intersection", r.counts[cls].intersection},
                              {"union", r.counts[cls].uni}};
    }
    j["per_image"] = nlohmann::json::array();
    for (const auto& row : r.per_image)
        j["per_image"].push_back({{"id", row.id}, {"background", row.background}, {"artifact", row.artifact}});
    return j;
}

inline std::string percent(double v) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(2) << 100.0 * v;
    return os.str();
}

// Plain-text table: one row per train-set configuration, one column per
// detector architecture, cells in mIoU percent.
struct MiouTable {
    std::vector<std::string> columns;
    struct Row {
        std::string label;
        std::vector<std::string> cells;
    };
    std::vector<Row> rows;

    std::string render(const std::string& corner) const {
        std::size_t w0 = corner.size();
        for (const auto& r : rows) w0 = std::max(w0, r.label.size());
        std::vector<std::size_t> widths;
        for (std::size_t c = 0; c < columns.size(); ++c) {
            std::size_t w = columns[c].size();
            for (const auto& r : rows)
                if (c < r.cells.size()) w = std::max(w, r.cells[c].size());
            widths.push_back(w);
        }
        std::ostringstream os;
        auto line = [&](const std::string& first, const std::vector<std::string>& cells) {
            os << std::left << std::setw(static_cast<int>(w0)) << first;
            for (std::size_t c = 0; c < widths.size(); ++c)
                os << " | " << std::right << std::setw(static_cast<int>(widths[c])) << (c < cells.size() ? cells[c] : "");
            os << "\n";
        };
        line(corner, columns);
        os << std::string(w0, '-');
        for (auto w : widths) os << "-+-" << std::string(w, '-');
        os << "\n";
        for (const auto& r : rows) line(r.label, r.cells);
        return os.str();
    }
};

inline std::string to_text(const EvalReport& r, const std::string& config_label, const std::string& arch_label) {
    MiouTable t;
    t.columns = {arch_label};
    t.rows.push_back({config_label, {percent(r.miou)}});
    std::ostringstream os;
    os << t.render("Config.");
    os << "\nIoU background: " << percent(r.class_iou[kBackground]) << "  (" << r.counts[kBackground].intersection
       << " / " << r.counts[kBackground].uni << ")\n";
    os << "IoU artifact:   " << percent(r.class_iou[kArtifact]) << "  (" << r.counts[kArtifact].intersection << " / "
       << r.counts[kArtifact].uni << ")\n";
    os << "mIoU (" << (r.mode == MiouMode::ArtifactOnly ? "artifact only" : "two-class mean")
       << "): " << percent(r.miou) << "\n";
    return os.str();
}

}  // namespace latcorr
