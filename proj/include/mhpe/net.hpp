// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mhpe/geometry.hpp"
#include "mhpe/nn/model.hpp"

namespace mhpe::net {

using nn::kOutputChannels;
using nn::kStrides;
using nn::RawGrids;

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double logit(double p) { return std::log(p / (1.0 - p)); }

struct AnchorSize {
    double w = 0, h = 0;  // pixels at input scale
};

struct AnchorConfig {
    std::array<std::vector<AnchorSize>, 4> per_stride;

    int anchors_per_stride() const { return static_cast<int>(per_stride[0].size()); }
};

inline void validate(const AnchorConfig& a) {
    const size_t c_a = a.per_stride[0].size();
    if (c_a == 0) throw ConfigError("anchors: empty");
    for (int si = 0; si < 4; ++si) {
        if (a.per_stride[si].size() != c_a) throw ConfigError("anchors: C_a differs across strides");
        double prev = 0;
        for (const auto& an : a.per_stride[si]) {
            if (!(an.w > 0) || !(an.h > 0)) throw ConfigError("anchors: non-positive size");
            const double area = an.w * an.h;
            if (area < prev) throw ConfigError("anchors: not sorted ascending");
            prev = area;
        }
    }
}

inline AnchorConfig default_anchors() {
    AnchorConfig a;
    for (int si = 0; si < 4; ++si) {
        const double s = kStrides[si];
        a.per_stride[si] = {{2.0 * s, 2.0 * s}, {3.2 * s, 3.2 * s}, {4.5 * s, 4.5 * s}};
    }
    return a;
}

/// K-means over training box sizes (k-means++ style seeding on a fixed RNG),
/// 3 clusters per stride assigned by area. Falls back to defaults when there
/// are too few boxes.
inline AnchorConfig kmeans_anchors(const std::vector<AnchorSize>& boxes, std::uint64_t seed = 0) {
    const int k = 12;
    if (static_cast<int>(boxes.size()) < 2 * k) return default_anchors();
    Rng rng(mix_seed(seed ^ 0xa17c0u));
    std::vector<AnchorSize> centers;
    centers.push_back(boxes[rng.uniform_int(0, boxes.size() - 1)]);
    auto d2 = [](const AnchorSize& a, const AnchorSize& b) {
        return (a.w - b.w) * (a.w - b.w) + (a.h - b.h) * (a.h - b.h);
    };
    while (static_cast<int>(centers.size()) < k) {
        std::vector<double> dist(boxes.size());
        double total = 0;
        for (size_t i = 0; i < boxes.size(); ++i) {
            double best = 1e300;
            for (const auto& c : centers) best = std::min(best, d2(boxes[i], c));
            dist[i] = best;
            total += best;
        }
        double pick = rng.uniform() * total;
        size_t chosen = boxes.size() - 1;
        for (size_t i = 0; i < boxes.size(); ++i) {
            pick -= dist[i];
            if (pick <= 0) {
                chosen = i;
                break;
            }
        }
        centers.push_back(boxes[chosen]);
    }
    std::vector<int> assign(boxes.size(), 0);
    for (int iter = 0; iter < 50; ++iter) {
        bool moved = false;
        for (size_t i = 0; i < boxes.size(); ++i) {
            int best = 0;
            double bd = 1e300;
            for (int c = 0; c < k; ++c) {
                const double d = d2(boxes[i], centers[c]);
                if (d < bd) {
                    bd = d;
                    best = c;
                }
            }
            if (assign[i] != best) {
                assign[i] = best;
                moved = true;
            }
        }
        for (int c = 0; c < k; ++c) {
            double sw = 0, sh = 0;
            int n = 0;
            for (size_t i = 0; i < boxes.size(); ++i) {
                if (assign[i] == c) {
                    sw += boxes[i].w;
                    sh += boxes[i].h;
                    ++n;
                }
            }
            if (n > 0) centers[c] = {sw / n, sh / n};
        }
        if (!moved) break;
    }
    std::sort(centers.begin(), centers.end(),
              [](const AnchorSize& a, const AnchorSize& b) { return a.w * a.h < b.w * b.h; });
    AnchorConfig cfg;
    for (int si = 0; si < 4; ++si) {
        cfg.per_stride[si] = {centers[si * 3], centers[si * 3 + 1], centers[si * 3 + 2]};
    }
    validate(cfg);
    return cfg;
}

// ---------------------------------------------------------------------------
// Decoding (raw channel order per cell: obj, bx, by, bw, bh, cls, pitch,
// yaw, roll).
// ---------------------------------------------------------------------------

struct GridBox {
    double cx = 0, cy = 0, w = 0, h = 0;  // grid units at the emitting stride
};

/// Offset-based box decode: center limited to (-0.5, 1.5) around the cell,
/// size to (0, 4] times the anchor.
inline GridBox decode_box(const std::array<double, 4>& raw, const AnchorSize& anchor, int stride,
                          int cell_x, int cell_y) {
    GridBox b;
    b.cx = 2.0 * sigmoid(raw[0]) - 0.5 + cell_x;
    b.cy = 2.0 * sigmoid(raw[1]) - 0.5 + cell_y;
    const double sw = 2.0 * sigmoid(raw[2]);
    const double sh = 2.0 * sigmoid(raw[3]);
    b.w = anchor.w / stride * sw * sw;
    b.h = anchor.h / stride * sh * sh;
    return b;
}

/// Sigmoid-normalized angles rescaled to degrees: yaw over the full circle,
/// pitch/roll over the half circle.
inline geom::EulerPose decode_pose(const std::array<double, 3>& raw) {
    geom::EulerPose p;
    p.pitch = (sigmoid(raw[0]) - 0.5) * 180.0;
    p.yaw = (sigmoid(raw[1]) - 0.5) * 360.0;
    p.roll = (sigmoid(raw[2]) - 0.5) * 180.0;
    return p;
}

/// Normalized pose targets in [0, 1]: the exact inverse of decode_pose up to
/// the sigmoid.
inline std::array<double, 3> encode_pose(const geom::EulerPose& p) {
    if (!geom::pose_in_range(p)) throw ArgumentError("encode_pose: pose out of range");
    return {p.pitch / 180.0 + 0.5, p.yaw / 360.0 + 0.5, p.roll / 180.0 + 0.5};
}

// ---------------------------------------------------------------------------
// Target assignment
// ---------------------------------------------------------------------------

struct GtBox {
    double cx = 0, cy = 0, w = 0, h = 0;  // pixels, center format, input scale
    geom::EulerPose pose;
};

struct PositiveTarget {
    int anchor = 0;
    int cell_x = 0, cell_y = 0;
    GridBox box;                      // target box in grid units at this stride
    std::array<double, 3> pose{};     // normalized pose target
    int gt_index = 0;
};

struct TargetGrids {
    int input_h = 0, input_w = 0;
    int anchors_per_stride = 0;
    std::array<std::vector<PositiveTarget>, 4> positives;
    std::vector<int> unassigned;  // GT indices that matched no anchor at any stride
};

struct AssignConfig {
    double anchor_ratio_threshold = 4.0;
    bool all_four_neighbors = false;  // spec default: centre + 2 nearest neighbours
};

/// YOLO-style multi-positive assignment: for every GT and stride, anchors
/// pass the size-ratio test; positives land on the centre cell plus
/// neighbouring cells chosen by the fractional offsets (ties at .5 go to the
/// smaller index).
inline TargetGrids build_targets(const std::vector<GtBox>& gts, const AnchorConfig& anchors,
                                 int input_w, int input_h, const AssignConfig& cfg = {}) {
    validate(anchors);
    TargetGrids out;
    out.input_h = input_h;
    out.input_w = input_w;
    out.anchors_per_stride = anchors.anchors_per_stride();
    std::vector<bool> assigned(gts.size(), false);

    for (int si = 0; si < 4; ++si) {
        const int s = kStrides[si];
        const int gw = input_w / s, gh = input_h / s;
        for (size_t gi = 0; gi < gts.size(); ++gi) {
            const GtBox& gt = gts[gi];
            const double gx = gt.cx / s, gy = gt.cy / s;
            const GridBox tbox{gx, gy, gt.w / s, gt.h / s};
            const std::array<double, 3> tpose = encode_pose(gt.pose);

            for (int a = 0; a < anchors.anchors_per_stride(); ++a) {
                const AnchorSize& an = anchors.per_stride[si][a];
                const double r = std::max({gt.w / an.w, an.w / gt.w, gt.h / an.h, an.h / gt.h});
                if (!(r < cfg.anchor_ratio_threshold)) continue;

                const int cx = std::clamp(static_cast<int>(std::floor(gx)), 0, gw - 1);
                const int cy = std::clamp(static_cast<int>(std::floor(gy)), 0, gh - 1);
                const double fx = gx - std::floor(gx);
                const double fy = gy - std::floor(gy);

                std::vector<std::pair<int, int>> cells = {{cx, cy}};
                if (cfg.all_four_neighbors) {
                    cells.push_back({cx - 1, cy});
                    cells.push_back({cx + 1, cy});
                    cells.push_back({cx, cy - 1});
                    cells.push_back({cx, cy + 1});
                } else {
                    cells.push_back({fx <= 0.5 ? cx - 1 : cx + 1, cy});
                    cells.push_back({cx, fy <= 0.5 ? cy - 1 : cy + 1});
                }
                for (const auto& [ccx, ccy] : cells) {
                    if (ccx < 0 || ccy < 0 || ccx >= gw || ccy >= gh) continue;
                    out.positives[si].push_back(
                        {a, ccx, ccy, tbox, tpose, static_cast<int>(gi)});
                    assigned[gi] = true;
                }
            }
        }
    }
    for (size_t gi = 0; gi < gts.size(); ++gi) {
        if (!assigned[gi]) out.unassigned.push_back(static_cast<int>(gi));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Checkpoints: versioned binary with a JSON header and a float32 blob.
// ---------------------------------------------------------------------------

inline constexpr std::uint32_t kCheckpointMagic = 0x4d485043;  // "MHPC"
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    nn::ModelConfig model;
    AnchorConfig anchors;
    int input_size = 320;
    double pixel_scale = 1.0 / 255.0;  // input normalization
    int epoch = 0;
    std::uint64_t seed = 0;
    bool has_momentum = false;
};

namespace detail {

inline nlohmann::json anchors_to_json(const AnchorConfig& a) {
    nlohmann::json j = nlohmann::json::array();
    for (int si = 0; si < 4; ++si) {
        nlohmann::json row = nlohmann::json::array();
        for (const auto& an : a.per_stride[si]) row.push_back({an.w, an.h});
        j.push_back(row);
    }
    return j;
}

inline AnchorConfig anchors_from_json(const nlohmann::json& j) {
    AnchorConfig a;
    for (int si = 0; si < 4; ++si) {
        for (const auto& an : j.at(si)) {
            a.per_stride[si].push_back({an.at(0).get<double>(), an.at(1).get<double>()});
        }
    }
    validate(a);
    return a;
}

}  // namespace detail

inline void save_checkpoint(const std::filesystem::path& path, nn::Model& model,
                            const Checkpoint& meta) {
    nlohmann::json header;
    header["schema_version"] = kCheckpointVersion;
    header["widths"] = meta.model.widths;
    header["anchors_per_stride"] = meta.model.anchors_per_stride;
    header["objectness_bias"] = meta.model.objectness_bias;
    header["class_score_bias"] = meta.model.class_score_bias;
    header["anchors"] = detail::anchors_to_json(meta.anchors);
    header["strides"] = kStrides;
    header["input_size"] = meta.input_size;
    header["pixel_scale"] = meta.pixel_scale;
    header["epoch"] = meta.epoch;
    header["seed"] = meta.seed;
    header["has_momentum"] = meta.has_momentum;
    nlohmann::json names = nlohmann::json::array();
    std::uint64_t total = 0;
    for (const nn::Param* p : model.params()) {
        names.push_back({p->name, p->w.size()});
        total += p->w.size();
    }
    header["params"] = names;
    const std::string h = header.dump();

    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write checkpoint: " + path.string());
    auto put_u32 = [&](std::uint32_t v) { f.write(reinterpret_cast<const char*>(&v), 4); };
    put_u32(kCheckpointMagic);
    put_u32(kCheckpointVersion);
    put_u32(static_cast<std::uint32_t>(h.size()));
    f.write(h.data(), static_cast<std::streamsize>(h.size()));
    for (const nn::Param* p : model.params()) {
        f.write(reinterpret_cast<const char*>(p->w.data()),
                static_cast<std::streamsize>(p->w.size() * sizeof(float)));
    }
    if (meta.has_momentum) {
        for (const nn::Param* p : model.params()) {
            f.write(reinterpret_cast<const char*>(p->m.data()),
                    static_cast<std::streamsize>(p->m.size() * sizeof(float)));
        }
    }
    if (!f) throw IoError("checkpoint write failed: " + path.string());
    (void)total;
}

struct LoadedCheckpoint {
    Checkpoint meta;
    std::unique_ptr<nn::Model> model;
};

inline LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open checkpoint: " + path.string());
    auto get_u32 = [&]() {
        std::uint32_t v = 0;
        f.read(reinterpret_cast<char*>(&v), 4);
        return v;
    };
    if (get_u32() != kCheckpointMagic) throw ParseError("not a checkpoint file: " + path.string());
    const std::uint32_t version = get_u32();
    if (version != kCheckpointVersion) {
        throw ParseError("unsupported checkpoint version " + std::to_string(version));
    }
    const std::uint32_t hlen = get_u32();
    std::string htext(hlen, '\0');
    f.read(htext.data(), hlen);
    if (!f) throw ParseError("truncated checkpoint header");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(htext);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("checkpoint header: ") + e.what());
    }

    LoadedCheckpoint out;
    out.meta.model.widths = header.at("widths").get<std::array<int, 6>>();
    out.meta.model.anchors_per_stride = header.at("anchors_per_stride").get<int>();
    out.meta.model.objectness_bias = header.at("objectness_bias").get<double>();
    out.meta.model.class_score_bias = header.at("class_score_bias").get<double>();
    out.meta.anchors = detail::anchors_from_json(header.at("anchors"));
    out.meta.input_size = header.at("input_size").get<int>();
    out.meta.pixel_scale = header.at("pixel_scale").get<double>();
    out.meta.epoch = header.at("epoch").get<int>();
    out.meta.seed = header.at("seed").get<std::uint64_t>();
    out.meta.has_momentum = header.value("has_momentum", false);

    out.model = std::make_unique<nn::Model>(out.meta.model);
    for (nn::Param* p : out.model->params()) {
        f.read(reinterpret_cast<char*>(p->w.data()),
               static_cast<std::streamsize>(p->w.size() * sizeof(float)));
    }
    if (out.meta.has_momentum) {
        for (nn::Param* p : out.model->params()) {
            f.read(reinterpret_cast<char*>(p->m.data()),
                   static_cast<std::streamsize>(p->m.size() * sizeof(float)));
        }
    }
    if (!f) throw ParseError("truncated checkpoint blob: " + path.string());
    return out;
}

}  // namespace mhpe::net
