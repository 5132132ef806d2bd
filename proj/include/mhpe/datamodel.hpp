// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mhpe/common.hpp"

namespace mhpe::data {

inline constexpr int kSchemaVersion = 1;

struct ImageRecord {
    std::int64_t image_id = 0;
    std::string file_name;
    int width = 0;
    int height = 0;
};

/// COCO-style head annotation: bbox in corner format (x, y, w, h) pixels,
/// pose as (pitch, yaw, roll) degrees. `score` is present on predictions.
struct Annotation {
    std::int64_t ann_id = 0;
    std::int64_t image_id = 0;
    std::array<double, 4> bbox{0, 0, 0, 0};
    std::array<double, 3> pose{0, 0, 0};
    std::optional<double> score;
};

struct Meta {
    int schema_version = kSchemaVersion;
    std::string generator;
    std::uint64_t seed = 0;
};

struct DatasetFile {
    std::vector<ImageRecord> images;
    std::vector<Annotation> annotations;
    Meta meta;
};

inline void validate(const DatasetFile& ds) {
    std::set<std::int64_t> image_ids;
    for (const auto& im : ds.images) {
        if (!image_ids.insert(im.image_id).second) {
            throw ValidationError("duplicate image_id " + std::to_string(im.image_id));
        }
        if (im.width <= 0 || im.height <= 0) {
            throw ValidationError("image " + std::to_string(im.image_id) + " has empty size");
        }
    }
    std::set<std::int64_t> ann_ids;
    for (const auto& a : ds.annotations) {
        const std::string tag = "annotation " + std::to_string(a.ann_id);
        if (!ann_ids.insert(a.ann_id).second) throw ValidationError("duplicate ann_id in " + tag);
        const auto it = std::find_if(ds.images.begin(), ds.images.end(),
                                     [&](const ImageRecord& im) { return im.image_id == a.image_id; });
        if (it == ds.images.end()) {
            throw ValidationError(tag + " references missing image_id " +
                                  std::to_string(a.image_id));
        }
        const auto& [x, y, w, h] = a.bbox;
        if (!(w > 0.0) || !(h > 0.0)) throw ValidationError(tag + " has non-positive bbox size");
        const double eps = 1e-6;
        if (x < -eps || y < -eps || x + w > it->width + eps || y + h > it->height + eps) {
            throw ValidationError(tag + " bbox exceeds image bounds");
        }
        const double pitch = a.pose[0], yaw = a.pose[1], roll = a.pose[2];
        if (!(pitch > -90.0 && pitch < 90.0 && roll > -90.0 && roll < 90.0 && yaw > -180.0 &&
              yaw <= 180.0)) {
            throw ValidationError(tag + " pose out of range");
        }
        if (a.score && !(*a.score >= 0.0 && *a.score <= 1.0)) {
            throw ValidationError(tag + " score out of [0,1]");
        }
    }
    if (ds.meta.schema_version != kSchemaVersion) {
        throw ValidationError("unsupported schema_version " +
                              std::to_string(ds.meta.schema_version));
    }
}

namespace detail {

inline std::string fmt6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

inline std::string escape(const std::string& s) {
    std::string out;
    out.reserve(s.size() + 2);
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            case '\r': out += "\\r"; break;
            default:
                if (static_cast<unsigned char>(c) < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof(buf), "\\u%04x", c);
                    out += buf;
                } else {
                    out += c;
                }
        }
    }
    return out;
}

}  // namespace detail

/// Canonical serialization: records sorted by id, keys in alphabetical
/// order, floats fixed to 6 decimals. Byte-stable for equal content.
inline std::string to_canonical_json(const DatasetFile& ds) {
    DatasetFile sorted = ds;
    std::sort(sorted.images.begin(), sorted.images.end(),
              [](const ImageRecord& a, const ImageRecord& b) { return a.image_id < b.image_id; });
    std::sort(sorted.annotations.begin(), sorted.annotations.end(),
              [](const Annotation& a, const Annotation& b) { return a.ann_id < b.ann_id; });

    std::string out = "{\"annotations\":[";
    for (size_t i = 0; i < sorted.annotations.size(); ++i) {
        const auto& a = sorted.annotations[i];
        if (i) out += ',';
        out += "{\"ann_id\":" + std::to_string(a.ann_id);
        out += ",\"bbox\":[" + detail::fmt6(a.bbox[0]) + ',' + detail::fmt6(a.bbox[1]) + ',' +
               detail::fmt6(a.bbox[2]) + ',' + detail::fmt6(a.bbox[3]) + ']';
        out += ",\"image_id\":" + std::to_string(a.image_id);
        out += ",\"pose\":[" + detail::fmt6(a.pose[0]) + ',' + detail::fmt6(a.pose[1]) + ',' +
               detail::fmt6(a.pose[2]) + ']';
        if (a.score) out += ",\"score\":" + detail::fmt6(*a.score);
        out += '}';
    }
    out += "],\"images\":[";
    for (size_t i = 0; i < sorted.images.size(); ++i) {
        const auto& im = sorted.images[i];
        if (i) out += ',';
        out += "{\"file_name\":\"" + detail::escape(im.file_name) + '"';
        out += ",\"height\":" + std::to_string(im.height);
        out += ",\"image_id\":" + std::to_string(im.image_id);
        out += ",\"width\":" + std::to_string(im.width) + '}';
    }
    out += "],\"meta\":{\"generator\":\"" + detail::escape(sorted.meta.generator) + '"';
    out += ",\"schema_version\":" + std::to_string(sorted.meta.schema_version);
    out += ",\"seed\":" + std::to_string(sorted.meta.seed) + "}}\n";
    return out;
}

inline DatasetFile from_json(const nlohmann::json& j) {
    DatasetFile ds;
    try {
        if (j.contains("meta")) {
            const auto& m = j.at("meta");
            ds.meta.schema_version = m.value("schema_version", kSchemaVersion);
            ds.meta.generator = m.value("generator", std::string{});
            ds.meta.seed = m.value("seed", std::uint64_t{0});
        }
        for (const auto& im : j.at("images")) {
            ImageRecord rec;
            rec.image_id = im.at("image_id").get<std::int64_t>();
            rec.file_name = im.at("file_name").get<std::string>();
            rec.width = im.at("width").get<int>();
            rec.height = im.at("height").get<int>();
            ds.images.push_back(std::move(rec));
        }
        size_t idx = 0;
        for (const auto& an : j.at("annotations")) {
            Annotation a;
            a.ann_id = an.at("ann_id").get<std::int64_t>();
            a.image_id = an.at("image_id").get<std::int64_t>();
            const auto& bb = an.at("bbox");
            const auto& ps = an.at("pose");
            if (bb.size() != 4 || ps.size() != 3) {
                throw ValidationError("annotation record " + std::to_string(idx) +
                                      ": bbox/pose arity");
            }
            for (int k = 0; k < 4; ++k) a.bbox[k] = bb.at(k).get<double>();
            for (int k = 0; k < 3; ++k) a.pose[k] = ps.at(k).get<double>();
            if (an.contains("score")) a.score = an.at("score").get<double>();
            ds.annotations.push_back(a);
            ++idx;
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("dataset json: ") + e.what());
    }
    return ds;
}

inline DatasetFile load(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open dataset: " + path.string());
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    DatasetFile ds = from_json(j);
    validate(ds);
    return ds;
}

inline void save(const DatasetFile& ds, const std::filesystem::path& path) {
    validate(ds);
    const std::string text = to_canonical_json(ds);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path.string());
    f << text;
    if (!f) throw IoError("write failed: " + path.string());
}

}  // namespace mhpe::data
