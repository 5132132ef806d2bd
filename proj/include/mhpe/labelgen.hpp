// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "mhpe/datamodel.hpp"
#include "mhpe/geometry.hpp"
#include "mhpe/icosphere.hpp"
#include "mhpe/reference_head.hpp"

namespace mhpe::label {

inline constexpr int kDefaultCornerCount = 13;

/// Head label: box in center format (pixels), pose, and the fraction of
/// bounding-sphere sample points that project inside the image.
struct HeadLabel {
    double bx = 0, by = 0, bw = 0, bh = 0;
    geom::EulerPose pose;
    double visibility = 0.0;
};

struct HemisphereConfig {
    double kappa = 1.0;   // radius multiplier on the reference head size
    int subdivisions = 3;  // icosphere level; 3 gives 642 sample points
};

/// The configured corner subset of a full 68-landmark head, in reference
/// order. Supported sizes mirror the label-variance protocol.
inline geom::LandmarkSet select_corner_landmarks(const geom::LandmarkSet& head, int n,
                                                 const ReferenceHead& ref = reference_head()) {
    const auto it = ref.corner_indices.find(n);
    if (it == ref.corner_indices.end()) {
        throw ArgumentError("unsupported corner landmark count " + std::to_string(n));
    }
    if (head.count() != ref.landmarks.count()) {
        throw ArgumentError("expected the full canonical landmark count (" +
                            std::to_string(ref.landmarks.count()) + "), got " +
                            std::to_string(head.count()));
    }
    return head.subset(it->second);
}

/// Recover head orientation from observed 3D landmarks and the real camera:
/// align the reference head onto the observed one with a similarity
/// transform M_c, then read the rotation between the virtual frontal camera
/// C_ref M_c^-1 and the real camera.
inline std::pair<geom::EulerPose, geom::SimilarityTransform> head_pose_from_landmarks(
    const geom::LandmarkSet& real, const geom::CameraModel& cam_real,
    const ReferenceHead& ref = reference_head(), int n = kDefaultCornerCount) {
    const geom::LandmarkSet ref_sub = select_corner_landmarks(ref.landmarks, n, ref);
    const geom::LandmarkSet real_sub = select_corner_landmarks(real, n, ref);
    const geom::SimilarityTransform m_c = geom::horn_align(ref_sub, real_sub);
    const geom::Matrix3 head_rotation =
        cam_real.rotation * m_c.rotation * ref.camera.rotation.transpose();
    return {geom::matrix_to_euler(head_rotation), m_c};
}

/// Bounding sphere around the reference head, carried into the scene by M_c:
/// icosphere samples of radius kappa * (max pairwise landmark distance),
/// centered on the landmark centroid.
inline geom::LandmarkSet head_bounding_sphere(const geom::SimilarityTransform& m_c,
                                              const HemisphereConfig& cfg,
                                              const ReferenceHead& ref = reference_head()) {
    static thread_local std::map<int, geom::Icosphere> cache;
    auto it = cache.find(cfg.subdivisions);
    if (it == cache.end()) it = cache.emplace(cfg.subdivisions, geom::make_icosphere(cfg.subdivisions)).first;
    const geom::Icosphere& sphere = it->second;

    const double radius = cfg.kappa * ref.landmarks.max_pairwise_distance();
    const geom::Vector3 center = ref.landmarks.centroid();
    Eigen::Matrix<double, Eigen::Dynamic, 3> pts(static_cast<int>(sphere.vertices.size()), 3);
    for (int i = 0; i < static_cast<int>(sphere.vertices.size()); ++i) {
        pts.row(i) = (center + radius * sphere.vertices[i]).transpose();
    }
    return m_c.apply(geom::LandmarkSet(pts));
}

/// Axis-aligned box over the projected bounding sphere, clipped to the
/// image. Returns nullopt when the clipped box has zero area (off screen).
inline std::optional<HeadLabel> head_box_from_hemisphere(const geom::SimilarityTransform& m_c,
                                                         const geom::CameraModel& cam_real,
                                                         int image_width, int image_height,
                                                         const HemisphereConfig& cfg = {},
                                                         const ReferenceHead& ref = reference_head()) {
    const geom::LandmarkSet sphere = head_bounding_sphere(m_c, cfg, ref);
    double min_u = 1e300, max_u = -1e300, min_v = 1e300, max_v = -1e300;
    int in_front = 0, visible = 0;
    for (int i = 0; i < sphere.count(); ++i) {
        const geom::Vector3 pc = cam_real.world_to_camera(sphere.points.row(i).transpose());
        if (pc.z() <= geom::kMinProjectionDepth) continue;
        ++in_front;
        const double u = cam_real.fx * pc.x() / pc.z() + cam_real.cx;
        const double v = cam_real.fy * pc.y() / pc.z() + cam_real.cy;
        min_u = std::min(min_u, u);
        max_u = std::max(max_u, u);
        min_v = std::min(min_v, v);
        max_v = std::max(max_v, v);
        if (u >= 0 && u <= image_width && v >= 0 && v <= image_height) ++visible;
    }
    if (in_front == 0) throw BehindCameraError("head bounding sphere entirely behind camera");

    const double x0 = std::max(0.0, min_u), x1 = std::min<double>(image_width, max_u);
    const double y0 = std::max(0.0, min_v), y1 = std::min<double>(image_height, max_v);
    if (!(x1 - x0 > 0.0) || !(y1 - y0 > 0.0)) return std::nullopt;

    HeadLabel label;
    label.bx = 0.5 * (x0 + x1);
    label.by = 0.5 * (y0 + y1);
    label.bw = x1 - x0;
    label.bh = y1 - y0;
    label.visibility = static_cast<double>(visible) / sphere.count();
    return label;
}

struct VarianceReport {
    double std_pitch = 0, std_yaw = 0, std_roll = 0, avg = 0;
    int heads_used = 0;
    int heads_skipped = 0;
};

/// Label stability across corner-subset sizes: per head, the per-angle
/// standard deviation of poses computed with N in {9,11,13,15,17}; reported
/// averaged over heads, plus the mean of the three angles.
inline VarianceReport label_variance_study(
    const std::vector<std::pair<geom::LandmarkSet, geom::CameraModel>>& heads,
    const ReferenceHead& ref = reference_head()) {
    if (heads.empty()) throw ArgumentError("label_variance_study: no heads");
    VarianceReport rep;
    for (const auto& [landmarks, cam] : heads) {
        std::vector<geom::EulerPose> poses;
        try {
            for (const auto& [n, idx] : ref.corner_indices) {
                (void)idx;
                poses.push_back(head_pose_from_landmarks(landmarks, cam, ref, n).first);
            }
        } catch (const Error&) {
            ++rep.heads_skipped;
            continue;
        }
        // circular-safe deviation: center each series on its first element.
        // Deviations under 1e-9 degrees are solver rounding noise, reported
        // as an exact zero.
        auto angle_std = [&](auto getter) {
            std::vector<double> c;
            for (const auto& p : poses) c.push_back(geom::wrap_angle(getter(p) - getter(poses[0])));
            const double mean = std::accumulate(c.begin(), c.end(), 0.0) / c.size();
            double var = 0;
            for (double v : c) var += (v - mean) * (v - mean);
            const double s = std::sqrt(var / c.size());
            return s < 1e-9 ? 0.0 : s;
        };
        rep.std_pitch += angle_std([](const geom::EulerPose& p) { return p.pitch; });
        rep.std_yaw += angle_std([](const geom::EulerPose& p) { return p.yaw; });
        rep.std_roll += angle_std([](const geom::EulerPose& p) { return p.roll; });
        ++rep.heads_used;
    }
    if (rep.heads_used > 0) {
        rep.std_pitch /= rep.heads_used;
        rep.std_yaw /= rep.heads_used;
        rep.std_roll /= rep.heads_used;
    }
    rep.avg = (rep.std_pitch + rep.std_yaw + rep.std_roll) / 3.0;
    return rep;
}

// ---------------------------------------------------------------------------
// Landmark-scene files: the dataset-agnostic input to label generation.
// Top-level JSON list of images, each with camera parameters and per-head
// 68x3 landmark arrays.
// ---------------------------------------------------------------------------

struct SceneHead {
    std::int64_t head_id = 0;
    geom::LandmarkSet landmarks;
};

struct SceneImage {
    std::int64_t image_id = 0;
    int width = 0;
    int height = 0;
    std::string file_name;  // optional in the schema; carried through when present
    geom::CameraModel camera;
    std::vector<SceneHead> heads;
};

inline std::vector<SceneImage> parse_scene_file(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open scene file: " + path.string());
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    if (!j.is_array()) throw ParseError(path.string() + ": top level must be a list of images");

    std::vector<SceneImage> out;
    for (size_t idx = 0; idx < j.size(); ++idx) {
        const std::string where = "image record " + std::to_string(idx);
        try {
            const auto& ji = j.at(idx);
            SceneImage im;
            im.image_id = ji.at("image_id").get<std::int64_t>();
            im.width = ji.at("width").get<int>();
            im.height = ji.at("height").get<int>();
            im.file_name = ji.value("file_name", std::string{});
            const auto& jc = ji.at("camera");
            im.camera.fx = jc.at("fx").get<double>();
            im.camera.fy = jc.at("fy").get<double>();
            im.camera.cx = jc.at("cx").get<double>();
            im.camera.cy = jc.at("cy").get<double>();
            const auto& jr = jc.at("R");
            const auto& jt = jc.at("t");
            if (jr.size() != 3 || jt.size() != 3) throw ValidationError(where + ": camera arity");
            for (int r = 0; r < 3; ++r) {
                if (jr.at(r).size() != 3) throw ValidationError(where + ": camera R arity");
                for (int c = 0; c < 3; ++c) im.camera.rotation(r, c) = jr.at(r).at(c).get<double>();
                im.camera.translation(r) = jt.at(r).get<double>();
            }
            if (im.camera.fx <= 0 || im.camera.fy <= 0) {
                throw ValidationError(where + ": non-positive focal length");
            }
            geom::validate_rotation(im.camera.rotation);
            for (const auto& jh : ji.at("heads")) {
                SceneHead head;
                head.head_id = jh.at("head_id").get<std::int64_t>();
                const auto& jl = jh.at("landmarks");
                Eigen::Matrix<double, Eigen::Dynamic, 3> pts(static_cast<int>(jl.size()), 3);
                for (size_t r = 0; r < jl.size(); ++r) {
                    if (jl.at(r).size() != 3) throw ValidationError(where + ": landmark arity");
                    for (int c = 0; c < 3; ++c) pts(static_cast<int>(r), c) = jl.at(r).at(c).get<double>();
                }
                head.landmarks = geom::LandmarkSet(pts);
                im.heads.push_back(std::move(head));
            }
            out.push_back(std::move(im));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(where + ": " + e.what());
        } catch (const InvalidRotationError& e) {
            throw ValidationError(where + ": " + e.what());
        }
    }
    return out;
}

inline std::string scene_file_to_json(const std::vector<SceneImage>& scenes) {
    auto fmt = [](double v) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.9f", v);
        return std::string(buf);
    };
    std::string out = "[";
    for (size_t i = 0; i < scenes.size(); ++i) {
        const auto& im = scenes[i];
        if (i) out += ',';
        out += "{\"camera\":{\"R\":[";
        for (int r = 0; r < 3; ++r) {
            if (r) out += ',';
            out += '[' + fmt(im.camera.rotation(r, 0)) + ',' + fmt(im.camera.rotation(r, 1)) + ',' +
                   fmt(im.camera.rotation(r, 2)) + ']';
        }
        out += "],\"cx\":" + fmt(im.camera.cx) + ",\"cy\":" + fmt(im.camera.cy);
        out += ",\"fx\":" + fmt(im.camera.fx) + ",\"fy\":" + fmt(im.camera.fy);
        out += ",\"t\":[" + fmt(im.camera.translation(0)) + ',' + fmt(im.camera.translation(1)) +
               ',' + fmt(im.camera.translation(2)) + "]}";
        if (!im.file_name.empty()) out += ",\"file_name\":\"" + data::detail::escape(im.file_name) + '"';
        out += ",\"heads\":[";
        for (size_t h = 0; h < im.heads.size(); ++h) {
            const auto& head = im.heads[h];
            if (h) out += ',';
            out += "{\"head_id\":" + std::to_string(head.head_id) + ",\"landmarks\":[";
            for (int r = 0; r < head.landmarks.count(); ++r) {
                if (r) out += ',';
                out += '[' + fmt(head.landmarks.points(r, 0)) + ',' + fmt(head.landmarks.points(r, 1)) +
                       ',' + fmt(head.landmarks.points(r, 2)) + ']';
            }
            out += "]}";
        }
        out += "],\"height\":" + std::to_string(im.height);
        out += ",\"image_id\":" + std::to_string(im.image_id);
        out += ",\"width\":" + std::to_string(im.width) + '}';
    }
    out += "]\n";
    return out;
}

struct BuildLabelsResult {
    data::DatasetFile dataset;
    int images_dropped = 0;
    int heads_dropped = 0;
};

/// Run the full label pipeline over a parsed scene list: pose via the
/// similarity-alignment path, box via the projected bounding sphere. Images
/// left with no valid head are dropped.
inline BuildLabelsResult build_labels(const std::vector<SceneImage>& scenes,
                                      const HemisphereConfig& cfg = {},
                                      int corner_count = kDefaultCornerCount,
                                      const ReferenceHead& ref = reference_head()) {
    std::vector<SceneImage> ordered = scenes;
    std::sort(ordered.begin(), ordered.end(),
              [](const SceneImage& a, const SceneImage& b) { return a.image_id < b.image_id; });

    BuildLabelsResult result;
    result.dataset.meta.generator = "mhpe-labelgen";
    std::int64_t next_ann = 1;
    for (auto& im : ordered) {
        std::sort(im.heads.begin(), im.heads.end(),
                  [](const SceneHead& a, const SceneHead& b) { return a.head_id < b.head_id; });
        std::vector<data::Annotation> anns;
        for (const auto& head : im.heads) {
            try {
                auto [pose, m_c] = head_pose_from_landmarks(head.landmarks, im.camera, ref, corner_count);
                const auto box = head_box_from_hemisphere(m_c, im.camera, im.width, im.height, cfg, ref);
                if (!box) {
                    ++result.heads_dropped;
                    continue;
                }
                data::Annotation a;
                a.ann_id = next_ann;
                a.image_id = im.image_id;
                a.bbox = {box->bx - 0.5 * box->bw, box->by - 0.5 * box->bh, box->bw, box->bh};
                auto clamp_half = [](double v) { return std::clamp(v, -90.0 + 1e-9, 90.0 - 1e-9); };
                a.pose = {clamp_half(pose.pitch), pose.yaw, clamp_half(pose.roll)};
                anns.push_back(a);
                ++next_ann;
            } catch (const BehindCameraError&) {
                ++result.heads_dropped;
            } catch (const DegenerateGeometryError&) {
                ++result.heads_dropped;
            }
        }
        if (anns.empty()) {
            ++result.images_dropped;
            continue;
        }
        data::ImageRecord rec;
        rec.image_id = im.image_id;
        rec.file_name = im.file_name;
        rec.width = im.width;
        rec.height = im.height;
        result.dataset.images.push_back(rec);
        for (auto& a : anns) result.dataset.annotations.push_back(a);
    }
    data::validate(result.dataset);
    return result;
}

}  // namespace mhpe::label
