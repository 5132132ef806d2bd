// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <vector>

#include "mhpe/image.hpp"
#include "mhpe/labelgen.hpp"
#include "mhpe/rng.hpp"

namespace mhpe::synth {

/// Controls for the synthetic multi-head scene sampler.
struct SceneSpec {
    int image_width = 320;
    int image_height = 320;
    int heads_min = 2;
    int heads_max = 5;
    double yaw_min = -180.0;  // uniform in (yaw_min, yaw_max]
    double yaw_max = 180.0;
    double pitch_sigma = 25.0;  // normal, clamped
    double pitch_max = 60.0;
    double roll_sigma = 20.0;
    double roll_max = 55.0;
    double depth_min = 55.0;
    double depth_max = 110.0;
    double scale_min = 0.85;
    double scale_max = 1.15;
    double center_margin = 0.15;   // head centers stay inside this image fraction
    double max_overlap_iou = 0.6;  // estimated-box overlap rejection
    double hemisphere_kappa = 1.0;
    int placement_retries = 60;
};

inline void validate(const SceneSpec& spec) {
    if (spec.image_width < 64 || spec.image_height < 64) throw ConfigError("scene: image too small");
    if (spec.heads_min < 1 || spec.heads_max < spec.heads_min) throw ConfigError("scene: bad head range");
    if (spec.yaw_min < -180.0 || spec.yaw_max > 180.0 || spec.yaw_min >= spec.yaw_max) {
        throw ConfigError("scene: yaw range must sit inside (-180, 180]");
    }
    if (spec.pitch_max >= 90.0 || spec.roll_max >= 90.0 || spec.pitch_max <= 0 || spec.roll_max <= 0) {
        throw ConfigError("scene: pitch/roll limits must stay inside (-90, 90)");
    }
    if (spec.depth_min <= 0 || spec.depth_max < spec.depth_min) throw ConfigError("scene: bad depth range");
    if (spec.scale_min <= 0 || spec.scale_max < spec.scale_min) throw ConfigError("scene: bad scale range");
}

inline geom::CameraModel scene_camera(const SceneSpec& spec) {
    geom::CameraModel cam;
    cam.fx = cam.fy = 0.9375 * std::min(spec.image_width, spec.image_height);
    cam.cx = spec.image_width / 2.0;
    cam.cy = spec.image_height / 2.0;
    return cam;
}

struct HeadPlacement {
    geom::EulerPose pose;
    geom::Vector3 center;  // world position of the landmark centroid
    double scale = 1.0;
};

struct Scene {
    std::uint64_t seed = 0;
    SceneSpec spec;
    std::vector<HeadPlacement> heads;
};

namespace detail {

inline double iou_corner(double ax, double ay, double aw, double ah, double bx, double by,
                         double bw, double bh) {
    const double ix = std::max(0.0, std::min(ax + aw, bx + bw) - std::max(ax, bx));
    const double iy = std::max(0.0, std::min(ay + ah, by + bh) - std::max(ay, by));
    const double inter = ix * iy;
    const double uni = aw * ah + bw * bh - inter;
    return uni > 0 ? inter / uni : 0.0;
}

}  // namespace detail

/// Observed landmark set for a placement: scale * R * (ref - centroid) + center.
inline geom::LandmarkSet placement_landmarks(const HeadPlacement& h,
                                             const label::ReferenceHead& ref = label::reference_head()) {
    geom::SimilarityTransform t;
    t.scale = h.scale;
    t.rotation = geom::euler_to_matrix(h.pose);
    t.translation = h.center - h.scale * (t.rotation * ref.landmarks.centroid());
    return t.apply(ref.landmarks);
}

/// Draw head placements for one image. Rejects placements whose estimated
/// boxes overlap at IoU above the spec limit; deterministic in the seed.
inline Scene sample_scene(const SceneSpec& spec, std::uint64_t seed) {
    validate(spec);
    const geom::CameraModel cam = scene_camera(spec);
    const double head_size = label::reference_head().landmarks.max_pairwise_distance();

    Rng rng(seed);
    Scene scene;
    scene.seed = seed;
    scene.spec = spec;
    const int target = static_cast<int>(rng.uniform_int(spec.heads_min, spec.heads_max));
    std::vector<std::array<double, 4>> boxes;  // accepted estimates, corner format
    for (int i = 0; i < target; ++i) {
        bool placed = false;
        for (int attempt = 0; attempt < spec.placement_retries && !placed; ++attempt) {
            HeadPlacement h;
            h.pose.yaw = rng.uniform(spec.yaw_min, spec.yaw_max);
            h.pose.pitch = std::clamp(rng.normal(0.0, spec.pitch_sigma), -spec.pitch_max, spec.pitch_max);
            h.pose.roll = std::clamp(rng.normal(0.0, spec.roll_sigma), -spec.roll_max, spec.roll_max);
            h.scale = rng.uniform(spec.scale_min, spec.scale_max);
            const double z = rng.uniform(spec.depth_min, spec.depth_max);
            const double u = rng.uniform(spec.center_margin * spec.image_width,
                                         (1.0 - spec.center_margin) * spec.image_width);
            const double v = rng.uniform(spec.center_margin * spec.image_height,
                                         (1.0 - spec.center_margin) * spec.image_height);
            h.center = geom::Vector3((u - cam.cx) * z / cam.fx, (v - cam.cy) * z / cam.fy, z);

            const double r_px = spec.hemisphere_kappa * head_size * h.scale * cam.fx / z;
            const std::array<double, 4> est{u - r_px, v - r_px, 2 * r_px, 2 * r_px};
            bool ok = true;
            for (const auto& b : boxes) {
                if (detail::iou_corner(est[0], est[1], est[2], est[3], b[0], b[1], b[2], b[3]) >
                    spec.max_overlap_iou) {
                    ok = false;
                    break;
                }
            }
            if (!ok) continue;
            boxes.push_back(est);
            scene.heads.push_back(h);
            placed = true;
        }
        if (!placed && static_cast<int>(scene.heads.size()) < spec.heads_min) {
            throw PlacementError("could not place the minimum number of heads");
        }
        if (!placed) break;
    }
    return scene;
}

// ---------------------------------------------------------------------------
// Rendering: flat-shaded deformed icospheres with six orientation colors, a
// nose bump and an up marker, drawn far-to-near over a smooth noise field.
// ---------------------------------------------------------------------------

namespace detail {

struct ProxyMesh {
    std::vector<Eigen::Vector3d> local;  // unit-scale local coordinates
    std::vector<std::array<int, 3>> faces;
    std::vector<std::array<std::uint8_t, 3>> face_color;
};

inline std::array<std::uint8_t, 3> sector_color(const Eigen::Vector3d& dir, double radius) {
    static const Eigen::Vector3d nose_axis = Eigen::Vector3d(0.0, 0.15, -1.0).normalized();
    static const Eigen::Vector3d up_axis = Eigen::Vector3d(0.0, -1.0, -0.35).normalized();
    if (dir.dot(nose_axis) > std::cos(deg2rad(28.0)) && radius > 1.02) return {250, 220, 40};
    if (dir.dot(up_axis) > std::cos(deg2rad(16.0))) return {0, 200, 200};
    int axis = 0;
    dir.cwiseAbs().maxCoeff(&axis);
    const bool pos = dir(axis) >= 0;
    if (axis == 0) return pos ? std::array<std::uint8_t, 3>{200, 50, 40}    // person's left
                              : std::array<std::uint8_t, 3>{60, 170, 60};   // person's right
    if (axis == 1) return pos ? std::array<std::uint8_t, 3>{150, 60, 160}   // chin side
                              : std::array<std::uint8_t, 3>{240, 240, 230}; // crown
    return pos ? std::array<std::uint8_t, 3>{40, 60, 140}                   // back of head
               : std::array<std::uint8_t, 3>{230, 190, 150};                // face
}

inline const ProxyMesh& proxy_mesh() {
    static const ProxyMesh mesh = [] {
        ProxyMesh m;
        const geom::Icosphere s = geom::make_icosphere(2);
        const Eigen::Vector3d nose_axis = Eigen::Vector3d(0.0, 0.15, -1.0).normalized();
        const double cone = std::cos(deg2rad(30.0));
        m.local.reserve(s.vertices.size());
        for (const auto& v : s.vertices) {
            const double c = v.dot(nose_axis);
            double r = 1.0;
            if (c > cone) r += 0.45 * (c - cone) / (1.0 - cone);
            m.local.push_back(v * r);
        }
        m.faces = s.faces;
        for (const auto& f : s.faces) {
            const Eigen::Vector3d centroid = (m.local[f[0]] + m.local[f[1]] + m.local[f[2]]) / 3.0;
            m.face_color.push_back(sector_color(centroid.normalized(), centroid.norm()));
        }
        return m;
    }();
    return mesh;
}

inline void fill_background(img::Image& im, Rng& rng) {
    const int g = 9;
    std::vector<std::array<double, 3>> grid(g * g);
    for (auto& c : grid)
        for (auto& v : c) v = rng.uniform(30.0, 220.0);
    for (int y = 0; y < im.height; ++y) {
        const double gy = static_cast<double>(y) / im.height * (g - 1);
        const int y0 = std::min(g - 2, static_cast<int>(gy));
        const double fy = gy - y0;
        for (int x = 0; x < im.width; ++x) {
            const double gx = static_cast<double>(x) / im.width * (g - 1);
            const int x0 = std::min(g - 2, static_cast<int>(gx));
            const double fx = gx - x0;
            for (int c = 0; c < 3; ++c) {
                const double v00 = grid[y0 * g + x0][c], v01 = grid[y0 * g + x0 + 1][c];
                const double v10 = grid[(y0 + 1) * g + x0][c], v11 = grid[(y0 + 1) * g + x0 + 1][c];
                const double v = (1 - fy) * ((1 - fx) * v00 + fx * v01) + fy * ((1 - fx) * v10 + fx * v11);
                im.px(x, y)[c] = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
            }
        }
    }
}

}  // namespace detail

/// Visual radius of the head proxy relative to the reference head size.
inline constexpr double kProxyRadiusFactor = 0.5;

struct RenderResult {
    img::Image image;
    std::vector<label::HeadLabel> labels;  // heads surviving image clipping
};

/// Rasterize a scene and produce its ground-truth labels. Labels go through
/// the same alignment-and-projection path as external landmark data rather
/// than copying the sampler's pose.
inline RenderResult render_scene(const Scene& scene,
                                 const label::ReferenceHead& ref = label::reference_head()) {
    const geom::CameraModel cam = scene_camera(scene.spec);
    RenderResult out;
    out.image = img::Image(scene.spec.image_width, scene.spec.image_height);
    Rng bg_rng(derive_seed(scene.seed, 0xb2c7a11du));
    detail::fill_background(out.image, bg_rng);

    const double head_size = ref.landmarks.max_pairwise_distance();
    const double proxy_radius = kProxyRadiusFactor * head_size;

    // painter's order: far heads first
    std::vector<int> order(scene.heads.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return scene.heads[a].center.z() > scene.heads[b].center.z();
    });

    const detail::ProxyMesh& mesh = detail::proxy_mesh();
    for (int idx : order) {
        const HeadPlacement& h = scene.heads[idx];
        const geom::Matrix3 r = geom::euler_to_matrix(h.pose);
        std::vector<Eigen::Vector3d> cam_pts(mesh.local.size());
        std::vector<Eigen::Vector2d> px(mesh.local.size());
        std::vector<bool> valid(mesh.local.size());
        for (size_t i = 0; i < mesh.local.size(); ++i) {
            const geom::Vector3 world = h.center + h.scale * (r * (proxy_radius * mesh.local[i]));
            const geom::Vector3 pc = cam.world_to_camera(world);
            cam_pts[i] = pc;
            valid[i] = pc.z() > geom::kMinProjectionDepth;
            if (valid[i]) {
                px[i] = {cam.fx * pc.x() / pc.z() + cam.cx, cam.fy * pc.y() / pc.z() + cam.cy};
            }
        }
        std::vector<int> face_order(mesh.faces.size());
        std::iota(face_order.begin(), face_order.end(), 0);
        std::stable_sort(face_order.begin(), face_order.end(), [&](int a, int b) {
            const auto za = cam_pts[mesh.faces[a][0]].z() + cam_pts[mesh.faces[a][1]].z() +
                            cam_pts[mesh.faces[a][2]].z();
            const auto zb = cam_pts[mesh.faces[b][0]].z() + cam_pts[mesh.faces[b][1]].z() +
                            cam_pts[mesh.faces[b][2]].z();
            return za > zb;
        });
        for (int f : face_order) {
            const auto& face = mesh.faces[f];
            if (!valid[face[0]] || !valid[face[1]] || !valid[face[2]]) continue;
            const auto& c = mesh.face_color[f];
            img::fill_triangle(out.image, px[face[0]].x(), px[face[0]].y(), px[face[1]].x(),
                               px[face[1]].y(), px[face[2]].x(), px[face[2]].y(), c[0], c[1], c[2]);
        }
    }

    // labels in sampling order, via the landmark alignment pipeline
    label::HemisphereConfig hemi;
    hemi.kappa = scene.spec.hemisphere_kappa;
    for (const HeadPlacement& h : scene.heads) {
        const geom::LandmarkSet real = placement_landmarks(h, ref);
        try {
            const auto [pose, m_c] = label::head_pose_from_landmarks(real, cam, ref);
            const auto box = label::head_box_from_hemisphere(m_c, cam, scene.spec.image_width,
                                                             scene.spec.image_height, hemi, ref);
            if (!box) continue;
            label::HeadLabel lab = *box;
            lab.pose = pose;
            out.labels.push_back(lab);
        } catch (const BehindCameraError&) {
            continue;
        }
    }
    return out;
}

struct BenchmarkResult {
    std::filesystem::path train_json;
    std::filesystem::path val_json;
    std::filesystem::path train_scenes;
    std::filesystem::path val_scenes;
    int train_images = 0;
    int val_images = 0;
    int train_annotations = 0;
    int val_annotations = 0;
};

namespace detail {

inline label::SceneImage to_scene_image(const Scene& scene, std::int64_t image_id,
                                        const std::string& file_name) {
    label::SceneImage im;
    im.image_id = image_id;
    im.width = scene.spec.image_width;
    im.height = scene.spec.image_height;
    im.file_name = file_name;
    im.camera = scene_camera(scene.spec);
    std::int64_t head_id = 1;
    for (const auto& h : scene.heads) {
        im.heads.push_back({head_id++, placement_landmarks(h)});
    }
    return im;
}

inline int write_split(const SceneSpec& spec, int count, std::uint64_t global_seed,
                       std::uint64_t stream_offset, const std::string& prefix,
                       const std::filesystem::path& out_dir, std::uint64_t meta_seed,
                       std::filesystem::path& json_path, std::filesystem::path& scenes_path) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir / "images");
    std::vector<label::SceneImage> scene_images;
    for (int i = 0; i < count; ++i) {
        const Scene scene = sample_scene(spec, derive_seed(global_seed, stream_offset + i));
        const RenderResult rendered = render_scene(scene);
        char name[64];
        std::snprintf(name, sizeof(name), "images/%s_%05d.png", prefix.c_str(), i + 1);
        img::write_png(out_dir / name, rendered.image);
        scene_images.push_back(to_scene_image(scene, i + 1, name));
    }
    scenes_path = out_dir / (prefix + "_scenes.json");
    {
        std::ofstream f(scenes_path, std::ios::binary);
        if (!f) throw IoError("cannot write " + scenes_path.string());
        f << label::scene_file_to_json(scene_images);
    }
    label::HemisphereConfig hemi;
    hemi.kappa = spec.hemisphere_kappa;
    label::BuildLabelsResult labels = label::build_labels(scene_images, hemi);
    labels.dataset.meta.generator = "mhpe-synthgen";
    labels.dataset.meta.seed = meta_seed;
    json_path = out_dir / (prefix + ".json");
    data::save(labels.dataset, json_path);
    return static_cast<int>(labels.dataset.annotations.size());
}

}  // namespace detail

/// Generate a train/val benchmark: PNG images, canonical dataset files, and
/// the landmark scene files the labels were derived from. A pure function of
/// (spec, counts, seed).
inline BenchmarkResult generate_benchmark(const SceneSpec& spec, int train_count, int val_count,
                                          std::uint64_t seed, const std::filesystem::path& out_dir) {
    if (train_count < 1 || val_count < 1) throw ConfigError("benchmark counts must be >= 1");
    validate(spec);
    BenchmarkResult res;
    res.train_images = train_count;
    res.val_images = val_count;
    res.train_annotations = detail::write_split(spec, train_count, seed, 0, "train", out_dir, seed,
                                                res.train_json, res.train_scenes);
    res.val_annotations = detail::write_split(spec, val_count, seed, 1u << 24, "val", out_dir, seed,
                                              res.val_json, res.val_scenes);
    return res;
}

}  // namespace mhpe::synth
