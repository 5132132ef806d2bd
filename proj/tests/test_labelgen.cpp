// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>
#include <filesystem>
#include <fstream>

#include "mhpe/labelgen.hpp"
#include "mhpe/rng.hpp"
#include "support/random_geometry.hpp"

using namespace mhpe;
using namespace mhpe::geom;
using namespace mhpe::label;
namespace fs = std::filesystem;

namespace {

CameraModel synth_camera() {
    CameraModel cam;
    cam.fx = cam.fy = 300.0;
    cam.cx = cam.cy = 160.0;
    return cam;
}

/// Place the reference head in front of the camera with a given orientation:
/// landmarks = scale * R * (ref - centroid) + center.
LandmarkSet place_head(const Matrix3& r, const Vector3& center, double scale = 1.0) {
    const ReferenceHead& ref = reference_head();
    SimilarityTransform t;
    t.scale = scale;
    t.rotation = r;
    t.translation = center - scale * (r * ref.landmarks.centroid());
    return t.apply(ref.landmarks);
}

}  // namespace

TEST_CASE("corner selection returns the configured subsets") {
    const ReferenceHead& ref = reference_head();
    REQUIRE(ref.landmarks.count() == 68);
    const LandmarkSet s13 = select_corner_landmarks(ref.landmarks, 13);
    REQUIRE(s13.count() == 13);
    const auto& idx = ref.corner_indices.at(13);
    for (int i = 0; i < 13; ++i) {
        CHECK((s13.points.row(i) - ref.landmarks.points.row(idx[i])).norm() == 0.0);
    }
}

TEST_CASE("smaller corner sets nest inside larger ones") {
    const auto m = default_corner_indices();
    const std::vector<int> sizes = {9, 11, 13, 15, 17};
    for (size_t i = 0; i + 1 < sizes.size(); ++i) {
        const auto& small = m.at(sizes[i]);
        const auto& big = m.at(sizes[i + 1]);
        for (int v : small) CHECK(std::find(big.begin(), big.end(), v) != big.end());
        CHECK(small.size() == static_cast<size_t>(sizes[i]));
    }
}

TEST_CASE("unsupported corner count raises") {
    const ReferenceHead& ref = reference_head();
    CHECK_THROWS_AS(select_corner_landmarks(ref.landmarks, 10), ArgumentError);
    LandmarkSet short_head = ref.landmarks.subset({0, 1, 2, 3, 4});
    CHECK_THROWS_AS(select_corner_landmarks(short_head, 9), ArgumentError);
}

TEST_CASE("identity configuration recovers zero pose") {
    const ReferenceHead& ref = reference_head();
    const auto [pose, m_c] = head_pose_from_landmarks(ref.landmarks, ref.camera);
    CHECK(std::abs(pose.pitch) < 1e-9);
    CHECK(std::abs(pose.yaw) < 1e-9);
    CHECK(std::abs(pose.roll) < 1e-9);
    CHECK(m_c.scale == Catch::Approx(1.0));
}

TEST_CASE("pose recovery inverts a forward-synthesized rotation") {
    const CameraModel cam = synth_camera();
    const EulerPose target{15.0, -120.0, 5.0};
    const LandmarkSet real = place_head(euler_to_matrix(target), Vector3(2.0, -1.0, 80.0), 1.1);
    const auto [pose, m_c] = head_pose_from_landmarks(real, cam);
    CHECK(angular_abs_diff(pose.pitch, 15.0) < 1e-6);
    CHECK(angular_abs_diff(pose.yaw, -120.0) < 1e-6);
    CHECK(angular_abs_diff(pose.roll, 5.0) < 1e-6);
    CHECK(m_c.scale == Catch::Approx(1.1).margin(1e-9));
}

TEST_CASE("translation does not change recovered pose") {
    const CameraModel cam = synth_camera();
    const LandmarkSet real = place_head(Matrix3::Identity(), Vector3(12.0, 7.0, 95.0));
    const auto [pose, m_c] = head_pose_from_landmarks(real, cam);
    CHECK(std::abs(pose.pitch) < 1e-9);
    CHECK(std::abs(pose.yaw) < 1e-9);
    CHECK(std::abs(pose.roll) < 1e-9);
}

TEST_CASE("forward-synthesis inverse holds over seeded poses") {
    Rng rng(51);
    const CameraModel cam = synth_camera();
    for (int i = 0; i < 200; ++i) {
        EulerPose p = test_support::random_pose(rng, 88.9);
        p.pitch = rng.uniform(-65, 65);
        p.roll = rng.uniform(-60, 60);
        const double scale = rng.uniform(0.8, 1.3);
        const Vector3 center(rng.uniform(-20, 20), rng.uniform(-20, 20), rng.uniform(60, 140));
        const LandmarkSet real = place_head(euler_to_matrix(p), center, scale);
        const auto [q, m_c] = head_pose_from_landmarks(real, cam);
        CHECK(angular_abs_diff(q.pitch, p.pitch) <= 1e-5);
        CHECK(angular_abs_diff(q.yaw, p.yaw) <= 1e-5);
        CHECK(angular_abs_diff(q.roll, p.roll) <= 1e-5);
    }
}

TEST_CASE("pose recovery is invariant to the corner subset size") {
    const CameraModel cam = synth_camera();
    const LandmarkSet real =
        place_head(euler_to_matrix({22.0, 135.0, -14.0}), Vector3(-4.0, 3.0, 70.0), 0.95);
    for (int n : {9, 11, 13, 15, 17}) {
        const auto [pose, m_c] = head_pose_from_landmarks(real, cam, reference_head(), n);
        CHECK(angular_abs_diff(pose.pitch, 22.0) < 1e-6);
        CHECK(angular_abs_diff(pose.yaw, 135.0) < 1e-6);
        CHECK(angular_abs_diff(pose.roll, -14.0) < 1e-6);
    }
}

TEST_CASE("frontal on-axis head yields a centered box") {
    const CameraModel cam = synth_camera();
    const LandmarkSet real = place_head(Matrix3::Identity(), Vector3(0.0, 0.0, 90.0));
    const auto [pose, m_c] = head_pose_from_landmarks(real, cam);
    const auto box = head_box_from_hemisphere(m_c, cam, 320, 320);
    REQUIRE(box.has_value());
    CHECK(box->bx == Catch::Approx(160.0).margin(1.0));
    CHECK(box->by == Catch::Approx(160.0).margin(1.0));
    CHECK(box->visibility == Catch::Approx(1.0));
}

TEST_CASE("box contains all projected landmarks") {
    Rng rng(52);
    const CameraModel cam = synth_camera();
    for (int i = 0; i < 20; ++i) {
        const EulerPose p = test_support::random_pose(rng);
        const LandmarkSet real = place_head(euler_to_matrix(p), Vector3(0.0, 0.0, rng.uniform(70, 140)));
        const auto [pose, m_c] = head_pose_from_landmarks(real, cam);
        const auto box = head_box_from_hemisphere(m_c, cam, 320, 320);
        REQUIRE(box.has_value());
        const auto uv = project_points(cam, real);
        for (const auto& q : uv) {
            CHECK(q.x() >= box->bx - 0.5 * box->bw - 1e-6);
            CHECK(q.x() <= box->bx + 0.5 * box->bw + 1e-6);
            CHECK(q.y() >= box->by - 0.5 * box->bh - 1e-6);
            CHECK(q.y() <= box->by + 0.5 * box->bh + 1e-6);
        }
    }
}

TEST_CASE("doubling depth halves the box size within 2 percent") {
    const CameraModel cam = synth_camera();
    const LandmarkSet near_head = place_head(Matrix3::Identity(), Vector3(0.0, 0.0, 80.0));
    const LandmarkSet far_head = place_head(Matrix3::Identity(), Vector3(0.0, 0.0, 160.0));
    const auto m_near = head_pose_from_landmarks(near_head, cam).second;
    const auto m_far = head_pose_from_landmarks(far_head, cam).second;
    // use a large virtual image so neither box clips
    const auto b_near = head_box_from_hemisphere(m_near, cam, 4000, 4000);
    const auto b_far = head_box_from_hemisphere(m_far, cam, 4000, 4000);
    REQUIRE(b_near.has_value());
    REQUIRE(b_far.has_value());
    CHECK(b_far->bw == Catch::Approx(0.5 * b_near->bw).epsilon(0.02));
    CHECK(b_far->bh == Catch::Approx(0.5 * b_near->bh).epsilon(0.02));
}

TEST_CASE("doubling kappa strictly contains the unit box") {
    const CameraModel cam = synth_camera();
    const LandmarkSet real = place_head(euler_to_matrix({10, 40, -5}), Vector3(3.0, -2.0, 90.0));
    const auto m_c = head_pose_from_landmarks(real, cam).second;
    const auto b1 = head_box_from_hemisphere(m_c, cam, 4000, 4000, {1.0, 3});
    const auto b2 = head_box_from_hemisphere(m_c, cam, 4000, 4000, {2.0, 3});
    REQUIRE(b1.has_value());
    REQUIRE(b2.has_value());
    CHECK(b2->bx - 0.5 * b2->bw < b1->bx - 0.5 * b1->bw);
    CHECK(b2->bx + 0.5 * b2->bw > b1->bx + 0.5 * b1->bw);
    CHECK(b2->by - 0.5 * b2->bh < b1->by - 0.5 * b1->bh);
    CHECK(b2->by + 0.5 * b2->bh > b1->by + 0.5 * b1->bh);
}

TEST_CASE("pose does not depend on the hemisphere config") {
    const CameraModel cam = synth_camera();
    const LandmarkSet real = place_head(euler_to_matrix({5, 60, 10}), Vector3(0, 0, 85.0));
    const auto a = head_pose_from_landmarks(real, cam).first;
    // hemisphere configuration only affects boxes; pose path is separate
    const auto b = head_pose_from_landmarks(real, cam).first;
    CHECK(a.pitch == b.pitch);
    CHECK(a.yaw == b.yaw);
    CHECK(a.roll == b.roll);
}

TEST_CASE("box does not depend on the corner subset size") {
    const CameraModel cam = synth_camera();
    const LandmarkSet real = place_head(euler_to_matrix({5, 60, 10}), Vector3(0, 0, 85.0));
    std::optional<HeadLabel> prev;
    for (int n : {9, 11, 13, 15, 17}) {
        const auto m_c = head_pose_from_landmarks(real, cam, reference_head(), n).second;
        const auto box = head_box_from_hemisphere(m_c, cam, 320, 320);
        REQUIRE(box.has_value());
        if (prev) {
            CHECK(box->bx == Catch::Approx(prev->bx).margin(1e-6));
            CHECK(box->bw == Catch::Approx(prev->bw).margin(1e-6));
        }
        prev = box;
    }
}

TEST_CASE("variance study is exactly zero on noise-free heads") {
    Rng rng(53);
    const CameraModel cam = synth_camera();
    std::vector<std::pair<LandmarkSet, CameraModel>> heads;
    for (int i = 0; i < 10; ++i) {
        const EulerPose p = test_support::random_pose(rng, 170.0);
        heads.emplace_back(place_head(euler_to_matrix(p), Vector3(0, 0, rng.uniform(70, 120))), cam);
    }
    const VarianceReport rep = label_variance_study(heads);
    CHECK(rep.heads_used == 10);
    CHECK(rep.heads_skipped == 0);
    CHECK(rep.std_pitch == 0.0);
    CHECK(rep.std_yaw == 0.0);
    CHECK(rep.std_roll == 0.0);
    CHECK(rep.avg == 0.0);
}

TEST_CASE("variance grows with landmark noise") {
    const CameraModel cam = synth_camera();
    auto run_with_noise = [&](double sigma, int seed) {
        Rng rng(seed);
        std::vector<std::pair<LandmarkSet, CameraModel>> heads;
        for (int i = 0; i < 30; ++i) {
            const EulerPose p = test_support::random_pose(rng, 170.0);
            LandmarkSet real = place_head(euler_to_matrix(p), Vector3(0, 0, rng.uniform(70, 120)));
            for (int r = 0; r < real.count(); ++r)
                for (int c = 0; c < 3; ++c) real.points(r, c) += rng.normal(0.0, sigma);
            heads.emplace_back(std::move(real), cam);
        }
        return label_variance_study(heads);
    };
    const VarianceReport low = run_with_noise(0.02, 54);
    const VarianceReport high = run_with_noise(0.2, 54);
    CHECK(low.avg > 0.0);
    CHECK(high.avg > low.avg);
}

TEST_CASE("build_labels keeps one fully visible head") {
    const CameraModel cam = synth_camera();
    SceneImage im;
    im.image_id = 1;
    im.width = 320;
    im.height = 320;
    im.camera = cam;
    im.heads.push_back({1, place_head(Matrix3::Identity(), Vector3(0, 0, 90.0))});
    const BuildLabelsResult res = build_labels({im});
    CHECK(res.dataset.images.size() == 1);
    CHECK(res.dataset.annotations.size() == 1);
    CHECK(res.images_dropped == 0);
    CHECK(res.dataset.annotations[0].pose[0] == Catch::Approx(0.0).margin(1e-6));
}

TEST_CASE("build_labels drops an image whose only head is behind the camera") {
    const CameraModel cam = synth_camera();
    SceneImage im;
    im.image_id = 1;
    im.width = 320;
    im.height = 320;
    im.camera = cam;
    im.heads.push_back({1, place_head(Matrix3::Identity(), Vector3(0, 0, -60.0))});
    const BuildLabelsResult res = build_labels({im});
    CHECK(res.dataset.images.empty());
    CHECK(res.images_dropped == 1);
    CHECK(res.heads_dropped == 1);
}

TEST_CASE("build_labels matches a brute-force visibility count on a 10-image scene") {
    Rng rng(55);
    const CameraModel cam = synth_camera();
    std::vector<SceneImage> scenes;
    int expected = 0;
    for (int i = 0; i < 10; ++i) {
        SceneImage im;
        im.image_id = i + 1;
        im.width = 320;
        im.height = 320;
        im.camera = cam;
        for (int h = 0; h < 3; ++h) {
            // spread centers so that some heads fall outside the image
            const Vector3 center(rng.uniform(-80, 80), rng.uniform(-80, 80), rng.uniform(60, 130));
            const EulerPose p = test_support::random_pose(rng, 179.0);
            im.heads.push_back(
                {h + 1, place_head(euler_to_matrix(p), center, rng.uniform(0.8, 1.2))});
        }
        scenes.push_back(im);
        // brute force: recompute each head's clipped sphere box directly
        for (const auto& head : im.heads) {
            const auto m_c = head_pose_from_landmarks(head.landmarks, cam).second;
            const auto box = head_box_from_hemisphere(m_c, cam, 320, 320);
            if (box.has_value()) ++expected;
        }
    }
    const BuildLabelsResult res = build_labels(scenes);
    CHECK(static_cast<int>(res.dataset.annotations.size()) == expected);
}

TEST_CASE("scene files round trip and reject malformed records") {
    const CameraModel cam = synth_camera();
    SceneImage im;
    im.image_id = 3;
    im.width = 320;
    im.height = 240;
    im.camera = cam;
    im.heads.push_back({1, place_head(euler_to_matrix({4, 100, -7}), Vector3(0, 0, 95.0))});
    const fs::path dir = fs::temp_directory_path() / "mhpe_labelgen_test";
    fs::create_directories(dir);
    const fs::path p = dir / "scene.json";
    std::ofstream(p) << scene_file_to_json({im});
    const auto back = parse_scene_file(p);
    REQUIRE(back.size() == 1);
    CHECK(back[0].image_id == 3);
    REQUIRE(back[0].heads.size() == 1);
    const auto pose = head_pose_from_landmarks(back[0].heads[0].landmarks, back[0].camera).first;
    CHECK(angular_abs_diff(pose.yaw, 100.0) < 1e-4);

    const fs::path bad = dir / "bad.json";
    std::ofstream(bad) << "[{\"image_id\": 1}]";
    try {
        parse_scene_file(bad);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("record 0") != std::string::npos);
    }
}
