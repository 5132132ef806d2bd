// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include "mhpe/geometry.hpp"
#include "mhpe/rng.hpp"
#include "support/random_geometry.hpp"

using namespace mhpe;
using namespace mhpe::geom;
using test_support::random_landmarks;
using test_support::random_pose;
using test_support::random_rotation;

TEST_CASE("wrap_angle maps into (-180, 180]") {
    CHECK(wrap_angle(190.0) == Catch::Approx(-170.0));
    CHECK(wrap_angle(-180.0) == Catch::Approx(180.0));
    CHECK(wrap_angle(725.0) == Catch::Approx(5.0));
    CHECK(wrap_angle(180.0) == Catch::Approx(180.0));
    CHECK(wrap_angle(0.0) == 0.0);
    CHECK_THROWS_AS(wrap_angle(std::numeric_limits<double>::infinity()), NonFiniteError);
    CHECK_THROWS_AS(wrap_angle(std::nan("")), NonFiniteError);
}

TEST_CASE("wrap_angle is idempotent") {
    Rng rng(11);
    for (int i = 0; i < 2000; ++i) {
        const double a = rng.uniform(-5000.0, 5000.0);
        const double w = wrap_angle(a);
        CHECK(w > -180.0);
        CHECK(w <= 180.0);
        CHECK(wrap_angle(w) == w);
    }
}

TEST_CASE("angular_abs_diff basics") {
    CHECK(angular_abs_diff(179.0, -179.0) == Catch::Approx(2.0));
    CHECK(angular_abs_diff(90.0, -90.0) == Catch::Approx(180.0));
    Rng rng(12);
    for (int i = 0; i < 100; ++i) {
        const double x = rng.uniform(-180.0, 180.0);
        CHECK(angular_abs_diff(x, x) == 0.0);
    }
}

TEST_CASE("angular_abs_diff is invariant to 360-degree shifts") {
    Rng rng(13);
    for (int i = 0; i < 2000; ++i) {
        const double a = rng.uniform(-180.0, 180.0);
        const double b = rng.uniform(-180.0, 180.0);
        const int k = static_cast<int>(rng.uniform_int(-4, 4));
        const int m = static_cast<int>(rng.uniform_int(-4, 4));
        CHECK(angular_abs_diff(a + 360.0 * k, b + 360.0 * m) ==
              Catch::Approx(angular_abs_diff(a, b)).margin(1e-9));
    }
}

TEST_CASE("euler_to_matrix of zero pose is identity") {
    CHECK((euler_to_matrix({0, 0, 0}) - Matrix3::Identity()).norm() == Catch::Approx(0.0));
}

TEST_CASE("euler round trip at (10, 20, 30)") {
    const EulerPose p{10, 20, 30};
    const EulerPose q = matrix_to_euler(euler_to_matrix(p));
    CHECK(q.pitch == Catch::Approx(10.0).margin(1e-9));
    CHECK(q.yaw == Catch::Approx(20.0).margin(1e-9));
    CHECK(q.roll == Catch::Approx(30.0).margin(1e-9));
    CHECK_FALSE(q.gimbal);
}

TEST_CASE("yaw 90 hits the gimbal branch") {
    const Matrix3 r = euler_to_matrix({0, 90, 0});
    CHECK(std::abs(r(0, 2) - 1.0) < 1e-12);  // sin(yaw) column structure
    CHECK(std::hypot(r(1, 2), r(2, 2)) < 1e-12);
    const EulerPose q = matrix_to_euler(r);
    CHECK(q.gimbal);
    CHECK(q.yaw == Catch::Approx(90.0));
    CHECK(q.roll == 0.0);
}

TEST_CASE("gimbal branch folds roll into pitch") {
    // At yaw = +90 only pitch+roll is observable; canonical output has roll=0.
    const EulerPose q = matrix_to_euler(euler_to_matrix({20, 90, 30}));
    CHECK(q.gimbal);
    CHECK(q.roll == 0.0);
    CHECK(q.pitch == Catch::Approx(50.0).margin(1e-7));
    const EulerPose q2 = matrix_to_euler(euler_to_matrix({20, -90, 30}));
    CHECK(q2.gimbal);
    CHECK(q2.yaw == Catch::Approx(-90.0));
    CHECK(q2.pitch == Catch::Approx(-10.0).margin(1e-7));
}

TEST_CASE("full-range yaw branch round trips") {
    const EulerPose p{-30, 150, 45};
    const EulerPose q = matrix_to_euler(euler_to_matrix(p));
    CHECK(q.pitch == Catch::Approx(-30.0).margin(1e-9));
    CHECK(q.yaw == Catch::Approx(150.0).margin(1e-9));
    CHECK(q.roll == Catch::Approx(45.0).margin(1e-9));
}

TEST_CASE("matrix_to_euler rejects non-orthonormal input") {
    Matrix3 bad = Matrix3::Identity();
    bad(0, 0) = 1.1;
    CHECK_THROWS_AS(matrix_to_euler(bad), InvalidRotationError);
    Matrix3 reflect = Matrix3::Identity();
    reflect(2, 2) = -1.0;  // det = -1
    CHECK_THROWS_AS(matrix_to_euler(reflect), InvalidRotationError);
}

TEST_CASE("random rotations reconstruct within 1e-8 Frobenius") {
    Rng rng(21);
    for (int i = 0; i < 1000; ++i) {
        const Matrix3 r = random_rotation(rng);
        const EulerPose p = matrix_to_euler(r);
        if (p.gimbal) continue;
        CHECK((euler_to_matrix(p) - r).norm() < 1e-8);
    }
}

TEST_CASE("10^4 seeded poses round trip away from gimbal") {
    Rng rng(22);
    int checked = 0;
    for (int i = 0; i < 10000; ++i) {
        const EulerPose p = random_pose(rng, 89.0);
        const Matrix3 r = euler_to_matrix(p);
        const Matrix3 r2 = euler_to_matrix(matrix_to_euler(r));
        REQUIRE((r2 - r).norm() < 1e-8);
        ++checked;
    }
    CHECK(checked == 10000);
}

TEST_CASE("euler round trip reproduces angles to 1e-9 degrees") {
    Rng rng(23);
    for (int i = 0; i < 2000; ++i) {
        EulerPose p = random_pose(rng);
        if (std::abs(std::abs(p.yaw) - 90.0) < 1.0) continue;
        const EulerPose q = matrix_to_euler(euler_to_matrix(p));
        CHECK(angular_abs_diff(q.pitch, p.pitch) < 1e-9);
        CHECK(angular_abs_diff(q.yaw, p.yaw) < 1e-9);
        CHECK(angular_abs_diff(q.roll, p.roll) < 1e-9);
    }
}

TEST_CASE("horn_align on identical sets is identity") {
    Rng rng(31);
    const LandmarkSet pts = random_landmarks(rng, 13);
    const SimilarityTransform t = horn_align(pts, pts);
    CHECK(t.scale == Catch::Approx(1.0).margin(1e-12));
    CHECK((t.rotation - Matrix3::Identity()).norm() < 1e-9);
    CHECK(t.translation.norm() < 1e-9);
}

TEST_CASE("horn_align recovers a known similarity transform") {
    Rng rng(32);
    const LandmarkSet src = random_landmarks(rng, 11);
    SimilarityTransform gt;
    gt.scale = 2.5;
    gt.rotation = random_rotation(rng);
    gt.translation = Vector3(0.3, -1.2, 4.0);
    const LandmarkSet dst = gt.apply(src);

    const SimilarityTransform est = horn_align(src, dst);
    CHECK(est.scale == Catch::Approx(2.5).margin(1e-6));
    CHECK((est.rotation - gt.rotation).norm() < 1e-6);
    CHECK((est.translation - gt.translation).norm() < 1e-6);
}

TEST_CASE("horn_align is exact for all supported corner counts") {
    for (int n : {3, 9, 11, 13, 15, 17}) {
        Rng rng(100 + n);
        const LandmarkSet src = random_landmarks(rng, n);
        SimilarityTransform gt;
        gt.scale = rng.uniform(0.5, 3.0);
        gt.rotation = random_rotation(rng);
        gt.translation = Vector3(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2));
        const LandmarkSet dst = gt.apply(src);
        const SimilarityTransform est = horn_align(src, dst);
        double residual = 0.0;
        for (int i = 0; i < n; ++i) {
            residual = std::max(residual, (est.apply(Vector3(src.points.row(i).transpose())) -
                                           dst.points.row(i).transpose())
                                              .norm());
        }
        CHECK(residual < 1e-6);
    }
}

TEST_CASE("horn_align under gaussian noise stays near the noise floor") {
    Rng rng(33);
    const double sigma = 0.01;
    const LandmarkSet src = random_landmarks(rng, 13);
    SimilarityTransform gt;
    gt.scale = 1.7;
    gt.rotation = random_rotation(rng);
    gt.translation = Vector3(1, 2, 3);
    LandmarkSet dst = gt.apply(src);
    for (int i = 0; i < dst.count(); ++i)
        for (int j = 0; j < 3; ++j) dst.points(i, j) += rng.normal(0.0, sigma);

    const SimilarityTransform est = horn_align(src, dst);
    double rms = 0.0;
    for (int i = 0; i < src.count(); ++i) {
        rms += (est.apply(Vector3(src.points.row(i).transpose())) - dst.points.row(i).transpose())
                   .squaredNorm();
    }
    rms = std::sqrt(rms / src.count());
    CHECK(rms <= 3.0 * sigma);
}

TEST_CASE("horn_align rejects degenerate input") {
    Eigen::Matrix<double, Eigen::Dynamic, 3> line(4, 3);
    line << 0, 0, 0, 1, 1, 1, 2, 2, 2, 3, 3, 3;
    const LandmarkSet collinear{line};
    CHECK_THROWS_AS(horn_align(collinear, collinear), DegenerateGeometryError);

    Rng rng(34);
    const LandmarkSet a = random_landmarks(rng, 5);
    const LandmarkSet b = random_landmarks(rng, 6);
    CHECK_THROWS_AS(horn_align(a, b), ArgumentError);
    const LandmarkSet two = random_landmarks(rng, 2);
    CHECK_THROWS_AS(horn_align(two, two), ArgumentError);
}

TEST_CASE("similarity transform apply-then-invert is identity") {
    Rng rng(35);
    for (int i = 0; i < 50; ++i) {
        SimilarityTransform t;
        t.scale = rng.uniform(0.1, 5.0);
        t.rotation = random_rotation(rng);
        t.translation = Vector3(rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3));
        const Vector3 x(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2));
        CHECK((t.inverse().apply(t.apply(x)) - x).norm() < 1e-9);
    }
}

TEST_CASE("projection of on-axis point lands on the principal point") {
    CameraModel cam;
    cam.fx = cam.fy = 500.0;
    cam.cx = 320.0;
    cam.cy = 240.0;
    Eigen::Matrix<double, Eigen::Dynamic, 3> p(1, 3);
    p << 0, 0, 5;
    const auto uv = project_points(cam, LandmarkSet{p});
    CHECK(uv[0].x() == Catch::Approx(320.0));
    CHECK(uv[0].y() == Catch::Approx(240.0));
}

TEST_CASE("projection arithmetic example") {
    CameraModel cam;
    cam.fx = cam.fy = 100.0;
    cam.cx = cam.cy = 0.0;
    Eigen::Matrix<double, Eigen::Dynamic, 3> p(1, 3);
    p << 1, 2, 4;
    const auto uv = project_points(cam, LandmarkSet{p});
    CHECK(uv[0].x() == Catch::Approx(25.0));
    CHECK(uv[0].y() == Catch::Approx(50.0));
}

TEST_CASE("projection matches an independently coded oracle") {
    Rng rng(41);
    for (int trial = 0; trial < 20; ++trial) {
        CameraModel cam;
        cam.fx = rng.uniform(50, 800);
        cam.fy = rng.uniform(50, 800);
        cam.cx = rng.uniform(-100, 500);
        cam.cy = rng.uniform(-100, 500);
        cam.rotation = random_rotation(rng);
        cam.translation = Vector3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));

        Eigen::Matrix<double, Eigen::Dynamic, 3> pts(8, 3);
        for (int i = 0; i < 8; ++i) {
            // place points in front of the camera: x_world = R^T (x_cam - t)
            const Vector3 xc(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(2, 10));
            pts.row(i) = (cam.rotation.transpose() * (xc - cam.translation)).transpose();
        }
        const auto uv = project_points(cam, LandmarkSet{pts});
        for (int i = 0; i < 8; ++i) {
            // oracle: scalar pinhole math written out long-hand
            const double xw = pts(i, 0), yw = pts(i, 1), zw = pts(i, 2);
            const double xc = cam.rotation(0, 0) * xw + cam.rotation(0, 1) * yw +
                              cam.rotation(0, 2) * zw + cam.translation(0);
            const double yc = cam.rotation(1, 0) * xw + cam.rotation(1, 1) * yw +
                              cam.rotation(1, 2) * zw + cam.translation(1);
            const double zc = cam.rotation(2, 0) * xw + cam.rotation(2, 1) * yw +
                              cam.rotation(2, 2) * zw + cam.translation(2);
            REQUIRE(zc > 0);
            CHECK(uv[i].x() == Catch::Approx(cam.fx * xc / zc + cam.cx).margin(1e-9));
            CHECK(uv[i].y() == Catch::Approx(cam.fy * yc / zc + cam.cy).margin(1e-9));
        }
    }
}

TEST_CASE("points behind the camera raise an error") {
    CameraModel cam;
    Eigen::Matrix<double, Eigen::Dynamic, 3> p(1, 3);
    p << 0, 0, -1;
    CHECK_THROWS_AS(project_points(cam, LandmarkSet{p}), BehindCameraError);
    p << 0, 0, 0;
    CHECK_THROWS_AS(project_points(cam, LandmarkSet{p}), BehindCameraError);
}
