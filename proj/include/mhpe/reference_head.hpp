// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <vector>

#include "mhpe/geometry.hpp"

namespace mhpe::label {

/// Canonical frontal head: 68 landmarks in the usual iBUG arrangement
/// (0-16 jaw, 17-26 brows, 27-35 nose, 36-47 eyes, 48-67 lips), expressed in
/// the reference camera frame. The camera looks along +Z with +Y down, so a
/// frontal face points toward -Z and the person's left side sits on +X.
/// Units are arbitrary; only relative geometry matters for alignment.
struct ReferenceHead {
    geom::LandmarkSet landmarks;
    geom::CameraModel camera;  // identity extrinsics: head coords == camera coords
    std::map<int, std::vector<int>> corner_indices;  // per supported subset size
};

namespace detail {

inline Eigen::Matrix<double, 68, 3> canonical_landmarks() {
    Eigen::Matrix<double, 68, 3> p;
    const double pi = 3.14159265358979323846;
    // jaw arc: ears (rows 0, 16) back and high, chin (row 8) forward and low
    for (int i = 0; i <= 16; ++i) {
        const double th = -0.5 * pi + pi * i / 16.0;
        p.row(i) << 6.5 * std::sin(th), -1.0 + 7.5 * std::cos(th), 1.5 - 6.5 * std::cos(th);
    }
    // brows (17-21 person's right, 22-26 person's left), gentle arch
    for (int i = 0; i < 5; ++i) {
        const double x = -5.2 + i * 1.0;
        const double arch = -0.5 * std::sin(pi * i / 4.0);
        p.row(17 + i) << x, -3.2 + arch, -6.2;
        p.row(22 + i) << -(-5.2 + (4 - i) * 1.0), -3.2 - 0.5 * std::sin(pi * (4 - i) / 4.0), -6.2;
    }
    // nose bridge 27-30 (30 = tip, the most forward point)
    p.row(27) << 0.0, -2.2, -6.4;
    p.row(28) << 0.0, -1.2, -6.8;
    p.row(29) << 0.0, -0.2, -7.1;
    p.row(30) << 0.0, 0.8, -7.5;
    // nose base 31-35
    for (int i = 0; i < 5; ++i) {
        const double x = -1.5 + 0.75 * i;
        p.row(31 + i) << x, 1.8, -6.3 - 0.5 * std::sin(pi * i / 4.0);
    }
    // eyes: 36-41 person's right, 42-47 person's left
    const double eye_y = -1.8, eye_z = -6.1;
    p.row(36) << -4.4, eye_y, eye_z;
    p.row(37) << -3.6, eye_y - 0.35, eye_z - 0.1;
    p.row(38) << -2.7, eye_y - 0.35, eye_z - 0.1;
    p.row(39) << -1.9, eye_y, eye_z - 0.15;
    p.row(40) << -2.7, eye_y + 0.3, eye_z - 0.1;
    p.row(41) << -3.6, eye_y + 0.3, eye_z - 0.1;
    for (int i = 0; i < 6; ++i) {
        p.row(42 + i) = p.row(36 + ((6 - i) % 6 + 3) % 6);  // mirror with corner-first order
        p(42 + i, 0) = -p(42 + i, 0);
    }
    // outer lips 48-59 on an ellipse, inner lips 60-67 on a smaller one
    for (int i = 0; i < 12; ++i) {
        const double th = pi + pi * 2.0 * i / 12.0;  // start at person's right corner
        p.row(48 + i) << 2.6 * std::cos(th), 3.8 + 1.1 * std::sin(th), -6.15 + 0.25 * std::abs(std::sin(th));
    }
    for (int i = 0; i < 8; ++i) {
        const double th = pi + pi * 2.0 * i / 8.0;
        p.row(60 + i) << 1.7 * std::cos(th), 3.8 + 0.45 * std::sin(th), -6.2;
    }
    return p;
}

}  // namespace detail

/// Nested corner-landmark subsets: each larger list extends the smaller one
/// with two more distinctive points (ear tops, brow ends, chin flanks).
inline std::map<int, std::vector<int>> default_corner_indices() {
    std::map<int, std::vector<int>> m;
    m[9] = {30, 31, 35, 36, 39, 42, 45, 48, 54};
    m[11] = {0, 16, 30, 31, 35, 36, 39, 42, 45, 48, 54};
    m[13] = {0, 16, 17, 26, 30, 31, 35, 36, 39, 42, 45, 48, 54};
    m[15] = {0, 7, 9, 16, 17, 26, 30, 31, 35, 36, 39, 42, 45, 48, 54};
    m[17] = {0, 7, 9, 16, 17, 21, 22, 26, 30, 31, 35, 36, 39, 42, 45, 48, 54};
    return m;
}

inline const ReferenceHead& reference_head() {
    static const ReferenceHead head = [] {
        ReferenceHead h;
        h.landmarks = geom::LandmarkSet(detail::canonical_landmarks());
        h.camera.fx = h.camera.fy = 1000.0;
        h.camera.cx = h.camera.cy = 0.0;
        h.corner_indices = default_corner_indices();
        return h;
    }();
    return head;
}

}  // namespace mhpe::label
