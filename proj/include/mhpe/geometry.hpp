// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <utility>
#include <vector>

#include "mhpe/common.hpp"

namespace mhpe::geom {

using Matrix3 = Eigen::Matrix3d;
using Vector3 = Eigen::Vector3d;
using Vector2 = Eigen::Vector2d;

/// Head orientation in degrees. Yaw covers the full circle (-180, 180],
/// pitch and roll stay within (-90, 90). The gimbal flag marks poses
/// recovered from a rotation matrix whose decomposition was singular
/// (|yaw| = 90); there roll is fixed to 0 and the free angle folded into
/// pitch.
struct EulerPose {
    double pitch = 0.0;
    double yaw = 0.0;
    double roll = 0.0;
    bool gimbal = false;
};

/// Wrap an angle in degrees into (-180, 180].
inline double wrap_angle(double a) {
    if (!std::isfinite(a)) throw NonFiniteError("wrap_angle: non-finite input");
    double w = std::fmod(a, 360.0);
    if (w <= -180.0) {
        w += 360.0;
    } else if (w > 180.0) {
        w -= 360.0;
    }
    return w;
}

/// Geodesic distance on the circle, in [0, 180].
inline double angular_abs_diff(double a, double b) { return std::abs(wrap_angle(a - b)); }

inline bool pose_in_range(const EulerPose& p) {
    return p.pitch > -90.0 && p.pitch < 90.0 && p.roll > -90.0 && p.roll < 90.0 &&
           p.yaw > -180.0 && p.yaw <= 180.0;
}

/// Intrinsic composition R = Rx(pitch) * Ry(yaw) * Rz(roll) on column
/// vectors. Yaw sits on the middle axis, so the decomposition is singular at
/// |yaw| = 90, matching the pitch/roll ambiguity of heads seen in profile.
inline Matrix3 euler_to_matrix(const EulerPose& p) {
    const double a = deg2rad(p.pitch), b = deg2rad(p.yaw), c = deg2rad(p.roll);
    const double ca = std::cos(a), sa = std::sin(a);
    const double cb = std::cos(b), sb = std::sin(b);
    const double cc = std::cos(c), sc = std::sin(c);
    Matrix3 r;
    r << cb * cc, -cb * sc, sb,                                              //
        ca * sc + sa * sb * cc, ca * cc - sa * sb * sc, -sa * cb,            //
        sa * sc - ca * sb * cc, sa * cc + ca * sb * sc, ca * cb;
    return r;
}

/// Throws InvalidRotationError unless R^T R = I and det R = +1 within tol.
inline void validate_rotation(const Matrix3& r, double tol = 1e-6) {
    const double ortho = (r.transpose() * r - Matrix3::Identity()).norm();
    if (!(ortho <= tol) || !(std::abs(r.determinant() - 1.0) <= tol)) {
        throw InvalidRotationError("matrix is not a proper rotation (|R'R-I|=" +
                                   std::to_string(ortho) + ")");
    }
}

/// Decompose a rotation into the pitch-yaw-roll convention above. Yaw is
/// recovered over the full circle; pitch and roll land in (-90, 90). Within
/// 1e-7 of the |yaw| = 90 singularity the canonical branch (roll = 0) is
/// returned and the gimbal flag set.
inline EulerPose matrix_to_euler(const Matrix3& r, double validate_tol = 1e-6) {
    validate_rotation(r, validate_tol);
    EulerPose p;
    const double cos_yaw_mag = std::hypot(r(1, 2), r(2, 2));  // |cos(yaw)|
    if (cos_yaw_mag < 1e-7) {
        p.gimbal = true;
        p.roll = 0.0;
        if (r(0, 2) > 0.0) {  // yaw = +90: R10 = sin(pitch+roll), R11 = cos(pitch+roll)
            p.yaw = 90.0;
            p.pitch = rad2deg(std::atan2(r(1, 0), r(1, 1)));
        } else {  // yaw = -90: R10 = sin(roll-pitch)
            p.yaw = -90.0;
            p.pitch = -rad2deg(std::atan2(r(1, 0), r(1, 1)));
        }
        return p;
    }
    // sign(cos yaw) = sign(R22) because cos(pitch) > 0 on the principal branch
    const double s = r(2, 2) >= 0.0 ? 1.0 : -1.0;
    p.yaw = wrap_angle(rad2deg(std::atan2(r(0, 2), s * cos_yaw_mag)));
    p.pitch = rad2deg(std::atan2(-r(1, 2) * s, r(2, 2) * s));
    p.roll = rad2deg(std::atan2(-r(0, 1) * s, r(0, 0) * s));
    return p;
}

/// N 3D points, one per row.
struct LandmarkSet {
    Eigen::Matrix<double, Eigen::Dynamic, 3> points;

    LandmarkSet() = default;
    explicit LandmarkSet(Eigen::Matrix<double, Eigen::Dynamic, 3> pts) : points(std::move(pts)) {}

    int count() const { return static_cast<int>(points.rows()); }

    Vector3 centroid() const { return points.colwise().mean().transpose(); }

    /// Largest pairwise distance; the natural size scale of the set.
    double max_pairwise_distance() const {
        double best = 0.0;
        for (int i = 0; i < count(); ++i)
            for (int j = i + 1; j < count(); ++j)
                best = std::max(best, (points.row(i) - points.row(j)).norm());
        return best;
    }

    LandmarkSet subset(const std::vector<int>& indices) const {
        Eigen::Matrix<double, Eigen::Dynamic, 3> out(static_cast<int>(indices.size()), 3);
        for (int i = 0; i < static_cast<int>(indices.size()); ++i) out.row(i) = points.row(indices[i]);
        return LandmarkSet(out);
    }
};

/// x -> scale * R * x + t with scale > 0.
struct SimilarityTransform {
    double scale = 1.0;
    Matrix3 rotation = Matrix3::Identity();
    Vector3 translation = Vector3::Zero();

    Vector3 apply(const Vector3& x) const { return scale * (rotation * x) + translation; }

    LandmarkSet apply(const LandmarkSet& pts) const {
        LandmarkSet out;
        out.points = (scale * (rotation * pts.points.transpose())).transpose();
        out.points.rowwise() += translation.transpose();
        return out;
    }

    SimilarityTransform inverse() const {
        SimilarityTransform inv;
        inv.scale = 1.0 / scale;
        inv.rotation = rotation.transpose();
        inv.translation = -(inv.scale) * (inv.rotation * translation);
        return inv;
    }
};

/// Pinhole camera: intrinsics in pixels plus a camera-from-world rigid
/// extrinsic (X_cam = R * X_world + t).
struct CameraModel {
    double fx = 1.0, fy = 1.0;
    double cx = 0.0, cy = 0.0;
    Matrix3 rotation = Matrix3::Identity();
    Vector3 translation = Vector3::Zero();

    Vector3 world_to_camera(const Vector3& x) const { return rotation * x + translation; }
};

inline constexpr double kMinProjectionDepth = 1e-9;

/// Project world points through the camera. Throws BehindCameraError if any
/// point ends up at or behind the camera plane.
inline std::vector<Vector2> project_points(const CameraModel& cam, const LandmarkSet& pts) {
    std::vector<Vector2> out;
    out.reserve(pts.count());
    for (int i = 0; i < pts.count(); ++i) {
        const Vector3 pc = cam.world_to_camera(pts.points.row(i).transpose());
        if (pc.z() <= kMinProjectionDepth) {
            throw BehindCameraError("point " + std::to_string(i) + " at depth " +
                                    std::to_string(pc.z()));
        }
        out.emplace_back(cam.fx * pc.x() / pc.z() + cam.cx, cam.fy * pc.y() / pc.z() + cam.cy);
    }
    return out;
}

/// Closed-form absolute orientation (Horn 1987, quaternion form): finds the
/// similarity transform minimizing sum ||s R src_i + t - dst_i||^2. Scale is
/// the symmetric ratio of centered norms.
inline SimilarityTransform horn_align(const LandmarkSet& src, const LandmarkSet& dst) {
    const int n = src.count();
    if (n != dst.count()) throw ArgumentError("horn_align: point counts differ");
    if (n < 3) throw ArgumentError("horn_align: need at least 3 points");

    const Vector3 src_c = src.centroid();
    const Vector3 dst_c = dst.centroid();
    Eigen::Matrix3Xd a = src.points.transpose().colwise() - src_c;
    Eigen::Matrix3Xd b = dst.points.transpose().colwise() - dst_c;

    const double src_norm2 = a.squaredNorm();
    const double dst_norm2 = b.squaredNorm();
    if (src_norm2 <= 0.0 || dst_norm2 <= 0.0) {
        throw DegenerateGeometryError("horn_align: coincident points");
    }
    {
        Eigen::JacobiSVD<Eigen::Matrix3Xd> svd(a);
        if (svd.singularValues()(1) < 1e-9 * svd.singularValues()(0)) {
            throw DegenerateGeometryError("horn_align: source points are collinear");
        }
    }

    const Matrix3 m = a * b.transpose();  // cross-covariance
    const double sxx = m(0, 0), sxy = m(0, 1), sxz = m(0, 2);
    const double syx = m(1, 0), syy = m(1, 1), syz = m(1, 2);
    const double szx = m(2, 0), szy = m(2, 1), szz = m(2, 2);
    Eigen::Matrix4d nmat;
    nmat << sxx + syy + szz, syz - szy, szx - sxz, sxy - syx,  //
        syz - szy, sxx - syy - szz, sxy + syx, szx + sxz,      //
        szx - sxz, sxy + syx, -sxx + syy - szz, syz + szy,     //
        sxy - syx, szx + sxz, syz + szy, -sxx - syy + szz;

    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> eig(nmat);
    const Eigen::Vector4d q = eig.eigenvectors().col(3);  // largest eigenvalue
    const Eigen::Quaterniond quat(q(0), q(1), q(2), q(3));

    SimilarityTransform t;
    t.rotation = quat.normalized().toRotationMatrix();
    t.scale = std::sqrt(dst_norm2 / src_norm2);
    t.translation = dst_c - t.scale * (t.rotation * src_c);
    return t;
}

}  // namespace mhpe::geom
