// Copyright Contributors to the wrfgs Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <cmath>

namespace wrfgs {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat23 = Eigen::Matrix<double, 2, 3>;
using MatX = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using VecX = Eigen::VectorXd;

constexpr double pi = 3.14159265358979323846;

// Quaternion convention: (w, x, y, z), identity = (1, 0, 0, 0).
inline Vec4 quat_normalize(const Vec4& q) {
    double n = q.norm();
    if (n == 0.0) return Vec4(1, 0, 0, 0);
    return q / n;
}

// Rotation matrix of a unit quaternion.
inline Mat3 quat_to_rotation(const Vec4& q) {
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    Mat3 r;
    r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
        2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
        2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    return r;
}

// dR/dq_i for a unit quaternion, i in {w,x,y,z}.
inline void quat_rotation_jacobian(const Vec4& q, Mat3 dr[4]) {
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    dr[0] << 0, -2 * z, 2 * y,
        2 * z, 0, -2 * x,
        -2 * y, 2 * x, 0;
    dr[1] << 0, 2 * y, 2 * z,
        2 * y, -4 * x, -2 * w,
        2 * z, 2 * w, -4 * x;
    dr[2] << -4 * y, 2 * x, 2 * w,
        2 * x, 0, 2 * z,
        -2 * w, 2 * z, -4 * y;
    dr[3] << -4 * z, -2 * w, 2 * x,
        2 * w, -4 * z, 2 * y,
        2 * x, 2 * y, 0;
}

// Chain dL/d(q_unit) back through q_unit = q / |q|.
inline Vec4 quat_normalize_backward(const Vec4& q_raw, const Vec4& d_unit) {
    double n = q_raw.norm();
    if (n == 0.0) return Vec4::Zero();
    Vec4 u = q_raw / n;
    return (d_unit - u * u.dot(d_unit)) / n;
}

}  // namespace wrfgs
