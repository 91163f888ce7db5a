// Copyright Contributors to the wrfgs Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <vector>

#include "wrfgs/complex.hpp"
#include "wrfgs/encoding.hpp"
#include "wrfgs/geometry.hpp"

namespace wrfgs {

// One virtual transmitter. Scales are stored in log space and opacity as a
// logit so unconstrained gradient steps keep the covariance PSD and the
// opacity in (0,1). `attenuation` is a runtime slot used by the chained
// compositor variant; it is produced by the network, never trained directly.
struct GaussianPrimitive {
    Vec3 mu = Vec3::Zero();               // position, meters
    Vec4 rot = Vec4(1, 0, 0, 0);          // unit quaternion (w,x,y,z)
    Vec3 log_scale = Vec3::Zero();        // log-meters
    double opacity_logit = 0.0;
    std::vector<ComplexSample> static_signal;  // length d_sig
    ComplexSample attenuation{0.0, 0.0};
};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double logit(double p) { return std::log(p / (1.0 - p)); }

// Sigma = R S S^T R^T with S = diag(exp(log_scale)).
inline Mat3 covariance(const Vec4& rot, const Vec3& log_scale) {
    Mat3 r = quat_to_rotation(quat_normalize(rot));
    Vec3 s = log_scale.array().exp();
    Mat3 m = r * s.asDiagonal();
    return m * m.transpose();
}

// Backward of covariance(): given dL/dSigma (need not be symmetrized),
// accumulates dL/d(raw quaternion) and dL/d(log_scale).
inline void covariance_backward(const Vec4& rot, const Vec3& log_scale, const Mat3& d_sigma,
                                Vec4& d_rot, Vec3& d_log_scale) {
    Vec4 q = quat_normalize(rot);
    Mat3 r = quat_to_rotation(q);
    Vec3 s2 = (2.0 * log_scale).array().exp();  // exp(log_scale)^2
    Mat3 g = d_sigma + d_sigma.transpose();     // Sigma is used symmetrically
    // dL/dR = (dS + dS^T) R diag(s^2)
    Mat3 dr = g * r * s2.asDiagonal();
    Mat3 jac[4];
    quat_rotation_jacobian(q, jac);
    Vec4 d_unit;
    for (int i = 0; i < 4; ++i) d_unit[i] = (dr.array() * jac[i].array()).sum();
    d_rot += quat_normalize_backward(rot, d_unit);
    // dL/d log_scale_k = 2 exp(2 ls_k) (R^T sym(dS) R)_{kk}
    Mat3 rtgr = r.transpose() * (0.5 * g) * r;
    for (int k = 0; k < 3; ++k) d_log_scale[k] += 2.0 * s2[k] * rtgr(k, k);
}

// exp(-1/2 (x-mu)^T Sigma^{-1} (x-mu)), with +1e-8 I regularization before
// the inverse so collapsed scales stay finite.
inline double eval_gaussian(const Vec3& x, const Vec3& mu, const Mat3& sigma) {
    Mat3 reg = sigma + 1e-8 * Mat3::Identity();
    Vec3 d = x - mu;
    double m = d.dot(reg.llt().solve(d));
    if (m < 0.0) m = 0.0;
    return std::exp(-0.5 * m);
}

}  // namespace wrfgs
