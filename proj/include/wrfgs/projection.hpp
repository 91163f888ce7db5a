// Copyright Contributors to the wrfgs Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "wrfgs/geometry.hpp"

namespace wrfgs {

constexpr double projection_min_range = 1e-4;   // guards asin at the origin
constexpr double cov2d_floor = 0.3;             // px^2 anti-aliasing pad

// A Gaussian after the spherical -> latitude/longitude -> uniform -> pixel
// chain: 2D center, projected 2x2 covariance, and the range used for depth
// ordering.
struct ProjectedGaussian {
    Vec2 pixel = Vec2::Zero();
    Mat2 cov2d = Mat2::Identity();
    double depth = 0.0;
    int source_index = 0;
};

// Pixel center and range of a point in the RX frame (boresight +z), or
// nothing when the point is in the lower hemisphere / too close. The zenith
// column convention p_x = W/2 falls out of atan2(0,0) = 0; the pole row is
// clamped so p_y stays inside [0, H).
inline std::optional<std::pair<Vec2, double>> project_point(const Vec3& t, int w, int h) {
    double r = t.norm();
    if (t.z() < 0.0 || r < projection_min_range) return std::nullopt;
    double lon = std::atan2(t.y(), t.x());
    double lat = std::asin(std::min(1.0, t.z() / r));
    double px = (lon / pi + 1.0) * 0.5 * double(w);
    double py = (2.0 * lat / pi) * double(h);
    if (px >= double(w)) px -= double(w);  // lon == +pi maps onto the seam
    if (py >= double(h)) py = std::nextafter(double(h), 0.0);
    return std::make_pair(Vec2(px, py), r);
}

// Analytic first and second derivatives of the projection at t:
//   J = d(px,py)/dt, and the Hessians of lon and lat (px = Kx lon + W/2,
//   py = Ky lat, so dJ/dt follows by scaling). Valid away from the zenith.
struct ProjectionDerivs {
    Mat23 jac = Mat23::Zero();
    Mat3 h_lon = Mat3::Zero();
    Mat3 h_lat = Mat3::Zero();
    double kx = 0.0, ky = 0.0;
};

inline ProjectionDerivs project_point_derivs(const Vec3& t, int w, int h) {
    ProjectionDerivs d;
    const double a = t.x(), b = t.y(), c = t.z();
    double q = a * a + b * b;
    double r2 = q + c * c;
    // keep the math finite for (near-)zenith points; their footprints are
    // handled by the pole clamp, gradients there are not meaningful
    if (q < 1e-12 * r2) q = 1e-12 * r2;
    const double s = std::sqrt(q);
    const double r4 = r2 * r2;
    d.kx = double(w) / (2.0 * pi);
    d.ky = 2.0 * double(h) / pi;

    Vec3 g_lon(-b / q, a / q, 0.0);
    Vec3 g_lat(-a * c / (r2 * s), -b * c / (r2 * s), s / r2);
    d.jac.row(0) = d.kx * g_lon.transpose();
    d.jac.row(1) = d.ky * g_lat.transpose();

    const double q2 = q * q;
    d.h_lon(0, 0) = 2.0 * a * b / q2;
    d.h_lon(0, 1) = d.h_lon(1, 0) = (b * b - a * a) / q2;
    d.h_lon(1, 1) = -2.0 * a * b / q2;

    const double g = c / (r2 * s);
    const double core = c * (2.0 * q + r2) / (s * r4 * q);
    d.h_lat(0, 0) = -g + a * a * core;
    d.h_lat(0, 1) = d.h_lat(1, 0) = a * b * core;
    d.h_lat(0, 2) = d.h_lat(2, 0) = -a * (q - c * c) / (r4 * s);
    d.h_lat(1, 1) = -g + b * b * core;
    d.h_lat(1, 2) = d.h_lat(2, 1) = -b * (q - c * c) / (r4 * s);
    d.h_lat(2, 2) = -2.0 * c * s / r4;
    return d;
}

// EWA-style affine covariance projection: J Sigma J^T plus the constant
// anti-aliasing floor on the diagonal.
inline Mat2 project_covariance(const Mat3& sigma3d, const Mat23& jac) {
    Mat2 c = jac * sigma3d * jac.transpose();
    c(0, 0) += cov2d_floor;
    c(1, 1) += cov2d_floor;
    return c;
}

// Reverse-mode step through pixel center and covariance projection.
// d_pixel is dL/d(px,py); d_cov2d is dL/d(cov2d) (floor excluded, it is
// constant). Accumulates dL/dt and dL/dSigma3.
inline void projection_backward(const ProjectionDerivs& pd, const Mat3& sigma3d,
                                const Vec2& d_pixel, const Mat2& d_cov2d_in, Vec3& d_t,
                                Mat3& d_sigma3) {
    Mat2 dc = 0.5 * (d_cov2d_in + d_cov2d_in.transpose());
    d_t += pd.jac.transpose() * d_pixel;
    d_sigma3 += pd.jac.transpose() * dc * pd.jac;
    // cov2d = J Sigma J^T  =>  dL/dJ = 2 dc J Sigma; then through dJ/dt.
    Mat23 dj = 2.0 * dc * pd.jac * sigma3d;
    for (int k = 0; k < 3; ++k) {
        double acc = 0.0;
        for (int i = 0; i < 3; ++i)
            acc += dj(0, i) * pd.kx * pd.h_lon(i, k) + dj(1, i) * pd.ky * pd.h_lat(i, k);
        d_t[k] += acc;
    }
}

// 3 sigma of the dominant axis; azimuth-periodic support is clipped just
// below half the canvas width so a pixel is never covered by two wrapped
// copies of the same footprint.
inline double footprint_radius(const Mat2& cov2d, int w) {
    double tr = 0.5 * (cov2d(0, 0) + cov2d(1, 1));
    double det_term = 0.25 * (cov2d(0, 0) - cov2d(1, 1)) * (cov2d(0, 0) - cov2d(1, 1)) +
                      cov2d(0, 1) * cov2d(1, 0);
    double lam_max = tr + std::sqrt(std::max(0.0, det_term));
    double r = 3.0 * std::sqrt(std::max(0.0, lam_max));
    return std::min(r, 0.4999 * double(w));
}

struct TileInstance {
    int tile = 0;
    double x_shift = 0.0;  // 0 or +-W; the copy's center is pixel.x + x_shift
};

inline int tiles_x_count(int w, int tile_size) { return (w + tile_size - 1) / tile_size; }
inline int tiles_y_count(int h, int tile_size) { return (h + tile_size - 1) / tile_size; }

// All tiles whose pixel box intersects the axis-aligned footprint square,
// duplicated across the azimuth seam where needed.
inline std::vector<TileInstance> footprint_tiles(const ProjectedGaussian& pg, int tile_size, int w,
                                                 int h) {
    std::vector<TileInstance> out;
    const double r = footprint_radius(pg.cov2d, w);
    const int ntx = tiles_x_count(w, tile_size);
    const int nty = tiles_y_count(h, tile_size);
    int ty0 = std::max(0, int(std::floor((pg.pixel.y() - r) / tile_size)));
    int ty1 = std::min(nty - 1, int(std::floor((pg.pixel.y() + r) / tile_size)));
    if (ty0 > ty1) return out;
    for (int k = -1; k <= 1; ++k) {
        double cx = pg.pixel.x() + k * double(w);
        double lo = cx - r, hi = cx + r;
        if (hi < 0.0 || lo >= double(w)) continue;
        int tx0 = std::max(0, int(std::floor(lo / tile_size)));
        int tx1 = std::min(ntx - 1, int(std::floor(hi / tile_size)));
        for (int ty = ty0; ty <= ty1; ++ty)
            for (int tx = tx0; tx <= tx1; ++tx)
                out.push_back({ty * ntx + tx, k * double(w)});
    }
    return out;
}

}  // namespace wrfgs
