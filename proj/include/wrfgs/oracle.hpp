// Copyright Contributors to the wrfgs Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "wrfgs/complex.hpp"
#include "wrfgs/geometry.hpp"
#include "wrfgs/parallel.hpp"

namespace wrfgs {

constexpr double speed_of_light = 299792458.0;

// Square antenna array, k_side x k_side elements in the local x-y plane,
// element (m,n) at (m*spacing, n*spacing, 0), boresight +z. Element (0,0)
// is the phase reference.
struct ArrayGeometry {
    int k_side = 4;
    double spacing = 0.0;     // D, meters; must satisfy D < wavelength
    double wavelength = 0.0;  // lambda, meters

    int elements() const { return k_side * k_side; }

    void validate() const {
        if (k_side < 1) throw std::invalid_argument("ArrayGeometry: k_side must be >= 1");
        if (!(spacing > 0.0) || !(wavelength > 0.0))
            throw std::invalid_argument("ArrayGeometry: spacing and wavelength must be positive");
        if (!(spacing < wavelength))
            throw std::invalid_argument("ArrayGeometry: requires spacing < wavelength");
    }
};

// Axis-aligned rectangular room [0, extent] with complex per-wall reflection
// coefficients, a fixed receiver pose inside, and a specular image-source
// multipath model up to max_reflection_order bounces.
// Wall order: x=0, x=Lx, y=0, y=Ly, z=0, z=Lz.
struct MultipathScene {
    Vec3 room_extent = Vec3(6, 4, 3);
    std::array<ComplexSample, 6> reflection_coeff{};
    int max_reflection_order = 1;
    Vec3 rx_position = Vec3(1, 1, 1);
    Vec4 rx_orientation = Vec4(1, 0, 0, 0);  // array local -> world rotation

    void set_uniform_reflection(ComplexSample g) { reflection_coeff.fill(g); }

    Mat3 rx_rotation() const { return quat_to_rotation(quat_normalize(rx_orientation)); }

    bool inside_room(const Vec3& p) const {
        for (int a = 0; a < 3; ++a)
            if (!(p[a] > 0.0 && p[a] < room_extent[a])) return false;
        return true;
    }

    void validate() const {
        if (max_reflection_order < 0 || max_reflection_order > 3)
            throw std::invalid_argument("MultipathScene: max_reflection_order must be in [0,3]");
        if (!inside_room(rx_position))
            throw std::invalid_argument("MultipathScene: rx_position must be strictly inside the room");
        for (const auto& g : reflection_coeff)
            if (g.abs() > 1.0 + 1e-12)
                throw std::invalid_argument("MultipathScene: |reflection_coeff| must be <= 1");
    }
};

// H x W matrix of non-negative received power, row = elevation bin, column =
// azimuth bin. Default 90 x 360 at one-degree resolution; bin (r, c) is
// evaluated at exactly (beta, alpha) = (r * 90/h, c * 360/w) degrees.
struct SpatialSpectrum {
    int h = 0, w = 0;
    std::vector<double> values;

    SpatialSpectrum() = default;
    SpatialSpectrum(int h_, int w_) : h(h_), w(w_), values(std::size_t(h_) * w_, 0.0) {}

    double& at(int r, int c) { return values[std::size_t(r) * w + c]; }
    double at(int r, int c) const { return values[std::size_t(r) * w + c]; }

    std::pair<int, int> argmax() const {
        std::size_t best = 0;
        for (std::size_t i = 1; i < values.size(); ++i)
            if (values[i] > values[best]) best = i;
        return {int(best / w), int(best % w)};
    }
};

// Phase delta of element (m,n) relative to element (0,0) for a plane wave
// from (azimuth, elevation), in [0, 2pi).
inline double steering_phase(const ArrayGeometry& geom, int m, int n, double azimuth,
                             double elevation) {
    double r = geom.spacing * std::sqrt(double(m) * m + double(n) * n);
    double phi = std::atan2(double(n), double(m));
    double raw = -2.0 * pi * r * std::cos(azimuth - phi) * std::cos(elevation) / geom.wavelength;
    double out = std::fmod(raw, 2.0 * pi);
    if (out < 0.0) out += 2.0 * pi;
    return out;
}

// Beam-steered power map of measured element phases: for every bin,
// P = |1/K sum_mn exp(j(dtheta_hat_mn - dtheta_mn))|^2 with
// dtheta_hat_mn = theta_mn - theta_00. Values are always in [0, 1].
inline SpatialSpectrum beamform_spectrum(const ArrayGeometry& geom,
                                         const std::vector<double>& measured_phases, int h, int w,
                                         ThreadPool* pool = nullptr) {
    geom.validate();
    const int k = geom.k_side;
    if (int(measured_phases.size()) != k * k)
        throw std::invalid_argument("beamform_spectrum: phase matrix must be k_side x k_side");
    for (double p : measured_phases)
        if (!std::isfinite(p)) throw std::invalid_argument("beamform_spectrum: non-finite phase");

    SpatialSpectrum out(h, w);
    const double ref = measured_phases[0];
    const double inv_k = 1.0 / double(k * k);
    auto row_job = [&](int r) {
        double beta = double(r) * (0.5 * pi) / double(h);
        double cos_beta = std::cos(beta);
        for (int c = 0; c < w; ++c) {
            double alpha = double(c) * (2.0 * pi) / double(w);
            double sre = 0.0, sim = 0.0;
            for (int m = 0; m < k; ++m) {
                for (int n = 0; n < k; ++n) {
                    double rmn = geom.spacing * std::sqrt(double(m) * m + double(n) * n);
                    double phi = std::atan2(double(n), double(m));
                    double steer = -2.0 * pi * rmn * std::cos(alpha - phi) * cos_beta / geom.wavelength;
                    double d = (measured_phases[std::size_t(m) * k + n] - ref) - steer;
                    sre += std::cos(d);
                    sim += std::sin(d);
                }
            }
            sre *= inv_k;
            sim *= inv_k;
            out.at(r, c) = sre * sre + sim * sim;
        }
    };
    if (pool)
        pool->parallel_for(h, [&](int64_t r) { row_job(int(r)); });
    else
        for (int r = 0; r < h; ++r) row_job(r);
    return out;
}

// One specular propagation path: total length, complex amplitude at the
// reference antenna, and the image-source position generating it.
struct PropPath {
    double dist = 0.0;
    ComplexSample gain{0, 0};
    Vec3 image = Vec3::Zero();
    int order = 0;
};

// Image-source enumeration for the rectangular room. Gains realize the
// per-path attenuation/rotation of the multipath sum: Friis amplitude
// lambda/(4 pi d), wall-coefficient product, and propagation phase
// exp(-j 2 pi d / lambda). Paths come back sorted by ascending length.
inline std::vector<PropPath> simulate_paths(const MultipathScene& scene, const Vec3& tx,
                                            double wavelength) {
    scene.validate();
    if (!scene.inside_room(tx)) throw std::invalid_argument("simulate_paths: tx outside the room");
    if ((tx - scene.rx_position).norm() < 1e-9)
        throw std::invalid_argument("simulate_paths: tx coincides with rx");

    const int order = scene.max_reflection_order;
    const int m_max = (order + 1) / 2 + 1;
    std::vector<PropPath> paths;

    auto wall_pow = [&](int wall, int count) {
        ComplexSample g{1, 0};
        for (int i = 0; i < count; ++i) g *= scene.reflection_coeff[wall];
        return g;
    };

    for (int qx = 0; qx <= 1; ++qx)
        for (int mx = -m_max; mx <= m_max; ++mx) {
            int nx = std::abs(2 * mx - qx);
            if (nx > order) continue;
            for (int qy = 0; qy <= 1; ++qy)
                for (int my = -m_max; my <= m_max; ++my) {
                    int ny = std::abs(2 * my - qy);
                    if (nx + ny > order) continue;
                    for (int qz = 0; qz <= 1; ++qz)
                        for (int mz = -m_max; mz <= m_max; ++mz) {
                            int nz = std::abs(2 * mz - qz);
                            if (nx + ny + nz > order) continue;
                            PropPath p;
                            p.image = Vec3((1 - 2 * qx) * tx.x() + 2.0 * mx * scene.room_extent.x(),
                                           (1 - 2 * qy) * tx.y() + 2.0 * my * scene.room_extent.y(),
                                           (1 - 2 * qz) * tx.z() + 2.0 * mz * scene.room_extent.z());
                            p.order = nx + ny + nz;
                            p.dist = (p.image - scene.rx_position).norm();
                            ComplexSample refl = wall_pow(0, std::abs(mx - qx)) * wall_pow(1, std::abs(mx)) *
                                                 wall_pow(2, std::abs(my - qy)) * wall_pow(3, std::abs(my)) *
                                                 wall_pow(4, std::abs(mz - qz)) * wall_pow(5, std::abs(mz));
                            double amp = wavelength / (4.0 * pi * p.dist);
                            p.gain = refl * amp * cis(-2.0 * pi * p.dist / wavelength);
                            paths.push_back(p);
                        }
                }
        }

    std::sort(paths.begin(), paths.end(), [](const PropPath& a, const PropPath& b) {
        if (a.dist != b.dist) return a.dist < b.dist;
        if (a.order != b.order) return a.order < b.order;
        if (a.image.x() != b.image.x()) return a.image.x() < b.image.x();
        if (a.image.y() != b.image.y()) return a.image.y() < b.image.y();
        return a.image.z() < b.image.z();
    });
    return paths;
}

// Azimuth/elevation of a world point as seen by the array. Returned azimuth
// is in [0, 2pi), elevation in (-pi/2, pi/2].
inline std::pair<double, double> aoa_of(const MultipathScene& scene, const Vec3& p) {
    Vec3 d = scene.rx_rotation().transpose() * (p - scene.rx_position);
    double r = d.norm();
    double az = std::atan2(d.y(), d.x());
    if (az < 0.0) az += 2.0 * pi;
    return {az, std::asin(d.z() / r)};
}

// Per-antenna complex signal of all paths, with the per-element phase taken
// from exact image-to-element distances. The element-relative path length
// d_mn - d_00 is computed in difference form, so no precision is lost even
// for far-field image sources.
inline std::vector<ComplexSample> synthesize_array_signal(const MultipathScene& scene,
                                                          const ArrayGeometry& geom,
                                                          const std::vector<PropPath>& paths) {
    const int k = geom.k_side;
    Mat3 rot = scene.rx_rotation();
    std::vector<ComplexSample> y(std::size_t(k) * k, ComplexSample{0, 0});
    for (const auto& p : paths) {
        ComplexSample base = p.gain;  // includes exp(-j 2 pi d_00 / lambda)
        for (int m = 0; m < k; ++m) {
            for (int n = 0; n < k; ++n) {
                Vec3 elem = scene.rx_position + rot * Vec3(m * geom.spacing, n * geom.spacing, 0.0);
                double d_mn = (p.image - elem).norm();
                // d_mn - d_00 = (2 i - a - r).(r - a) / (d_mn + d_00)
                double num = (2.0 * p.image - elem - scene.rx_position).dot(scene.rx_position - elem);
                double delta = num / (d_mn + p.dist);
                double amp_ratio = p.dist / d_mn;  // rescale Friis amplitude to this element
                y[std::size_t(m) * k + n] += base * amp_ratio * cis(-2.0 * pi * delta / geom.wavelength);
            }
        }
    }
    return y;
}

// Full measurement-model ground truth: multipath synthesis, per-element
// phase extraction, then the phase-only beamformer. The steering model is
// delay-positive (a longer path reads as a larger phase), while propagation
// is synthesized as exp(-j 2 pi d / lambda); the measured phase is therefore
// -arg(y), which makes the extracted deltas line up with steering_phase.
inline SpatialSpectrum ground_truth_spectrum(const MultipathScene& scene, const ArrayGeometry& geom,
                                             const Vec3& tx, int h = 90, int w = 360,
                                             ThreadPool* pool = nullptr) {
    geom.validate();
    auto paths = simulate_paths(scene, tx, geom.wavelength);
    auto y = synthesize_array_signal(scene, geom, paths);
    std::vector<double> phases(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) phases[i] = -y[i].arg();
    return beamform_spectrum(geom, phases, h, w, pool);
}

// Coherent received power in dB at a single omni antenna, with the dataset
// sentinel floor at -100.
inline double ground_truth_rssi(const MultipathScene& scene, const Vec3& tx, double wavelength) {
    auto paths = simulate_paths(scene, tx, wavelength);
    ComplexSample sum{0, 0};
    for (const auto& p : paths) sum += p.gain;
    double a = sum.abs();
    double db = a > 0.0 ? 20.0 * std::log10(a) : -1e300;
    return std::max(db, -100.0);
}

// Frequency response at the given subcarrier frequencies (Hz, ascending):
// H(f) = sum_l refl_l * (c / (4 pi d_l f)) * exp(-j 2 pi f d_l / c).
inline std::vector<ComplexSample> ground_truth_csi(const MultipathScene& scene, const Vec3& tx,
                                                   const std::vector<double>& subcarriers_hz) {
    if (subcarriers_hz.empty()) throw std::invalid_argument("ground_truth_csi: no subcarriers");
    for (std::size_t i = 0; i < subcarriers_hz.size(); ++i) {
        if (!(subcarriers_hz[i] > 0.0))
            throw std::invalid_argument("ground_truth_csi: frequencies must be positive");
        if (i > 0 && !(subcarriers_hz[i] > subcarriers_hz[i - 1]))
            throw std::invalid_argument("ground_truth_csi: frequencies must be ascending");
    }
    // Path geometry is frequency independent; reuse one enumeration. The
    // per-path wall coefficients and distances come from simulate_paths at a
    // reference wavelength, and the Friis amplitude/phase are re-derived per
    // subcarrier below.
    double ref_lambda = speed_of_light / subcarriers_hz[0];
    auto paths = simulate_paths(scene, tx, ref_lambda);
    std::vector<ComplexSample> h(subcarriers_hz.size(), ComplexSample{0, 0});
    for (const auto& p : paths) {
        // strip the reference-wavelength Friis factor to recover the pure
        // wall-coefficient product
        ComplexSample refl = p.gain * cis(2.0 * pi * p.dist / ref_lambda) * (4.0 * pi * p.dist / ref_lambda);
        for (std::size_t s = 0; s < subcarriers_hz.size(); ++s) {
            double f = subcarriers_hz[s];
            double amp = speed_of_light / (4.0 * pi * p.dist * f);
            h[s] += refl * amp * cis(-2.0 * pi * f * p.dist / speed_of_light);
        }
    }
    return h;
}

}  // namespace wrfgs
