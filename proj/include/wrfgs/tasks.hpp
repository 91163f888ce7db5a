// Copyright Contributors to the wrfgs Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <vector>

#include "wrfgs/checkpoint.hpp"
#include "wrfgs/pipeline.hpp"

namespace wrfgs {

// The rendered canvas indexes columns by longitude (p_x = 180 at azimuth 0);
// the spectrum matrix indexes columns by azimuth starting at 0. They differ
// by a half-width roll. W must be even.
inline SpatialSpectrum canvas_power_to_spectrum(const std::vector<double>& power, int h, int w) {
    SpatialSpectrum s(h, w);
    const int half = w / 2;
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            s.at(r, c) = power[std::size_t(r) * w + (c + half) % w];
    return s;
}

inline std::vector<double> spectrum_grad_to_canvas(const std::vector<double>& d_spec, int h, int w) {
    std::vector<double> d_power(std::size_t(h) * w, 0.0);
    const int half = w / 2;
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            d_power[std::size_t(r) * w + (c + half) % w] = d_spec[std::size_t(r) * w + c];
    return d_power;
}

inline PipelineConfig pipeline_config_of(const Checkpoint& c) {
    PipelineConfig cfg;
    cfg.canvas_h = c.canvas_h;
    cfg.canvas_w = c.canvas_w;
    cfg.rx = c.rx;
    cfg.angular = c.task != TaskKind::Csi;
    return cfg;
}

// Full-pipeline spectrum inference at a TX position.
inline SpatialSpectrum synthesize_spectrum(Checkpoint& ckpt, const Vec3& tx,
                                           ThreadPool* pool = nullptr) {
    if (ckpt.task != TaskKind::Spectrum)
        throw std::invalid_argument("synthesize_spectrum: checkpoint task mismatch");
    PipelineForward f;
    forward_pipeline(ckpt.store, ConditioningInput::tx(tx), pipeline_config_of(ckpt), f, pool, false);
    return canvas_power_to_spectrum(f.field.power, ckpt.canvas_h, ckpt.canvas_w);
}

inline ComplexSample field_total(const RenderedField& f) {
    ComplexSample t{0, 0};
    for (const auto& z : f.field) t += z;
    return t;
}

// Scalar received power: coherent pixel sum (or incoherent power sum as an
// ablation), calibrated by the trainable bias and floored at the -100 dB
// sentinel.
inline double rssi_from_field(const RenderedField& f, double bias, bool incoherent = false) {
    double p;
    if (incoherent) {
        p = 0.0;
        for (double v : f.power) p += v;
    } else {
        p = field_total(f).abs2();
    }
    double db = p > 0.0 ? 10.0 * std::log10(p) : -1e300;
    return std::max(-100.0, db + bias);
}

inline double predict_rssi(Checkpoint& ckpt, const Vec3& tx, ThreadPool* pool = nullptr,
                           bool incoherent = false) {
    if (ckpt.task != TaskKind::Rssi)
        throw std::invalid_argument("predict_rssi: checkpoint task mismatch");
    PipelineForward f;
    forward_pipeline(ckpt.store, ConditioningInput::tx(tx), pipeline_config_of(ckpt), f, pool, false);
    return rssi_from_field(f.field, ckpt.store.rssi_bias, incoherent);
}

// Uplink -> downlink: the alpha-blended 26-channel coherent sum over all
// Gaussians on a 1x1 canvas, un-scaled back to raw CSI units.
inline std::vector<ComplexSample> predict_csi(Checkpoint& ckpt,
                                              const std::vector<ComplexSample>& uplink,
                                              ThreadPool* pool = nullptr) {
    if (ckpt.task != TaskKind::Csi)
        throw std::invalid_argument("predict_csi: checkpoint task mismatch");
    if (int(uplink.size()) != csi_subcarriers_half)
        throw std::invalid_argument("predict_csi: uplink must have 26 subcarriers");
    PipelineForward f;
    forward_pipeline(ckpt.store, ConditioningInput::csi(uplink), pipeline_config_of(ckpt), f, pool, false);
    std::vector<ComplexSample> out(csi_subcarriers_half);
    for (int ch = 0; ch < csi_subcarriers_half; ++ch)
        out[ch] = f.field.field[ch] * (1.0 / ckpt.store.csi_scale);
    return out;
}

}  // namespace wrfgs
