// Copyright Contributors to the wrfgs Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "wrfgs/em_core.hpp"
#include "wrfgs/projection.hpp"
#include "wrfgs/scene.hpp"
#include "wrfgs/splat.hpp"

namespace wrfgs {

struct RxPose {
    Vec3 position = Vec3::Zero();
    Vec4 orientation = Vec4(1, 0, 0, 0);  // array local -> world

    Mat3 rotation() const { return quat_to_rotation(quat_normalize(orientation)); }
};

struct PipelineConfig {
    int canvas_h = 90, canvas_w = 360;
    int tile_size = 16;
    RxPose rx;
    bool early_termination = true;
    // Spectrum/RSSI render with angular projection; the CSI reduction uses a
    // 1x1 canvas with unit kernel weights and no culling.
    bool angular = true;
};

// Everything produced by one end-to-end forward pass, kept for backward.
struct PipelineForward {
    SceneCache scene_cache;
    SceneOutputs scene_out;
    std::vector<int> visible;  // store index per splat slot
    std::vector<ProjectionDerivs> derivs;
    std::vector<Mat3> sigma3;
    SplatInput splat;
    RenderAux aux;
    RenderedField field;
};

// `training` keeps the activation cache for backward; inference uses the
// cache-blocked network evaluation instead.
inline void forward_pipeline(ParamStore& store, const ConditioningInput& cond,
                             const PipelineConfig& cfg, PipelineForward& f,
                             ThreadPool* pool = nullptr, bool training = true) {
    const int n = store.count();
    const int d = store.d_sig;
    f.scene_out = training ? scene_forward(store, cond, f.scene_cache, pool)
                           : scene_forward_inference(store, cond, pool);

    Mat3 rx_rot_t = cfg.rx.rotation().transpose();
    f.visible.clear();
    f.derivs.clear();
    f.sigma3.clear();
    f.splat = SplatInput{};
    f.splat.compositor = store.pipeline == Pipeline::WrfGs ? Compositor::ChainedAttenuation
                                                           : Compositor::AlphaBlend;
    f.splat.d_sig = d;
    f.splat.h = cfg.canvas_h;
    f.splat.w = cfg.canvas_w;
    f.splat.early_termination = cfg.early_termination;
    f.splat.kernel_weights = cfg.angular;

    std::vector<char> keep(n, 0);
    std::vector<ProjectedGaussian> pgs(n);
    std::vector<ProjectionDerivs> pds(n);
    std::vector<Mat3> sigmas(n);
    auto project_one = [&](int64_t i) {
        Vec3 t = rx_rot_t * (store.gaussians[i].mu - cfg.rx.position);
        ProjectedGaussian& pg = pgs[i];
        if (cfg.angular) {
            auto p = project_point(t, cfg.canvas_w, cfg.canvas_h);
            if (!p) return;
            pg.pixel = p->first;
            pg.depth = p->second;
            pds[i] = project_point_derivs(t, cfg.canvas_w, cfg.canvas_h);
            sigmas[i] = covariance(f.scene_out.rot_raw[i], f.scene_out.log_scale_eff[i]);
            pg.cov2d = project_covariance(sigmas[i], pds[i].jac);
        } else {
            pg.pixel = Vec2::Zero();
            pg.depth = std::max(t.norm(), 1e-12);
            pg.cov2d = Mat2::Identity();
            sigmas[i] = Mat3::Identity();
        }
        pg.source_index = int(i);
        keep[i] = 1;
    };
    if (pool && n >= 256)
        pool->parallel_for(n, project_one);
    else
        for (int64_t i = 0; i < n; ++i) project_one(i);

    for (int i = 0; i < n; ++i) {
        if (!keep[i]) continue;
        f.splat.projected.push_back(pgs[i]);
        f.derivs.push_back(pds[i]);
        f.sigma3.push_back(sigmas[i]);
        f.visible.push_back(i);
        for (int ch = 0; ch < d; ++ch)
            f.splat.signals.push_back(f.scene_out.signal[std::size_t(i) * d + ch]);
        if (f.splat.compositor == Compositor::ChainedAttenuation)
            f.splat.attenuation.push_back(f.scene_out.attenuation[i]);
        else
            f.splat.opacity.push_back(f.scene_out.opacity[i]);
    }
    f.field = render(f.splat, f.aux, pool);
}

// Reverse pass: splat -> projection/covariance -> scene networks and
// Gaussian attributes. `d_field` is dL/d(complex field) of f.field.
inline void backward_pipeline(ParamStore& store, const PipelineConfig& cfg, PipelineForward& f,
                              const std::vector<ComplexSample>& d_field,
                              ThreadPool* pool = nullptr) {
    const int n = store.count();
    const int d = store.d_sig;
    SplatGrads sg = render_backward(f.splat, f.aux, d_field, pool);

    std::vector<ComplexSample> d_signal(std::size_t(n) * d, ComplexSample{0, 0});
    std::vector<ComplexSample> d_attenuation;
    std::vector<double> d_opacity;
    std::vector<Vec4> d_rot_raw(n, Vec4::Zero());
    std::vector<Vec3> d_ls_eff(n, Vec3::Zero());
    if (f.splat.compositor == Compositor::ChainedAttenuation)
        d_attenuation.assign(n, ComplexSample{0, 0});
    else
        d_opacity.assign(n, 0.0);

    Mat3 rx_rot = cfg.rx.rotation();
    for (std::size_t v = 0; v < f.visible.size(); ++v) {
        int i = f.visible[v];
        for (int ch = 0; ch < d; ++ch)
            d_signal[std::size_t(i) * d + ch] += sg.d_signal[v * d + ch];
        if (f.splat.compositor == Compositor::ChainedAttenuation)
            d_attenuation[i] += sg.d_attenuation[v];
        else
            d_opacity[i] += sg.d_opacity[v];
        if (cfg.angular) {
            Vec3 d_t = Vec3::Zero();
            Mat3 d_s3 = Mat3::Zero();
            projection_backward(f.derivs[v], f.sigma3[v], sg.d_pixel[v], sg.d_cov2d[v], d_t, d_s3);
            store.grad[i].mu += rx_rot * d_t;
            Vec4 dr = Vec4::Zero();
            Vec3 dls = Vec3::Zero();
            covariance_backward(f.scene_out.rot_raw[i], f.scene_out.log_scale_eff[i], d_s3, dr, dls);
            d_rot_raw[i] += dr;
            d_ls_eff[i] += dls;
        }
    }

    if (store.pipeline == Pipeline::WrfGs) {
        // rotation/scale are direct store attributes in this variant
        for (int i = 0; i < n; ++i) {
            store.grad[i].rot += d_rot_raw[i];
            store.grad[i].log_scale += d_ls_eff[i];
        }
        wrfgs_backward(store, f.scene_cache, d_signal, d_attenuation, pool);
    } else {
        wrfgsplus_backward(store, f.scene_cache, d_signal, d_opacity, d_rot_raw, d_ls_eff, pool);
    }
}

// Projected footprint radius per store index (0 for culled); densification
// uses this for the oversize prune rule.
inline std::vector<double> footprint_radii_px(const PipelineForward& f, int n) {
    std::vector<double> out(n, 0.0);
    for (std::size_t v = 0; v < f.visible.size(); ++v)
        out[f.visible[v]] = f.aux.radius.empty() ? 0.0 : f.aux.radius[v];
    return out;
}

}  // namespace wrfgs
