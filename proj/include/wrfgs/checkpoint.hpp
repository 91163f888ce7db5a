// Copyright Contributors to the wrfgs Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>

#include "wrfgs/io.hpp"
#include "wrfgs/pipeline.hpp"
#include "wrfgs/scene.hpp"

namespace wrfgs {

// Versioned binary training state: every attribute array, every layer, all
// optimizer moments, plus the render geometry and the config hash. Layout is
// fixed little-endian (see the put_* calls), so identical states serialize
// to identical bytes.
struct Checkpoint {
    uint32_t version = 1;
    TaskKind task = TaskKind::Spectrum;
    ConditioningKind cond_kind = ConditioningKind::TxPosition;
    int canvas_h = 90, canvas_w = 360;
    RxPose rx;
    double eta = 0.2;
    uint64_t config_hash = 0;
    ParamStore store;
};

namespace detail {

inline void put_layer(BinWriter& w, const DenseLayer& l) {
    w.put_i32(l.in_dim);
    w.put_i32(l.out_dim);
    auto put_mat = [&](const MatX& m) {
        for (int r = 0; r < m.rows(); ++r)
            for (int c = 0; c < m.cols(); ++c) w.put_f64(m(r, c));
    };
    auto put_vec = [&](const VecX& v) {
        for (int i = 0; i < v.size(); ++i) w.put_f64(v[i]);
    };
    put_mat(l.w);
    put_mat(l.mw);
    put_mat(l.vw);
    put_vec(l.b);
    put_vec(l.mb);
    put_vec(l.vb);
}

inline void get_layer(BinReader& r, DenseLayer& l) {
    int in = r.get_i32(), out = r.get_i32();
    l.init_zero(in, out);
    auto get_mat = [&](MatX& m) {
        for (int rr = 0; rr < m.rows(); ++rr)
            for (int c = 0; c < m.cols(); ++c) m(rr, c) = r.get_f64();
    };
    auto get_vec = [&](VecX& v) {
        for (int i = 0; i < v.size(); ++i) v[i] = r.get_f64();
    };
    get_mat(l.w);
    get_mat(l.mw);
    get_mat(l.vw);
    get_vec(l.b);
    get_vec(l.mb);
    get_vec(l.vb);
}

inline void put_gaussian_block(BinWriter& w, const GaussianPrimitive& g, const GaussianGrad& m,
                               const GaussianGrad& v, int d_sig) {
    for (int a = 0; a < 3; ++a) w.put_f64(g.mu[a]);
    for (int a = 0; a < 4; ++a) w.put_f64(g.rot[a]);
    for (int a = 0; a < 3; ++a) w.put_f64(g.log_scale[a]);
    w.put_f64(g.opacity_logit);
    for (int ch = 0; ch < d_sig; ++ch) {
        w.put_f64(g.static_signal[ch].re);
        w.put_f64(g.static_signal[ch].im);
    }
    auto put_grad = [&](const GaussianGrad& gg) {
        for (int a = 0; a < 3; ++a) w.put_f64(gg.mu[a]);
        for (int a = 0; a < 4; ++a) w.put_f64(gg.rot[a]);
        for (int a = 0; a < 3; ++a) w.put_f64(gg.log_scale[a]);
        w.put_f64(gg.opacity_logit);
        for (int ch = 0; ch < d_sig; ++ch) {
            w.put_f64(gg.static_signal[ch].re);
            w.put_f64(gg.static_signal[ch].im);
        }
    };
    put_grad(m);
    put_grad(v);
}

}  // namespace detail

inline std::string encode_checkpoint(const Checkpoint& c) {
    BinWriter w;
    w.put_bytes("WRFGSCP1", 8);
    w.put_u32(c.version);
    w.put_u32(uint32_t(c.task));
    w.put_u32(uint32_t(c.cond_kind));
    w.put_u32(uint32_t(c.store.pipeline));
    w.put_i32(c.canvas_h);
    w.put_i32(c.canvas_w);
    for (int a = 0; a < 3; ++a) w.put_f64(c.rx.position[a]);
    for (int a = 0; a < 4; ++a) w.put_f64(c.rx.orientation[a]);
    w.put_f64(c.eta);
    w.put_u64(c.config_hash);

    const ParamStore& s = c.store;
    w.put_i32(s.d_sig);
    w.put_i32(s.enc_order);
    w.put_u64(s.step_count);
    for (int a = 0; a < 3; ++a) w.put_f64(s.scene_min[a]);
    for (int a = 0; a < 3; ++a) w.put_f64(s.scene_extent[a]);
    w.put_f64(s.rssi_bias);
    w.put_f64(s.rssi_bias_m);
    w.put_f64(s.rssi_bias_v);
    w.put_f64(s.csi_scale);
    w.put_i32(s.csi_enc_order);
    w.put_f64(s.csi_cond_gain);
    w.put_i32(s.count());
    for (int i = 0; i < s.count(); ++i)
        detail::put_gaussian_block(w, s.gaussians[i], s.moment_m[i], s.moment_v[i], s.d_sig);

    if (s.pipeline == Pipeline::WrfGs) {
        w.put_i32(int(s.scen.trunk.size()) + 4);
        for (const auto& l : s.scen.trunk) detail::put_layer(w, l);
        detail::put_layer(w, s.scen.delta_head);
        detail::put_layer(w, s.scen.mix1);
        detail::put_layer(w, s.scen.mix2);
        detail::put_layer(w, s.scen.sig_head);
    } else {
        w.put_i32(int(s.deform.layers.size()) + 3);
        for (const auto& l : s.deform.layers) detail::put_layer(w, l);
        detail::put_layer(w, s.deform.sig_head);
        detail::put_layer(w, s.deform.rot_head);
        detail::put_layer(w, s.deform.scale_head);
    }
    return std::move(w.buf);
}

inline Checkpoint decode_checkpoint(const std::string& data) {
    BinReader r(data);
    char magic[8];
    r.get_bytes(magic, 8);
    if (std::memcmp(magic, "WRFGSCP1", 8) != 0) throw std::runtime_error("bad checkpoint magic");
    Checkpoint c;
    c.version = r.get_u32();
    if (c.version != 1) throw std::runtime_error("unsupported checkpoint version");
    c.task = TaskKind(r.get_u32());
    c.cond_kind = ConditioningKind(r.get_u32());
    c.store.pipeline = Pipeline(r.get_u32());
    c.canvas_h = r.get_i32();
    c.canvas_w = r.get_i32();
    for (int a = 0; a < 3; ++a) c.rx.position[a] = r.get_f64();
    for (int a = 0; a < 4; ++a) c.rx.orientation[a] = r.get_f64();
    c.eta = r.get_f64();
    c.config_hash = r.get_u64();

    ParamStore& s = c.store;
    s.d_sig = r.get_i32();
    s.enc_order = r.get_i32();
    s.step_count = r.get_u64();
    for (int a = 0; a < 3; ++a) s.scene_min[a] = r.get_f64();
    for (int a = 0; a < 3; ++a) s.scene_extent[a] = r.get_f64();
    s.rssi_bias = r.get_f64();
    s.rssi_bias_m = r.get_f64();
    s.rssi_bias_v = r.get_f64();
    s.csi_scale = r.get_f64();
    s.csi_enc_order = r.get_i32();
    s.csi_cond_gain = r.get_f64();
    int n = r.get_i32();
    s.gaussians.resize(n);
    s.grad.assign(n, GaussianGrad(s.d_sig));
    s.moment_m.assign(n, GaussianGrad(s.d_sig));
    s.moment_v.assign(n, GaussianGrad(s.d_sig));
    for (int i = 0; i < n; ++i) {
        auto& g = s.gaussians[i];
        for (int a = 0; a < 3; ++a) g.mu[a] = r.get_f64();
        for (int a = 0; a < 4; ++a) g.rot[a] = r.get_f64();
        for (int a = 0; a < 3; ++a) g.log_scale[a] = r.get_f64();
        g.opacity_logit = r.get_f64();
        g.static_signal.resize(s.d_sig);
        for (int ch = 0; ch < s.d_sig; ++ch) {
            g.static_signal[ch].re = r.get_f64();
            g.static_signal[ch].im = r.get_f64();
        }
        auto get_grad = [&](GaussianGrad& gg) {
            for (int a = 0; a < 3; ++a) gg.mu[a] = r.get_f64();
            for (int a = 0; a < 4; ++a) gg.rot[a] = r.get_f64();
            for (int a = 0; a < 3; ++a) gg.log_scale[a] = r.get_f64();
            gg.opacity_logit = r.get_f64();
            for (int ch = 0; ch < s.d_sig; ++ch) {
                gg.static_signal[ch].re = r.get_f64();
                gg.static_signal[ch].im = r.get_f64();
            }
        };
        get_grad(s.moment_m[i]);
        get_grad(s.moment_v[i]);
    }

    int n_layers = r.get_i32();
    if (s.pipeline == Pipeline::WrfGs) {
        s.scen.trunk.resize(n_layers - 4);
        for (auto& l : s.scen.trunk) detail::get_layer(r, l);
        detail::get_layer(r, s.scen.delta_head);
        detail::get_layer(r, s.scen.mix1);
        detail::get_layer(r, s.scen.mix2);
        detail::get_layer(r, s.scen.sig_head);
    } else {
        s.deform.layers.resize(n_layers - 3);
        for (auto& l : s.deform.layers) detail::get_layer(r, l);
        detail::get_layer(r, s.deform.sig_head);
        detail::get_layer(r, s.deform.rot_head);
        detail::get_layer(r, s.deform.scale_head);
    }
    if (r.pos != data.size()) throw std::runtime_error("trailing checkpoint bytes");
    return c;
}

inline void save_checkpoint(const std::filesystem::path& p, const Checkpoint& c) {
    write_file(p, encode_checkpoint(c));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& p) {
    return decode_checkpoint(read_file(p));
}

}  // namespace wrfgs
