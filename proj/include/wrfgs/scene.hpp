// Copyright Contributors to the wrfgs Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "wrfgs/em_core.hpp"
#include "wrfgs/mlp.hpp"
#include "wrfgs/parallel.hpp"
#include "wrfgs/rng.hpp"

namespace wrfgs {

enum class Pipeline { WrfGs, WrfGsPlus };
enum class TaskKind { Spectrum, Rssi, Csi };

inline int task_d_sig(TaskKind k) { return k == TaskKind::Csi ? 26 : 1; }
constexpr int csi_subcarriers_half = 26;

enum class ConditioningKind { TxPosition, UplinkCsi };

// Exactly one payload is meaningful, selected by `kind`.
struct ConditioningInput {
    ConditioningKind kind = ConditioningKind::TxPosition;
    Vec3 tx_position = Vec3::Zero();
    std::vector<ComplexSample> uplink_csi;

    static ConditioningInput tx(const Vec3& p) {
        ConditioningInput c;
        c.kind = ConditioningKind::TxPosition;
        c.tx_position = p;
        return c;
    }
    static ConditioningInput csi(std::vector<ComplexSample> up) {
        ConditioningInput c;
        c.kind = ConditioningKind::UplinkCsi;
        c.uplink_csi = std::move(up);
        return c;
    }
};

// Gradient slots for one Gaussian's trainable attributes.
struct GaussianGrad {
    Vec3 mu = Vec3::Zero();
    Vec4 rot = Vec4::Zero();
    Vec3 log_scale = Vec3::Zero();
    double opacity_logit = 0.0;
    std::vector<ComplexSample> static_signal;

    explicit GaussianGrad(int d_sig = 1) : static_signal(d_sig, ComplexSample{0, 0}) {}
    void zero() {
        mu.setZero();
        rot.setZero();
        log_scale.setZero();
        opacity_logit = 0.0;
        std::fill(static_signal.begin(), static_signal.end(), ComplexSample{0, 0});
    }
};

// wrfgs scenario representation network: an 8x128 ReLU trunk over the
// encoded Gaussian center emitting the attenuation head and a feature
// vector, plus a two-layer conditioning mix (128 -> 64) emitting the signal.
struct ScenarioNet {
    std::vector<DenseLayer> trunk;  // 8 layers, 128 wide
    DenseLayer delta_head;          // 128 -> 2 raw (amplitude logit, phase pre-tanh)
    DenseLayer mix1, mix2;          // (128+cond) -> 128 -> 64
    DenseLayer sig_head;            // 64 -> 2*d_sig

    static constexpr int width = 128;
    static constexpr int mix_width = 64;
    static constexpr int n_trunk = 8;

    bool empty() const { return trunk.empty(); }

    void init(int enc_center_dim, int enc_cond_dim, int d_sig, Rng& rng) {
        trunk.resize(n_trunk);
        for (int i = 0; i < n_trunk; ++i)
            trunk[i].init(i == 0 ? enc_center_dim : width, width, rng);
        delta_head.init_zero(width, 2);
        mix1.init(width + enc_cond_dim, width, rng);
        mix2.init(width, mix_width, rng);
        // a zero signal head is a stationary point of every power objective;
        // break the symmetry with a small random head
        sig_head.init(mix_width, 2 * d_sig, rng, 0.1);
    }

    template <typename F>
    void for_each_layer(F&& f) {
        for (auto& l : trunk) f(l);
        f(delta_head);
        f(mix1);
        f(mix2);
        f(sig_head);
    }
};

// wrfgsplus deformation network: 8x256 ReLU with the encoded input
// re-concatenated at layer 5, and three linear offset heads.
struct DeformationNet {
    std::vector<DenseLayer> layers;  // 8 layers, 256 wide
    DenseLayer sig_head;             // 256 -> 2*d_sig
    DenseLayer rot_head;             // 256 -> 4
    DenseLayer scale_head;           // 256 -> 3

    static constexpr int width = 256;
    static constexpr int n_layers = 8;
    static constexpr int skip_layer = 4;  // layer index (0-based) whose input is [A4 | X]

    bool empty() const { return layers.empty(); }

    void init(int enc_in_dim, int d_sig, Rng& rng) {
        layers.resize(n_layers);
        for (int i = 0; i < n_layers; ++i) {
            int in = i == 0 ? enc_in_dim : (i == skip_layer ? width + enc_in_dim : width);
            layers[i].init(in, width, rng);
        }
        sig_head.init_zero(width, 2 * d_sig);
        rot_head.init_zero(width, 4);
        scale_head.init_zero(width, 3);
    }

    template <typename F>
    void for_each_layer(F&& f) {
        for (auto& l : layers) f(l);
        f(sig_head);
        f(rot_head);
        f(scale_head);
    }
};

// Flat store of every trainable scalar: Gaussian attributes with their
// gradient/moment slots, the active network, and the RSSI calibration
// scalar. Encoder inputs are normalized by the recorded scene box.
struct ParamStore {
    Pipeline pipeline = Pipeline::WrfGsPlus;
    int d_sig = 1;
    int enc_order = 9;
    // CSI conditioning: uplink values are scaled to unit RMS times
    // csi_cond_gain and encoded with their own (much lower) order. High
    // encoding bands on non-spatial inputs decorrelate neighboring uplinks
    // and the network memorizes instead of generalizing.
    int csi_enc_order = 1;
    double csi_cond_gain = 0.25;
    std::vector<GaussianPrimitive> gaussians;
    std::vector<GaussianGrad> grad, moment_m, moment_v;
    ScenarioNet scen;
    DeformationNet deform;
    double rssi_bias = 0.0, rssi_bias_g = 0.0, rssi_bias_m = 0.0, rssi_bias_v = 0.0;
    double csi_scale = 1.0;
    uint64_t step_count = 0;
    Vec3 scene_min = Vec3::Zero();
    Vec3 scene_extent = Vec3::Ones();

    int count() const { return int(gaussians.size()); }
    int enc_center_dim() const { return encoded_size(3, enc_order); }
    int enc_cond_dim(ConditioningKind k) const {
        return k == ConditioningKind::TxPosition
                   ? encoded_size(3, enc_order)
                   : encoded_size(2 * csi_subcarriers_half, csi_enc_order);
    }

    void zero_grad() {
        for (auto& g : grad) g.zero();
        rssi_bias_g = 0.0;
        if (!scen.empty()) scen.for_each_layer([](DenseLayer& l) { l.zero_grad(); });
        if (!deform.empty()) deform.for_each_layer([](DenseLayer& l) { l.zero_grad(); });
    }

    Vec3 normalize_position(const Vec3& p) const {
        return (p - scene_min).cwiseQuotient(scene_extent);
    }
};

// Addressable view of one trainable scalar; used by gradient checks and
// diagnostics to sample parameters uniformly across the whole store.
struct ParamView {
    double* value = nullptr;
    double* grad = nullptr;
    std::string name;
};

inline std::vector<ParamView> collect_param_views(ParamStore& store) {
    std::vector<ParamView> out;
    for (int i = 0; i < store.count(); ++i) {
        auto& g = store.gaussians[i];
        auto& gr = store.grad[i];
        std::string base = "g" + std::to_string(i);
        for (int a = 0; a < 3; ++a)
            out.push_back({&g.mu[a], &gr.mu[a], base + ".mu" + std::to_string(a)});
        for (int a = 0; a < 4; ++a)
            out.push_back({&g.rot[a], &gr.rot[a], base + ".rot" + std::to_string(a)});
        for (int a = 0; a < 3; ++a)
            out.push_back({&g.log_scale[a], &gr.log_scale[a], base + ".ls" + std::to_string(a)});
        out.push_back({&g.opacity_logit, &gr.opacity_logit, base + ".op"});
        for (int ch = 0; ch < store.d_sig; ++ch) {
            out.push_back({&g.static_signal[ch].re, &gr.static_signal[ch].re,
                           base + ".sig" + std::to_string(ch) + "re"});
            out.push_back({&g.static_signal[ch].im, &gr.static_signal[ch].im,
                           base + ".sig" + std::to_string(ch) + "im"});
        }
    }
    int layer_id = 0;
    auto add_layer = [&](DenseLayer& l) {
        std::string base = "net.l" + std::to_string(layer_id++);
        for (int r = 0; r < l.out_dim; ++r) {
            for (int c = 0; c < l.in_dim; ++c)
                out.push_back({&l.w(r, c), &l.gw(r, c),
                               base + ".w" + std::to_string(r) + "_" + std::to_string(c)});
            out.push_back({&l.b[r], &l.gb[r], base + ".b" + std::to_string(r)});
        }
    };
    if (!store.scen.empty()) store.scen.for_each_layer(add_layer);
    if (!store.deform.empty()) store.deform.for_each_layer(add_layer);
    out.push_back({&store.rssi_bias, &store.rssi_bias_g, "rssi_bias"});
    return out;
}

inline std::vector<double> encode_conditioning(const ParamStore& store,
                                               const ConditioningInput& cond) {
    if (cond.kind == ConditioningKind::TxPosition) {
        Vec3 n = store.normalize_position(cond.tx_position);
        double t[3] = {n.x(), n.y(), n.z()};
        std::vector<double> out(encoded_size(3, store.enc_order));
        positional_encode(t, 3, store.enc_order, out.data());
        return out;
    }
    if (int(cond.uplink_csi.size()) != csi_subcarriers_half)
        throw std::invalid_argument("ConditioningInput: uplink must have 26 subcarriers");
    std::vector<double> flat(2 * csi_subcarriers_half);
    double gain = store.csi_scale * store.csi_cond_gain;
    for (int i = 0; i < csi_subcarriers_half; ++i) {
        flat[2 * i] = cond.uplink_csi[i].re * gain;
        flat[2 * i + 1] = cond.uplink_csi[i].im * gain;
    }
    std::vector<double> out(encoded_size(int(flat.size()), store.csi_enc_order));
    positional_encode(flat.data(), int(flat.size()), store.csi_enc_order, out.data());
    return out;
}

// Per-sample forward outputs of the scene model; layout per Gaussian.
struct SceneOutputs {
    std::vector<ComplexSample> signal;      // N * d_sig (S, or S + Delta_sig)
    std::vector<ComplexSample> attenuation; // N (wrfgs)
    std::vector<double> opacity;            // N (wrfgsplus)
    std::vector<Vec4> rot_raw;              // N, pre-normalization effective rotation
    std::vector<Vec3> log_scale_eff;        // N
};

struct SceneCache {
    MatX enc_centers;               // N x encC
    std::vector<MatX> acts;         // per-layer post activations (trunk or deform)
    MatX mix_in, mix_act1, mix_act2;  // wrfgs conditioning branch
    MatX delta_raw;                 // N x 2
    std::vector<double> enc_cond;   // conditioning encoding
    MatX deform_in;                 // N x (encC + encCond)
    MatX skip_in;                   // N x (width + enc_in)
};

namespace detail {

inline void encode_centers(const ParamStore& store, MatX& out) {
    const int n = store.count();
    const int e = store.enc_center_dim();
    out.resize(n, e);
    for (int i = 0; i < n; ++i) {
        Vec3 nc = store.normalize_position(store.gaussians[i].mu);
        double t[3] = {nc.x(), nc.y(), nc.z()};
        positional_encode(t, 3, store.enc_order, out.row(i).data());
    }
}

}  // namespace detail

// wrfgs variant: attenuation depends only on the encoded center; the signal mixes
// the trunk feature with the encoded conditioning input.
inline SceneOutputs wrfgs_forward(ParamStore& store, const ConditioningInput& cond,
                                  SceneCache& cache, ThreadPool* pool = nullptr) {
    const int n = store.count();
    const int d = store.d_sig;
    ScenarioNet& net = store.scen;
    detail::encode_centers(store, cache.enc_centers);
    cache.enc_cond = encode_conditioning(store, cond);

    if (int(cache.acts.size()) != net.n_trunk) cache.acts.assign(net.n_trunk, MatX());
    const MatX* x = &cache.enc_centers;
    for (int l = 0; l < net.n_trunk; ++l) {
        linear_forward(net.trunk[l], *x, cache.acts[l], pool);
        relu_inplace(cache.acts[l]);
        x = &cache.acts[l];
    }
    linear_forward(net.delta_head, *x, cache.delta_raw, pool);

    const int ce = int(cache.enc_cond.size());
    cache.mix_in.resize(n, net.width + ce);
    cache.mix_in.leftCols(net.width) = *x;
    for (int i = 0; i < n; ++i)
        for (int c = 0; c < ce; ++c) cache.mix_in(i, net.width + c) = cache.enc_cond[c];
    linear_forward(net.mix1, cache.mix_in, cache.mix_act1, pool);
    relu_inplace(cache.mix_act1);
    linear_forward(net.mix2, cache.mix_act1, cache.mix_act2, pool);
    relu_inplace(cache.mix_act2);
    MatX sig_raw;
    linear_forward(net.sig_head, cache.mix_act2, sig_raw, pool);

    SceneOutputs out;
    out.signal.resize(std::size_t(n) * d);
    out.attenuation.resize(n);
    out.rot_raw.resize(n);
    out.log_scale_eff.resize(n);
    for (int i = 0; i < n; ++i) {
        double amp = sigmoid(cache.delta_raw(i, 0));
        double phase = pi * std::tanh(cache.delta_raw(i, 1));
        out.attenuation[i] = amp * cis(phase);
        store.gaussians[i].attenuation = out.attenuation[i];
        for (int ch = 0; ch < d; ++ch)
            out.signal[std::size_t(i) * d + ch] = {sig_raw(i, 2 * ch), sig_raw(i, 2 * ch + 1)};
        out.rot_raw[i] = store.gaussians[i].rot;
        out.log_scale_eff[i] = store.gaussians[i].log_scale;
    }
    return out;
}

// Backward of wrfgs_forward. d_signal / d_attenuation follow SceneOutputs
// layout; accumulates network and Gaussian-attribute gradients, including
// dL/dmu through the center encoding.
inline void wrfgs_backward(ParamStore& store, const SceneCache& cache,
                           const std::vector<ComplexSample>& d_signal,
                           const std::vector<ComplexSample>& d_attenuation,
                           ThreadPool* pool = nullptr) {
    const int n = store.count();
    const int d = store.d_sig;
    ScenarioNet& net = store.scen;

    MatX d_sig_raw(n, 2 * d);
    for (int i = 0; i < n; ++i)
        for (int ch = 0; ch < d; ++ch) {
            d_sig_raw(i, 2 * ch) = d_signal[std::size_t(i) * d + ch].re;
            d_sig_raw(i, 2 * ch + 1) = d_signal[std::size_t(i) * d + ch].im;
        }
    MatX d_delta_raw(n, 2);
    for (int i = 0; i < n; ++i) {
        double amp = sigmoid(cache.delta_raw(i, 0));
        double th = std::tanh(cache.delta_raw(i, 1));
        double cphi = std::cos(pi * th), sphi = std::sin(pi * th);
        double d_amp = d_attenuation[i].re * cphi + d_attenuation[i].im * sphi;
        double d_phase = amp * (-d_attenuation[i].re * sphi + d_attenuation[i].im * cphi);
        d_delta_raw(i, 0) = d_amp * amp * (1.0 - amp);
        d_delta_raw(i, 1) = d_phase * pi * (1.0 - th * th);
    }

    MatX d_mix2, d_mix1, d_mix_in;
    linear_backward(net.sig_head, cache.mix_act2, d_sig_raw, d_mix2, pool);
    relu_backward_inplace(cache.mix_act2, d_mix2);
    linear_backward(net.mix2, cache.mix_act1, d_mix2, d_mix1, pool);
    relu_backward_inplace(cache.mix_act1, d_mix1);
    linear_backward(net.mix1, cache.mix_in, d_mix1, d_mix_in, pool);

    // trunk receives gradient from both heads
    MatX d_feat = d_mix_in.leftCols(net.width);
    MatX d_head_in;
    linear_backward(net.delta_head, cache.acts[net.n_trunk - 1], d_delta_raw, d_head_in, pool);
    MatX d_act = d_feat + d_head_in;
    for (int l = net.n_trunk - 1; l >= 0; --l) {
        relu_backward_inplace(cache.acts[l], d_act);
        const MatX& in = l == 0 ? cache.enc_centers : cache.acts[l - 1];
        MatX d_in;
        linear_backward(net.trunk[l], in, d_act, d_in, pool);
        d_act = std::move(d_in);
    }
    // chain the encoding back to the raw positions
    for (int i = 0; i < n; ++i) {
        double dt[3] = {0, 0, 0};
        positional_encode_backward(cache.enc_centers.row(i).data(), 3, store.enc_order,
                                   d_act.row(i).data(), dt);
        for (int a = 0; a < 3; ++a) store.grad[i].mu[a] += dt[a] / store.scene_extent[a];
    }
}

// wrfgsplus variant: static store attributes plus conditioning-dependent offsets from
// the deformation network; opacity comes straight from the store.
inline SceneOutputs wrfgsplus_forward(ParamStore& store, const ConditioningInput& cond,
                                      SceneCache& cache, ThreadPool* pool = nullptr) {
    const int n = store.count();
    const int d = store.d_sig;
    DeformationNet& net = store.deform;
    detail::encode_centers(store, cache.enc_centers);
    cache.enc_cond = encode_conditioning(store, cond);

    const int ec = store.enc_center_dim();
    const int cc = int(cache.enc_cond.size());
    cache.deform_in.resize(n, ec + cc);
    cache.deform_in.leftCols(ec) = cache.enc_centers;
    for (int i = 0; i < n; ++i)
        for (int c = 0; c < cc; ++c) cache.deform_in(i, ec + c) = cache.enc_cond[c];

    if (int(cache.acts.size()) != net.n_layers) cache.acts.assign(net.n_layers, MatX());
    const MatX* x = &cache.deform_in;
    for (int l = 0; l < net.n_layers; ++l) {
        if (l == net.skip_layer) {
            cache.skip_in.resize(n, net.width + ec + cc);
            cache.skip_in.leftCols(net.width) = *x;
            cache.skip_in.rightCols(ec + cc) = cache.deform_in;
            linear_forward(net.layers[l], cache.skip_in, cache.acts[l], pool);
        } else {
            linear_forward(net.layers[l], *x, cache.acts[l], pool);
        }
        relu_inplace(cache.acts[l]);
        x = &cache.acts[l];
    }
    MatX d_sig_raw, d_rot_raw, d_scale_raw;
    linear_forward(net.sig_head, *x, d_sig_raw, pool);
    linear_forward(net.rot_head, *x, d_rot_raw, pool);
    linear_forward(net.scale_head, *x, d_scale_raw, pool);

    SceneOutputs out;
    out.signal.resize(std::size_t(n) * d);
    out.opacity.resize(n);
    out.rot_raw.resize(n);
    out.log_scale_eff.resize(n);
    for (int i = 0; i < n; ++i) {
        const auto& g = store.gaussians[i];
        for (int ch = 0; ch < d; ++ch)
            out.signal[std::size_t(i) * d + ch] =
                g.static_signal[ch] + ComplexSample{d_sig_raw(i, 2 * ch), d_sig_raw(i, 2 * ch + 1)};
        out.opacity[i] = sigmoid(g.opacity_logit);
        out.rot_raw[i] = g.rot + Vec4(d_rot_raw(i, 0), d_rot_raw(i, 1), d_rot_raw(i, 2), d_rot_raw(i, 3));
        out.log_scale_eff[i] =
            g.log_scale + Vec3(d_scale_raw(i, 0), d_scale_raw(i, 1), d_scale_raw(i, 2));
    }
    return out;
}

// Backward of wrfgsplus_forward. d_rot_raw / d_ls_eff are gradients w.r.t.
// the effective (offset) attributes; d_opacity w.r.t. sigmoid(logit).
inline void wrfgsplus_backward(ParamStore& store, const SceneCache& cache,
                               const std::vector<ComplexSample>& d_signal,
                               const std::vector<double>& d_opacity,
                               const std::vector<Vec4>& d_rot_raw, const std::vector<Vec3>& d_ls_eff,
                               ThreadPool* pool = nullptr) {
    const int n = store.count();
    const int d = store.d_sig;
    DeformationNet& net = store.deform;

    MatX dh_sig(n, 2 * d), dh_rot(n, 4), dh_scale(n, 3);
    for (int i = 0; i < n; ++i) {
        auto& g = store.grad[i];
        const auto& gp = store.gaussians[i];
        for (int ch = 0; ch < d; ++ch) {
            const ComplexSample& ds = d_signal[std::size_t(i) * d + ch];
            g.static_signal[ch] += ds;
            dh_sig(i, 2 * ch) = ds.re;
            dh_sig(i, 2 * ch + 1) = ds.im;
        }
        double o = sigmoid(gp.opacity_logit);
        g.opacity_logit += d_opacity[i] * o * (1.0 - o);
        for (int c = 0; c < 4; ++c) {
            g.rot[c] += d_rot_raw[i][c];
            dh_rot(i, c) = d_rot_raw[i][c];
        }
        for (int c = 0; c < 3; ++c) {
            g.log_scale[c] += d_ls_eff[i][c];
            dh_scale(i, c) = d_ls_eff[i][c];
        }
    }

    const MatX& feat = cache.acts[net.n_layers - 1];
    MatX d_act, tmp;
    linear_backward(net.sig_head, feat, dh_sig, d_act, pool);
    linear_backward(net.rot_head, feat, dh_rot, tmp, pool);
    d_act += tmp;
    linear_backward(net.scale_head, feat, dh_scale, tmp, pool);
    d_act += tmp;

    const int ec = store.enc_center_dim();
    MatX d_input = MatX::Zero(n, cache.deform_in.cols());
    for (int l = net.n_layers - 1; l >= 0; --l) {
        relu_backward_inplace(cache.acts[l], d_act);
        if (l == net.skip_layer) {
            MatX d_skip;
            linear_backward(net.layers[l], cache.skip_in, d_act, d_skip, pool);
            d_input += d_skip.rightCols(cache.deform_in.cols());
            d_act = d_skip.leftCols(net.width).eval();
        } else {
            const MatX& in = l == 0 ? cache.deform_in : cache.acts[l - 1];
            MatX d_in;
            linear_backward(net.layers[l], in, d_act, d_in, pool);
            d_act = std::move(d_in);
        }
    }
    d_input += d_act;

    for (int i = 0; i < n; ++i) {
        double dt[3] = {0, 0, 0};
        positional_encode_backward(cache.enc_centers.row(i).data(), 3, store.enc_order,
                                   d_input.row(i).data(), dt);
        for (int a = 0; a < 3; ++a) store.grad[i].mu[a] += dt[a] / store.scene_extent[a];
    }
}

inline SceneOutputs scene_forward(ParamStore& store, const ConditioningInput& cond,
                                  SceneCache& cache, ThreadPool* pool = nullptr) {
    return store.pipeline == Pipeline::WrfGs ? wrfgs_forward(store, cond, cache, pool)
                                             : wrfgsplus_forward(store, cond, cache, pool);
}

// Inference-only forward, processed in Gaussian blocks small enough that
// layer activations stay cache resident. No backward cache is built, so
// large stores render without streaming hundreds of MB of activations.
inline SceneOutputs scene_forward_inference(ParamStore& store, const ConditioningInput& cond,
                                            ThreadPool* pool = nullptr) {
    const int n = store.count();
    const int d = store.d_sig;
    std::vector<double> enc_cond = encode_conditioning(store, cond);
    const int ec = store.enc_center_dim();
    const int cc = int(enc_cond.size());

    SceneOutputs out;
    out.signal.resize(std::size_t(n) * d);
    out.rot_raw.resize(n);
    out.log_scale_eff.resize(n);
    if (store.pipeline == Pipeline::WrfGs)
        out.attenuation.resize(n);
    else
        out.opacity.resize(n);

    constexpr int block = 768;
    const int n_blocks = (n + block - 1) / block;

    auto run_block = [&](int b) {
        const int lo = b * block;
        const int bn = std::min(n - lo, block);
        if (store.pipeline == Pipeline::WrfGs) {
            const ScenarioNet& net = store.scen;
            MatX x(bn, ec);
            for (int i = 0; i < bn; ++i) {
                Vec3 nc = store.normalize_position(store.gaussians[lo + i].mu);
                double t[3] = {nc.x(), nc.y(), nc.z()};
                positional_encode(t, 3, store.enc_order, x.row(i).data());
            }
            MatX h, tmp;
            for (int l = 0; l < net.n_trunk; ++l) {
                linear_forward(net.trunk[l], l == 0 ? x : h, tmp, nullptr);
                relu_inplace(tmp);
                std::swap(h, tmp);
            }
            MatX delta_raw, mix_in(bn, net.width + cc), m1, m2, sig_raw;
            linear_forward(net.delta_head, h, delta_raw, nullptr);
            mix_in.leftCols(net.width) = h;
            for (int i = 0; i < bn; ++i)
                for (int c = 0; c < cc; ++c) mix_in(i, net.width + c) = enc_cond[c];
            linear_forward(net.mix1, mix_in, m1, nullptr);
            relu_inplace(m1);
            linear_forward(net.mix2, m1, m2, nullptr);
            relu_inplace(m2);
            linear_forward(net.sig_head, m2, sig_raw, nullptr);
            for (int i = 0; i < bn; ++i) {
                const auto& g = store.gaussians[lo + i];
                double amp = sigmoid(delta_raw(i, 0));
                double phase = pi * std::tanh(delta_raw(i, 1));
                out.attenuation[lo + i] = amp * cis(phase);
                for (int ch = 0; ch < d; ++ch)
                    out.signal[std::size_t(lo + i) * d + ch] = {sig_raw(i, 2 * ch),
                                                                sig_raw(i, 2 * ch + 1)};
                out.rot_raw[lo + i] = g.rot;
                out.log_scale_eff[lo + i] = g.log_scale;
            }
        } else {
            const DeformationNet& net = store.deform;
            MatX x(bn, ec + cc);
            for (int i = 0; i < bn; ++i) {
                Vec3 nc = store.normalize_position(store.gaussians[lo + i].mu);
                double t[3] = {nc.x(), nc.y(), nc.z()};
                positional_encode(t, 3, store.enc_order, x.row(i).data());
                for (int c = 0; c < cc; ++c) x(i, ec + c) = enc_cond[c];
            }
            MatX h, tmp, skip;
            for (int l = 0; l < net.n_layers; ++l) {
                if (l == net.skip_layer) {
                    skip.resize(bn, net.width + ec + cc);
                    skip.leftCols(net.width) = h;
                    skip.rightCols(ec + cc) = x;
                    linear_forward(net.layers[l], skip, tmp, nullptr);
                } else {
                    linear_forward(net.layers[l], l == 0 ? x : h, tmp, nullptr);
                }
                relu_inplace(tmp);
                std::swap(h, tmp);
            }
            MatX d_sig, d_rot, d_scale;
            linear_forward(net.sig_head, h, d_sig, nullptr);
            linear_forward(net.rot_head, h, d_rot, nullptr);
            linear_forward(net.scale_head, h, d_scale, nullptr);
            for (int i = 0; i < bn; ++i) {
                const auto& g = store.gaussians[lo + i];
                for (int ch = 0; ch < d; ++ch)
                    out.signal[std::size_t(lo + i) * d + ch] =
                        g.static_signal[ch] + ComplexSample{d_sig(i, 2 * ch), d_sig(i, 2 * ch + 1)};
                out.opacity[lo + i] = sigmoid(g.opacity_logit);
                out.rot_raw[lo + i] =
                    g.rot + Vec4(d_rot(i, 0), d_rot(i, 1), d_rot(i, 2), d_rot(i, 3));
                out.log_scale_eff[lo + i] =
                    g.log_scale + Vec3(d_scale(i, 0), d_scale(i, 1), d_scale(i, 2));
            }
        }
    };
    if (pool)
        pool->parallel_for(n_blocks, [&](int64_t b) { run_block(int(b)); });
    else
        for (int b = 0; b < n_blocks; ++b) run_block(b);
    return out;
}

// Mean distance from each point to its (up to) `k` nearest neighbors.
inline std::vector<double> mean_nn_distances(const std::vector<Vec3>& pts, int k = 3,
                                             ThreadPool* pool = nullptr) {
    const int n = int(pts.size());
    std::vector<double> out(n, 0.0);
    auto job = [&](int64_t i) {
        std::vector<double> best(std::size_t(k), 1e300);
        for (int j = 0; j < n; ++j) {
            if (j == int(i)) continue;
            double d2 = (pts[j] - pts[std::size_t(i)]).squaredNorm();
            for (int s = 0; s < k; ++s) {
                if (d2 < best[s]) {
                    for (int t = k - 1; t > s; --t) best[t] = best[t - 1];
                    best[s] = d2;
                    break;
                }
            }
        }
        int avail = std::min(k, n - 1);
        double acc = 0.0;
        for (int s = 0; s < avail; ++s) acc += std::sqrt(best[s]);
        out[i] = avail > 0 ? acc / avail : 1.0;
    };
    if (pool)
        pool->parallel_for(n, job);
    else
        for (int64_t i = 0; i < n; ++i) job(i);
    return out;
}

// Random-point initialization. Centers are uniform in the given box; each
// scale starts at the mean distance to its 3 nearest neighbors (log-stored);
// opacity starts at 0.1. Static signals get a small symmetric-breaking
// random value (an exactly-zero signal field is a stationary point of the
// power loss).
inline ParamStore init_random(const Vec3& bounds_min, const Vec3& bounds_extent, int n,
                              uint64_t seed, Pipeline pipeline, TaskKind task,
                              ConditioningKind cond_kind, ThreadPool* pool = nullptr,
                              int csi_enc_order = 1, double csi_cond_gain = 0.25) {
    if (n < 16) throw std::invalid_argument("init_random: need at least min_gaussians = 16");
    ParamStore store;
    store.pipeline = pipeline;
    store.d_sig = task_d_sig(task);
    store.csi_enc_order = csi_enc_order;
    store.csi_cond_gain = csi_cond_gain;
    store.scene_min = bounds_min;
    store.scene_extent = bounds_extent.cwiseMax(1e-9);

    Rng pos_rng = derive_rng(seed, "init-pos");
    Rng sig_rng = derive_rng(seed, "init-sig");
    store.gaussians.resize(n);
    for (int i = 0; i < n; ++i) {
        auto& g = store.gaussians[i];
        for (int a = 0; a < 3; ++a)
            g.mu[a] = bounds_min[a] + pos_rng.uniform01() * bounds_extent[a];
        g.rot = Vec4(1, 0, 0, 0);
        g.opacity_logit = logit(0.1);
        g.static_signal.resize(store.d_sig);
        for (auto& s : g.static_signal)
            s = {sig_rng.uniform(-0.05, 0.05), sig_rng.uniform(-0.05, 0.05)};
    }

    std::vector<Vec3> centers(n);
    for (int i = 0; i < n; ++i) centers[i] = store.gaussians[i].mu;
    std::vector<double> nn_scale = mean_nn_distances(centers, 3, pool);
    for (int i = 0; i < n; ++i) {
        double s = std::clamp(nn_scale[i], 1e-4, bounds_extent.maxCoeff());
        store.gaussians[i].log_scale = Vec3::Constant(std::log(s));
    }

    store.grad.assign(n, GaussianGrad(store.d_sig));
    store.moment_m.assign(n, GaussianGrad(store.d_sig));
    store.moment_v.assign(n, GaussianGrad(store.d_sig));

    Rng net_rng = derive_rng(seed, "init-net");
    int ec = store.enc_center_dim();
    int cc = store.enc_cond_dim(cond_kind);
    if (pipeline == Pipeline::WrfGs)
        store.scen.init(ec, cc, store.d_sig, net_rng);
    else
        store.deform.init(ec + cc, store.d_sig, net_rng);
    return store;
}

// Densification bookkeeping accumulated by the training loop between
// densify steps.
struct DensifyStats {
    std::vector<Vec3> grad_sum;
    std::vector<double> norm_sum;
    std::vector<int> samples;

    void reset(int n) {
        grad_sum.assign(n, Vec3::Zero());
        norm_sum.assign(n, 0.0);
        samples.assign(n, 0);
    }
    void accumulate(const std::vector<GaussianGrad>& grads) {
        for (std::size_t i = 0; i < grads.size(); ++i) {
            grad_sum[i] += grads[i].mu;
            norm_sum[i] += grads[i].mu.norm();
            samples[i] += 1;
        }
    }
};

struct DensifyConfig {
    double grad_threshold = 2e-4;    // tau_g
    double scale_threshold = 0.0;    // tau_s, meters (set from scene extent)
    double opacity_prune = 0.005;
    double max_radius_px = 0.0;      // set from canvas
    int max_gaussians = 20000;
    int min_gaussians = 16;
};

// Clone/split/prune pass. `radii_px` is the current projected footprint
// radius per Gaussian (<= 0 when culled). New Gaussians start with zeroed
// moments; survivors keep theirs.
inline void densify_and_prune(ParamStore& store, const DensifyStats& stats,
                              const std::vector<double>& radii_px, const DensifyConfig& cfg,
                              uint64_t seed, uint64_t iteration) {
    const int n = store.count();
    Rng rng = derive_rng(seed, "densify", iteration);

    std::vector<GaussianPrimitive> out;
    std::vector<GaussianGrad> out_g, out_m, out_v;
    out.reserve(n + 64);
    auto push = [&](const GaussianPrimitive& g, const GaussianGrad* m, const GaussianGrad* v) {
        out.push_back(g);
        out_g.emplace_back(store.d_sig);
        out_m.push_back(m ? *m : GaussianGrad(store.d_sig));
        out_v.push_back(v ? *v : GaussianGrad(store.d_sig));
    };

    int budget = cfg.max_gaussians - n;
    std::vector<int> pruned;
    for (int i = 0; i < n; ++i) {
        const auto& g = store.gaussians[i];
        double opacity = sigmoid(g.opacity_logit);
        bool prune = opacity < cfg.opacity_prune ||
                     (cfg.max_radius_px > 0.0 && radii_px.size() == std::size_t(n) &&
                      radii_px[i] > cfg.max_radius_px);
        if (prune) {
            pruned.push_back(i);
            continue;
        }

        double avg_norm = stats.samples.size() == std::size_t(n) && stats.samples[i] > 0
                              ? stats.norm_sum[i] / stats.samples[i]
                              : 0.0;
        double max_scale = g.log_scale.array().exp().maxCoeff();
        bool wants_densify = avg_norm > cfg.grad_threshold;

        if (wants_densify && max_scale >= cfg.scale_threshold && budget >= 1) {
            // split: two samples from the Gaussian's own distribution, shrunk
            Mat3 sigma = covariance(g.rot, g.log_scale);
            Eigen::LLT<Mat3> llt(sigma + 1e-12 * Mat3::Identity());
            Mat3 chol = llt.matrixL();
            for (int s = 0; s < 2; ++s) {
                GaussianPrimitive child = g;
                Vec3 z(rng.normal(), rng.normal(), rng.normal());
                child.mu = g.mu + chol * z;
                child.log_scale = g.log_scale.array() - std::log(1.6);
                push(child, nullptr, nullptr);
            }
            budget -= 1;  // net +1
        } else if (wants_densify && max_scale < cfg.scale_threshold && budget >= 1) {
            // clone, stepping the copy down the averaged position gradient
            push(g, &store.moment_m[i], &store.moment_v[i]);
            GaussianPrimitive child = g;
            Vec3 dir = stats.grad_sum[i];
            double nrm = dir.norm();
            if (nrm > 0.0) {
                double mean_scale = g.log_scale.array().exp().mean();
                child.mu -= dir / nrm * (0.5 * mean_scale);
            }
            push(child, nullptr, nullptr);
            budget -= 1;
        } else {
            push(g, &store.moment_m[i], &store.moment_v[i]);
        }
    }

    if (int(out.size()) < cfg.min_gaussians) {
        // refuse to prune below the floor: restore the highest-opacity pruned ones
        std::sort(pruned.begin(), pruned.end(), [&](int a, int b) {
            return store.gaussians[a].opacity_logit > store.gaussians[b].opacity_logit;
        });
        for (std::size_t k = 0; int(out.size()) < cfg.min_gaussians && k < pruned.size(); ++k)
            push(store.gaussians[pruned[k]], &store.moment_m[pruned[k]], &store.moment_v[pruned[k]]);
    }

    store.gaussians = std::move(out);
    store.grad = std::move(out_g);
    store.moment_m = std::move(out_m);
    store.moment_v = std::move(out_v);
}

}  // namespace wrfgs
