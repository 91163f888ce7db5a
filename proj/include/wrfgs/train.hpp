// Copyright Contributors to the wrfgs Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cmath>
#include <ostream>
#include <string>
#include <vector>

#include "wrfgs/dataset.hpp"
#include "wrfgs/pipeline.hpp"
#include "wrfgs/ssim.hpp"
#include "wrfgs/tasks.hpp"

namespace wrfgs {

struct TrainConfig {
    Pipeline pipeline = Pipeline::WrfGsPlus;
    TaskKind task = TaskKind::Spectrum;
    double eta = 0.2;
    int iterations = 15000;
    int batch = 1;
    uint64_t seed = 1;
    int n_init = 512;
    int canvas_h = 90, canvas_w = 360;
    double lr_position = 1.6e-4;
    double lr_signal = 2.5e-3;
    double lr_opacity = 5e-2;
    double lr_rotation = 1e-3;
    double lr_scale = 5e-3;
    double lr_mlp = 1e-4;
    double lr_bias = 1e-2;
    int densify_interval = 100;
    int densify_warmup = 500;
    int densify_until = 0;  // 0 -> iterations/2
    double densify_grad_threshold = 2e-4;
    double densify_scale_frac = 0.01;  // tau_s as a fraction of scene extent
    double opacity_prune = 0.005;
    int max_gaussians = 20000;
    int min_gaussians = 16;
    int log_interval = 100;
    int csi_enc_order = 1;        // encoding order for uplink conditioning
    double csi_cond_gain = 0.25;  // uplink scale on top of unit-RMS normalization
    bool loss_on_magnitude = false;  // ablation: fit |R| instead of |R|^2
    bool early_termination = true;

    void validate() const {
        if (!(eta >= 0.0 && eta <= 1.0)) throw std::invalid_argument("config: eta must be in [0,1]");
        for (double lr : {lr_position, lr_signal, lr_opacity, lr_rotation, lr_scale, lr_mlp, lr_bias})
            if (!(lr > 0.0)) throw std::invalid_argument("config: learning rates must be positive");
        if (iterations < 1) throw std::invalid_argument("config: iterations must be >= 1");
        if (batch < 1) throw std::invalid_argument("config: batch must be >= 1");
        if (n_init < min_gaussians) throw std::invalid_argument("config: n_init below min_gaussians");
        if (task == TaskKind::Spectrum && canvas_w % 2 != 0)
            throw std::invalid_argument("config: canvas_w must be even for the spectrum task");
    }
};

// Spectrum loss: (1-eta) L1 + eta (1 - SSIM).
struct LossParts {
    double total = 0.0, l1 = 0.0, ssim_value = 0.0;
};

inline LossParts spectrum_loss(const std::vector<double>& pred, const std::vector<double>& gt,
                               int h, int w, double eta, SsimCache& cache,
                               std::vector<double>& d_pred) {
    LossParts parts;
    const std::size_t n = pred.size();
    d_pred.assign(n, 0.0);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += std::abs(gt[i] - pred[i]);
    parts.l1 = acc / double(n);
    parts.ssim_value = ssim(gt, pred, h, w, &cache);
    parts.total = (1.0 - eta) * parts.l1 + eta * (1.0 - parts.ssim_value);
    for (std::size_t i = 0; i < n; ++i) {
        double s = pred[i] > gt[i] ? 1.0 : (pred[i] < gt[i] ? -1.0 : 0.0);
        d_pred[i] = (1.0 - eta) * s / double(n);
    }
    ssim_backward(cache, -eta, d_pred);
    return parts;
}

constexpr double adam_beta1 = 0.9;
constexpr double adam_beta2 = 0.999;
constexpr double adam_eps = 1e-15;

namespace detail {

inline void adam_scalar(double& x, double g, double& m, double& v, double lr, double bc1,
                        double bc2) {
    m = adam_beta1 * m + (1.0 - adam_beta1) * g;
    v = adam_beta2 * v + (1.0 - adam_beta2) * g * g;
    x -= lr * (m / bc1) / (std::sqrt(v / bc2) + adam_eps);
}

inline void adam_layer(DenseLayer& l, double lr, double bc1, double bc2) {
    l.mw = adam_beta1 * l.mw + (1.0 - adam_beta1) * l.gw;
    l.vw = adam_beta2 * l.vw.array() + (1.0 - adam_beta2) * l.gw.array().square();
    l.w.array() -= lr * (l.mw.array() / bc1) / ((l.vw.array() / bc2).sqrt() + adam_eps);
    l.mb = adam_beta1 * l.mb + (1.0 - adam_beta1) * l.gb;
    l.vb = adam_beta2 * l.vb.array() + (1.0 - adam_beta2) * l.gb.array().square();
    l.b.array() -= lr * (l.mb.array() / bc1) / ((l.vb.array() / bc2).sqrt() + adam_eps);
}

}  // namespace detail

// One Adam step over every trainable scalar, with per-group learning rates.
// The position rate decays exponentially to lr_position/100 over the run.
// Quaternions are renormalized afterwards.
inline void adam_step(ParamStore& store, const TrainConfig& cfg) {
    store.step_count += 1;
    const double t = double(store.step_count);
    const double bc1 = 1.0 - std::pow(adam_beta1, t);
    const double bc2 = 1.0 - std::pow(adam_beta2, t);
    const double pos_lr =
        cfg.lr_position * std::pow(0.01, double(store.step_count) / double(cfg.iterations));

    for (int i = 0; i < store.count(); ++i) {
        auto& g = store.gaussians[i];
        auto& gr = store.grad[i];
        auto& m = store.moment_m[i];
        auto& v = store.moment_v[i];
        for (int a = 0; a < 3; ++a)
            detail::adam_scalar(g.mu[a], gr.mu[a], m.mu[a], v.mu[a], pos_lr, bc1, bc2);
        for (int a = 0; a < 4; ++a)
            detail::adam_scalar(g.rot[a], gr.rot[a], m.rot[a], v.rot[a], cfg.lr_rotation, bc1, bc2);
        for (int a = 0; a < 3; ++a)
            detail::adam_scalar(g.log_scale[a], gr.log_scale[a], m.log_scale[a], v.log_scale[a],
                                cfg.lr_scale, bc1, bc2);
        detail::adam_scalar(g.opacity_logit, gr.opacity_logit, m.opacity_logit, v.opacity_logit,
                            cfg.lr_opacity, bc1, bc2);
        for (int ch = 0; ch < store.d_sig; ++ch) {
            detail::adam_scalar(g.static_signal[ch].re, gr.static_signal[ch].re,
                                m.static_signal[ch].re, v.static_signal[ch].re, cfg.lr_signal, bc1,
                                bc2);
            detail::adam_scalar(g.static_signal[ch].im, gr.static_signal[ch].im,
                                m.static_signal[ch].im, v.static_signal[ch].im, cfg.lr_signal, bc1,
                                bc2);
        }
        g.rot = quat_normalize(g.rot);
    }
    if (!store.scen.empty())
        store.scen.for_each_layer([&](DenseLayer& l) { detail::adam_layer(l, cfg.lr_mlp, bc1, bc2); });
    if (!store.deform.empty())
        store.deform.for_each_layer(
            [&](DenseLayer& l) { detail::adam_layer(l, cfg.lr_mlp, bc1, bc2); });
    detail::adam_scalar(store.rssi_bias, store.rssi_bias_g, store.rssi_bias_m, store.rssi_bias_v,
                        cfg.lr_bias, bc1, bc2);
}

// Channel estimation accuracy in dB; exact predictions report the 300 dB cap.
inline double cea(const std::vector<ComplexSample>& pred, const std::vector<ComplexSample>& gt) {
    if (pred.size() != gt.size()) throw std::invalid_argument("cea: length mismatch");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < gt.size(); ++i) {
        num += (pred[i] - gt[i]).abs2();
        den += gt[i].abs2();
    }
    if (den == 0.0) throw std::invalid_argument("cea: ground truth is all-zero");
    if (num == 0.0) return 300.0;
    return std::min(300.0, -10.0 * std::log10(num / den));
}

// Nearest-rank percentile (q in (0,1]): the ceil(q*n)-th smallest value.
inline double percentile_nearest_rank(std::vector<double> v, double q) {
    if (v.empty()) throw std::invalid_argument("percentile of empty set");
    std::sort(v.begin(), v.end());
    std::size_t rank = std::size_t(std::ceil(q * double(v.size())));
    if (rank < 1) rank = 1;
    if (rank > v.size()) rank = v.size();
    return v[rank - 1];
}

struct MetricReport {
    TaskKind task = TaskKind::Spectrum;
    std::vector<int> ids;
    std::vector<double> values;  // ssim / abs dB error / CEA dB per record

    double median() const { return percentile_nearest_rank(values, 0.5); }
    double p10() const { return percentile_nearest_rank(values, 0.1); }
    double p90() const { return percentile_nearest_rank(values, 0.9); }
};

struct NumericalAbort : std::runtime_error {
    int iteration;
    explicit NumericalAbort(const std::string& msg, int iter)
        : std::runtime_error(msg), iteration(iter) {}
};

namespace detail {

// Task-specific loss head: fills d_field (dL/d complex field) and returns
// the loss parts for logging.
inline LossParts sample_loss(const TrainConfig& cfg, const Dataset& ds, const DatasetRecord& rec,
                             ParamStore& store, const PipelineForward& f,
                             std::vector<ComplexSample>& d_field) {
    LossParts parts;
    const RenderedField& field = f.field;
    d_field.assign(field.field.size(), ComplexSample{0, 0});

    if (cfg.task == TaskKind::Spectrum) {
        const int h = cfg.canvas_h, w = cfg.canvas_w;
        std::vector<double> pred_img(field.power.size());
        if (cfg.loss_on_magnitude)
            for (std::size_t i = 0; i < pred_img.size(); ++i) pred_img[i] = std::sqrt(field.power[i]);
        else
            pred_img = field.power;
        SpatialSpectrum pred = canvas_power_to_spectrum(pred_img, h, w);
        SsimCache cache;
        std::vector<double> d_pred;
        parts = spectrum_loss(pred.values, rec.spectrum.values, h, w, cfg.eta, cache, d_pred);
        std::vector<double> d_img = spectrum_grad_to_canvas(d_pred, h, w);
        for (std::size_t p = 0; p < d_img.size(); ++p) {
            const ComplexSample& z = field.field[p];
            double scale;
            if (cfg.loss_on_magnitude) {
                double m = std::sqrt(field.power[p]);
                scale = m > 1e-30 ? d_img[p] / m : 0.0;
            } else {
                scale = 2.0 * d_img[p];
            }
            d_field[p] = {scale * z.re, scale * z.im};
        }
    } else if (cfg.task == TaskKind::Rssi) {
        ComplexSample total = field_total(field);
        double p = total.abs2();
        double raw = p > 0.0 ? 10.0 * std::log10(p) + store.rssi_bias : -1e300;
        double pred = std::max(-100.0, raw);
        double err = pred - rec.rssi;
        parts.total = parts.l1 = std::abs(err);
        double d_pred = err > 0.0 ? 1.0 : (err < 0.0 ? -1.0 : 0.0);
        if (raw > -100.0 && p > 0.0) {
            store.rssi_bias_g += d_pred;
            double d_p = d_pred * 10.0 / (std::log(10.0) * p);
            ComplexSample d_total{d_p * 2.0 * total.re, d_p * 2.0 * total.im};
            for (auto& z : d_field) z = d_total;
        }
    } else {
        // scale-normalized squared error over the 26 downlink subcarriers
        const double s = store.csi_scale;
        double acc = 0.0;
        for (int ch = 0; ch < csi_subcarriers_half; ++ch) {
            ComplexSample diff = field.field[ch] - rec.downlink[ch] * s;
            acc += diff.abs2();
            d_field[ch] = {2.0 * diff.re / (2.0 * csi_subcarriers_half),
                           2.0 * diff.im / (2.0 * csi_subcarriers_half)};
        }
        parts.total = parts.l1 = acc / (2.0 * csi_subcarriers_half);
    }
    return parts;
}

inline ConditioningInput conditioning_of(TaskKind task, const DatasetRecord& rec) {
    if (task == TaskKind::Csi) return ConditioningInput::csi(rec.uplink);
    return ConditioningInput::tx(rec.tx);
}

}  // namespace detail

// Per-record quality of a checkpoint on the given record ids: SSIM for
// spectra, |error| dB for RSSI, CEA dB for CSI.
inline MetricReport eval_checkpoint(Checkpoint& ckpt, const Dataset& ds, const std::vector<int>& ids,
                                    ThreadPool* pool = nullptr) {
    if (ckpt.task != ds.manifest.task) throw std::invalid_argument("eval: task kind mismatch");
    if (ids.empty()) throw std::invalid_argument("eval: empty record set");
    MetricReport rep;
    rep.task = ckpt.task;
    for (int id : ids) {
        const DatasetRecord& rec = ds.record(id);
        double value = 0.0;
        if (ckpt.task == TaskKind::Spectrum) {
            SpatialSpectrum pred = synthesize_spectrum(ckpt, rec.tx, pool);
            value = ssim(rec.spectrum.values, pred.values, pred.h, pred.w);
        } else if (ckpt.task == TaskKind::Rssi) {
            value = std::abs(predict_rssi(ckpt, rec.tx, pool) - rec.rssi);
        } else {
            value = cea(predict_csi(ckpt, rec.uplink, pool), rec.downlink);
        }
        rep.ids.push_back(id);
        rep.values.push_back(value);
    }
    return rep;
}

struct TrainResult {
    Checkpoint checkpoint;
    std::vector<double> loss_curve;  // one entry per log_interval
};

// The optimization loop: conditioning -> scene -> projection -> splat ->
// loss -> backward -> Adam, with adaptive density control on schedule.
// Deterministic for a fixed (seed, config, dataset, thread count).
// `stop_at_step` pauses the run early under the full schedule (the learning
// rate decay horizon stays cfg.iterations), so a resumed run reproduces an
// uninterrupted one exactly. Densification statistics are not serialized;
// for exact resume across a densify step, pause on a densify boundary.
inline TrainResult train(const Dataset& ds, const TrainConfig& cfg, ThreadPool* pool,
                         std::ostream* log = nullptr, const Checkpoint* resume = nullptr,
                         uint64_t config_hash = 0, int64_t stop_at_step = 0) {
    cfg.validate();
    if (ds.manifest.task != cfg.task) throw std::invalid_argument("train: dataset/config task mismatch");
    if (cfg.task == TaskKind::Spectrum &&
        (cfg.canvas_h != ds.manifest.spectrum_h || cfg.canvas_w != ds.manifest.spectrum_w))
        throw std::invalid_argument("train: canvas does not match dataset spectrum shape");
    const auto& train_ids = ds.manifest.train_ids;
    if (train_ids.empty()) throw std::invalid_argument("train: empty train split");

    TrainResult result;
    Checkpoint& ckpt = result.checkpoint;
    if (resume) {
        ckpt = *resume;
    } else {
        ckpt.task = cfg.task;
        ckpt.cond_kind =
            cfg.task == TaskKind::Csi ? ConditioningKind::UplinkCsi : ConditioningKind::TxPosition;
        ckpt.canvas_h = cfg.task == TaskKind::Csi ? 1 : cfg.canvas_h;
        ckpt.canvas_w = cfg.task == TaskKind::Csi ? 1 : cfg.canvas_w;
        ckpt.rx.position = ds.manifest.scene.rx_position;
        ckpt.rx.orientation = ds.manifest.scene.rx_orientation;
        ckpt.eta = cfg.eta;
        ckpt.config_hash = config_hash;
        ckpt.store = init_random(Vec3::Zero(), ds.manifest.scene.room_extent, cfg.n_init, cfg.seed,
                                 cfg.pipeline, cfg.task, ckpt.cond_kind, pool, cfg.csi_enc_order,
                                 cfg.csi_cond_gain);
        ckpt.store.csi_scale = ds.manifest.csi_scale;
        if (cfg.task == TaskKind::Rssi) {
            std::vector<double> targets;
            for (int id : train_ids) targets.push_back(ds.record(id).rssi);
            ckpt.store.rssi_bias = percentile_nearest_rank(targets, 0.5);
        }
    }
    ParamStore& store = ckpt.store;
    if (store.pipeline != cfg.pipeline) throw std::invalid_argument("train: pipeline mismatch on resume");

    PipelineConfig pcfg;
    pcfg.canvas_h = ckpt.canvas_h;
    pcfg.canvas_w = ckpt.canvas_w;
    pcfg.rx = ckpt.rx;
    pcfg.early_termination = cfg.early_termination;
    pcfg.angular = cfg.task != TaskKind::Csi;

    const int densify_until = cfg.densify_until > 0 ? cfg.densify_until : cfg.iterations / 2;
    DensifyStats stats;
    stats.reset(store.count());
    DensifyConfig dcfg;
    dcfg.grad_threshold = cfg.densify_grad_threshold;
    dcfg.scale_threshold = cfg.densify_scale_frac * ds.manifest.scene.room_extent.maxCoeff();
    dcfg.opacity_prune = cfg.opacity_prune;
    dcfg.max_radius_px = 0.5 * std::max(pcfg.canvas_h, pcfg.canvas_w);
    dcfg.max_gaussians = cfg.max_gaussians;
    dcfg.min_gaussians = cfg.min_gaussians;

    if (log) *log << "iter loss l1 ssim n_gaussians wall_ms\n";
    auto wall_start = std::chrono::steady_clock::now();

    const int n_train = int(train_ids.size());
    const int64_t last_step = stop_at_step > 0 ? std::min<int64_t>(stop_at_step, cfg.iterations)
                                               : cfg.iterations;
    PipelineForward fwd;
    std::vector<ComplexSample> d_field;
    std::vector<double> last_radii(store.count(), 0.0);
    double log_loss = 0.0, log_l1 = 0.0, log_ssim = 0.0;
    int log_n = 0;

    for (int64_t step = int64_t(store.step_count); step < last_step; ++step) {
        store.zero_grad();
        double batch_loss = 0.0, batch_l1 = 0.0, batch_ssim = 0.0;
        for (int b = 0; b < cfg.batch; ++b) {
            int64_t pick = step * cfg.batch + b;
            int64_t epoch = pick / n_train;
            int64_t ofs = pick % n_train;
            // seeded per-epoch shuffle, re-derivable at any step for resume
            Rng perm_rng = derive_rng(cfg.seed, "epoch", uint64_t(epoch));
            std::vector<int> order(train_ids);
            for (std::size_t i = order.size(); i > 1; --i)
                std::swap(order[i - 1], order[perm_rng.uniform_index(i)]);
            const DatasetRecord& rec = ds.record(order[std::size_t(ofs)]);

            forward_pipeline(store, detail::conditioning_of(cfg.task, rec), pcfg, fwd, pool);
            LossParts parts = detail::sample_loss(cfg, ds, rec, store, fwd, d_field);
            if (!std::isfinite(parts.total)) {
                std::string msg = "NaN/Inf loss at iteration " + std::to_string(step + 1) +
                                  ", record " + std::to_string(rec.id) + ", n_gaussians " +
                                  std::to_string(store.count());
                throw NumericalAbort(msg, int(step + 1));
            }
            if (cfg.batch > 1)
                for (auto& z : d_field) z = z * (1.0 / cfg.batch);
            backward_pipeline(store, pcfg, fwd, d_field, pool);
            batch_loss += parts.total / cfg.batch;
            batch_l1 += parts.l1 / cfg.batch;
            batch_ssim += parts.ssim_value / cfg.batch;
        }

        stats.accumulate(store.grad);
        last_radii = footprint_radii_px(fwd, store.count());
        adam_step(store, cfg);

        int64_t iter = int64_t(store.step_count);
        if (iter > cfg.densify_warmup && iter <= densify_until && iter % cfg.densify_interval == 0) {
            densify_and_prune(store, stats, last_radii, dcfg, cfg.seed, uint64_t(iter));
            stats.reset(store.count());
            last_radii.assign(store.count(), 0.0);
        }

        log_loss += batch_loss;
        log_l1 += batch_l1;
        log_ssim += batch_ssim;
        ++log_n;
        if (iter % cfg.log_interval == 0 || iter == cfg.iterations) {
            auto now = std::chrono::steady_clock::now();
            double ms =
                std::chrono::duration_cast<std::chrono::duration<double, std::milli>>(now - wall_start)
                    .count();
            if (log)
                *log << iter << ' ' << log_loss / log_n << ' ' << log_l1 / log_n << ' '
                     << log_ssim / log_n << ' ' << store.count() << ' ' << int64_t(ms) << '\n';
            result.loss_curve.push_back(log_loss / log_n);
            log_loss = log_l1 = log_ssim = 0.0;
            log_n = 0;
        }
    }
    return result;
}

}  // namespace wrfgs
