// Copyright Contributors to the wrfgs Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "wrfgs/complex.hpp"
#include "wrfgs/fastmath.hpp"
#include "wrfgs/parallel.hpp"
#include "wrfgs/projection.hpp"

namespace wrfgs {

enum class Compositor { ChainedAttenuation, AlphaBlend };

constexpr int max_gaussians_per_tile = 4096;
constexpr double alpha_skip_threshold = 1e-5;      // alpha-blend: below this a splat is ignored
constexpr double transmittance_cutoff = 1e-4;      // alpha-blend early termination

// Everything the rasterizer needs for one pass. `signals` is N x d_sig
// (channel-major per Gaussian); `attenuation` feeds the chained compositor,
// `opacity` the alpha compositor. With `kernel_weights` off every Gaussian
// hits every pixel with unit weight (used by the 1x1 canvas reduction).
struct SplatInput {
    std::vector<ProjectedGaussian> projected;
    std::vector<ComplexSample> signals;
    std::vector<ComplexSample> attenuation;
    std::vector<double> opacity;
    Compositor compositor = Compositor::AlphaBlend;
    int d_sig = 1;
    int h = 90, w = 360;
    int tile_size = 16;
    bool early_termination = true;
    bool kernel_weights = true;

    int count() const { return int(projected.size()); }

    void validate() const {
        std::size_t n = projected.size();
        if (signals.size() != n * std::size_t(d_sig))
            throw std::invalid_argument("SplatInput: signals size mismatch");
        if (compositor == Compositor::ChainedAttenuation && attenuation.size() != n)
            throw std::invalid_argument("SplatInput: attenuation size mismatch");
        if (compositor == Compositor::AlphaBlend && opacity.size() != n)
            throw std::invalid_argument("SplatInput: opacity size mismatch");
    }
};

struct RenderedField {
    int h = 0, w = 0, d_sig = 1;
    std::vector<ComplexSample> field;  // h*w*d_sig, pixel-major
    std::vector<double> power;         // h*w, sum over channels of |.|^2

    ComplexSample* px(int r, int c) { return field.data() + (std::size_t(r) * w + c) * d_sig; }
    const ComplexSample* px(int r, int c) const {
        return field.data() + (std::size_t(r) * w + c) * d_sig;
    }
};

// Saved forward state reused by the backward pass.
struct RenderAux {
    struct TileList {
        std::vector<int> gauss;
        std::vector<double> x_shift;
    };
    std::vector<TileList> tiles;
    std::vector<Mat2> conic;       // per-gaussian inverse cov2d
    std::vector<double> radius;    // per-gaussian footprint half-extent
    int tiles_x = 0, tiles_y = 0;
};

struct SplatGrads {
    std::vector<ComplexSample> d_signal;       // N * d_sig
    std::vector<ComplexSample> d_attenuation;  // N
    std::vector<double> d_opacity;             // N
    std::vector<Vec2> d_pixel;                 // N
    std::vector<Mat2> d_cov2d;                 // N

    void init(int n, int d_sig) {
        d_signal.assign(std::size_t(n) * d_sig, {0, 0});
        d_attenuation.assign(n, {0, 0});
        d_opacity.assign(n, 0.0);
        d_pixel.assign(n, Vec2::Zero());
        d_cov2d.assign(n, Mat2::Zero());
    }
};

namespace detail {

// Depth-ordered per-tile instance lists. Ties break on source_index then
// x_shift so the traversal order is a total order.
inline void build_tiles(const SplatInput& in, RenderAux& aux, ThreadPool* pool) {
    const int n = in.count();
    aux.tiles_x = tiles_x_count(in.w, in.tile_size);
    aux.tiles_y = tiles_y_count(in.h, in.tile_size);
    aux.tiles.assign(std::size_t(aux.tiles_x) * aux.tiles_y, {});
    aux.conic.resize(n);
    aux.radius.resize(n);
    for (int i = 0; i < n; ++i) {
        const Mat2& c = in.projected[i].cov2d;
        double det = c(0, 0) * c(1, 1) - c(0, 1) * c(1, 0);
        Mat2 inv;
        inv << c(1, 1), -c(0, 1), -c(1, 0), c(0, 0);
        aux.conic[i] = inv / det;
        aux.radius[i] = in.kernel_weights ? footprint_radius(c, in.w) : 0.0;
    }

    auto tile_job = [&](int tile) {
        int ty = tile / aux.tiles_x, tx = tile % aux.tiles_x;
        double x0 = tx * in.tile_size, x1 = std::min(in.w, (tx + 1) * in.tile_size) - 1;
        double y0 = ty * in.tile_size, y1 = std::min(in.h, (ty + 1) * in.tile_size) - 1;
        auto& list = aux.tiles[tile];
        for (int i = 0; i < n; ++i) {
            if (!in.kernel_weights) {
                list.gauss.push_back(i);
                list.x_shift.push_back(0.0);
                continue;
            }
            double r = aux.radius[i];
            const Vec2& p = in.projected[i].pixel;
            if (p.y() + r < y0 || p.y() - r > y1) continue;
            for (int k = -1; k <= 1; ++k) {
                double cx = p.x() + k * double(in.w);
                if (cx + r < x0 || cx - r > x1) continue;
                list.gauss.push_back(i);
                list.x_shift.push_back(k * double(in.w));
            }
        }
        if (int(list.gauss.size()) > max_gaussians_per_tile)
            throw std::runtime_error("splat: per-tile Gaussian cap (4096) exceeded");
        // insertion order is by gaussian index; sort into depth order
        std::vector<int> perm(list.gauss.size());
        for (std::size_t j = 0; j < perm.size(); ++j) perm[j] = int(j);
        std::sort(perm.begin(), perm.end(), [&](int a, int b) {
            double da = in.projected[list.gauss[a]].depth, db = in.projected[list.gauss[b]].depth;
            if (da != db) return da < db;
            int sa = in.projected[list.gauss[a]].source_index,
                sb = in.projected[list.gauss[b]].source_index;
            if (sa != sb) return sa < sb;
            return list.x_shift[a] < list.x_shift[b];
        });
        RenderAux::TileList sorted;
        sorted.gauss.reserve(perm.size());
        sorted.x_shift.reserve(perm.size());
        for (int j : perm) {
            sorted.gauss.push_back(list.gauss[j]);
            sorted.x_shift.push_back(list.x_shift[j]);
        }
        list = std::move(sorted);
    };
    int n_tiles = aux.tiles_x * aux.tiles_y;
    if (pool)
        pool->parallel_for(n_tiles, [&](int64_t t) { tile_job(int(t)); });
    else
        for (int t = 0; t < n_tiles; ++t) tile_job(t);
}

// Per-pixel working set, reused across pixels to keep the hot loop free of
// allocations. pos/wgt double as the backward stash.
struct PixelStash {
    std::vector<int> pos;       // index into the tile list (box-passed splats)
    std::vector<double> q;      // Mahalanobis values
    std::vector<double> wgt;    // exp(-q/2)
    std::vector<double> alpha;  // alpha compositor only
    std::vector<double> trans;  // transmittance before this splat
    std::vector<ComplexSample> prefix;  // chained compositor: product before this splat
    void clear() {
        pos.clear();
        q.clear();
        wgt.clear();
        alpha.clear();
        trans.clear();
        prefix.clear();
    }
};

// Instances of a tile list whose footprint covers pixel row py; shared by
// every pixel of that row.
inline void filter_row(const SplatInput& in, const RenderAux& aux,
                       const RenderAux::TileList& list, double py, std::vector<int>& row) {
    row.clear();
    if (!in.kernel_weights) {
        row.resize(list.gauss.size());
        for (std::size_t j = 0; j < list.gauss.size(); ++j) row[j] = int(j);
        return;
    }
    for (std::size_t j = 0; j < list.gauss.size(); ++j) {
        int i = list.gauss[j];
        if (std::abs(in.projected[i].pixel.y() - py) <= aux.radius[i]) row.push_back(int(j));
    }
}

// Composites one pixel in three passes: gather box-passing splats with
// their Mahalanobis values, batch the exponentials, then run the sequential
// blend. `row` comes from filter_row for this pixel's row. `record` keeps
// the per-splat state the backward pass replays.
inline void composite_pixel(const SplatInput& in, const RenderAux& aux,
                            const RenderAux::TileList& list, const std::vector<int>& row,
                            double px_x, double px_y, ComplexSample* out, PixelStash& s,
                            bool record) {
    const int d = in.d_sig;
    s.clear();
    if (in.kernel_weights) {
        for (int j : row) {
            int i = list.gauss[j];
            double dx = in.projected[i].pixel.x() + list.x_shift[j] - px_x;
            if (std::abs(dx) > aux.radius[i]) continue;
            double dy = in.projected[i].pixel.y() - px_y;
            const Mat2& q = aux.conic[i];
            s.pos.push_back(j);
            s.q.push_back(q(0, 0) * dx * dx + 2.0 * q(0, 1) * dx * dy + q(1, 1) * dy * dy);
        }
        s.wgt.resize(s.q.size());
        for (std::size_t k = 0; k < s.q.size(); ++k) s.wgt[k] = fast_exp(-0.5 * s.q[k]);
    } else {
        s.pos = row;
        s.wgt.assign(row.size(), 1.0);
    }

    std::size_t kept = 0;
    if (in.compositor == Compositor::AlphaBlend) {
        double t = 1.0;
        for (std::size_t k = 0; k < s.pos.size(); ++k) {
            int i = list.gauss[s.pos[k]];
            double w = s.wgt[k];
            double a = in.opacity[i] * w;
            if (a < alpha_skip_threshold) continue;
            double aw = a * t;
            const ComplexSample* sig = in.signals.data() + std::size_t(i) * d;
            for (int ch = 0; ch < d; ++ch) out[ch] += sig[ch] * aw;
            if (record) {
                s.pos[kept] = s.pos[k];
                s.wgt[kept] = w;
                s.alpha.push_back(a);
                s.trans.push_back(t);
                ++kept;
            }
            t *= 1.0 - a;
            if (in.early_termination && t < transmittance_cutoff) break;
        }
    } else {
        ComplexSample prod{1, 0};
        for (std::size_t k = 0; k < s.pos.size(); ++k) {
            int i = list.gauss[s.pos[k]];
            double w = s.wgt[k];
            const ComplexSample* sig = in.signals.data() + std::size_t(i) * d;
            for (int ch = 0; ch < d; ++ch) out[ch] += prod * sig[ch] * w;
            if (record) {
                s.pos[kept] = s.pos[k];
                s.wgt[kept] = w;
                s.prefix.push_back(prod);
                ++kept;
            }
            prod *= in.attenuation[i];
        }
    }
    if (record) {
        s.pos.resize(kept);
        s.wgt.resize(kept);
    }
}

}  // namespace detail

// Forward rasterization. Deterministic: pixels are owned by tiles, tile
// traversal order is a total order, and parallelism only spans tiles.
inline RenderedField render(const SplatInput& in, RenderAux& aux, ThreadPool* pool = nullptr) {
    in.validate();
    detail::build_tiles(in, aux, pool);
    RenderedField out;
    out.h = in.h;
    out.w = in.w;
    out.d_sig = in.d_sig;
    out.field.assign(std::size_t(in.h) * in.w * in.d_sig, {0, 0});
    out.power.assign(std::size_t(in.h) * in.w, 0.0);

    // Forward rasterization is instance-major per tile row: each splat's
    // covered x-run is expanded into per-pixel (gaussian, weight) slots in
    // depth order, then every pixel blends its slot list sequentially. This
    // keeps the inner loops branch-free and the exponentials batched, and
    // evaluates exactly the same square-support predicate as the backward
    // replay path.
    struct Slot {
        int gauss;
        double wgt;
    };
    auto tile_job = [&](int tile, std::vector<int>& row, std::vector<std::vector<Slot>>& slots,
                        std::vector<double>& qbuf, std::vector<double>& wbuf) {
        const auto& list = aux.tiles[tile];
        if (list.gauss.empty()) return;
        int ty = tile / aux.tiles_x, tx = tile % aux.tiles_x;
        int x0 = tx * in.tile_size, x1 = std::min(in.w, (tx + 1) * in.tile_size);
        int y0 = ty * in.tile_size, y1 = std::min(in.h, (ty + 1) * in.tile_size);
        for (int y = y0; y < y1; ++y) {
            detail::filter_row(in, aux, list, double(y), row);
            if (row.empty()) continue;
            for (int s = 0; s < x1 - x0; ++s) slots[s].clear();
            for (int j : row) {
                int i = list.gauss[j];
                if (!in.kernel_weights) {
                    for (int s = 0; s < x1 - x0; ++s) slots[s].push_back({i, 1.0});
                    continue;
                }
                double cx = in.projected[i].pixel.x() + list.x_shift[j];
                double cy = in.projected[i].pixel.y();
                double r = aux.radius[i];
                int xa = std::max(x0, int(std::ceil(cx - r)));
                int xb = std::min(x1 - 1, int(std::floor(cx + r)));
                if (xa > xb) continue;
                const Mat2& q = aux.conic[i];
                double dy = cy - double(y);
                double c_dy = 2.0 * q(0, 1) * dy;
                double c_yy = q(1, 1) * dy * dy;
                int run = xb - xa + 1;
                qbuf.resize(run);
                wbuf.resize(run);
                for (int s = 0; s < run; ++s) {
                    double dx = cx - double(xa + s);
                    qbuf[s] = q(0, 0) * dx * dx + c_dy * dx + c_yy;
                }
                for (int s = 0; s < run; ++s) wbuf[s] = fast_exp(-0.5 * qbuf[s]);
                for (int s = 0; s < run; ++s) slots[xa - x0 + s].push_back({i, wbuf[s]});
            }
            for (int x = x0; x < x1; ++x) {
                ComplexSample* o = out.px(y, x);
                const auto& sl = slots[x - x0];
                if (in.compositor == Compositor::AlphaBlend) {
                    double t = 1.0;
                    if (in.d_sig == 1) {
                        double ore = 0.0, oim = 0.0;
                        for (const Slot& s : sl) {
                            double a = in.opacity[s.gauss] * s.wgt;
                            if (a < alpha_skip_threshold) continue;
                            double aw = a * t;
                            const ComplexSample& sig = in.signals[s.gauss];
                            ore += sig.re * aw;
                            oim += sig.im * aw;
                            t *= 1.0 - a;
                            if (in.early_termination && t < transmittance_cutoff) break;
                        }
                        o[0].re = ore;
                        o[0].im = oim;
                    } else {
                        for (const Slot& s : sl) {
                            double a = in.opacity[s.gauss] * s.wgt;
                            if (a < alpha_skip_threshold) continue;
                            double aw = a * t;
                            const ComplexSample* sig =
                                in.signals.data() + std::size_t(s.gauss) * in.d_sig;
                            for (int ch = 0; ch < in.d_sig; ++ch) o[ch] += sig[ch] * aw;
                            t *= 1.0 - a;
                            if (in.early_termination && t < transmittance_cutoff) break;
                        }
                    }
                } else {
                    ComplexSample prod{1, 0};
                    if (in.d_sig == 1) {
                        double ore = 0.0, oim = 0.0;
                        for (const Slot& s : sl) {
                            const ComplexSample& sig = in.signals[s.gauss];
                            ComplexSample c = prod * sig;
                            ore += c.re * s.wgt;
                            oim += c.im * s.wgt;
                            prod *= in.attenuation[s.gauss];
                        }
                        o[0].re = ore;
                        o[0].im = oim;
                    } else {
                        for (const Slot& s : sl) {
                            const ComplexSample* sig =
                                in.signals.data() + std::size_t(s.gauss) * in.d_sig;
                            for (int ch = 0; ch < in.d_sig; ++ch) o[ch] += prod * sig[ch] * s.wgt;
                            prod *= in.attenuation[s.gauss];
                        }
                    }
                }
                double p = 0.0;
                for (int ch = 0; ch < in.d_sig; ++ch) p += o[ch].abs2();
                out.power[std::size_t(y) * in.w + x] = p;
            }
        }
    };
    int n_tiles = aux.tiles_x * aux.tiles_y;
    if (pool) {
        pool->parallel_ranges(n_tiles, [&](int, int64_t lo, int64_t hi) {
            std::vector<int> row;
            std::vector<std::vector<Slot>> slots(in.tile_size);
            std::vector<double> qbuf, wbuf;
            for (int64_t t = lo; t < hi; ++t) tile_job(int(t), row, slots, qbuf, wbuf);
        });
    } else {
        std::vector<int> row;
        std::vector<std::vector<Slot>> slots(in.tile_size);
        std::vector<double> qbuf, wbuf;
        for (int t = 0; t < n_tiles; ++t) tile_job(t, row, slots, qbuf, wbuf);
    }
    return out;
}

inline RenderedField render(const SplatInput& in, ThreadPool* pool = nullptr) {
    RenderAux aux;
    return render(in, aux, pool);
}

// Reverse-mode pass. `d_field` is dL/d(complex field), pixel-major like
// RenderedField::field. Per-chunk gradient buffers are merged in chunk
// order, so results are reproducible for a fixed thread count.
inline SplatGrads render_backward(const SplatInput& in, const RenderAux& aux,
                                  const std::vector<ComplexSample>& d_field,
                                  ThreadPool* pool = nullptr) {
    in.validate();
    const int n = in.count();
    const int d = in.d_sig;
    if (d_field.size() != std::size_t(in.h) * in.w * d)
        throw std::invalid_argument("render_backward: d_field size mismatch");

    int n_tiles = aux.tiles_x * aux.tiles_y;
    int n_chunks = pool ? std::min(pool->size(), n_tiles) : 1;
    if (n_chunks < 1) n_chunks = 1;
    std::vector<SplatGrads> partial(n_chunks);
    std::vector<std::vector<Mat2>> d_conic(n_chunks);
    for (int c = 0; c < n_chunks; ++c) {
        partial[c].init(n, d);
        d_conic[c].assign(n, Mat2::Zero());
    }

    auto chunk_job = [&](int chunk, int t_lo, int t_hi) {
        SplatGrads& g = partial[chunk];
        std::vector<Mat2>& dq_acc = d_conic[chunk];
        detail::PixelStash stash;
        std::vector<int> row;
        std::vector<ComplexSample> replay(d);
        std::vector<ComplexSample> wafter(d);
        for (int tile = t_lo; tile < t_hi; ++tile) {
            const auto& list = aux.tiles[tile];
            if (list.gauss.empty()) continue;
            int ty = tile / aux.tiles_x, tx = tile % aux.tiles_x;
            int x0 = tx * in.tile_size, x1 = std::min(in.w, (tx + 1) * in.tile_size);
            int y0 = ty * in.tile_size, y1 = std::min(in.h, (ty + 1) * in.tile_size);
            for (int y = y0; y < y1; ++y) {
                detail::filter_row(in, aux, list, double(y), row);
                if (row.empty()) continue;
                for (int x = x0; x < x1; ++x) {
                    const ComplexSample* up = d_field.data() + (std::size_t(y) * in.w + x) * d;
                    bool any = false;
                    for (int ch = 0; ch < d; ++ch)
                        if (up[ch].re != 0.0 || up[ch].im != 0.0) any = true;
                    if (!any) continue;
                    std::fill(replay.begin(), replay.end(), ComplexSample{0, 0});
                    detail::composite_pixel(in, aux, list, row, double(x), double(y), replay.data(),
                                            stash, true);
                    std::fill(wafter.begin(), wafter.end(), ComplexSample{0, 0});
                    if (in.compositor == Compositor::AlphaBlend) {
                        for (int k = int(stash.pos.size()) - 1; k >= 0; --k) {
                            int j = stash.pos[k];
                            int i = list.gauss[j];
                            double a = stash.alpha[k], w = stash.wgt[k], t = stash.trans[k];
                            const ComplexSample* s = in.signals.data() + std::size_t(i) * d;
                            double d_alpha = 0.0;
                            for (int ch = 0; ch < d; ++ch) {
                                g.d_signal[std::size_t(i) * d + ch] += up[ch] * (a * t);
                                ComplexSample dr_da = (s[ch] - wafter[ch]) * t;
                                d_alpha += up[ch].re * dr_da.re + up[ch].im * dr_da.im;
                                wafter[ch] = s[ch] * a + wafter[ch] * (1.0 - a);
                            }
                            g.d_opacity[i] += d_alpha * w;
                            if (in.kernel_weights) {
                                double d_w = d_alpha * in.opacity[i];
                                double dx = in.projected[i].pixel.x() + list.x_shift[j] - x;
                                double dy = in.projected[i].pixel.y() - y;
                                double d_m = -0.5 * w * d_w;
                                const Mat2& q = aux.conic[i];
                                g.d_pixel[i].x() += d_m * 2.0 * (q(0, 0) * dx + q(0, 1) * dy);
                                g.d_pixel[i].y() += d_m * 2.0 * (q(0, 1) * dx + q(1, 1) * dy);
                                Mat2 dd;
                                dd << dx * dx, dx * dy, dx * dy, dy * dy;
                                dq_acc[i] += d_m * dd;
                            }
                        }
                    } else {
                        for (int k = int(stash.pos.size()) - 1; k >= 0; --k) {
                            int j = stash.pos[k];
                            int i = list.gauss[j];
                            double w = stash.wgt[k];
                            ComplexSample pre = stash.prefix[k];
                            const ComplexSample* s = in.signals.data() + std::size_t(i) * d;
                            double d_w = 0.0;
                            ComplexSample d_att{0, 0};
                            for (int ch = 0; ch < d; ++ch) {
                                ComplexSample pw = pre * w;
                                g.d_signal[std::size_t(i) * d + ch] +=
                                    ComplexSample{up[ch].re * pw.re + up[ch].im * pw.im,
                                                  -up[ch].re * pw.im + up[ch].im * pw.re};
                                ComplexSample ps = pre * s[ch];
                                d_w += up[ch].re * ps.re + up[ch].im * ps.im;
                                ComplexSample pv = pre * wafter[ch];
                                d_att.re += up[ch].re * pv.re + up[ch].im * pv.im;
                                d_att.im += -up[ch].re * pv.im + up[ch].im * pv.re;
                                // V_{i-1} = S_i w_i + delta_i V_i
                                wafter[ch] = s[ch] * w + in.attenuation[i] * wafter[ch];
                            }
                            g.d_attenuation[i] += d_att;
                            if (in.kernel_weights) {
                                double dx = in.projected[i].pixel.x() + list.x_shift[j] - x;
                                double dy = in.projected[i].pixel.y() - y;
                                double d_m = -0.5 * w * d_w;
                                const Mat2& q = aux.conic[i];
                                g.d_pixel[i].x() += d_m * 2.0 * (q(0, 0) * dx + q(0, 1) * dy);
                                g.d_pixel[i].y() += d_m * 2.0 * (q(0, 1) * dx + q(1, 1) * dy);
                                Mat2 dd;
                                dd << dx * dx, dx * dy, dx * dy, dy * dy;
                                dq_acc[i] += d_m * dd;
                            }
                        }
                    }
                }
            }
        }
    };

    if (pool && n_chunks > 1) {
        int64_t per = (n_tiles + n_chunks - 1) / n_chunks;
        pool->run_chunks(n_chunks, [&](int c) {
            int lo = int(c * per), hi = int(std::min<int64_t>(n_tiles, (c + 1) * per));
            if (lo < hi) chunk_job(c, lo, hi);
        });
    } else {
        chunk_job(0, 0, n_tiles);
    }

    SplatGrads out;
    out.init(n, d);
    for (int c = 0; c < n_chunks; ++c) {
        for (std::size_t i = 0; i < out.d_signal.size(); ++i) out.d_signal[i] += partial[c].d_signal[i];
        for (int i = 0; i < n; ++i) {
            out.d_attenuation[i] += partial[c].d_attenuation[i];
            out.d_opacity[i] += partial[c].d_opacity[i];
            out.d_pixel[i] += partial[c].d_pixel[i];
            out.d_cov2d[i] += d_conic[c][i];
        }
    }
    // accumulated so far: dL/d(conic); convert via d(cov2d) = -Q dQ Q
    for (int i = 0; i < n; ++i) {
        const Mat2& q = aux.conic[i];
        out.d_cov2d[i] = (-q * out.d_cov2d[i] * q).eval();
    }
    return out;
}

// Convenience wrapper for losses expressed on per-pixel power.
inline SplatGrads render_backward_power(const SplatInput& in, const RenderAux& aux,
                                        const RenderedField& rendered,
                                        const std::vector<double>& d_power,
                                        ThreadPool* pool = nullptr) {
    std::vector<ComplexSample> d_field(rendered.field.size());
    for (std::size_t p = 0; p < d_power.size(); ++p)
        for (int ch = 0; ch < rendered.d_sig; ++ch) {
            const ComplexSample& f = rendered.field[p * rendered.d_sig + ch];
            d_field[p * rendered.d_sig + ch] = {2.0 * d_power[p] * f.re, 2.0 * d_power[p] * f.im};
        }
    return render_backward(in, aux, d_field, pool);
}

}  // namespace wrfgs
