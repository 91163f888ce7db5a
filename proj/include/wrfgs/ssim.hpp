// Copyright Contributors to the wrfgs Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace wrfgs {

constexpr int ssim_window = 11;
constexpr double ssim_sigma = 1.5;

namespace detail {

inline std::array<double, ssim_window> ssim_kernel() {
    std::array<double, ssim_window> k{};
    double sum = 0.0;
    for (int i = 0; i < ssim_window; ++i) {
        double x = i - (ssim_window - 1) / 2.0;
        k[i] = std::exp(-x * x / (2.0 * ssim_sigma * ssim_sigma));
        sum += k[i];
    }
    for (auto& v : k) v /= sum;
    return k;
}

// Separable 11x11 Gaussian blur. Columns wrap (azimuth is periodic), rows
// replicate at the poles ("clamp in elevation"). `adjoint` applies the
// transpose operator (row scatter instead of gather), which is what the
// backward pass needs; the wrapped column pass is self-adjoint.
inline void ssim_blur(const double* src, double* dst, int h, int w, bool wrap_cols, bool adjoint,
                      std::vector<double>& scratch) {
    static const std::array<double, ssim_window> k = ssim_kernel();
    const int half = ssim_window / 2;
    scratch.assign(std::size_t(h) * w, 0.0);

    auto col_pass = [&](const double* in, double* out) {
        for (int y = 0; y < h; ++y) {
            const double* row = in + std::size_t(y) * w;
            double* orow = out + std::size_t(y) * w;
            for (int x = 0; x < w; ++x) {
                double acc = 0.0;
                for (int t = -half; t <= half; ++t) {
                    int xx = x + t;
                    if (wrap_cols) {
                        if (xx < 0) xx += w;
                        if (xx >= w) xx -= w;
                    } else {
                        xx = xx < 0 ? 0 : (xx >= w ? w - 1 : xx);
                    }
                    acc += k[t + half] * row[xx];
                }
                orow[x] = acc;
            }
        }
    };
    auto row_gather = [&](const double* in, double* out) {
        for (int y = 0; y < h; ++y) {
            double* orow = out + std::size_t(y) * w;
            for (int x = 0; x < w; ++x) orow[x] = 0.0;
            for (int t = -half; t <= half; ++t) {
                int yy = y + t;
                yy = yy < 0 ? 0 : (yy >= h ? h - 1 : yy);
                const double* row = in + std::size_t(yy) * w;
                double kk = k[t + half];
                for (int x = 0; x < w; ++x) orow[x] += kk * row[x];
            }
        }
    };
    auto row_scatter = [&](const double* in, double* out) {
        for (std::size_t i = 0; i < std::size_t(h) * w; ++i) out[i] = 0.0;
        for (int y = 0; y < h; ++y) {
            const double* row = in + std::size_t(y) * w;
            for (int t = -half; t <= half; ++t) {
                int yy = y + t;
                yy = yy < 0 ? 0 : (yy >= h ? h - 1 : yy);
                double* orow = out + std::size_t(yy) * w;
                double kk = k[t + half];
                for (int x = 0; x < w; ++x) orow[x] += kk * row[x];
            }
        }
    };

    if (!adjoint) {
        col_pass(src, scratch.data());
        row_gather(scratch.data(), dst);
    } else {
        row_scatter(src, scratch.data());
        col_pass(scratch.data(), dst);
    }
}

}  // namespace detail

struct SsimCache {
    int h = 0, w = 0;
    bool wrap_cols = true;
    double lr = 0.0, c1 = 0.0, c2 = 0.0;
    bool lr_from_b = false;
    std::size_t lr_index = 0;
    std::vector<double> a, b;
    std::vector<double> mu_a, mu_b, b_aa, b_bb, b_ab;
    double value = 0.0;
};

// Mean local SSIM with the standard Wang et al. constants; the dynamic range
// is max(max a, max b, 1e-12). Symmetric in its arguments.
inline double ssim(const std::vector<double>& a, const std::vector<double>& b, int h, int w,
                   SsimCache* cache = nullptr, bool wrap_cols = true) {
    if (a.size() != std::size_t(h) * w || b.size() != a.size())
        throw std::invalid_argument("ssim: shape mismatch");

    double amax = 0.0, bmax = 0.0;
    std::size_t bidx = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        amax = std::max(amax, a[i]);
        if (b[i] > bmax) {
            bmax = b[i];
            bidx = i;
        }
    }
    double lr = std::max({amax, bmax, 1e-12});
    double c1 = (0.01 * lr) * (0.01 * lr);
    double c2 = (0.03 * lr) * (0.03 * lr);

    std::vector<double> scratch, aa(a.size()), bb(a.size()), ab(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        aa[i] = a[i] * a[i];
        bb[i] = b[i] * b[i];
        ab[i] = a[i] * b[i];
    }
    std::vector<double> mu_a(a.size()), mu_b(a.size()), b_aa(a.size()), b_bb(a.size()),
        b_ab(a.size());
    detail::ssim_blur(a.data(), mu_a.data(), h, w, wrap_cols, false, scratch);
    detail::ssim_blur(b.data(), mu_b.data(), h, w, wrap_cols, false, scratch);
    detail::ssim_blur(aa.data(), b_aa.data(), h, w, wrap_cols, false, scratch);
    detail::ssim_blur(bb.data(), b_bb.data(), h, w, wrap_cols, false, scratch);
    detail::ssim_blur(ab.data(), b_ab.data(), h, w, wrap_cols, false, scratch);

    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double ma = mu_a[i], mb = mu_b[i];
        double va = b_aa[i] - ma * ma;
        double vb = b_bb[i] - mb * mb;
        double vab = b_ab[i] - ma * mb;
        double n1 = 2.0 * ma * mb + c1;
        double d1 = ma * ma + mb * mb + c1;
        double n2 = 2.0 * vab + c2;
        double d2 = va + vb + c2;
        acc += (n1 * n2) / (d1 * d2);
    }
    double value = acc / double(a.size());

    if (cache) {
        cache->h = h;
        cache->w = w;
        cache->wrap_cols = wrap_cols;
        cache->lr = lr;
        cache->c1 = c1;
        cache->c2 = c2;
        cache->lr_from_b = bmax > amax && bmax > 1e-12;
        cache->lr_index = bidx;
        cache->a = a;
        cache->b = b;
        cache->mu_a = std::move(mu_a);
        cache->mu_b = std::move(mu_b);
        cache->b_aa = std::move(b_aa);
        cache->b_bb = std::move(b_bb);
        cache->b_ab = std::move(b_ab);
        cache->value = value;
    }
    return value;
}

// d(ssim)/d(b) contracted with a scalar upstream gradient, accumulated into
// d_b. Exact, including the dependence of the dynamic range on max(b).
inline void ssim_backward(const SsimCache& c, double d_value, std::vector<double>& d_b) {
    const std::size_t n = c.a.size();
    if (d_b.size() != n) throw std::invalid_argument("ssim_backward: output size mismatch");
    std::vector<double> pa(n), pb(n), pc(n);  // d ssim_p / d mu_b, d var_b, d cov
    const double inv_n = d_value / double(n);
    double d_lr_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double ma = c.mu_a[i], mb = c.mu_b[i];
        double va = c.b_aa[i] - ma * ma;
        double vb = c.b_bb[i] - mb * mb;
        double vab = c.b_ab[i] - ma * mb;
        double n1 = 2.0 * ma * mb + c.c1;
        double d1 = ma * ma + mb * mb + c.c1;
        double n2 = 2.0 * vab + c.c2;
        double d2 = va + vb + c.c2;
        double denom = d1 * d2;
        double s = (n1 * n2) / denom;
        pa[i] = inv_n * (2.0 * ma * n2 / denom - s * 2.0 * mb / d1);
        pb[i] = inv_n * (-s / d2);
        pc[i] = inv_n * (2.0 * n1 / denom);
        if (c.lr_from_b) {
            double ds_dc1 = n2 / denom - s / d1;
            double ds_dc2 = n1 / denom - s / d2;
            d_lr_sum += inv_n * (ds_dc1 * 2.0 * 0.0001 * c.lr + ds_dc2 * 2.0 * 0.0009 * c.lr);
        }
    }
    std::vector<double> scratch, t1(n), t2(n), t3(n), tmp(n);
    detail::ssim_blur(pa.data(), t1.data(), c.h, c.w, c.wrap_cols, true, scratch);
    detail::ssim_blur(pb.data(), t2.data(), c.h, c.w, c.wrap_cols, true, scratch);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = pb[i] * c.mu_b[i];
    std::vector<double> t2m(n);
    detail::ssim_blur(tmp.data(), t2m.data(), c.h, c.w, c.wrap_cols, true, scratch);
    detail::ssim_blur(pc.data(), t3.data(), c.h, c.w, c.wrap_cols, true, scratch);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = pc[i] * c.mu_a[i];
    std::vector<double> t3m(n);
    detail::ssim_blur(tmp.data(), t3m.data(), c.h, c.w, c.wrap_cols, true, scratch);

    for (std::size_t i = 0; i < n; ++i)
        d_b[i] += t1[i] + 2.0 * (c.b[i] * t2[i] - t2m[i]) + (c.a[i] * t3[i] - t3m[i]);
    if (c.lr_from_b) d_b[c.lr_index] += d_lr_sum;
}

}  // namespace wrfgs
