// Copyright Contributors to the wrfgs Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "wrfgs/geometry.hpp"
#include "wrfgs/parallel.hpp"
#include "wrfgs/rng.hpp"

namespace wrfgs {

// Dense layer with gradient and Adam moment storage. Weights are out x in,
// applied as Y = X W^T + b over row-major batches.
struct DenseLayer {
    int in_dim = 0, out_dim = 0;
    MatX w, gw, mw, vw;
    VecX b, gb, mb, vb;

    void init(int in, int out, Rng& rng, double scale = 1.0) {
        in_dim = in;
        out_dim = out;
        w.resize(out, in);
        double bound = scale / std::sqrt(double(in));
        for (int r = 0; r < out; ++r)
            for (int c = 0; c < in; ++c) w(r, c) = rng.uniform(-bound, bound);
        b = VecX::Zero(out);
        zero_grad();
        mw = MatX::Zero(out, in);
        vw = MatX::Zero(out, in);
        mb = VecX::Zero(out);
        vb = VecX::Zero(out);
    }

    void init_zero(int in, int out) {
        Rng dummy(0);
        init(in, out, dummy, 0.0);
        w.setZero();
    }

    void zero_grad() {
        gw = MatX::Zero(out_dim, in_dim);
        gb = VecX::Zero(out_dim);
    }

    std::size_t param_count() const { return std::size_t(out_dim) * in_dim + out_dim; }
};

// y = x W^T + b, rows split across the pool.
inline void linear_forward(const DenseLayer& l, const MatX& x, MatX& y, ThreadPool* pool) {
    y.resize(x.rows(), l.out_dim);
    auto body = [&](int64_t lo, int64_t hi) {
        y.middleRows(lo, hi - lo).noalias() = x.middleRows(lo, hi - lo) * l.w.transpose();
        y.middleRows(lo, hi - lo).rowwise() += l.b.transpose();
    };
    if (pool && x.rows() >= 64)
        pool->parallel_ranges(x.rows(), [&](int, int64_t lo, int64_t hi) { body(lo, hi); });
    else
        body(0, x.rows());
}

// Accumulates gw/gb and writes dx. Weight gradients are reduced over
// per-chunk partials merged in chunk order.
inline void linear_backward(DenseLayer& l, const MatX& x, const MatX& dy, MatX& dx,
                            ThreadPool* pool) {
    dx.resize(x.rows(), l.in_dim);
    int n_chunks = (pool && x.rows() >= 64) ? std::min<int>(pool->size(), int(x.rows())) : 1;
    if (n_chunks <= 1) {
        dx.noalias() = dy * l.w;
        l.gw.noalias() += dy.transpose() * x;
        l.gb.noalias() += dy.colwise().sum().transpose();
        return;
    }
    std::vector<MatX> pgw(n_chunks);
    std::vector<VecX> pgb(n_chunks);
    int64_t per = (x.rows() + n_chunks - 1) / n_chunks;
    pool->run_chunks(n_chunks, [&](int c) {
        int64_t lo = c * per, hi = std::min<int64_t>(x.rows(), lo + per);
        if (lo >= hi) {
            pgw[c] = MatX::Zero(l.out_dim, l.in_dim);
            pgb[c] = VecX::Zero(l.out_dim);
            return;
        }
        auto xb = x.middleRows(lo, hi - lo);
        auto dyb = dy.middleRows(lo, hi - lo);
        dx.middleRows(lo, hi - lo).noalias() = dyb * l.w;
        pgw[c].noalias() = dyb.transpose() * xb;
        pgb[c] = dyb.colwise().sum().transpose();
    });
    for (int c = 0; c < n_chunks; ++c) {
        l.gw += pgw[c];
        l.gb += pgb[c];
    }
}

inline void relu_inplace(MatX& x) { x = x.cwiseMax(0.0); }

// dx = dy masked by the forward output (post-activation > 0).
inline void relu_backward_inplace(const MatX& post, MatX& dy) {
    dy = (post.array() > 0.0).select(dy, 0.0);
}

}  // namespace wrfgs
