// Copyright Contributors to the wrfgs Project
// SPDX-License-Identifier: Apache-2.0

// Test-only oracle: a naive per-pixel evaluator over all Gaussians with no
// tiling machinery whatsoever. Shares only the published composite
// semantics (depth/source-index order, 3-sigma square support with seam
// wrap, alpha skip and transmittance cutoff constants).

#pragma once

#include <algorithm>
#include <vector>

#include "wrfgs/splat.hpp"

namespace wrfgs_test {

inline wrfgs::RenderedField reference_render(const wrfgs::SplatInput& in) {
    using namespace wrfgs;
    const int n = in.count();
    const int d = in.d_sig;
    RenderedField out;
    out.h = in.h;
    out.w = in.w;
    out.d_sig = d;
    out.field.assign(std::size_t(in.h) * in.w * d, {0, 0});
    out.power.assign(std::size_t(in.h) * in.w, 0.0);

    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (in.projected[a].depth != in.projected[b].depth)
            return in.projected[a].depth < in.projected[b].depth;
        return in.projected[a].source_index < in.projected[b].source_index;
    });

    std::vector<Mat2> conic(n);
    std::vector<double> radius(n);
    for (int i = 0; i < n; ++i) {
        const Mat2& c = in.projected[i].cov2d;
        double det = c(0, 0) * c(1, 1) - c(0, 1) * c(1, 0);
        Mat2 inv;
        inv << c(1, 1), -c(0, 1), -c(1, 0), c(0, 0);
        conic[i] = inv / det;
        radius[i] = in.kernel_weights ? footprint_radius(c, in.w) : 0.0;
    }

    for (int y = 0; y < in.h; ++y) {
        for (int x = 0; x < in.w; ++x) {
            ComplexSample* o = out.px(y, x);
            double t = 1.0;
            ComplexSample prod{1, 0};
            for (int oi : order) {
                double wgt = 1.0;
                if (in.kernel_weights) {
                    // minimal wrapped azimuth difference
                    double dx = in.projected[oi].pixel.x() - double(x);
                    if (dx > 0.5 * in.w) dx -= in.w;
                    if (dx < -0.5 * in.w) dx += in.w;
                    double dy = in.projected[oi].pixel.y() - double(y);
                    if (std::abs(dx) > radius[oi] || std::abs(dy) > radius[oi]) continue;
                    const Mat2& q = conic[oi];
                    double m = q(0, 0) * dx * dx + 2.0 * q(0, 1) * dx * dy + q(1, 1) * dy * dy;
                    wgt = std::exp(-0.5 * m);
                }
                const ComplexSample* s = in.signals.data() + std::size_t(oi) * d;
                if (in.compositor == Compositor::AlphaBlend) {
                    double a = in.opacity[oi] * wgt;
                    if (a < alpha_skip_threshold) continue;
                    for (int ch = 0; ch < d; ++ch) o[ch] += s[ch] * (a * t);
                    t *= 1.0 - a;
                    if (in.early_termination && t < transmittance_cutoff) break;
                } else {
                    for (int ch = 0; ch < d; ++ch) o[ch] += prod * s[ch] * wgt;
                    prod *= in.attenuation[oi];
                }
            }
            double p = 0.0;
            for (int ch = 0; ch < d; ++ch) p += o[ch].abs2();
            out.power[std::size_t(y) * in.w + x] = p;
        }
    }
    return out;
}

}  // namespace wrfgs_test
