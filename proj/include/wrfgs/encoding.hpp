// Copyright Contributors to the wrfgs Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

#include "wrfgs/geometry.hpp"

namespace wrfgs {

// Sinusoidal positional encoding with frequencies pi*2^0 .. pi*2^L inclusive,
// i.e. exactly L+1 bands. Output layout is component-major:
//   [sin(pi t0), cos(pi t0), sin(2 pi t0), cos(2 pi t0), ..., sin(pi t1), ...]
// so the length is 2*(L+1)*k for a k-vector input.
inline int encoded_size(int k, int order) { return 2 * (order + 1) * k; }

// Band l+1 is produced from band l by angle doubling; one sincos per input
// component total.
inline void positional_encode(const double* t, int k, int order, double* out) {
    for (int c = 0; c < k; ++c) {
        double s = std::sin(pi * t[c]);
        double co = std::cos(pi * t[c]);
        double* o = out + std::size_t(c) * 2 * (order + 1);
        for (int l = 0; l <= order; ++l) {
            o[2 * l] = s;
            o[2 * l + 1] = co;
            double s2 = 2.0 * s * co;
            co = co * co - s * s;
            s = s2;
        }
    }
}

inline std::vector<double> positional_encode(const std::vector<double>& t, int order) {
    std::vector<double> out(encoded_size(int(t.size()), order));
    positional_encode(t.data(), int(t.size()), order, out.data());
    return out;
}

// d(encoded)/d(t_c) contracted with an upstream gradient. `encoded` must be
// the forward output for the same t.
inline void positional_encode_backward(const double* encoded, int k, int order,
                                       const double* d_encoded, double* d_t) {
    for (int c = 0; c < k; ++c) {
        const double* e = encoded + std::size_t(c) * 2 * (order + 1);
        const double* g = d_encoded + std::size_t(c) * 2 * (order + 1);
        double acc = 0.0;
        double freq = pi;
        for (int l = 0; l <= order; ++l) {
            // d sin(f t)/dt = f cos, d cos(f t)/dt = -f sin
            acc += freq * (e[2 * l + 1] * g[2 * l] - e[2 * l] * g[2 * l + 1]);
            freq *= 2.0;
        }
        d_t[c] += acc;
    }
}

}  // namespace wrfgs
