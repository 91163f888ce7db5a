// Copyright Contributors to the wrfgs Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>

namespace wrfgs {

// Branch-free double-precision exp for hot array loops; ~1e-16 relative
// accuracy over the composite-weight range. Auto-vectorizes under -O3.
inline double fast_exp(double x) {
    if (x < -708.0) return 0.0;
    if (x > 708.0) return std::exp(x);  // out of the rasterizer's range anyway
    const double inv_ln2 = 1.4426950408889634074;
    const double ln2_hi = 6.93147180369123816490e-01;
    const double ln2_lo = 1.90821492927058770002e-10;
    double kd = std::nearbyint(x * inv_ln2);
    int64_t k = int64_t(kd);
    double r = (x - kd * ln2_hi) - kd * ln2_lo;
    // degree-13 Taylor on |r| <= ln2/2
    double p = 1.0 / 6227020800.0;  // 1/13!
    p = p * r + 1.0 / 479001600.0;
    p = p * r + 1.0 / 39916800.0;
    p = p * r + 1.0 / 3628800.0;
    p = p * r + 1.0 / 362880.0;
    p = p * r + 1.0 / 40320.0;
    p = p * r + 1.0 / 5040.0;
    p = p * r + 1.0 / 720.0;
    p = p * r + 1.0 / 120.0;
    p = p * r + 1.0 / 24.0;
    p = p * r + 1.0 / 6.0;
    p = p * r + 0.5;
    p = p * r + 1.0;
    p = p * r + 1.0;
    // scale by 2^k through the exponent bits
    uint64_t bits;
    std::memcpy(&bits, &p, 8);
    int64_t exp_bits = int64_t((bits >> 52) & 0x7ff) + k;
    if (exp_bits <= 0) return p * std::pow(2.0, double(k));  // subnormal fallback
    bits = (bits & ~(0x7ffull << 52)) | (uint64_t(exp_bits) << 52);
    std::memcpy(&p, &bits, 8);
    return p;
}

inline void fast_exp_batch(const double* x, double* out, int n) {
    for (int i = 0; i < n; ++i) out[i] = fast_exp(x[i]);
}

}  // namespace wrfgs
