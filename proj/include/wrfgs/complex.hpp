// Copyright Contributors to the wrfgs Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>

namespace wrfgs {

// Complex signal sample stored in Cartesian (re, im) form. All compositing
// math in this library is Cartesian; nothing converts through polar.
struct ComplexSample {
    double re = 0.0;
    double im = 0.0;

    constexpr ComplexSample() = default;
    constexpr ComplexSample(double r, double i) : re(r), im(i) {}

    constexpr ComplexSample operator+(const ComplexSample& o) const { return {re + o.re, im + o.im}; }
    constexpr ComplexSample operator-(const ComplexSample& o) const { return {re - o.re, im - o.im}; }
    constexpr ComplexSample operator*(const ComplexSample& o) const {
        return {re * o.re - im * o.im, re * o.im + im * o.re};
    }
    constexpr ComplexSample operator*(double s) const { return {re * s, im * s}; }
    constexpr ComplexSample& operator+=(const ComplexSample& o) {
        re += o.re;
        im += o.im;
        return *this;
    }
    constexpr ComplexSample& operator*=(const ComplexSample& o) {
        *this = *this * o;
        return *this;
    }
    constexpr ComplexSample conj() const { return {re, -im}; }
    constexpr double abs2() const { return re * re + im * im; }
    double abs() const { return std::hypot(re, im); }
    double arg() const { return std::atan2(im, re); }
};

constexpr ComplexSample operator*(double s, const ComplexSample& z) { return z * s; }

// e^{j theta}
inline ComplexSample cis(double theta) { return {std::cos(theta), std::sin(theta)}; }

}  // namespace wrfgs
