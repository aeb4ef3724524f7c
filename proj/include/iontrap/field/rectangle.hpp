#pragma once

// Closed-form corner kernels for rectangular sources in a grounded plane.
//
// A rectangle [x0, x1] x [y0, y1] held at unit potential in an otherwise
// grounded plane produces, at height h above the plane,
//
//     phi = (1 / 2pi) * sum_corners s * F(X, Y, h),   F = atan(X Y / (h R)),
//
// with X = x_c - x, Y = y_c - y, R = |(X, Y, h)| and s = +1 on the (x1, y1)
// and (x0, y0) corners, -1 on the mixed ones. Sums over corners of G(X, Y, h)
// give the Coulomb potential of a uniformly charged rectangle (times 1/4pi),
// which is used for the image-series tail and for charged facets.
//
// Every kernel is a template over the scalar type so that double, Jet and
// Dual<...> all flow through the same expressions.

#include <cmath>

#include "../dual.hpp"
#include "../jet.hpp"

namespace iontrap::field {

// Solid-angle corner term. Odd in h; requires h != 0.
template <class T>
T corner_solid(const T& X, const T& Y, const T& h) {
    using std::atan;
    using std::sqrt;
    const T R = sqrt(X * X + Y * Y + h * h);
    return atan(X * Y / (h * R));
}

// d/dh of corner_solid (even in h). At h = 0 it reduces to -R / (X Y).
template <class T>
T corner_solid_dh(const T& X, const T& Y, const T& h) {
    using std::sqrt;
    const T X2 = X * X;
    const T Y2 = Y * Y;
    const T h2 = h * h;
    const T R = sqrt(X2 + Y2 + h2);
    return -(X * Y) * (X2 + Y2 + 2.0 * h2) / (R * (X2 + h2) * (Y2 + h2));
}

namespace detail {

// log(a + R) with R = sqrt(a^2 + b2), stable when a is large and negative.
template <class T>
T log_plus_r(const T& a, const T& b2, const T& R) {
    using std::log;
    if (value_of(a) >= 0.0) return log(a + R);
    return log(b2 / (R - a));
}

}  // namespace detail

// Corner term of the Coulomb integral of a uniform rectangle:
//   int int dA / |r - r'| = sum_corners s * G(X, Y, h).
// Requires h > 0.
template <class T>
T corner_charge(const T& X, const T& Y, const T& h) {
    using std::atan;
    using std::sqrt;
    const T X2 = X * X;
    const T Y2 = Y * Y;
    const T h2 = h * h;
    const T R = sqrt(X2 + Y2 + h2);
    return X * detail::log_plus_r(Y, X2 + h2, R) + Y * detail::log_plus_r(X, Y2 + h2, R) -
           h * atan(X * Y / (h * R));
}

// Corner term of the two-plane slab: the source plane and a grounded plane a
// distance d away. The images at h + 2nd for |n| <= order are summed
// explicitly; the remainder of the series is replaced by its integral
// (a charged-sheet potential) plus the first Euler-Maclaurin correction.
// order == 0 gives the single-plane term. Multiply by s / 2pi per corner.
template <class T>
T slab_corner(const T& X, const T& Y, const T& h, double d, int order) {
    T v = corner_solid(X, Y, h);
    if (order <= 0) return v;
    for (int n = 1; n <= order; ++n) {
        const double shift = 2.0 * n * d;
        v += corner_solid(X, Y, h + shift);
        v += corner_solid(X, Y, h - shift);
    }
    const double s0 = (2.0 * order + 1.0) * d;
    v += (corner_charge(X, Y, h + s0) - corner_charge(X, Y, s0 - h)) * (0.5 / d);
    v += (corner_solid_dh(X, Y, h + s0) - corner_solid_dh(X, Y, h - s0)) * (d / 12.0);
    return v;
}

// d/dh of slab_corner, usable at h = 0 provided X, Y != 0.
inline double slab_corner_dh(double X, double Y, double h, double d, int order) {
    double v = corner_solid_dh(X, Y, h);
    if (order <= 0) return v;
    for (int n = 1; n <= order; ++n) {
        const double shift = 2.0 * n * d;
        v += corner_solid_dh(X, Y, h + shift);
        v += corner_solid_dh(X, Y, h - shift);
    }
    const double s0 = (2.0 * order + 1.0) * d;
    // dG/dh = -F; the Euler-Maclaurin term is differentiated by a symmetric
    // difference (it is a small correction at distance >= 3d).
    v += (-corner_solid(X, Y, h + s0) - corner_solid(X, Y, s0 - h)) * (0.5 / d);
    const double e = 1e-4 * d;
    auto em = [&](double hh) {
        return (corner_solid_dh(X, Y, hh + s0) - corner_solid_dh(X, Y, hh - s0)) * (d / 12.0);
    };
    v += (em(h + e) - em(h - e)) / (2.0 * e);
    return v;
}

}  // namespace iontrap::field
