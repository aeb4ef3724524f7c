#pragma once

// Second-order forward-mode automatic differentiation in three variables.
//
// A Jet carries a value together with its gradient and (symmetric) Hessian
// with respect to the point coordinates (x, y, z). The closed-form kernels in
// field/ are written as templates over the scalar type, so the same code
// yields plain values (double) or exact derivatives (Jet).

#include <array>
#include <cmath>

namespace iontrap {

struct Jet {
    // Hessian storage order: xx, xy, xz, yy, yz, zz.
    double v = 0.0;
    std::array<double, 3> g{};
    std::array<double, 6> h{};

    constexpr Jet() = default;
    constexpr Jet(double value) : v(value) {}  // NOLINT: implicit constants

    static Jet variable(double value, int axis) {
        Jet j(value);
        j.g[axis] = 1.0;
        return j;
    }

    double hess(int i, int k) const { return h[index(i, k)]; }

    static constexpr int index(int i, int k) {
        if (i > k) {
            const int t = i;
            i = k;
            k = t;
        }
        // (0,0)=0 (0,1)=1 (0,2)=2 (1,1)=3 (1,2)=4 (2,2)=5
        return i == 0 ? k : (i == 1 ? 2 + k : 5);
    }

    Jet& operator+=(const Jet& o) {
        v += o.v;
        for (int i = 0; i < 3; ++i) g[i] += o.g[i];
        for (int i = 0; i < 6; ++i) h[i] += o.h[i];
        return *this;
    }
    Jet& operator-=(const Jet& o) {
        v -= o.v;
        for (int i = 0; i < 3; ++i) g[i] -= o.g[i];
        for (int i = 0; i < 6; ++i) h[i] -= o.h[i];
        return *this;
    }
    Jet& operator*=(double s) {
        v *= s;
        for (auto& x : g) x *= s;
        for (auto& x : h) x *= s;
        return *this;
    }
    Jet& operator+=(double s) {
        v += s;
        return *this;
    }
    Jet& operator-=(double s) {
        v -= s;
        return *this;
    }
    Jet& operator*=(const Jet& o);
    Jet& operator/=(const Jet& o);
};

namespace detail {

// f(u) given f, f', f'' at u.v.
inline Jet chain(const Jet& u, double f0, double f1, double f2) {
    Jet r(f0);
    for (int i = 0; i < 3; ++i) r.g[i] = f1 * u.g[i];
    r.h[0] = f1 * u.h[0] + f2 * u.g[0] * u.g[0];
    r.h[1] = f1 * u.h[1] + f2 * u.g[0] * u.g[1];
    r.h[2] = f1 * u.h[2] + f2 * u.g[0] * u.g[2];
    r.h[3] = f1 * u.h[3] + f2 * u.g[1] * u.g[1];
    r.h[4] = f1 * u.h[4] + f2 * u.g[1] * u.g[2];
    r.h[5] = f1 * u.h[5] + f2 * u.g[2] * u.g[2];
    return r;
}

}  // namespace detail

inline Jet operator-(const Jet& a) {
    Jet r = a;
    r *= -1.0;
    return r;
}
inline Jet operator+(Jet a, const Jet& b) { return a += b; }
inline Jet operator-(Jet a, const Jet& b) { return a -= b; }
inline Jet operator+(Jet a, double b) { return a += b; }
inline Jet operator+(double a, Jet b) { return b += a; }
inline Jet operator-(Jet a, double b) { return a -= b; }
inline Jet operator-(double a, const Jet& b) { return -b + a; }
inline Jet operator*(Jet a, double s) { return a *= s; }
inline Jet operator*(double s, Jet a) { return a *= s; }

inline Jet operator*(const Jet& a, const Jet& b) {
    Jet r(a.v * b.v);
    for (int i = 0; i < 3; ++i) r.g[i] = a.v * b.g[i] + b.v * a.g[i];
    r.h[0] = a.v * b.h[0] + b.v * a.h[0] + 2.0 * a.g[0] * b.g[0];
    r.h[1] = a.v * b.h[1] + b.v * a.h[1] + a.g[0] * b.g[1] + a.g[1] * b.g[0];
    r.h[2] = a.v * b.h[2] + b.v * a.h[2] + a.g[0] * b.g[2] + a.g[2] * b.g[0];
    r.h[3] = a.v * b.h[3] + b.v * a.h[3] + 2.0 * a.g[1] * b.g[1];
    r.h[4] = a.v * b.h[4] + b.v * a.h[4] + a.g[1] * b.g[2] + a.g[2] * b.g[1];
    r.h[5] = a.v * b.h[5] + b.v * a.h[5] + 2.0 * a.g[2] * b.g[2];
    return r;
}

inline Jet reciprocal(const Jet& a) {
    const double inv = 1.0 / a.v;
    return detail::chain(a, inv, -inv * inv, 2.0 * inv * inv * inv);
}

inline Jet operator/(const Jet& a, const Jet& b) { return a * reciprocal(b); }
inline Jet operator/(const Jet& a, double s) { return a * (1.0 / s); }
inline Jet operator/(double s, const Jet& b) { return s * reciprocal(b); }

inline Jet& Jet::operator*=(const Jet& o) { return *this = *this * o; }
inline Jet& Jet::operator/=(const Jet& o) { return *this = *this / o; }

inline Jet sqrt(const Jet& a) {
    const double s = std::sqrt(a.v);
    return detail::chain(a, s, 0.5 / s, -0.25 / (s * a.v));
}

inline Jet log(const Jet& a) {
    const double inv = 1.0 / a.v;
    return detail::chain(a, std::log(a.v), inv, -inv * inv);
}

inline Jet atan(const Jet& a) {
    const double d = 1.0 / (1.0 + a.v * a.v);
    return detail::chain(a, std::atan(a.v), d, -2.0 * a.v * d * d);
}

inline Jet exp(const Jet& a) {
    const double e = std::exp(a.v);
    return detail::chain(a, e, e, e);
}

inline Jet abs(const Jet& a) { return a.v < 0.0 ? -a : a; }

inline double value_of(double x) { return x; }
inline double value_of(const Jet& x) { return x.v; }

}  // namespace iontrap
