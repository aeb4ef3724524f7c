#pragma once

// First-order forward-mode dual number in three variables over an arbitrary
// scalar type. Dual<double> yields value plus gradient; Dual<Jet> yields the
// gradient components each carrying their own gradient and Hessian, i.e. up
// to third derivatives of the underlying function.

#include <array>
#include <cmath>
#include <type_traits>

#include "jet.hpp"

namespace iontrap {

template <class S>
struct Dual {
    S v{};
    std::array<S, 3> d{};

    Dual() = default;
    Dual(const S& value) : v(value) {}  // NOLINT: implicit constants
    Dual(double value) requires(!std::is_same_v<S, double>) : v(value) {}  // NOLINT

    Dual& operator+=(const Dual& o) {
        v += o.v;
        for (int i = 0; i < 3; ++i) d[i] += o.d[i];
        return *this;
    }
    Dual& operator-=(const Dual& o) {
        v -= o.v;
        for (int i = 0; i < 3; ++i) d[i] -= o.d[i];
        return *this;
    }
    Dual& operator*=(double s) {
        v *= s;
        for (auto& x : d) x *= s;
        return *this;
    }
};

namespace detail {

template <class S>
Dual<S> chain1(const Dual<S>& u, const S& f0, const S& f1) {
    Dual<S> r(f0);
    for (int i = 0; i < 3; ++i) r.d[i] = f1 * u.d[i];
    return r;
}

}  // namespace detail

template <class S>
Dual<S> operator-(const Dual<S>& a) {
    Dual<S> r = a;
    r *= -1.0;
    return r;
}
template <class S>
Dual<S> operator+(Dual<S> a, const Dual<S>& b) { return a += b; }
template <class S>
Dual<S> operator-(Dual<S> a, const Dual<S>& b) { return a -= b; }
template <class S>
Dual<S> operator*(Dual<S> a, double s) { return a *= s; }
template <class S>
Dual<S> operator*(double s, Dual<S> a) { return a *= s; }
template <class S>
Dual<S> operator+(Dual<S> a, double s) {
    a.v += s;
    return a;
}
template <class S>
Dual<S> operator+(double s, Dual<S> a) {
    a.v += s;
    return a;
}
template <class S>
Dual<S> operator-(Dual<S> a, double s) {
    a.v -= s;
    return a;
}
template <class S>
Dual<S> operator-(double s, const Dual<S>& a) { return -a + s; }

template <class S>
Dual<S> operator*(const Dual<S>& a, const Dual<S>& b) {
    Dual<S> r(a.v * b.v);
    for (int i = 0; i < 3; ++i) r.d[i] = a.v * b.d[i] + b.v * a.d[i];
    return r;
}

template <class S>
Dual<S> operator/(const Dual<S>& a, const Dual<S>& b) {
    const S inv = 1.0 / b.v;
    const S q = a.v * inv;
    Dual<S> r(q);
    for (int i = 0; i < 3; ++i) r.d[i] = (a.d[i] - q * b.d[i]) * inv;
    return r;
}
template <class S>
Dual<S> operator/(const Dual<S>& a, double s) { return a * (1.0 / s); }
template <class S>
Dual<S> operator/(double s, const Dual<S>& b) { return Dual<S>(S(s)) / b; }

template <class S>
Dual<S> sqrt(const Dual<S>& a) {
    using std::sqrt;
    const S s = sqrt(a.v);
    return detail::chain1(a, s, 0.5 / s);
}

template <class S>
Dual<S> log(const Dual<S>& a) {
    using std::log;
    return detail::chain1(a, S(log(a.v)), S(1.0 / a.v));
}

template <class S>
Dual<S> atan(const Dual<S>& a) {
    using std::atan;
    return detail::chain1(a, S(atan(a.v)), S(1.0 / (1.0 + a.v * a.v)));
}

template <class S>
double value_of(const Dual<S>& a) { return value_of(a.v); }

}  // namespace iontrap
