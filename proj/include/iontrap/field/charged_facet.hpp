#pragma once

// Field of a uniformly charged spacer sidewall in free space.
//
// The facet is a rectangle spanned by u = (p1 - p0)/|p1 - p0| (horizontal)
// and v = z-hat; n = u x v is its normal. In local coordinates (a, b, c) of
// the observation point the Coulomb integral is a corner sum of
// corner_charge(X, Y, |c|), so the potential, field and field gradient follow
// in closed form.

#include <array>
#include <cmath>

#include "../constants.hpp"
#include "../errors.hpp"
#include "../geometry.hpp"
#include "../jet.hpp"
#include "basis.hpp"
#include "rectangle.hpp"

namespace iontrap::field {

// Surface density conversion: elementary charges per um^2 -> C/m^2.
inline constexpr double sigma_si(double e_per_um2) {
    return e_per_um2 * constants::elementary_charge / (constants::micrometer * constants::micrometer);
}

namespace detail {

struct FacetFrame {
    std::array<double, 3> origin;
    std::array<double, 3> u;
    std::array<double, 3> v;
    std::array<double, 3> n;
    double len_u;
    double len_v;
};

inline FacetFrame facet_frame(const SpacerFacet& f) {
    FacetFrame fr{};
    const double dx = f.p1[0] - f.p0[0];
    const double dy = f.p1[1] - f.p0[1];
    fr.len_u = std::hypot(dx, dy);
    fr.len_v = f.z_max - f.z_min;
    if (!(fr.len_u > 0.0) || !(fr.len_v > 0.0))
        throw ConfigError("spacer facet '" + f.id + "' is degenerate");
    fr.origin = {f.p0[0], f.p0[1], f.z_min};
    fr.u = {dx / fr.len_u, dy / fr.len_u, 0.0};
    fr.v = {0.0, 0.0, 1.0};
    fr.n = {fr.u[1], -fr.u[0], 0.0};  // u x z-hat
    return fr;
}

}  // namespace detail

// Electrostatic potential (V) of the facet with density sigma (e/um^2), for
// any scalar type of the point coordinates.
template <class T>
T facet_potential(const SpacerFacet& f, double sigma_e_per_um2, const T& x, const T& y,
                  const T& z) {
    const auto fr = detail::facet_frame(f);
    const T rx = x - fr.origin[0];
    const T ry = y - fr.origin[1];
    const T rz = z - fr.origin[2];
    const T a = fr.u[0] * rx + fr.u[1] * ry;
    const T b = rz;
    T c = fr.n[0] * rx + fr.n[1] * ry;
    const double av = value_of(a);
    const double bv = value_of(b);
    const double cv = value_of(c);
    const bool over = av > -singularity_guard && av < fr.len_u + singularity_guard &&
                      bv > -singularity_guard && bv < fr.len_v + singularity_guard;
    if (std::abs(cv) < singularity_guard) {
        if (over) throw BoundaryEvaluationError("evaluation point on spacer facet '" + f.id + "'");
        c = T(singularity_guard);  // in the facet plane but off the facet: field is continuous
    } else if (cv < 0.0) {
        c = -c;
    }
    auto g = [&](double cu, double cvv) { return corner_charge(T(cu - a), T(cvv - b), c); };
    const T sum = g(fr.len_u, fr.len_v) + g(0.0, 0.0) - g(0.0, fr.len_v) - g(fr.len_u, 0.0);
    return sum * (sigma_si(sigma_e_per_um2) * constants::coulomb_constant);
}

// Field vector (V/m) of the charged facet at a point.
inline std::array<double, 3> charged_facet_field(const SpacerFacet& f, double sigma_e_per_um2,
                                                 const Point& p) {
    const Jet phi = facet_potential(f, sigma_e_per_um2, Jet::variable(p[0], 0),
                                    Jet::variable(p[1], 1), Jet::variable(p[2], 2));
    return {-phi.g[0], -phi.g[1], -phi.g[2]};
}

}  // namespace iontrap::field
