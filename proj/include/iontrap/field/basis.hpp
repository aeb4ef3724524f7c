#pragma once

// Basis potentials: the potential produced by one electrode at 1 V with every
// other conductor grounded, represented as weighted rectangle corners in the
// two planes.

#include <algorithm>
#include <array>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "../constants.hpp"
#include "../dual.hpp"
#include "../errors.hpp"
#include "../geometry.hpp"
#include "../jet.hpp"
#include "rectangle.hpp"

namespace iontrap::field {

// Evaluations closer than this to a conductor plane are rejected.
inline constexpr double singularity_guard = 1e-9;

using Point = std::array<double, 3>;

// Points must lie strictly between the planes (above z = 0 when d == 0).
inline void check_between_planes(double separation, double z) {
    if (!(z > singularity_guard))
        throw BoundaryEvaluationError("evaluation point on or below the bottom plane");
    if (separation > 0.0 && !(z < separation - singularity_guard))
        throw BoundaryEvaluationError("evaluation point on or above the top plane");
}

struct CornerSource {
    double x = 0.0;
    double y = 0.0;
    double w = 0.0;  // rectangle corner sign times source weight
};

class BasisPotential {
public:
    BasisPotential() = default;

    // separation == 0 describes a single grounded plane at z = 0.
    BasisPotential(std::string electrode_id, double separation, int image_order)
        : electrode_id_(std::move(electrode_id)), separation_(separation),
          image_order_(image_order) {}

    const std::string& electrode_id() const { return electrode_id_; }
    double separation() const { return separation_; }
    int image_order() const { return image_order_; }
    const std::vector<CornerSource>& corners(Plane p) const {
        return p == Plane::bottom ? bottom_ : top_;
    }
    bool empty() const { return bottom_.empty() && top_.empty(); }

    void set_image_order(int order) { image_order_ = order; }
    void set_separation(double d) { separation_ = d; }

    void add_rectangle(const Rect& r, Plane plane, double weight) {
        if (plane == Plane::top && !(separation_ > 0.0))
            throw ConfigError("top-plane source without a plane separation");
        auto& c = plane == Plane::bottom ? bottom_ : top_;
        c.push_back({r.x_max, r.y_max, weight});
        c.push_back({r.x_min, r.y_min, weight});
        c.push_back({r.x_min, r.y_max, -weight});
        c.push_back({r.x_max, r.y_min, -weight});
        compact(c);
    }

    // this += weight * other (same planes and separation expected).
    void accumulate(const BasisPotential& other, double weight) {
        if (weight == 0.0) return;
        for (const auto& c : other.bottom_) bottom_.push_back({c.x, c.y, weight * c.w});
        for (const auto& c : other.top_) top_.push_back({c.x, c.y, weight * c.w});
        compact(bottom_);
        compact(top_);
    }

    // Potential at a point for any scalar type (double, Jet, Dual<...>).
    template <class T>
    T evaluate(const T& x, const T& y, const T& z) const {
        check_point(value_of(z));
        T sum(0.0);
        for (const auto& c : bottom_) {
            const T X = c.x - x;
            const T Y = c.y - y;
            sum += c.w * slab_corner(X, Y, z, separation_, image_order_);
        }
        if (!top_.empty()) {
            const T h = separation_ - z;
            for (const auto& c : top_) {
                const T X = c.x - x;
                const T Y = c.y - y;
                sum += c.w * slab_corner(X, Y, h, separation_, image_order_);
            }
        }
        return sum * (0.5 / constants::pi);
    }

    double value(const Point& p) const { return evaluate(p[0], p[1], p[2]); }

    // Value, gradient (1/m) and Hessian (1/m^2).
    Jet jet(const Point& p) const {
        return evaluate(Jet::variable(p[0], 0), Jet::variable(p[1], 1), Jet::variable(p[2], 2));
    }

    // Value and gradient.
    Dual<double> gradient(const Point& p) const {
        return evaluate(seed<double>(p[0], 0), seed<double>(p[1], 1), seed<double>(p[2], 2));
    }

    // Gradient components carrying their own gradients and Hessians (third
    // derivatives of the potential).
    Dual<Jet> gradient_jet(const Point& p) const {
        return evaluate(seed<Jet>(Jet::variable(p[0], 0), 0), seed<Jet>(Jet::variable(p[1], 1), 1),
                        seed<Jet>(Jet::variable(p[2], 2), 2));
    }

    void check_point(double z) const { check_between_planes(separation_, z); }

private:
    template <class S>
    static Dual<S> seed(const S& v, int axis) {
        Dual<S> d(v);
        d.d[axis] = S(1.0);
        return d;
    }

    static void compact(std::vector<CornerSource>& c) {
        std::sort(c.begin(), c.end(), [](const CornerSource& a, const CornerSource& b) {
            return std::tie(a.x, a.y) < std::tie(b.x, b.y);
        });
        std::vector<CornerSource> out;
        out.reserve(c.size());
        for (const auto& s : c) {
            if (!out.empty() && out.back().x == s.x && out.back().y == s.y)
                out.back().w += s.w;
            else
                out.push_back(s);
        }
        // Merged weights of shared corners cancel exactly only when the
        // contributing weights are equal; drop the residue below rounding.
        double scale = 0.0;
        for (const auto& s : out) scale = std::max(scale, std::abs(s.w));
        std::erase_if(out, [&](const CornerSource& s) { return std::abs(s.w) <= 1e-14 * scale; });
        c = std::move(out);
    }

    std::string electrode_id_;
    double separation_ = 0.0;
    int image_order_ = 0;
    std::vector<CornerSource> bottom_;
    std::vector<CornerSource> top_;
};

// Single grounded plane: solid angle / 2pi of `rect` seen from `point`, the
// plane being z = 0 (bottom) or z = separation (top, viewed from below).
inline double rectangle_patch_potential(const Rect& rect, Plane plane, const Point& point,
                                        double separation = 0.0) {
    BasisPotential b("patch", plane == Plane::top ? separation : 0.0, 0);
    b.add_rectangle(rect, plane, 1.0);
    if (plane == Plane::bottom) {
        if (!(point[2] > singularity_guard))
            throw BoundaryEvaluationError("evaluation point in the conductor plane");
        return b.evaluate(point[0], point[1], point[2]);
    }
    return b.value(point);
}

// Adds the second grounded plane at distance `separation` through the image
// series truncated after `order` reflections (plus the integral tail).
inline BasisPotential apply_image_correction(BasisPotential basis, double separation, int order) {
    if (order < 0) throw ConfigError("image order must be non-negative");
    if (order == 0) return basis;
    basis.set_separation(separation);
    basis.set_image_order(order);
    return basis;
}

}  // namespace iontrap::field
