#pragma once

// Electrode system: per-electrode basis potentials for a two-plane geometry,
// including the coupling through the open slit in the top plane.
//
// The slit is modelled as a set of cells of unknown, piecewise-constant
// potential in the top plane. Inside the stack the cells act like electrodes
// of the slab; above the top plane they bound a grounded-plane half space.
// The cell potentials follow from requiring continuity of the normal field
// through each cell centre, a linear system solved once per geometry:
//     A u = B V,   u = M V,   M = A^-1 B.
// Each electrode's basis is then its own patches plus sum_j M_j,e * cell_j.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "../errors.hpp"
#include "../geometry.hpp"
#include "../voltage_set.hpp"
#include "basis.hpp"
#include "rectangle.hpp"

namespace iontrap::field {

struct ApertureOptions {
    int cells_y = 8;         // across the slit, clustered toward the edges
    double max_cell_x = 100e-6;  // axial cell length near x = 0
    double cell_growth = 0.5;    // extra allowed length per unit |x|
};

struct FieldOptions {
    int image_order = 10;
    ApertureOptions aperture;
};

struct FieldSample {
    double potential = 0.0;                    // V
    std::array<double, 3> field{};             // V/m, E = -grad
    std::array<std::array<double, 3>, 3> hessian{};  // V/m^2
};

namespace detail {

// d/dh of a rectangle's slab (or half-space) potential at in-plane offset.
inline double rect_dh(const Rect& r, double x, double y, double h, double d, int order) {
    const double k = 0.5 / constants::pi;
    auto c = [&](double xc, double yc) { return slab_corner_dh(xc - x, yc - y, h, d, order); };
    return k * (c(r.x_max, r.y_max) + c(r.x_min, r.y_min) - c(r.x_min, r.y_max) -
                c(r.x_max, r.y_min));
}

inline std::vector<double> aperture_x_breaks(const TrapGeometry& g, const ApertureOptions& o) {
    const Rect s = g.slit_rect();
    std::vector<double> edges{s.x_min, s.x_max};
    for (const auto& p : g.patches) {
        for (double x : {p.rect.x_min, p.rect.x_max})
            if (x > s.x_min && x < s.x_max) edges.push_back(x);
    }
    if (s.x_min < 0.0 && s.x_max > 0.0) edges.push_back(0.0);
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    std::vector<double> out{edges.front()};
    for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
        const double a = edges[i];
        const double b = edges[i + 1];
        const double near = (a < 0.0 && b > 0.0) ? 0.0 : std::min(std::abs(a), std::abs(b));
        const double limit = o.max_cell_x + o.cell_growth * near;
        const int n = std::max(1, static_cast<int>(std::ceil((b - a) / limit - 1e-9)));
        for (int k = 1; k <= n; ++k) out.push_back(k == n ? b : a + (b - a) * k / n);
    }
    return out;
}

inline std::vector<double> aperture_y_breaks(const TrapGeometry& g, const ApertureOptions& o) {
    const Rect s = g.slit_rect();
    const double c = 0.5 * (s.y_min + s.y_max);
    const double a = 0.5 * (s.y_max - s.y_min);
    std::vector<double> out;
    for (int k = 0; k <= o.cells_y; ++k) {
        if (k == 0) out.push_back(s.y_min);
        else if (k == o.cells_y) out.push_back(s.y_max);
        else out.push_back(c + a * std::sin((-1.0 + 2.0 * k / o.cells_y) * constants::pi / 2.0));
    }
    return out;
}

}  // namespace detail

class ElectrodeSystem {
public:
    explicit ElectrodeSystem(const TrapGeometry& g, FieldOptions opts = {})
        : geometry_(g), options_(opts) {
        validate(g);
        if (opts.image_order < 0) throw ConfigError("image order must be non-negative");
        for (const auto& name : g.electrodes())
            if (g.electrode_role(name) != Role::ground) names_.push_back(name);

        const double d = g.plane_separation;
        const int N = opts.image_order;
        for (const auto& name : names_) {
            BasisPotential b(name, d, N);
            for (const auto& p : g.patches)
                if (p.electrode == name) b.add_rectangle(p.rect, p.plane, 1.0);
            bases_.push_back(std::move(b));
        }
        if (g.has_slit()) couple_aperture();
    }

    const TrapGeometry& geometry() const { return geometry_; }
    const FieldOptions& options() const { return options_; }
    const std::vector<std::string>& electrodes() const { return names_; }
    const std::vector<Rect>& aperture_cells() const { return cells_; }

    bool has(const std::string& name) const {
        return std::find(names_.begin(), names_.end(), name) != names_.end();
    }

    const BasisPotential& basis(const std::string& name) const {
        const auto it = std::find(names_.begin(), names_.end(), name);
        if (it == names_.end()) throw ConfigError("unknown electrode '" + name + "'");
        return bases_[static_cast<std::size_t>(it - names_.begin())];
    }

    // Single source list for sum_i V_i * basis_i. Keys must be electrodes.
    BasisPotential combine(const std::map<std::string, double>& weights,
                           const std::string& label = "combined") const {
        BasisPotential out(label, geometry_.plane_separation, options_.image_order);
        for (const auto& [name, w] : weights) out.accumulate(basis(name), w);
        return out;
    }

    // DC sources for a voltage set (RF electrodes excluded).
    BasisPotential dc_sources(const VoltageSet& v) const {
        for (const auto& [name, value] : v.volts) {
            if (!has(name)) throw ConfigError("unknown electrode '" + name + "'");
            if (geometry_.electrode_role(name) == Role::rf)
                throw ConfigError("electrode '" + name + "' is an RF electrode");
        }
        return combine(v.volts, "dc");
    }

    // Sources of all RF electrodes at unit amplitude.
    BasisPotential rf_sources() const {
        std::map<std::string, double> w;
        for (const auto& name : names_)
            if (geometry_.electrode_role(name) == Role::rf) w[name] = 1.0;
        if (w.empty()) throw ConfigError("geometry has no RF electrode");
        return combine(w, "rf");
    }

private:
    void couple_aperture() {
        const auto& g = geometry_;
        const double d = g.plane_separation;
        const int N = options_.image_order;
        const auto xb = detail::aperture_x_breaks(g, options_.aperture);
        const auto yb = detail::aperture_y_breaks(g, options_.aperture);
        for (std::size_t i = 0; i + 1 < xb.size(); ++i)
            for (std::size_t j = 0; j + 1 < yb.size(); ++j)
                cells_.push_back({xb[i], xb[i + 1], yb[j], yb[j + 1]});

        const auto n = static_cast<Eigen::Index>(cells_.size());
        const auto m = static_cast<Eigen::Index>(names_.size());
        Eigen::MatrixXd A(n, n);
        Eigen::MatrixXd B = Eigen::MatrixXd::Zero(n, m);
        for (Eigen::Index k = 0; k < n; ++k) {
            const Rect& ck = cells_[static_cast<std::size_t>(k)];
            const double cx = 0.5 * (ck.x_min + ck.x_max);
            const double cy = 0.5 * (ck.y_min + ck.y_max);
            // Normal derivative just below (slab, h = d - z) and just above
            // (half space, h' = z - d) must agree.
            auto jump = [&](const Rect& r) {
                return -detail::rect_dh(r, cx, cy, 0.0, d, N) - detail::rect_dh(r, cx, cy, 0.0, d, 0);
            };
            for (Eigen::Index j = 0; j < n; ++j) A(k, j) = jump(cells_[static_cast<std::size_t>(j)]);
            for (Eigen::Index e = 0; e < m; ++e) {
                const auto& name = names_[static_cast<std::size_t>(e)];
                double rhs = 0.0;
                for (const auto& p : g.patches) {
                    if (p.electrode != name) continue;
                    if (p.plane == Plane::bottom) rhs -= detail::rect_dh(p.rect, cx, cy, d, d, N);
                    else rhs -= jump(p.rect);
                }
                B(k, e) = rhs;
            }
        }
        const Eigen::MatrixXd M = A.partialPivLu().solve(B);
        if (!M.allFinite()) throw NumericalError("slit aperture system is singular");
        for (Eigen::Index e = 0; e < m; ++e) {
            auto& b = bases_[static_cast<std::size_t>(e)];
            BasisPotential cells(b.electrode_id(), d, N);
            for (Eigen::Index j = 0; j < n; ++j)
                cells.add_rectangle(cells_[static_cast<std::size_t>(j)], Plane::top, M(j, e));
            b.accumulate(cells, 1.0);
        }
        coupling_ = M;
    }

    TrapGeometry geometry_;
    FieldOptions options_;
    std::vector<std::string> names_;
    std::vector<BasisPotential> bases_;
    std::vector<Rect> cells_;
    Eigen::MatrixXd coupling_;
};

inline FieldSample sample_from_jet(const Jet& j) {
    FieldSample s;
    s.potential = j.v;
    for (int i = 0; i < 3; ++i) {
        s.field[i] = -j.g[i];
        for (int k = 0; k < 3; ++k) s.hessian[i][k] = j.hess(i, k);
    }
    return s;
}

// Linear superposition sum_i V_i basis_i at a point; unlisted electrodes are
// grounded.
inline FieldSample assemble_field(const ElectrodeSystem& sys, const VoltageSet& v, const Point& p) {
    Jet total;
    for (const auto& [name, value] : v.volts) {
        if (!sys.has(name)) throw ConfigError("unknown electrode '" + name + "'");
        if (value == 0.0) continue;
        total += value * sys.basis(name).jet(p);
    }
    return sample_from_jet(total);
}

inline FieldSample assemble_field(const TrapGeometry& g, const VoltageSet& v, const Point& p,
                                  FieldOptions opts = {}) {
    for (const auto& [name, value] : v.volts)
        if (!g.has_electrode(name)) throw ConfigError("unknown electrode '" + name + "'");
    return assemble_field(ElectrodeSystem(g, opts), v, p);
}

}  // namespace iontrap::field
