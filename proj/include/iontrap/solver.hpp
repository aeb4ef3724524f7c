#pragma once

// DC voltage-set solver: electrode moments at a site, box-constrained least
// squares for field / axial curvature / rotation targets, compensation-field
// inference and misalignment propagation.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "analysis.hpp"
#include "constants.hpp"
#include "errors.hpp"
#include "field/electrostatics.hpp"
#include "geometry.hpp"
#include "pseudo.hpp"
#include "text.hpp"
#include "voltage_set.hpp"

namespace iontrap {

// Row layout of the moment matrix.
enum MomentRow : int { kPhi = 0, kEx, kEy, kEz, kHxx, kHyy, kHxy, kHxz, kHyz, kMomentRows };

struct MomentMatrix {
    Point site{};
    std::vector<std::string> electrodes;  // columns
    // Rows: potential (V/V), field components (V/m per V) and the five
    // independent curvatures (V/m^2 per V); H_zz = -H_xx - H_yy.
    Eigen::Matrix<double, kMomentRows, Eigen::Dynamic> m;

    Eigen::Index column(const std::string& name) const {
        const auto it = std::find(electrodes.begin(), electrodes.end(), name);
        if (it == electrodes.end()) throw ConfigError("unknown electrode '" + name + "'");
        return static_cast<Eigen::Index>(it - electrodes.begin());
    }

    Eigen::VectorXd to_vector(const VoltageSet& v) const {
        Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(electrodes.size()));
        for (const auto& [name, value] : v.volts) x(column(name)) = value;
        return x;
    }

    VoltageSet to_voltages(const Eigen::VectorXd& x) const {
        VoltageSet v;
        for (std::size_t i = 0; i < electrodes.size(); ++i)
            v.volts[electrodes[i]] = x(static_cast<Eigen::Index>(i));
        return v;
    }

    // Moments (9-vector) of a voltage set.
    Eigen::Matrix<double, kMomentRows, 1> moments(const VoltageSet& v) const { return m * to_vector(v); }
};

// DC electrodes only (RF and grounded patches carry no column).
inline MomentMatrix build_moment_matrix(const field::ElectrodeSystem& sys, const Point& site) {
    MomentMatrix mm;
    mm.site = site;
    for (const auto& name : sys.electrodes())
        if (sys.geometry().electrode_role(name) == Role::dc) mm.electrodes.push_back(name);
    mm.m.resize(kMomentRows, static_cast<Eigen::Index>(mm.electrodes.size()));
    for (std::size_t c = 0; c < mm.electrodes.size(); ++c) {
        const Jet j = sys.basis(mm.electrodes[c]).jet(site);
        const auto col = static_cast<Eigen::Index>(c);
        mm.m(kPhi, col) = j.v;
        mm.m(kEx, col) = -j.g[0];
        mm.m(kEy, col) = -j.g[1];
        mm.m(kEz, col) = -j.g[2];
        mm.m(kHxx, col) = j.hess(0, 0);
        mm.m(kHyy, col) = j.hess(1, 1);
        mm.m(kHxy, col) = j.hess(0, 1);
        mm.m(kHxz, col) = j.hess(0, 2);
        mm.m(kHyz, col) = j.hess(1, 2);
    }
    return mm;
}

inline MomentMatrix build_moment_matrix(const TrapGeometry& g, const Point& site,
                                        field::FieldOptions opts = {}) {
    return build_moment_matrix(field::ElectrodeSystem(g, opts), site);
}

struct PotentialTargets {
    Point site{};
    std::optional<std::array<double, 3>> field_target;  // V/m
    std::optional<double> axial_curvature;               // V/m^2 (DC d2phi/dx2)
    std::optional<double> rotation_theta_deg;
    // Effective RF curvature (pseudopotential Hessian / charge, V/m^2) the
    // rotation acts on; zero when absent.
    Eigen::Matrix3d rf_curvature = Eigen::Matrix3d::Zero();
    double weight_field = 1.0;
    double weight_axial = 1.0;
    double weight_rotation = 1.0;

    // Axial curvature from a frequency: k = m (2 pi f)^2 / Q.
    static double curvature_for_frequency(double hz, const IonSpecies& sp) {
        const double w = 2.0 * constants::pi * hz;
        return sp.mass * w * w / sp.charge;
    }
};

struct SolveConstraints {
    double v_max = 30.0;
    // Groups of electrodes forced to share one voltage, e.g. {"top 1", "top 2"}.
    std::vector<std::vector<std::string>> tied;
    // Ridge weight (V^-2) on ||V||^2. Zero selects the limit lambda -> 0+:
    // exact least squares, with the minimum-norm voltage set among minimizers.
    double ridge = 0.0;
    // Scaled residual norm (V) above which the targets count as unreachable.
    double residual_threshold = 1e-6;
    // Length that converts field (x l) and curvature (x l^2) residuals to volts.
    double length_scale = 100e-6;
};

struct ObjectiveResidual {
    std::string name;
    double target = 0.0;
    double achieved = 0.0;
    double residual = 0.0;  // achieved - target, in the objective's own units
};

struct SolveReport {
    VoltageSet voltages;
    std::vector<ObjectiveResidual> residuals;
    double weighted_residual_norm = 0.0;  // V (scaled units)
    double projected_gradient_norm = 0.0;
    std::vector<std::string> at_bound;
    int iterations = 0;
};

namespace detail {

struct LinearSystem {
    Eigen::MatrixXd A;  // scaled, weighted rows
    Eigen::VectorXd b;
    std::vector<std::string> names;
    std::vector<double> units;  // multiply scaled residual by 1/units to get native units
    std::vector<double> weights;
};

inline LinearSystem assemble_targets(const MomentMatrix& mm, const PotentialTargets& t, double l) {
    LinearSystem s;
    std::vector<Eigen::RowVectorXd> rows;
    std::vector<double> rhs;
    auto push = [&](const std::string& name, Eigen::RowVectorXd row, double target, double unit,
                    double w) {
        if (w < 0.0) throw ConfigError("objective weights must be non-negative");
        if (w == 0.0) return;
        const double sw = std::sqrt(w);
        rows.push_back(sw * unit * row);
        rhs.push_back(sw * unit * target);
        s.names.push_back(name);
        s.units.push_back(unit);
        s.weights.push_back(sw);
    };
    if (t.field_target) {
        const auto& f = *t.field_target;
        push("E_x", mm.m.row(kEx), f[0], l, t.weight_field);
        push("E_y", mm.m.row(kEy), f[1], l, t.weight_field);
        push("E_z", mm.m.row(kEz), f[2], l, t.weight_field);
    }
    if (t.axial_curvature) push("H_xx", mm.m.row(kHxx), *t.axial_curvature, l * l, t.weight_axial);
    if (t.rotation_theta_deg) {
        const double t2 = std::tan(2.0 * *t.rotation_theta_deg * constants::pi / 180.0);
        // 2 H_yz - tan(2 theta) (H_yy - H_zz) on the total curvature, with
        // H_zz = -H_xx - H_yy for the DC part.
        const Eigen::RowVectorXd row =
            2.0 * mm.m.row(kHyz) - t2 * (2.0 * mm.m.row(kHyy) + mm.m.row(kHxx));
        const Eigen::Matrix3d& R = t.rf_curvature;
        const double target = t2 * (R(1, 1) - R(2, 2)) - 2.0 * R(1, 2);
        push("rotation", row, target, l * l, t.weight_rotation);
    }
    if (rows.empty()) throw ConfigError("no active objective in the targets");
    s.A.resize(static_cast<Eigen::Index>(rows.size()), mm.m.cols());
    s.b.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        s.A.row(static_cast<Eigen::Index>(i)) = rows[i];
        s.b(static_cast<Eigen::Index>(i)) = rhs[i];
    }
    return s;
}

// min ||A x - b||^2 + ridge ||x||^2 subject to |x_i| <= ub_i. Active-set
// method on bounds; every subproblem is solved by a complete orthogonal
// decomposition, so rank-deficient systems return the minimum-norm solution
// on the free variables.
inline Eigen::VectorXd bounded_least_squares(const Eigen::MatrixXd& A0, const Eigen::VectorXd& b0,
                                             const Eigen::VectorXd& ub, double ridge, int& iters) {
    const Eigen::Index n = A0.cols();
    Eigen::MatrixXd A = A0;
    Eigen::VectorXd b = b0;
    if (ridge > 0.0) {
        A.conservativeResize(A0.rows() + n, n);
        A.bottomRows(n) = std::sqrt(ridge) * Eigen::MatrixXd::Identity(n, n);
        b.conservativeResize(A0.rows() + n);
        b.tail(n).setZero();
    }
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    // state: 0 free, +1 at upper bound, -1 at lower bound
    std::vector<int> state(static_cast<std::size_t>(n), 0);
    for (Eigen::Index i = 0; i < n; ++i)
        if (ub(i) == 0.0) state[static_cast<std::size_t>(i)] = 1;
    const double tol = 1e-12 * std::max(1.0, A.norm() * std::max(1.0, b.norm()));
    iters = 0;
    for (int outer = 0; outer < 10 * static_cast<int>(n) + 20; ++outer) {
        ++iters;
        std::vector<Eigen::Index> F;
        for (Eigen::Index i = 0; i < n; ++i)
            if (state[static_cast<std::size_t>(i)] == 0) F.push_back(i);
        Eigen::VectorXd rhs = b;
        for (Eigen::Index i = 0; i < n; ++i)
            if (state[static_cast<std::size_t>(i)] != 0) {
                x(i) = state[static_cast<std::size_t>(i)] * ub(i);
                rhs -= A.col(i) * x(i);
            }
        if (!F.empty()) {
            Eigen::MatrixXd AF(A.rows(), static_cast<Eigen::Index>(F.size()));
            for (std::size_t k = 0; k < F.size(); ++k) AF.col(static_cast<Eigen::Index>(k)) = A.col(F[k]);
            Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(AF);
            cod.setThreshold(1e-13);
            const Eigen::VectorXd z = cod.solve(rhs);
            // Step from the current free values toward z, stopping at bounds.
            double alpha = 1.0;
            Eigen::Index hit = -1;
            for (std::size_t k = 0; k < F.size(); ++k) {
                const Eigen::Index i = F[k];
                const double zi = z(static_cast<Eigen::Index>(k));
                if (std::abs(zi) > ub(i) * (1.0 + 1e-14)) {
                    const double lim = zi > x(i) ? ub(i) : -ub(i);
                    const double a = (lim - x(i)) / (zi - x(i));
                    if (a < alpha) {
                        alpha = std::max(a, 0.0);
                        hit = i;
                    }
                }
            }
            for (std::size_t k = 0; k < F.size(); ++k) {
                const Eigen::Index i = F[k];
                x(i) += alpha * (z(static_cast<Eigen::Index>(k)) - x(i));
            }
            if (hit >= 0) {
                for (std::size_t k = 0; k < F.size(); ++k) {
                    const Eigen::Index i = F[k];
                    if (std::abs(std::abs(x(i)) - ub(i)) <= 1e-14 * std::max(1.0, ub(i)) || i == hit) {
                        state[static_cast<std::size_t>(i)] = x(i) > 0.0 ? 1 : -1;
                        x(i) = state[static_cast<std::size_t>(i)] * ub(i);
                    }
                }
                continue;
            }
        }
        // KKT on the bound variables: w = -grad/2 = A^T (b - A x).
        const Eigen::VectorXd w = A.transpose() * (b - A * x);
        Eigen::Index release = -1;
        double worst = tol;
        for (Eigen::Index i = 0; i < n; ++i) {
            const int s = state[static_cast<std::size_t>(i)];
            if (s == 0 || ub(i) == 0.0) continue;
            const double into = -s * w(i);  // positive: objective decreases moving inward
            if (into > worst) {
                worst = into;
                release = i;
            }
        }
        if (release < 0) return x;
        state[static_cast<std::size_t>(release)] = 0;
    }
    throw ConvergenceError("bounded least squares did not converge");
}

}  // namespace detail

inline SolveReport solve_voltages(const MomentMatrix& mm, const PotentialTargets& targets,
                                  const SolveConstraints& c = {}) {
    if (!(c.v_max >= 0.0) || !std::isfinite(c.v_max))
        throw InfeasibleError("infeasible constraints: v_max must be >= 0");
    if (c.ridge < 0.0) throw ConfigError("ridge weight must be non-negative");
    const auto sys = detail::assemble_targets(mm, targets, c.length_scale);
    const Eigen::Index n = mm.m.cols();

    // Tied electrodes share one variable: V = T u. Scaling the columns by
    // 1/sqrt(group size) makes ||u'|| equal ||V||, so the minimum-norm
    // choice refers to the voltages themselves.
    std::vector<int> group(static_cast<std::size_t>(n), -1);
    int ngroups = 0;
    for (const auto& tie : c.tied) {
        if (tie.size() < 2) throw ConfigError("a tie needs at least two electrodes");
        int gid = -1;
        for (const auto& name : tie) {
            const auto col = static_cast<std::size_t>(mm.column(name));
            if (group[col] >= 0) {
                if (gid >= 0 && group[col] != gid)
                    throw InfeasibleError("infeasible constraints: electrode '" + name +
                                          "' is in two ties");
                gid = group[col];
            }
        }
        if (gid < 0) gid = ngroups++;
        for (const auto& name : tie) group[static_cast<std::size_t>(mm.column(name))] = gid;
    }
    for (auto& gidx : group)
        if (gidx < 0) gidx = ngroups++;
    std::vector<int> size(static_cast<std::size_t>(ngroups), 0);
    for (int gidx : group) ++size[static_cast<std::size_t>(gidx)];
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(n, ngroups);
    Eigen::VectorXd ub(ngroups);
    for (Eigen::Index i = 0; i < n; ++i) {
        const int gidx = group[static_cast<std::size_t>(i)];
        T(i, gidx) = 1.0 / std::sqrt(static_cast<double>(size[static_cast<std::size_t>(gidx)]));
    }
    for (int k = 0; k < ngroups; ++k) ub(k) = c.v_max * std::sqrt(static_cast<double>(size[static_cast<std::size_t>(k)]));

    SolveReport rep;
    const Eigen::MatrixXd AT = sys.A * T;
    const Eigen::VectorXd u = detail::bounded_least_squares(AT, sys.b, ub, c.ridge, rep.iterations);
    Eigen::VectorXd x = T * u;
    for (Eigen::Index i = 0; i < n; ++i) x(i) = std::clamp(x(i), -c.v_max, c.v_max);
    rep.voltages = mm.to_voltages(x);

    const Eigen::VectorXd r = sys.A * x - sys.b;
    rep.weighted_residual_norm = r.norm();
    for (Eigen::Index k = 0; k < r.size(); ++k) {
        const auto ku = static_cast<std::size_t>(k);
        const double scale = sys.weights[ku] * sys.units[ku];
        ObjectiveResidual o;
        o.name = sys.names[ku];
        o.achieved = (sys.A.row(k) * x)(0) / scale;
        o.target = sys.b(k) / scale;
        o.residual = o.achieved - o.target;
        rep.residuals.push_back(o);
    }
    // Projected gradient of the objective in the group variables.
    const Eigen::VectorXd grad = 2.0 * (AT.transpose() * (AT * u - sys.b) + c.ridge * u);
    double pg = 0.0;
    for (Eigen::Index k = 0; k < grad.size(); ++k) {
        const bool up = u(k) >= ub(k) * (1.0 - 1e-12);
        const bool lo = u(k) <= -ub(k) * (1.0 - 1e-12);
        double gk = grad(k);
        if ((up && gk < 0.0) || (lo && gk > 0.0)) gk = 0.0;
        pg = std::max(pg, std::abs(gk));
    }
    rep.projected_gradient_norm = pg;
    for (Eigen::Index i = 0; i < n; ++i)
        if (c.v_max > 0.0 && std::abs(x(i)) >= c.v_max * (1.0 - 1e-12))
            rep.at_bound.push_back(mm.electrodes[static_cast<std::size_t>(i)]);

    if (rep.weighted_residual_norm > c.residual_threshold) {
        std::ostringstream msg;
        msg << "targets unreachable:";
        for (const auto& o : rep.residuals)
            msg << " " << o.name << " residual " << text::format_sig(o.residual, 6);
        throw InfeasibleError(msg.str());
    }
    return rep;
}

// Field (V/m) of the DC electrodes at a site.
inline std::array<double, 3> dc_field(const field::ElectrodeSystem& sys, const VoltageSet& v,
                                      const Point& site) {
    const auto s = field::assemble_field(sys, v, site);
    return s.field;
}

// Stray field cancelled by a compensation: -(E_compensated - E_baseline).
inline std::array<double, 3> compensation_to_field(const field::ElectrodeSystem& sys,
                                                   const VoltageSet& baseline,
                                                   const VoltageSet& compensated, const Point& site) {
    VoltageSet delta = compensated;
    for (const auto& [name, value] : baseline.volts) delta.volts[name] -= value;
    const auto e = dc_field(sys, delta, site);
    return {-e[0], -e[1], -e[2]};
}

inline std::array<double, 3> compensation_to_field(const TrapGeometry& g, const VoltageSet& baseline,
                                                   const VoltageSet& compensated, const Point& site,
                                                   field::FieldOptions opts = {}) {
    return compensation_to_field(field::ElectrodeSystem(g, opts), baseline, compensated, site);
}

struct MisalignmentOptions {
    RfDrive rf = RfDrive::from_mhz(183.0, 20.6);
    IonSpecies species = IonSpecies::ca40();
    Point seed{0.0, 0.0, 200e-6};
    double step = 1e-6;  // geometric finite-difference step, m
    field::FieldOptions field;
};

struct MisalignmentResult {
    double delta_e_y = 0.0;  // V/m
    double delta_e_z = 0.0;  // V/m
    Eigen::Vector3d null_shift_lateral = Eigen::Vector3d::Zero();     // m per m of top shift
    Eigen::Vector3d null_shift_separation = Eigen::Vector3d::Zero();  // m per m of separation
    Eigen::Matrix3d stiffness = Eigen::Matrix3d::Zero();              // V/m^2
};

// Fabrication tolerances -> compensation-field spread. The RF null is
// re-solved with the top wafer shifted laterally and with the plane
// separation changed. A null displacement dr is equivalent to the static
// field K dr that moves the ion by dr in the pseudopotential well, with K the
// pseudopotential Hessian per charge at the nominal null.
inline MisalignmentResult misalignment_field_uncertainty(const TrapGeometry& g, double lateral_sigma,
                                                         double separation_sigma,
                                                         MisalignmentOptions opt = {}) {
    if (lateral_sigma < 0.0 || separation_sigma < 0.0)
        throw ConfigError("misalignment sigmas must be non-negative");
    MisalignmentResult out;
    if (lateral_sigma == 0.0 && separation_sigma == 0.0) return out;

    auto make = [&](const TrapGeometry& geo) {
        return PotentialModel(std::make_shared<field::ElectrodeSystem>(geo, opt.field), VoltageSet{},
                              opt.rf, opt.species);
    };
    const PotentialModel base = make(g);
    const auto null0 = find_rf_null(base, opt.seed);
    const Jet hj = base.pseudopotential_jet(null0.position);
    for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k) out.stiffness(i, k) = hj.hess(i, k) / opt.species.charge;

    auto shift = [&](const TrapGeometry& geo) -> Eigen::Vector3d {
        const auto n = find_rf_null(make(geo), null0.position);
        return Eigen::Vector3d(n.position[0] - null0.position[0], n.position[1] - null0.position[1],
                               n.position[2] - null0.position[2]) /
               opt.step;
    };
    if (lateral_sigma > 0.0) {
        out.null_shift_lateral = shift(shift_top_plane(g, opt.step));
        out.delta_e_y = std::abs((out.stiffness * out.null_shift_lateral)(1)) * lateral_sigma;
    }
    if (separation_sigma > 0.0) {
        out.null_shift_separation = shift(with_plane_separation(g, g.plane_separation + opt.step));
        out.delta_e_z = std::abs((out.stiffness * out.null_shift_separation)(2)) * separation_sigma;
    }
    return out;
}

}  // namespace iontrap
