#pragma once

// RF pseudopotential, total trapping potential and Mathieu stability
// quantities.
//
// The RF electrodes are driven at V_rf cos(Omega t); with phi_rf the unit RF
// basis the time-averaged energy of a charge Q is
//     psi = Q^2 V_rf^2 |grad phi_rf|^2 / (4 m Omega^2).
// The total energy adds Q times the DC potential and the stray potential
// (charged spacer facets plus a uniform offset field).

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "constants.hpp"
#include "errors.hpp"
#include "field/basis.hpp"
#include "field/charged_facet.hpp"
#include "field/electrostatics.hpp"
#include "field/paired.hpp"
#include "geometry.hpp"
#include "jet.hpp"
#include "landscape.hpp"
#include "voltage_set.hpp"

namespace iontrap {

struct RfDrive {
    double v_rf = 0.0;      // amplitude, V
    double omega_rf = 0.0;  // angular frequency, rad/s

    static RfDrive from_mhz(double volts, double mhz) {
        return {volts, 2.0 * constants::pi * mhz * constants::megahertz};
    }
    void validate() const {
        if (!(v_rf >= 0.0) || !std::isfinite(v_rf)) throw ConfigError("RF amplitude must be >= 0");
        if (!(omega_rf > 0.0) || !std::isfinite(omega_rf))
            throw ConfigError("RF frequency must be > 0");
    }
};

struct IonSpecies {
    std::string name;
    double mass = 0.0;    // kg
    double charge = 0.0;  // C

    static IonSpecies ca40() {
        return {"Ca40+", constants::calcium40_ion_mass, constants::elementary_charge};
    }
    void validate() const {
        if (!(mass > 0.0) || !(charge > 0.0)) throw ConfigError("species mass and charge must be > 0");
    }
};

inline IonSpecies species_by_name(const std::string& name) {
    if (name == "ca40" || name == "Ca40+" || name == "40Ca+") return IonSpecies::ca40();
    throw ConfigError("unknown species '" + name + "' (expected ca40)");
}

struct StrayCharge {
    SpacerFacet facet;
    double sigma = 0.0;  // e/um^2
};

struct StrayField {
    std::vector<StrayCharge> charges;
    std::array<double, 3> e_offset{};  // V/m

    template <class T>
    T potential(const T& x, const T& y, const T& z) const {
        T v = -(e_offset[0] * x + e_offset[1] * y + e_offset[2] * z);
        for (const auto& c : charges)
            if (c.sigma != 0.0) v += field::facet_potential(c.facet, c.sigma, x, y, z);
        return v;
    }
    bool empty() const {
        if (e_offset[0] != 0.0 || e_offset[1] != 0.0 || e_offset[2] != 0.0) return false;
        for (const auto& c : charges)
            if (c.sigma != 0.0) return false;
        return true;
    }
};

// Pseudopotential (J) as a Jet from the gradient of the unit RF basis given
// as Jets (value = d_i phi, with their gradients and Hessians).
inline Jet pseudopotential_from_gradient(const std::array<Jet, 3>& grad_phi, const RfDrive& rf,
                                         const IonSpecies& sp) {
    const double c = sp.charge * sp.charge * rf.v_rf * rf.v_rf /
                     (4.0 * sp.mass * rf.omega_rf * rf.omega_rf);
    Jet s = grad_phi[0] * grad_phi[0] + grad_phi[1] * grad_phi[1] + grad_phi[2] * grad_phi[2];
    return c * s;
}

class PotentialModel : public EnergyLandscape {
public:
    PotentialModel(std::shared_ptr<const field::ElectrodeSystem> system, VoltageSet dc,
                   RfDrive rf, IonSpecies species, StrayField stray = {}, int scan_image_order = 2)
        : system_(std::move(system)), dc_(std::move(dc)), rf_(rf), species_(std::move(species)),
          stray_(std::move(stray)) {
        rf_.validate();
        species_.validate();
        dc_sources_ = system_->dc_sources(dc_);
        rf_sources_ = system_->rf_sources();
        scan_ = field::PairedSources(dc_sources_, rf_sources_,
                                     std::min(scan_image_order, system_->options().image_order));
    }

    const field::ElectrodeSystem& system() const { return *system_; }
    std::shared_ptr<const field::ElectrodeSystem> system_ptr() const { return system_; }
    const TrapGeometry& geometry() const { return system_->geometry(); }
    const VoltageSet& dc() const { return dc_; }
    const RfDrive& rf() const { return rf_; }
    const IonSpecies& species() const { return species_; }
    const StrayField& stray() const { return stray_; }
    const field::BasisPotential& rf_basis() const { return rf_sources_; }
    const field::BasisPotential& dc_basis() const { return dc_sources_; }

    double mass() const override { return species_.mass; }
    double charge() const override { return species_.charge; }

    // Energy prefactor of |grad phi_rf|^2 (J m^2).
    double pseudo_coefficient() const {
        return species_.charge * species_.charge * rf_.v_rf * rf_.v_rf /
               (4.0 * species_.mass * rf_.omega_rf * rf_.omega_rf);
    }

    double dc_potential(const Point& p) const { return dc_sources_.value(p); }

    // RF field (V/m) at amplitude v_rf.
    std::array<double, 3> rf_field(const Point& p) const {
        const auto g = rf_sources_.gradient(p);
        return {-rf_.v_rf * g.d[0], -rf_.v_rf * g.d[1], -rf_.v_rf * g.d[2]};
    }

    double pseudopotential(const Point& p) const {
        const auto g = rf_sources_.gradient(p);
        return pseudo_coefficient() * (g.d[0] * g.d[0] + g.d[1] * g.d[1] + g.d[2] * g.d[2]);
    }

    Jet pseudopotential_jet(const Point& p) const {
        const auto g = rf_sources_.gradient_jet(p);
        return pseudopotential_from_gradient(g.d, rf_, species_);
    }

    double stray_potential(const Point& p) const {
        if (stray_.empty()) return 0.0;
        return stray_.potential(p[0], p[1], p[2]);
    }

    double energy(const Point& p) const override {
        return species_.charge * (dc_potential(p) + stray_potential(p)) + pseudopotential(p);
    }

    Jet energy_jet(const Point& p) const override {
        Jet v = dc_sources_.jet(p);
        if (!stray_.empty())
            v += stray_.potential(Jet::variable(p[0], 0), Jet::variable(p[1], 1),
                                  Jet::variable(p[2], 2));
        v *= species_.charge;
        if (rf_.v_rf != 0.0) v += pseudopotential_jet(p);
        return v;
    }

    double scan_energy(const Point& p) const override {
        const auto s = scan_.evaluate(p);
        const auto& g = s.rf_grad;
        return species_.charge * (s.dc + stray_potential(p)) +
               pseudo_coefficient() * (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]);
    }

private:
    std::shared_ptr<const field::ElectrodeSystem> system_;
    VoltageSet dc_;
    RfDrive rf_;
    IonSpecies species_;
    StrayField stray_;
    field::BasisPotential dc_sources_;
    field::BasisPotential rf_sources_;
    field::PairedSources scan_;
};

// Energies in J with gradient (N) and Hessian (N/m).
struct EnergySample {
    double energy = 0.0;
    std::array<double, 3> gradient{};
    std::array<std::array<double, 3>, 3> hessian{};
};

inline EnergySample to_sample(const Jet& j) {
    EnergySample s;
    s.energy = j.v;
    for (int i = 0; i < 3; ++i) {
        s.gradient[i] = j.g[i];
        for (int k = 0; k < 3; ++k) s.hessian[i][k] = j.hess(i, k);
    }
    return s;
}

inline EnergySample pseudopotential(const PotentialModel& m, const Point& p) {
    return to_sample(m.pseudopotential_jet(p));
}

inline EnergySample total_potential(const PotentialModel& m, const Point& p) {
    return to_sample(m.energy_jet(p));
}

inline constexpr double joule_to_ev(double j) { return j / constants::elementary_charge; }
inline constexpr double ev_to_joule(double ev) { return ev * constants::elementary_charge; }

// Second-derivative tensor of the unit RF potential (1/m^2, per volt).
struct QuadrupoleTensor {
    Eigen::Matrix3d t = Eigen::Matrix3d::Zero();

    double trace() const { return t.trace(); }
};

inline QuadrupoleTensor quadrupole_tensor(const PotentialModel& m, const Point& p) {
    const Jet j = m.rf_basis().jet(p);
    QuadrupoleTensor q;
    for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k) q.t(i, k) = j.hess(i, k);
    return q;
}

struct RfNull {
    Point position{};
    double field_magnitude = 0.0;  // |grad Phi_rf| at the result, V/m
    int iterations = 0;
};

// Damped Newton on grad phi_rf = 0 from a seed; converged when
// |grad Phi_rf| < tol (V/m, at amplitude v_rf or 1 V if v_rf == 0).
inline RfNull find_rf_null(const PotentialModel& m, const Point& seed, double tol = 1e-3,
                           int max_iter = 100) {
    const double amp = m.rf().v_rf > 0.0 ? m.rf().v_rf : 1.0;
    const auto& basis = m.rf_basis();
    Point r = seed;
    auto eval = [&](const Point& p, Eigen::Vector3d& g, Eigen::Matrix3d& H) {
        const Jet j = basis.jet(p);
        for (int i = 0; i < 3; ++i) {
            g(i) = j.g[i];
            for (int k = 0; k < 3; ++k) H(i, k) = j.hess(i, k);
        }
    };
    Eigen::Vector3d g;
    Eigen::Matrix3d H;
    eval(r, g, H);
    for (int it = 0; it < max_iter; ++it) {
        const double mag = amp * g.norm();
        if (mag < tol) return {r, mag, it};
        const Eigen::Vector3d step = H.colPivHouseholderQr().solve(-g);
        if (!step.allFinite()) throw ConvergenceError("RF null search: singular Hessian");
        double t = 1.0;
        bool accepted = false;
        for (int k = 0; k < 30; ++k) {
            Point trial{r[0] + t * step(0), r[1] + t * step(1), r[2] + t * step(2)};
            Eigen::Vector3d g2;
            Eigen::Matrix3d H2;
            try {
                eval(trial, g2, H2);
            } catch (const BoundaryEvaluationError&) {
                t *= 0.5;
                continue;
            }
            if (g2.norm() < g.norm()) {
                r = trial;
                g = g2;
                H = H2;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) {
            const double mag2 = amp * g.norm();
            if (mag2 < tol) return {r, mag2, it};
            throw ConvergenceError("RF null search stalled at |E_rf| = " + std::to_string(mag2) +
                                   " V/m");
        }
    }
    const double mag = amp * g.norm();
    if (mag < tol) return {r, mag, max_iter};
    throw ConvergenceError("RF null search did not converge");
}

struct MathieuResult {
    double q = 0.0;                   // largest radial |q|
    std::array<double, 2> q_radial{};  // per radial eigenaxis, descending
    bool stable = false;              // q < 0.9
    Eigen::Vector3d eigenvalues = Eigen::Vector3d::Zero();
    Eigen::Matrix3d axes = Eigen::Matrix3d::Identity();
};

inline MathieuResult mathieu_q_from_tensor(const QuadrupoleTensor& qt, const RfDrive& rf,
                                           const IonSpecies& sp) {
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(qt.t);
    MathieuResult r;
    r.eigenvalues = es.eigenvalues();
    r.axes = es.eigenvectors();
    std::array<double, 3> mags{std::abs(r.eigenvalues(0)), std::abs(r.eigenvalues(1)),
                               std::abs(r.eigenvalues(2))};
    std::sort(mags.begin(), mags.end(), std::greater<>());
    const double k = 2.0 * sp.charge * rf.v_rf / (sp.mass * rf.omega_rf * rf.omega_rf);
    r.q_radial = {k * mags[0], k * mags[1]};
    r.q = r.q_radial[0];
    r.stable = r.q < 0.9;
    return r;
}

// Requires `at` to be an RF null (|grad Phi_rf| < null_tol V/m).
inline MathieuResult mathieu_q(const PotentialModel& m, const Point& at, double null_tol = 1e-3) {
    const auto g = m.rf_basis().gradient(at);
    const double amp = m.rf().v_rf > 0.0 ? m.rf().v_rf : 1.0;
    const double mag = amp * std::sqrt(g.d[0] * g.d[0] + g.d[1] * g.d[1] + g.d[2] * g.d[2]);
    if (!(mag < null_tol))
        throw PreconditionError("point is not an RF null (|E_rf| = " + std::to_string(mag) +
                                " V/m)");
    return mathieu_q_from_tensor(quadrupole_tensor(m, at), m.rf(), m.species());
}

// eta = 4 D / (q V_rf), D in eV (numerically equal to volts per charge e).
inline double trap_efficiency(double depth_ev, double q, double v_rf) {
    if (!(q > 0.0) || !(v_rf > 0.0)) throw PreconditionError("trap efficiency needs q, V_rf > 0");
    return 4.0 * depth_ev / (q * v_rf);
}

}  // namespace iontrap
