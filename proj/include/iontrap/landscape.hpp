#pragma once

// Abstract potential-energy landscape consumed by the trap-analysis routines:
// the geometry-backed PotentialModel and closed-form synthetic potentials.

#include <array>
#include <functional>
#include <utility>

#include "constants.hpp"
#include "jet.hpp"

namespace iontrap {

using Point = std::array<double, 3>;

class EnergyLandscape {
public:
    virtual ~EnergyLandscape() = default;

    // Potential energy of the ion (J).
    virtual double energy(const Point& p) const = 0;

    // Energy with gradient (N) and Hessian (N/m).
    virtual Jet energy_jet(const Point& p) const = 0;

    // Cheaper approximation used for grid scans; refined results always go
    // through energy()/energy_jet().
    virtual double scan_energy(const Point& p) const { return energy(p); }

    virtual double mass() const = 0;    // kg
    virtual double charge() const = 0;  // C
};

// Landscape from a closed-form expression in (x, y, z), written once for Jet.
class FunctionLandscape : public EnergyLandscape {
public:
    using Fn = std::function<Jet(const Jet&, const Jet&, const Jet&)>;

    FunctionLandscape(Fn fn, double mass = 1.0, double charge = constants::elementary_charge)
        : fn_(std::move(fn)), mass_(mass), charge_(charge) {}

    double energy(const Point& p) const override { return energy_jet(p).v; }
    Jet energy_jet(const Point& p) const override {
        return fn_(Jet::variable(p[0], 0), Jet::variable(p[1], 1), Jet::variable(p[2], 2));
    }
    double mass() const override { return mass_; }
    double charge() const override { return charge_; }

private:
    Fn fn_;
    double mass_;
    double charge_;
};

}  // namespace iontrap
