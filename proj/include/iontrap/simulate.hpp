#pragma once

// End-to-end trap characterization for one operating point: RF null and q,
// equilibrium, secular modes, anharmonicity, depth, lateral barrier and
// trap efficiencies.

#include <array>
#include <cmath>
#include <memory>
#include <optional>
#include <string>

#include "analysis.hpp"
#include "depth.hpp"
#include "field/electrostatics.hpp"
#include "geometry.hpp"
#include "pseudo.hpp"
#include "voltage_set.hpp"

namespace iontrap {

struct SimulationOptions {
    VoltageSet dc;
    RfDrive rf = RfDrive::from_mhz(183.0, 20.6);
    IonSpecies species = IonSpecies::ca40();
    StrayField stray;
    field::FieldOptions field;
    DepthOptions depth;
    Point seed{0.0, 0.0, 200e-6};
    std::array<double, 3> anharmonic_offsets{100e-6, 50e-6, 50e-6};
    double barrier_step = 6e-6;
    bool compute_depth = true;
    bool compute_barrier = true;
    bool compute_intrinsic = true;  // RF-only radial depth with all DC grounded
};

struct SimulationResult {
    RfNull rf_null;
    MathieuResult mathieu;
    Point minimum{};
    ModeSolution modes;
    std::array<double, 3> anharmonicity{};
    std::optional<DepthResult> depth;
    std::optional<DirectionalBarrier> y_barrier;
    std::optional<DepthResult> intrinsic_depth;
    std::optional<double> eta_effective;
    std::optional<double> eta_intrinsic;
};

inline SimulationResult simulate(const TrapGeometry& g, const SimulationOptions& opt) {
    auto sys = std::make_shared<const field::ElectrodeSystem>(g, opt.field);
    const PotentialModel model(sys, opt.dc, opt.rf, opt.species, opt.stray);
    SimulationResult r;
    r.rf_null = find_rf_null(model, opt.seed);
    r.mathieu = mathieu_q(model, r.rf_null.position);
    r.minimum = find_minimum(model, r.rf_null.position);
    r.modes = mode_solve(model, r.minimum);
    r.anharmonicity = anharmonicity_ratios(model, r.minimum, opt.anharmonic_offsets);
    const Box box = default_search_box(g);
    if (opt.compute_depth) {
        r.depth = trap_depth(model, r.minimum, box, opt.depth);
        if (r.mathieu.q > 0.0 && opt.rf.v_rf > 0.0)
            r.eta_effective = trap_efficiency(r.depth->depth, r.mathieu.q, opt.rf.v_rf);
    }
    if (opt.compute_barrier)
        r.y_barrier = directional_barrier(model, r.minimum, 1, box, opt.barrier_step);
    if (opt.compute_intrinsic && opt.rf.v_rf > 0.0) {
        const PotentialModel rf_only(sys, VoltageSet{}, opt.rf, opt.species);
        DepthOptions d = opt.depth;
        d.radial_only = true;
        r.intrinsic_depth = trap_depth(rf_only, r.rf_null.position, box, d);
        r.eta_intrinsic = trap_efficiency(r.intrinsic_depth->depth, r.mathieu.q, opt.rf.v_rf);
    }
    return r;
}

}  // namespace iontrap
