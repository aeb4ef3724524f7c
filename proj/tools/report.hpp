#pragma once

// JSON views of library results for the command-line reports.

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include <iontrap/analysis.hpp>
#include <iontrap/depth.hpp>
#include <iontrap/measurement.hpp>
#include <iontrap/simulate.hpp>
#include <iontrap/solver.hpp>

namespace iontrap::report {

using json = nlohmann::ordered_json;

inline constexpr int schema_version = 1;

// NaN / inf become null.
inline json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json um(const Point& p) { return json::array({p[0] / 1e-6, p[1] / 1e-6, p[2] / 1e-6}); }

inline json vec(const Eigen::VectorXd& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(num(v(i)));
    return a;
}

template <std::size_t N>
inline json arr(const std::array<double, N>& v) {
    json a = json::array();
    for (double x : v) a.push_back(num(x));
    return a;
}

inline json mat(const Eigen::MatrixXd& m) {
    json a = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) a.push_back(vec(m.row(i).transpose()));
    return a;
}

inline json value_error(double v, double e) { return json{{"value", num(v)}, {"error", num(e)}}; }

inline json envelope(const std::string& command, bool compare_mode, const std::string& timestamp) {
    json j;
    j["schema_version"] = schema_version;
    j["command"] = command;
    json meta;
    meta["tool"] = "iontrap";
    if (!compare_mode) meta["timestamp"] = timestamp;
    j["metadata"] = meta;
    return j;
}

inline json depth_json(const DepthResult& d) {
    json j;
    j["depth_ev"] = num(d.depth);
    j["saddle_um"] = um(d.saddle_point);
    j["escape_direction"] = vec(d.escape_direction);
    j["diagnostic"] = d.diagnostic;
    j["evaluations"] = d.evaluations;
    json routes = json::array();
    for (const auto& r : d.routes)
        routes.push_back({{"face", to_string(r.face)},
                          {"depth_ev", num(r.depth_ev)},
                          {"grid_level_ev", num(r.grid_level_ev)},
                          {"saddle_um", um(r.saddle_point)},
                          {"refined", r.refined}});
    j["routes"] = routes;
    return j;
}

inline json modes_json(const ModeSolution& m) {
    json modes = json::array();
    for (int a = 0; a < 3; ++a)
        modes.push_back({{"label", to_string(m.labels[static_cast<std::size_t>(a)])},
                         {"frequency_mhz", num(m.frequencies[static_cast<std::size_t>(a)] / 1e6)},
                         {"vector", vec(m.vectors[static_cast<std::size_t>(a)])},
                         {"phi_deg", num(m.phi[static_cast<std::size_t>(a)])}});
    return modes;
}

inline json simulation_json(const SimulationResult& r) {
    json j;
    j["rf_null"] = {{"position_um", um(r.rf_null.position)},
                    {"residual_field_v_per_m", num(r.rf_null.field_magnitude)}};
    j["mathieu"] = {{"q", num(r.mathieu.q)},
                    {"q_radial", arr(r.mathieu.q_radial)},
                    {"stable", r.mathieu.stable}};
    j["minimum_um"] = um(r.minimum);
    j["modes"] = modes_json(r.modes);
    j["theta_deg"] = num(r.modes.theta);
    j["anharmonicity"] = {{"x", num(r.anharmonicity[0])},
                          {"y", num(r.anharmonicity[1])},
                          {"z", num(r.anharmonicity[2])}};
    j["depth"] = r.depth ? depth_json(*r.depth) : json(nullptr);
    if (r.y_barrier)
        j["y_barrier"] = {{"barrier_ev", num(r.y_barrier->barrier_ev)},
                          {"distance_um", num(r.y_barrier->distance / 1e-6)},
                          {"position_um", um(r.y_barrier->position)}};
    else
        j["y_barrier"] = nullptr;
    json eff;
    eff["effective"] = r.eta_effective ? num(*r.eta_effective) : json(nullptr);
    eff["intrinsic"] = r.eta_intrinsic ? num(*r.eta_intrinsic) : json(nullptr);
    eff["intrinsic_depth_ev"] = r.intrinsic_depth ? num(r.intrinsic_depth->depth) : json(nullptr);
    eff["intrinsic_diagnostic"] = r.intrinsic_depth ? json(r.intrinsic_depth->diagnostic) : json(nullptr);
    j["efficiency"] = eff;
    return j;
}

inline json voltages_json(const VoltageSet& v) {
    json j = json::object();
    for (const auto& [name, value] : v.volts) j[name] = num(value);
    return j;
}

inline json solve_json(const SolveReport& r) {
    json j;
    j["voltages"] = voltages_json(r.voltages);
    json res = json::array();
    for (const auto& o : r.residuals)
        res.push_back({{"objective", o.name},
                       {"target", num(o.target)},
                       {"achieved", num(o.achieved)},
                       {"residual", num(o.residual)}});
    j["residuals"] = res;
    j["weighted_residual_norm_v"] = num(r.weighted_residual_norm);
    j["projected_gradient_norm"] = num(r.projected_gradient_norm);
    j["at_bound"] = r.at_bound;
    j["iterations"] = r.iterations;
    return j;
}

// Layout mirrors the published table: four densities and three offsets.
inline json stray_fit_json(const StrayFieldFit& f) {
    json j;
    j["label"] = f.label;
    json dens;
    for (int i = 0; i < 4; ++i)
        dens[spacer_ids[static_cast<std::size_t>(i)]] =
            value_error(f.sigma[static_cast<std::size_t>(i)], f.sigma_err[static_cast<std::size_t>(i)]);
    j["charge_densities_e_per_um2"] = dens;
    json off;
    for (int k = 0; k < 3; ++k)
        off[stray_parameter_names[static_cast<std::size_t>(4 + k)]] =
            value_error(f.offset[static_cast<std::size_t>(k)], f.offset_err[static_cast<std::size_t>(k)]);
    j["offset_fields_v_per_m"] = off;
    j["residual_norm_v_per_m"] = num(f.residual_norm);
    j["residual_rms_v_per_m"] = arr(f.residual_rms);
    j["chi2"] = num(f.chi2);
    j["n_obs"] = f.n_obs;
    j["weighted"] = f.weighted;
    j["covariance"] = mat(f.covariance);
    j["warnings"] = f.warnings;
    return j;
}

inline json power_law_json(const PowerLawFit& f) {
    json j;
    j["variable"] = to_string(f.variable);
    j["amplitude"] = value_error(f.amplitude, f.amplitude_err);
    j["exponent"] = value_error(f.exponent, f.exponent_err);
    j[f.variable == PowerLawVariable::frequency ? "alpha_prime" : "beta_prime"] =
        value_error(f.derived_exponent, f.exponent_err);
    j["covariance_ln_amplitude_exponent"] = mat(f.covariance);
    j["n_used"] = f.n_used;
    j["weighted"] = f.weighted;
    j["excluded_rows"] = f.excluded;
    j["warnings"] = f.warnings;
    return j;
}

inline json stats_json(const RepeatedStats& s) {
    return {{"n", s.n},
            {"mean", num(s.mean)},
            {"stddev", num(s.stddev)},
            {"mean_uncertainty", num(s.mean_uncertainty)}};
}

inline json angle_json(const AngleFit& f) {
    json j;
    j["gamma_min"] = value_error(f.gamma_min, f.gamma_min_err);
    j["gamma_max"] = value_error(f.gamma_max, f.gamma_max_err);
    j["ratio"] = value_error(f.ratio, f.ratio_err);
    j["n_used"] = f.n_used;
    j["warnings"] = f.warnings;
    return j;
}

}  // namespace iontrap::report
