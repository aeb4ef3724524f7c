// iontrap: simulate, design and characterize two-plane segmented ion traps.
//
// Exit codes: 0 success, 2 input/configuration error, 3 numerical failure.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "report.hpp"

#include <iontrap/geometry_io.hpp>
#include <iontrap/measurement.hpp>
#include <iontrap/simulate.hpp>
#include <iontrap/solver.hpp>

namespace fs = std::filesystem;
using namespace iontrap;
using report::json;

namespace {

struct Common {
    std::string geometry = "preset";
    std::string voltages = "1eV";
    double rf_volts = -1.0;  // < 0: preset amplitude for the voltage set (183 V otherwise)
    double rf_mhz = 20.6;
    std::string species = "ca40";
    double grid_um = 12.0;
    std::string out;
    std::uint64_t seed = 1;
    bool compare = false;
};

void add_common(CLI::App* c, Common& o, bool voltages = true) {
    c->add_option("--geometry", o.geometry, "'preset' or a geometry config path");
    if (voltages) c->add_option("--voltages", o.voltages, "1eV, 0.2eV, zero, or a voltage-set path");
    c->add_option("--rf-volts", o.rf_volts, "RF amplitude (V)");
    c->add_option("--rf-mhz", o.rf_mhz, "RF frequency (MHz)");
    c->add_option("--species", o.species, "ion species (ca40)");
    c->add_option("--grid-um", o.grid_um, "depth-search grid spacing (um)");
    c->add_option("--out", o.out, "output directory (report printed to stdout when absent)");
    c->add_option("--seed", o.seed, "random seed");
    c->add_flag("--compare-mode", o.compare, "omit run timestamps for byte-identical output");
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot read '" + path + "'");
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void write_file(const fs::path& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write '" + path.string() + "'");
    out << body;
}

std::string timestamp() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

TrapGeometry load_geometry_source(const std::string& src) {
    if (src == "preset") return build_reference_preset();
    return load_geometry(read_file(src));
}

bool is_preset_set(const std::string& s) { return s == "1eV" || s == "0.2eV"; }

VoltageSet load_voltages(const std::string& src, const TrapGeometry& g) {
    VoltageSet v;
    if (is_preset_set(src))
        v = preset_voltages(src);
    else if (src != "zero")
        v = parse_voltage_set(read_file(src));
    validate(v, g);
    return v;
}

RfDrive rf_drive(const Common& o) {
    double volts = o.rf_volts;
    if (volts < 0.0) volts = is_preset_set(o.voltages) ? preset_rf_volts(o.voltages) : 183.0;
    RfDrive rf = RfDrive::from_mhz(volts, o.rf_mhz);
    rf.validate();
    return rf;
}

// Writes `name` into the output directory, or the JSON report to stdout.
struct Output {
    const Common& o;

    bool to_dir() const { return !o.out.empty(); }

    void prepare() const {
        if (!to_dir()) return;
        std::error_code ec;
        fs::create_directories(o.out, ec);
        if (ec || !fs::is_directory(o.out)) throw InputError("cannot create output directory '" + o.out + "'");
    }
    void file(const std::string& name, const std::string& body) const {
        if (to_dir()) write_file(fs::path(o.out) / name, body);
    }
    void report(const std::string& name, const json& j) const {
        const std::string body = j.dump(2) + "\n";
        if (to_dir())
            write_file(fs::path(o.out) / name, body);
        else
            std::cout << body;
    }
};

std::vector<double> parse_list(const std::string& s, std::size_t n, const std::string& what, int line) {
    std::vector<double> out;
    std::stringstream in(s);
    std::string item;
    while (std::getline(in, item, ',')) {
        double v = 0.0;
        if (!text::parse_double(item, v)) throw ParseError("malformed number in '" + what + "'", line);
        out.push_back(v);
    }
    if (n && out.size() != n)
        throw ParseError("'" + what + "' needs " + std::to_string(n) + " values", line);
    return out;
}

std::map<std::string, double> parse_mode_map(const std::vector<std::string>& items, const std::string& flag) {
    std::map<std::string, double> out;
    for (const auto& it : items) {
        const auto eq = it.rfind('=');
        double v = 0.0;
        if (eq == std::string::npos || !text::parse_double(it.substr(eq + 1), v))
            throw ConfigError(flag + " expects mode=value, got '" + it + "'");
        out[std::string(text::trim(it.substr(0, eq)))] = v;
    }
    return out;
}

// ---- simulate -------------------------------------------------------------

struct SimulateArgs {
    bool no_depth = false;
    bool no_barrier = false;
    bool no_intrinsic = false;
};

std::string slice_csv(const PotentialModel& m, const Point& r0, bool axial) {
    std::ostringstream os;
    os << (axial ? "x_um" : "y_um") << ",z_um,energy_ev\n";
    const double e0 = m.energy(r0);
    const double d = m.geometry().plane_separation;
    const int nu = 61;
    const double half = axial ? 600e-6 : 300e-6;
    const int nz = 37;
    for (int i = 0; i < nu; ++i) {
        const double u = -half + 2.0 * half * i / (nu - 1);
        for (int k = 0; k < nz; ++k) {
            const double z = 0.05 * d + 0.9 * d * k / (nz - 1);
            Point p = r0;
            p[axial ? 0 : 1] = u;
            p[2] = z;
            double e = 0.0;
            try {
                e = joule_to_ev(m.energy(p) - e0);
            } catch (const BoundaryEvaluationError&) {
                e = std::numeric_limits<double>::quiet_NaN();
            }
            os << text::format_sig(u / 1e-6, 8) << ',' << text::format_sig(z / 1e-6, 8) << ','
               << (std::isfinite(e) ? text::format_sig(e, 10) : "") << '\n';
        }
    }
    return os.str();
}

int cmd_simulate(const Common& o, const SimulateArgs& a) {
    const auto g = load_geometry_source(o.geometry);
    SimulationOptions opt;
    opt.dc = load_voltages(o.voltages, g);
    opt.rf = rf_drive(o);
    opt.species = species_by_name(o.species);
    if (!(o.grid_um > 0.0)) throw ConfigError("--grid-um must be positive");
    opt.depth.inner_spacing = opt.depth.outer_spacing = o.grid_um * 1e-6;
    opt.compute_depth = !a.no_depth;
    opt.compute_barrier = !a.no_barrier;
    opt.compute_intrinsic = !a.no_intrinsic;
    Output out{o};
    out.prepare();
    const auto r = simulate(g, opt);

    json j = report::envelope("simulate", o.compare, timestamp());
    j["inputs"] = {{"geometry", o.geometry},
                   {"voltages", report::voltages_json(opt.dc)},
                   {"rf_volts", opt.rf.v_rf},
                   {"rf_mhz", o.rf_mhz},
                   {"species", opt.species.name},
                   {"grid_um", o.grid_um}};
    j["results"] = report::simulation_json(r);

    if (out.to_dir()) {
        auto sys = std::make_shared<const field::ElectrodeSystem>(g, opt.field);
        const PotentialModel m(sys, opt.dc, opt.rf, opt.species);
        out.file("slice_radial.csv", slice_csv(m, r.minimum, false));
        out.file("slice_axial.csv", slice_csv(m, r.minimum, true));
        if (r.depth) {
            std::ostringstream bp;
            bp << "path_um,energy_ev\n";
            for (const auto& [s, e] : r.depth->barrier_profile)
                bp << text::format_sig(s / 1e-6, 8) << ',' << text::format_sig(e, 10) << '\n';
            out.file("barrier_profile.csv", bp.str());
        }
    }
    out.report("simulate.json", j);
    return 0;
}

// Secular frequencies against RF amplitude (plot-ready).
int cmd_sweep(const Common& o, double v_start, double v_stop, int points) {
    const auto g = load_geometry_source(o.geometry);
    const auto dc = load_voltages(o.voltages, g);
    const auto sp = species_by_name(o.species);
    if (points < 2) throw ConfigError("--points must be at least 2");
    auto sys = std::make_shared<const field::ElectrodeSystem>(g);
    Output out{o};
    out.prepare();
    std::ostringstream csv;
    csv << "rf_volts,f_axial_mhz,f_in_plane_mhz,f_out_of_plane_mhz,theta_deg,min_z_um\n";
    json rows = json::array();
    Point seed{0.0, 0.0, 0.5 * g.plane_separation};
    for (int i = 0; i < points; ++i) {
        const double v = v_start + (v_stop - v_start) * i / (points - 1);
        Common oc = o;
        oc.rf_volts = v;
        const PotentialModel m(sys, dc, rf_drive(oc), sp);
        RfNull null;
        Point r0{};
        ModeSolution modes;
        try {
            null = find_rf_null(m, seed);
            r0 = find_minimum(m, null.position);
            modes = mode_solve(m, r0);
        } catch (const NumericalError& e) {
            // amplitudes outside the trapping range stay in the table as gaps
            csv << text::format_sig(v, 10) << ",,,,,\n";
            rows.push_back({{"rf_volts", v}, {"error", e.what()}});
            continue;
        }
        csv << text::format_sig(v, 10);
        for (double f : modes.frequencies) csv << ',' << text::format_sig(f / 1e6, 10);
        csv << ',' << text::format_sig(modes.theta, 10) << ',' << text::format_sig(r0[2] / 1e-6, 10) << '\n';
        rows.push_back({{"rf_volts", v},
                        {"frequencies_mhz", json::array({modes.frequencies[0] / 1e6, modes.frequencies[1] / 1e6,
                                                         modes.frequencies[2] / 1e6})},
                        {"theta_deg", modes.theta},
                        {"minimum_um", report::um(r0)}});
        seed = null.position;
    }
    out.file("sweep_rf.csv", csv.str());
    json j = report::envelope("sweep", o.compare, timestamp());
    j["inputs"] = {{"geometry", o.geometry}, {"voltages", o.voltages}, {"rf_mhz", o.rf_mhz}};
    j["results"] = rows;
    out.report("sweep.json", j);
    return 0;
}

// ---- solve ----------------------------------------------------------------

struct SolveRequest {
    PotentialTargets targets;
    SolveConstraints constraints;
    std::optional<double> axial_mhz;
    bool have_site = false;
};

// Targets file: `key = value` lines, '#' comments. Keys: site_um,
// field_v_per_m, axial_curvature_v_per_m2 | axial_mhz, rotation_deg,
// weight_field, weight_axial, weight_rotation, v_max, ridge,
// residual_threshold, tie (repeatable, comma-separated electrode names).
SolveRequest parse_targets(const std::string& body) {
    SolveRequest r;
    std::istringstream in(body);
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const auto s = text::trim(text::strip_comment(raw));
        if (s.empty()) continue;
        const auto eq = s.find('=');
        if (eq == std::string_view::npos) throw ParseError("expected 'key = value'", line);
        const std::string key(text::trim(s.substr(0, eq)));
        const std::string val(text::trim(s.substr(eq + 1)));
        auto scalar = [&] { return parse_list(val, 1, key, line)[0]; };
        if (key == "site_um") {
            const auto v = parse_list(val, 3, key, line);
            r.targets.site = {v[0] * 1e-6, v[1] * 1e-6, v[2] * 1e-6};
            r.have_site = true;
        } else if (key == "field_v_per_m") {
            const auto v = parse_list(val, 3, key, line);
            r.targets.field_target = std::array<double, 3>{v[0], v[1], v[2]};
        } else if (key == "axial_curvature_v_per_m2") {
            r.targets.axial_curvature = scalar();
        } else if (key == "axial_mhz") {
            r.axial_mhz = scalar();
        } else if (key == "rotation_deg") {
            r.targets.rotation_theta_deg = scalar();
        } else if (key == "weight_field") {
            r.targets.weight_field = scalar();
        } else if (key == "weight_axial") {
            r.targets.weight_axial = scalar();
        } else if (key == "weight_rotation") {
            r.targets.weight_rotation = scalar();
        } else if (key == "v_max") {
            r.constraints.v_max = scalar();
        } else if (key == "ridge") {
            r.constraints.ridge = scalar();
        } else if (key == "residual_threshold") {
            r.constraints.residual_threshold = scalar();
        } else if (key == "tie") {
            std::vector<std::string> names;
            std::stringstream ss(val);
            std::string item;
            while (std::getline(ss, item, ',')) names.emplace_back(text::trim(item));
            r.constraints.tied.push_back(names);
        } else {
            throw ParseError("unknown key '" + key + "'", line);
        }
    }
    if (!r.have_site) throw ConfigError("targets file must give site_um");
    if (r.axial_mhz && r.targets.axial_curvature)
        throw ConfigError("give either axial_mhz or axial_curvature_v_per_m2, not both");
    return r;
}

int cmd_solve(const Common& o, const std::string& targets_path) {
    const auto g = load_geometry_source(o.geometry);
    auto req = parse_targets(read_file(targets_path));
    const auto rf = rf_drive(o);
    const auto sp = species_by_name(o.species);
    auto sys = std::make_shared<const field::ElectrodeSystem>(g);
    Output out{o};
    out.prepare();
    // RF curvature (pseudopotential Hessian per charge) at the site enters the
    // rotation and frequency targets.
    const PotentialModel rf_only(sys, VoltageSet{}, rf, sp);
    const Jet pj = rf_only.pseudopotential_jet(req.targets.site);
    for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k) req.targets.rf_curvature(i, k) = pj.hess(i, k) / sp.charge;
    if (req.axial_mhz)
        req.targets.axial_curvature =
            PotentialTargets::curvature_for_frequency(*req.axial_mhz * 1e6, sp) - req.targets.rf_curvature(0, 0);
    const auto mm = build_moment_matrix(*sys, req.targets.site);
    const auto rep = solve_voltages(mm, req.targets, req.constraints);

    json j = report::envelope("solve", o.compare, timestamp());
    j["inputs"] = {{"geometry", o.geometry},
                   {"targets", targets_path},
                   {"site_um", report::um(req.targets.site)},
                   {"rf_volts", rf.v_rf},
                   {"rf_mhz", o.rf_mhz},
                   {"v_max", req.constraints.v_max},
                   {"ridge", req.constraints.ridge},
                   {"tied", req.constraints.tied}};
    j["results"] = report::solve_json(rep);
    out.file("voltages.txt", serialize_voltage_set(rep.voltages));
    out.report("solve.json", j);
    return 0;
}

int cmd_compensate(const Common& o, const std::string& baseline, const std::string& compensated,
                   const std::vector<double>& site_um) {
    const auto g = load_geometry_source(o.geometry);
    const auto vb = load_voltages(baseline, g);
    const auto vc = load_voltages(compensated, g);
    if (site_um.size() != 3) throw ConfigError("--site-um needs 3 values");
    const Point site{site_um[0] * 1e-6, site_um[1] * 1e-6, site_um[2] * 1e-6};
    const auto e = compensation_to_field(g, vb, vc, site);
    Output out{o};
    out.prepare();
    json j = report::envelope("compensate", o.compare, timestamp());
    j["inputs"] = {{"geometry", o.geometry}, {"baseline", baseline}, {"compensated", compensated},
                   {"site_um", report::um(site)}};
    j["results"] = {{"stray_field_v_per_m", report::arr(e)}};
    out.report("compensate.json", j);
    return 0;
}

int cmd_misalignment(const Common& o, double lateral_um, double separation_um) {
    const auto g = load_geometry_source(o.geometry);
    MisalignmentOptions opt;
    opt.rf = rf_drive(o);
    opt.species = species_by_name(o.species);
    opt.seed = {0.0, 0.0, 0.5 * g.plane_separation};
    const auto r = misalignment_field_uncertainty(g, lateral_um * 1e-6, separation_um * 1e-6, opt);
    Output out{o};
    out.prepare();
    json j = report::envelope("misalignment", o.compare, timestamp());
    j["inputs"] = {{"geometry", o.geometry}, {"lateral_sigma_um", lateral_um},
                   {"separation_sigma_um", separation_um}, {"rf_volts", opt.rf.v_rf}, {"rf_mhz", o.rf_mhz}};
    j["results"] = {{"delta_e_y_v_per_m", report::num(r.delta_e_y)},
                    {"delta_e_z_v_per_m", report::num(r.delta_e_z)},
                    {"null_shift_per_lateral_shift", report::vec(r.null_shift_lateral)},
                    {"null_shift_per_separation_change", report::vec(r.null_shift_separation)},
                    {"stiffness_v_per_m2", report::mat(r.stiffness)}};
    out.report("misalignment.json", j);
    return 0;
}

// ---- fit-stray ------------------------------------------------------------

int cmd_fit_stray(const Common& o, const std::string& data_path, double z_ion_um, const std::string& label) {
    const auto g = load_geometry_source(o.geometry);
    const auto data = read_stray_csv(read_file(data_path), label);
    std::optional<double> z;
    if (z_ion_um >= 0.0) z = z_ion_um * 1e-6;
    const auto fit = fit_stray_field(data, g, z);
    Output out{o};
    out.prepare();
    json j = report::envelope("fit-stray", o.compare, timestamp());
    j["inputs"] = {{"geometry", o.geometry},
                   {"data", data_path},
                   {"rows", data.rows.size()},
                   {"z_ion_um", z.value_or(default_ion_height(g)) / 1e-6}};
    j["results"] = report::stray_fit_json(fit);
    if (out.to_dir()) {
        std::vector<double> xs;
        for (const auto& r : data.rows) xs.push_back(r.x);
        const auto model = spacer_field_profile(g, fit.sigma, fit.offset, xs, z);
        std::ostringstream csv;
        csv << "x_m,Ex,Ey,Ez,model_Ex,model_Ey,model_Ez\n";
        for (std::size_t i = 0; i < xs.size(); ++i) {
            csv << csv::cell(xs[i]);
            for (double e : data.rows[i].e) csv << ',' << csv::cell(e);
            for (double e : model[i]) csv << ',' << csv::cell(e);
            csv << '\n';
        }
        out.file("stray_profile.csv", csv.str());
    }
    out.report("fit_stray.json", j);
    return 0;
}

// ---- heating --------------------------------------------------------------

struct HeatingArgs {
    std::vector<std::string> f_norm, alpha, beta;
    double t_norm = -1.0;
};

int cmd_heating(const Common& o, const std::string& data_path, const HeatingArgs& a) {
    const auto sp = species_by_name(o.species);
    const auto data = read_heating_csv(read_file(data_path));
    if (data.rows.empty()) throw InsufficientDataError("heating data: no rows");
    Output out{o};
    out.prepare();
    json warnings = json::array();

    json rows = json::array();
    for (const auto& r : data.rows) {
        const double se = spectral_density(r.rate, r.freq_hz, sp);
        const double se_err = given(r.rate_err) ? spectral_density(r.rate_err, r.freq_hz, sp) : not_given;
        rows.push_back({{"mode", r.mode},
                        {"freq_hz", r.freq_hz},
                        {"rate_phonons_s", r.rate},
                        {"spectral_density", report::num(se)},
                        {"spectral_density_err", report::num(se_err)},
                        {"excluded_from_fit", !(r.rate > 0.0)}});
    }

    std::vector<std::string> modes;
    for (const auto& r : data.rows)
        if (std::find(modes.begin(), modes.end(), r.mode) == modes.end()) modes.push_back(r.mode);

    json per_mode = json::object();
    std::map<std::string, double> fitted_alpha, fitted_beta;
    std::ostringstream curves;
    curves << "mode,variable,x,model_rate\n";
    for (const auto& mode : modes) {
        std::vector<HeatingRow> mr;
        for (const auto& r : data.rows)
            if (r.mode == mode) mr.push_back(r);
        json mj;
        std::vector<double> vals, errs;
        bool all_err = true;
        for (const auto& r : mr) {
            vals.push_back(r.rate);
            errs.push_back(r.rate_err);
            all_err = all_err && given(r.rate_err);
        }
        if (!all_err) errs.clear();
        try {
            mj["statistics"] = report::stats_json(repeated_measurement_stats(vals, errs));
        } catch (const InsufficientDataError& e) {
            mj["statistics"] = {{"error", e.what()}};
            warnings.push_back(mode + ": statistics unavailable: " + e.what());
        }
        auto try_fit = [&](PowerLawVariable var, const char* key, std::map<std::string, double>& store) {
            std::set<double> xs;
            for (const auto& r : mr) {
                const double x = var == PowerLawVariable::frequency ? r.freq_hz : r.temp_k;
                if (!given(x)) return;
                xs.insert(x);
            }
            if (xs.size() < 2) return;
            try {
                const auto f = fit_power_law(mr, var);
                mj[key] = report::power_law_json(f);
                store[mode] = f.exponent;
                for (int i = 0; i <= 20; ++i) {
                    const double x = *xs.begin() * std::pow(*xs.rbegin() / *xs.begin(), i / 20.0);
                    curves << mode << ',' << to_string(var) << ',' << csv::cell(x) << ','
                           << csv::cell(f.predict(x)) << '\n';
                }
            } catch (const Error& e) {
                mj[key] = {{"error", e.what()}};
                warnings.push_back(mode + ": " + key + " fit skipped: " + e.what());
            }
        };
        try_fit(PowerLawVariable::frequency, "frequency_power_law", fitted_alpha);
        try_fit(PowerLawVariable::temperature, "temperature_power_law", fitted_beta);
        if (std::any_of(mr.begin(), mr.end(), [](const HeatingRow& r) { return given(r.phi_deg); })) {
            try {
                const auto f = fit_angle_model(mr);
                mj["angle_model"] = report::angle_json(f);
                for (int i = 0; i <= 18; ++i)
                    curves << mode << ",phi_deg," << i * 5 << ',' << csv::cell(f.predict(i * 5.0)) << '\n';
            } catch (const Error& e) {
                mj["angle_model"] = {{"error", e.what()}};
                warnings.push_back(mode + ": angle fit skipped: " + e.what());
            }
        }
        per_mode[mode] = mj;
    }

    json norm = nullptr;
    std::vector<HeatingRow> current = data.rows;
    std::vector<double> factors(current.size(), 1.0);
    bool normalized = false;
    if (!a.f_norm.empty()) {
        auto alpha = parse_mode_map(a.alpha, "--alpha");
        for (const auto& [m, v] : fitted_alpha) alpha.emplace(m, v);
        const auto n = normalize_frequency(current, parse_mode_map(a.f_norm, "--f-norm"), alpha);
        current = n.rows;
        for (std::size_t i = 0; i < factors.size(); ++i) factors[i] *= n.factors[i];
        normalized = true;
    }
    if (a.t_norm > 0.0) {
        auto beta = parse_mode_map(a.beta, "--beta");
        for (const auto& [m, v] : fitted_beta) beta.emplace(m, v);
        const auto n = normalize_temperature(current, a.t_norm, beta);
        current = n.rows;
        for (std::size_t i = 0; i < factors.size(); ++i) factors[i] *= n.factors[i];
        normalized = true;
    }
    if (normalized) {
        norm = json::object();
        json nr = json::array();
        for (std::size_t i = 0; i < current.size(); ++i)
            nr.push_back({{"mode", current[i].mode},
                          {"factor", report::num(factors[i])},
                          {"rate_phonons_s", report::num(current[i].rate)},
                          {"rate_err", report::num(current[i].rate_err)}});
        norm["rows"] = nr;
        std::map<std::string, std::pair<double, int>> mean;
        for (std::size_t i = 0; i < current.size(); ++i) {
            mean[current[i].mode].first += factors[i];
            ++mean[current[i].mode].second;
        }
        json mf = json::object();
        for (const auto& m : modes) mf[m] = mean[m].first / mean[m].second;
        norm["mean_factor"] = mf;
        out.file("normalized.csv", write_heating_csv(current, data.has_timestamp, &factors));
    }
    out.file("curves.csv", curves.str());

    json j = report::envelope("heating", o.compare, timestamp());
    j["inputs"] = {{"data", data_path}, {"species", sp.name}, {"rows", data.rows.size()}};
    j["results"] = {{"rows", rows}, {"modes", per_mode}, {"normalization", norm}};
    j["warnings"] = warnings;
    for (const auto& w : warnings) std::cerr << "warning: " << w.get<std::string>() << '\n';
    out.report("heating.json", j);
    return 0;
}

// ---- presets / synthesize / monte-carlo -----------------------------------

int cmd_presets(const Common& o, const std::string& what) {
    if (what == "1eV" || what == "0.2eV") {
        std::cout << "# RF " << text::format_double(preset_rf_volts(what)) << " V at 20.6 MHz\n"
                  << serialize_voltage_set(preset_voltages(what));
    } else if (what == "geometry") {
        std::cout << serialize_geometry(build_reference_preset());
    } else if (what == "stray-fits") {
        json j = report::envelope("presets", o.compare, timestamp());
        json fits = json::array();
        for (const auto& f : published_stray_fits()) fits.push_back(report::stray_fit_json(f));
        j["results"] = fits;
        std::cout << j.dump(2) << '\n';
    } else if (what == "sequential-rates") {
        std::cout << write_heating_csv(sequential_rate_rows());
    } else {
        throw ConfigError("unknown preset '" + what +
                          "' (expected 1eV, 0.2eV, geometry, stray-fits, sequential-rates)");
    }
    return 0;
}

StrayFieldDataset synth_stray(const TrapGeometry& g, const std::array<double, 4>& sig,
                              const std::array<double, 3>& off, int points, double noise, std::mt19937_64& rng) {
    std::vector<double> xs;
    for (int i = 0; i < points; ++i) xs.push_back(-250e-6 + 500e-6 * i / (points - 1));
    const auto e = spacer_field_profile(g, sig, off, xs);
    std::normal_distribution<double> n(0.0, 1.0);
    StrayFieldDataset d;
    for (int i = 0; i < points; ++i) {
        StrayRow r;
        r.x = xs[static_cast<std::size_t>(i)];
        for (int k = 0; k < 3; ++k) {
            r.e[static_cast<std::size_t>(k)] = e[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
            if (noise > 0.0) {
                r.e[static_cast<std::size_t>(k)] += noise * n(rng);
                r.err[static_cast<std::size_t>(k)] = noise;
            }
        }
        d.rows.push_back(r);
    }
    return d;
}

struct SynthArgs {
    std::string kind = "stray";
    std::vector<double> sigmas{1380, 630, -2510, 320};
    std::vector<double> offset{1310, 210, -1500};
    int points = 21;
    double noise = 0.0;  // V/m (stray) or relative (heating)
    double amplitude = 7.0;
    double exponent = 2.5;
};

int cmd_synthesize(const Common& o, const SynthArgs& a) {
    std::mt19937_64 rng(o.seed);
    std::string body;
    if (a.kind == "stray") {
        if (a.sigmas.size() != 4 || a.offset.size() != 3) throw ConfigError("need 4 sigmas and 3 offsets");
        if (a.points < 3) throw ConfigError("--points must be at least 3");
        const auto g = load_geometry_source(o.geometry);
        body = write_stray_csv(synth_stray(g, {a.sigmas[0], a.sigmas[1], a.sigmas[2], a.sigmas[3]},
                                           {a.offset[0], a.offset[1], a.offset[2]}, a.points, a.noise, rng));
    } else if (a.kind == "heating") {
        if (a.points < 2) throw ConfigError("--points must be at least 2");
        std::normal_distribution<double> n(0.0, 1.0);
        std::vector<HeatingRow> rows;
        for (int i = 0; i < a.points; ++i) {
            HeatingRow r;
            r.mode = "axial";
            r.freq_hz = 0.5e6 * std::pow(4.0, static_cast<double>(i) / (a.points - 1));
            r.temp_k = 153.0;
            const double truth = a.amplitude * std::pow(r.freq_hz / 1e6, -a.exponent);
            r.rate = truth * (1.0 + a.noise * n(rng));
            if (a.noise > 0.0) r.rate_err = a.noise * truth;
            rows.push_back(r);
        }
        body = write_heating_csv(rows);
    } else {
        throw ConfigError("unknown dataset kind '" + a.kind + "' (expected stray or heating)");
    }
    if (o.out.empty()) {
        std::cout << body;
    } else {
        Output out{o};
        out.prepare();
        out.file(a.kind + ".csv", body);
    }
    return 0;
}

// Reported standard errors against the scatter of fitted parameters over
// seeded noise realizations.
int cmd_monte_carlo(const Common& o, int seeds, double noise) {
    if (seeds < 2) throw ConfigError("--seeds must be at least 2");
    if (!(noise > 0.0)) throw ConfigError("--noise must be positive");
    const auto g = load_geometry_source(o.geometry);
    const std::array<double, 4> sig{1380, 630, -2510, 320};
    const std::array<double, 3> off{1310, 210, -1500};
    std::array<std::vector<double>, 7> est;
    std::array<double, 7> err_sum{};
    for (int s = 0; s < seeds; ++s) {
        std::mt19937_64 rng(o.seed + static_cast<std::uint64_t>(s));
        const auto fit = fit_stray_field(synth_stray(g, sig, off, 21, noise, rng), g);
        for (int i = 0; i < 4; ++i) {
            est[static_cast<std::size_t>(i)].push_back(fit.sigma[static_cast<std::size_t>(i)]);
            err_sum[static_cast<std::size_t>(i)] += fit.sigma_err[static_cast<std::size_t>(i)];
        }
        for (int k = 0; k < 3; ++k) {
            est[static_cast<std::size_t>(4 + k)].push_back(fit.offset[static_cast<std::size_t>(k)]);
            err_sum[static_cast<std::size_t>(4 + k)] += fit.offset_err[static_cast<std::size_t>(k)];
        }
    }
    json params = json::array();
    for (std::size_t p = 0; p < 7; ++p) {
        const auto st = repeated_measurement_stats(est[p]);
        const double reported = err_sum[p] / seeds;
        params.push_back({{"parameter", stray_parameter_names[p]},
                          {"scatter", report::num(st.stddev)},
                          {"mean_reported_error", report::num(reported)},
                          {"ratio", report::num(reported / st.stddev)}});
    }
    Output out{o};
    out.prepare();
    json j = report::envelope("monte-carlo", o.compare, timestamp());
    j["inputs"] = {{"seeds", seeds}, {"seed", o.seed}, {"noise_v_per_m", noise}};
    j["results"] = params;
    out.report("monte_carlo.json", j);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Two-plane segmented ion trap toolkit"};
    app.require_subcommand(1);
    Common common;

    SimulateArgs sim_args;
    auto* sim = app.add_subcommand("simulate", "potential, modes, depth and efficiency report");
    add_common(sim, common);
    sim->add_flag("--no-depth", sim_args.no_depth, "skip the trap-depth search");
    sim->add_flag("--no-barrier", sim_args.no_barrier, "skip the y-barrier scan");
    sim->add_flag("--no-intrinsic", sim_args.no_intrinsic, "skip the RF-only efficiency");

    double sweep_start = 100, sweep_stop = 200;
    int sweep_points = 11;
    auto* sweep = app.add_subcommand("sweep", "secular frequencies against RF amplitude");
    add_common(sweep, common);
    sweep->add_option("--from", sweep_start, "first RF amplitude (V)");
    sweep->add_option("--to", sweep_stop, "last RF amplitude (V)");
    sweep->add_option("--points", sweep_points, "number of amplitudes");

    std::string targets;
    auto* solve = app.add_subcommand("solve", "solve a DC voltage set for potential targets");
    add_common(solve, common, false);
    solve->add_option("--targets", targets, "targets file")->required();

    std::string baseline, compensated;
    std::vector<double> site_um{0, 0, 200};
    auto* comp = app.add_subcommand("compensate", "stray field cancelled by a compensation");
    add_common(comp, common, false);
    comp->add_option("--baseline", baseline, "baseline voltage set")->required();
    comp->add_option("--compensated", compensated, "compensated voltage set")->required();
    comp->add_option("--site-um", site_um, "evaluation site (um)")->expected(3);

    double lateral_um = 2.5, separation_um = 3.0;
    auto* mis = app.add_subcommand("misalignment", "compensation-field spread from fabrication tolerances");
    add_common(mis, common, false);
    mis->add_option("--lateral-um", lateral_um, "top-wafer lateral alignment sigma (um)");
    mis->add_option("--separation-um", separation_um, "plane-separation sigma (um)");

    std::string data;
    double z_ion_um = -1.0;
    std::string label;
    auto* stray = app.add_subcommand("fit-stray", "fit spacer charge densities to stray-field data");
    add_common(stray, common, false);
    stray->add_option("--data", data, "stray-field CSV")->required();
    stray->add_option("--z-ion-um", z_ion_um, "ion height (um), default mid-plane");
    stray->add_option("--label", label, "dataset label");

    HeatingArgs heat_args;
    auto* heat = app.add_subcommand("heating", "heating-rate analysis");
    add_common(heat, common, false);
    heat->add_option("--data", data, "heating CSV")->required();
    heat->add_option("--f-norm", heat_args.f_norm, "mode=Hz normalization frequency (repeatable)");
    heat->add_option("--alpha", heat_args.alpha, "mode=alpha (default: fitted)");
    heat->add_option("--t-norm", heat_args.t_norm, "normalization temperature (K)");
    heat->add_option("--beta", heat_args.beta, "mode=beta (default: fitted)");

    std::string preset_what = "1eV";
    auto* presets = app.add_subcommand("presets", "print built-in voltage sets, geometry and fixtures");
    presets->add_option("what", preset_what, "1eV, 0.2eV, geometry, stray-fits, sequential-rates");
    presets->add_flag("--compare-mode", common.compare, "omit run timestamps");

    SynthArgs synth_args;
    auto* synth = app.add_subcommand("synthesize", "write a seeded synthetic dataset");
    add_common(synth, common, false);
    synth->add_option("kind", synth_args.kind, "stray or heating");
    synth->add_option("--sigmas", synth_args.sigmas, "four densities (e/um^2)")->expected(4);
    synth->add_option("--offset", synth_args.offset, "offset field (V/m)")->expected(3);
    synth->add_option("--points", synth_args.points, "number of rows");
    synth->add_option("--noise", synth_args.noise, "noise: V/m (stray) or relative (heating)");
    synth->add_option("--amplitude", synth_args.amplitude, "heating amplitude at 1 MHz");
    synth->add_option("--exponent", synth_args.exponent, "heating frequency exponent alpha");

    int mc_seeds = 200;
    double mc_noise = 20.0;
    auto* mc = app.add_subcommand("monte-carlo", "stray-fit error calibration over seeded noise");
    add_common(mc, common, false);
    mc->add_option("--seeds", mc_seeds, "number of noise realizations");
    mc->add_option("--noise", mc_noise, "per-component noise (V/m)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (sim->parsed()) return cmd_simulate(common, sim_args);
        if (sweep->parsed()) return cmd_sweep(common, sweep_start, sweep_stop, sweep_points);
        if (solve->parsed()) return cmd_solve(common, targets);
        if (comp->parsed()) return cmd_compensate(common, baseline, compensated, site_um);
        if (mis->parsed()) return cmd_misalignment(common, lateral_um, separation_um);
        if (stray->parsed()) return cmd_fit_stray(common, data, z_ion_um, label);
        if (heat->parsed()) return cmd_heating(common, data, heat_args);
        if (presets->parsed()) return cmd_presets(common, preset_what);
        if (synth->parsed()) return cmd_synthesize(common, synth_args);
        if (mc->parsed()) return cmd_monte_carlo(common, mc_seeds, mc_noise);
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
