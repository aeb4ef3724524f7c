#pragma once

// Heating-rate and stray-field data analysis: noise spectral density, power
// laws, normalization to a common frequency/temperature, repeated-measurement
// statistics, the mode-angle model and the spacer-charge stray-field fit.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "constants.hpp"
#include "errors.hpp"
#include "field/charged_facet.hpp"
#include "geometry.hpp"
#include "pseudo.hpp"
#include "text.hpp"

namespace iontrap {

inline constexpr double not_given = std::numeric_limits<double>::quiet_NaN();

inline bool given(double v) { return !std::isnan(v); }

// Electric-field noise spectral density (V^2 m^-2 Hz^-1) from a heating rate
// (phonons/s) at a secular frequency (Hz): S_E = 4 m hbar omega Gamma / Q^2.
inline double spectral_density(double rate, double frequency_hz,
                               const IonSpecies& sp = IonSpecies::ca40()) {
    if (!(frequency_hz > 0.0)) throw ConfigError("frequency must be positive");
    const double w = 2.0 * constants::pi * frequency_hz;
    return 4.0 * sp.mass * constants::hbar * w * rate / (sp.charge * sp.charge);
}

struct HeatingRow {
    std::string mode;
    double freq_hz = not_given;
    double rate = not_given;      // phonons/s
    double rate_err = not_given;  // phonons/s
    double temp_k = not_given;
    double phi_deg = not_given;
    std::string timestamp;
    int line = 0;  // source line, 0 when synthetic
};

struct HeatingDataset {
    std::vector<HeatingRow> rows;
    bool has_phi = false;
    bool has_timestamp = false;
};

enum class PowerLawVariable { frequency, temperature };

inline const char* to_string(PowerLawVariable v) {
    return v == PowerLawVariable::frequency ? "frequency" : "temperature";
}

// Gamma = amplitude * f^(-exponent) or amplitude * T^(+exponent).
struct PowerLawFit {
    PowerLawVariable variable = PowerLawVariable::frequency;
    double amplitude = 0.0;
    double amplitude_err = 0.0;
    double exponent = 0.0;
    double exponent_err = 0.0;
    double derived_exponent = 0.0;  // alpha' = alpha - 1 (frequency) or beta' = beta
    Eigen::Matrix2d covariance = Eigen::Matrix2d::Zero();  // (ln amplitude, exponent)
    int n_used = 0;
    bool weighted = false;
    std::vector<int> excluded;  // indices of rows left out (non-positive rate)
    std::vector<std::string> warnings;

    double predict(double x) const {
        return variable == PowerLawVariable::frequency ? amplitude * std::pow(x, -exponent)
                                                       : amplitude * std::pow(x, exponent);
    }
};

namespace detail {

// Weighted linear least squares y ~ X b. With `absolute` the covariance is
// (X^T W X)^-1; otherwise it is scaled by the residual variance.
struct LinearFit {
    Eigen::VectorXd beta;
    Eigen::MatrixXd covariance;
    Eigen::VectorXd residuals;  // unweighted
    double chi2 = 0.0;
    int dof = 0;
};

inline LinearFit weighted_linear_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                     const Eigen::VectorXd& w, bool absolute) {
    const Eigen::VectorXd sw = w.cwiseSqrt();
    const Eigen::MatrixXd Xw = sw.asDiagonal() * X;
    const Eigen::VectorXd yw = sw.cwiseProduct(y);
    LinearFit f;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xw);
    f.beta = qr.solve(yw);
    f.residuals = y - X * f.beta;
    f.chi2 = (Xw * f.beta - yw).squaredNorm();
    f.dof = static_cast<int>(X.rows() - X.cols());
    const Eigen::MatrixXd XtX = Xw.transpose() * Xw;
    f.covariance = XtX.ldlt().solve(Eigen::MatrixXd::Identity(X.cols(), X.cols()));
    if (!absolute) {
        const double s2 = f.dof > 0 ? f.chi2 / f.dof : not_given;
        f.covariance *= s2;
    }
    return f;
}

}  // namespace detail

// Log-space weighted linear regression ln Gamma = ln A -/+ p ln x, weights
// from relative uncertainties (d ln Gamma = dGamma / Gamma). Covariance is
// absolute when every used row carries an uncertainty and residual-scaled
// otherwise.
inline PowerLawFit fit_power_law(const std::vector<HeatingRow>& rows, PowerLawVariable var) {
    PowerLawFit out;
    out.variable = var;
    std::vector<int> use;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        const double x = var == PowerLawVariable::frequency ? r.freq_hz : r.temp_k;
        if (!given(x) || !(x > 0.0))
            throw ConfigError("power-law fit: row " + std::to_string(i + 1) + " has no positive " +
                              to_string(var));
        if (!(r.rate > 0.0)) {
            out.excluded.push_back(static_cast<int>(i));
            continue;
        }
        use.push_back(static_cast<int>(i));
    }
    if (!out.excluded.empty())
        out.warnings.push_back(std::to_string(out.excluded.size()) +
                               " row(s) with non-positive rate excluded from the fit");
    if (use.size() < 3)
        throw InsufficientDataError("power-law fit needs at least 3 usable rows, got " +
                                    std::to_string(use.size()));
    const auto n = static_cast<Eigen::Index>(use.size());
    Eigen::MatrixXd X(n, 2);
    Eigen::VectorXd y(n), w(n);
    bool all_err = true;
    for (Eigen::Index k = 0; k < n; ++k) {
        const auto& r = rows[static_cast<std::size_t>(use[static_cast<std::size_t>(k)])];
        const double x = var == PowerLawVariable::frequency ? r.freq_hz : r.temp_k;
        X(k, 0) = 1.0;
        X(k, 1) = std::log(x);
        y(k) = std::log(r.rate);
        if (given(r.rate_err) && r.rate_err > 0.0) {
            const double rel = r.rate_err / r.rate;
            w(k) = 1.0 / (rel * rel);
        } else {
            all_err = false;
            w(k) = 1.0;
        }
    }
    if (!all_err) w.setOnes();
    const double distinct = X.col(1).maxCoeff() - X.col(1).minCoeff();
    if (!(distinct > 0.0))
        throw DegenerateFitError("power-law fit: all rows share one " + std::string(to_string(var)));
    const auto f = detail::weighted_linear_fit(X, y, w, all_err);
    const double sign = var == PowerLawVariable::frequency ? -1.0 : 1.0;
    out.weighted = all_err;
    out.n_used = static_cast<int>(n);
    out.amplitude = std::exp(f.beta(0));
    out.exponent = sign * f.beta(1);
    out.covariance = f.covariance;
    out.covariance(0, 1) *= sign;
    out.covariance(1, 0) *= sign;
    out.amplitude_err = out.amplitude * std::sqrt(f.covariance(0, 0));
    out.exponent_err = std::sqrt(f.covariance(1, 1));
    out.derived_exponent = var == PowerLawVariable::frequency ? out.exponent - 1.0 : out.exponent;
    return out;
}

struct NormalizedRows {
    std::vector<HeatingRow> rows;
    std::vector<double> factors;  // chi per row
};

// Rates (and uncertainties) times chi_f = (f_norm / f)^(-alpha).
inline NormalizedRows normalize_frequency(const std::vector<HeatingRow>& rows,
                                          const std::map<std::string, double>& f_norm,
                                          const std::map<std::string, double>& alpha) {
    NormalizedRows out;
    for (const auto& r : rows) {
        const auto fn = f_norm.find(r.mode);
        const auto al = alpha.find(r.mode);
        if (al == alpha.end()) throw ConfigError("no alpha given for mode '" + r.mode + "'");
        if (fn == f_norm.end())
            throw ConfigError("no normalization frequency given for mode '" + r.mode + "'");
        if (!(r.freq_hz > 0.0) || !(fn->second > 0.0))
            throw ConfigError("frequencies must be positive for normalization");
        const double chi = std::pow(fn->second / r.freq_hz, -al->second);
        HeatingRow n = r;
        n.rate *= chi;
        if (given(n.rate_err)) n.rate_err *= chi;
        out.rows.push_back(n);
        out.factors.push_back(chi);
    }
    return out;
}

// Rates (and uncertainties) times chi_T = (T_norm / T)^beta.
inline NormalizedRows normalize_temperature(const std::vector<HeatingRow>& rows, double t_norm,
                                            const std::map<std::string, double>& beta) {
    if (!(t_norm > 0.0)) throw ConfigError("normalization temperature must be positive");
    NormalizedRows out;
    for (const auto& r : rows) {
        const auto be = beta.find(r.mode);
        if (be == beta.end()) throw ConfigError("no beta given for mode '" + r.mode + "'");
        if (!(r.temp_k > 0.0)) throw ConfigError("temperatures must be positive for normalization");
        const double chi = std::pow(t_norm / r.temp_k, be->second);
        HeatingRow n = r;
        n.rate *= chi;
        if (given(n.rate_err)) n.rate_err *= chi;
        out.rows.push_back(n);
        out.factors.push_back(chi);
    }
    return out;
}

struct RepeatedStats {
    int n = 0;
    double mean = 0.0;
    double stddev = 0.0;            // sample (n - 1)
    double mean_uncertainty = 0.0;  // NaN when no uncertainties given
};

inline RepeatedStats repeated_measurement_stats(const std::vector<double>& values,
                                                const std::vector<double>& errors = {}) {
    if (values.size() < 2)
        throw InsufficientDataError("repeated-measurement statistics need at least 2 values");
    if (!errors.empty() && errors.size() != values.size())
        throw ConfigError("values and uncertainties differ in length");
    RepeatedStats s;
    s.n = static_cast<int>(values.size());
    double sum = 0.0;
    for (double v : values) sum += v;
    s.mean = sum / s.n;
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(ss / (s.n - 1));
    if (errors.empty()) {
        s.mean_uncertainty = not_given;
    } else {
        double se = 0.0;
        for (double e : errors) se += e;
        s.mean_uncertainty = se / s.n;
    }
    return s;
}

// Gamma(phi) = Gamma_min cos^2 phi + Gamma_max sin^2 phi.
struct AngleFit {
    double gamma_min = 0.0;
    double gamma_min_err = 0.0;
    double gamma_max = 0.0;
    double gamma_max_err = 0.0;
    double ratio = 0.0;  // Gamma_max / Gamma_min
    double ratio_err = 0.0;
    Eigen::Matrix2d covariance = Eigen::Matrix2d::Zero();
    int n_used = 0;
    std::vector<std::string> warnings;

    double predict(double phi_deg) const {
        const double s = std::sin(phi_deg * constants::pi / 180.0);
        return gamma_min + (gamma_max - gamma_min) * s * s;
    }
};

inline AngleFit fit_angle_model(const std::vector<HeatingRow>& rows) {
    AngleFit out;
    std::vector<const HeatingRow*> use;
    for (const auto& r : rows)
        if (given(r.phi_deg) && given(r.rate)) use.push_back(&r);
    std::vector<double> angles;
    for (const auto* r : use) angles.push_back(r->phi_deg);
    std::sort(angles.begin(), angles.end());
    angles.erase(std::unique(angles.begin(), angles.end()), angles.end());
    if (angles.size() < 2)
        throw InsufficientDataError("angle fit needs at least 2 distinct angles");
    if (angles.size() < 3)
        out.warnings.push_back("fewer than 3 distinct angles: the fit interpolates exactly");
    if (angles.back() - angles.front() < 20.0)
        out.warnings.push_back("angles span less than 20 degrees: fit is ill-conditioned");
    const auto n = static_cast<Eigen::Index>(use.size());
    Eigen::MatrixXd X(n, 2);
    Eigen::VectorXd y(n), w(n);
    bool all_err = true;
    for (Eigen::Index k = 0; k < n; ++k) {
        const auto& r = *use[static_cast<std::size_t>(k)];
        const double s = std::sin(r.phi_deg * constants::pi / 180.0);
        X(k, 0) = 1.0 - s * s;
        X(k, 1) = s * s;
        y(k) = r.rate;
        if (given(r.rate_err) && r.rate_err > 0.0) {
            w(k) = 1.0 / (r.rate_err * r.rate_err);
        } else {
            all_err = false;
            w(k) = 1.0;
        }
    }
    if (!all_err) w.setOnes();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(X);
    const auto sv = svd.singularValues();
    if (!(sv(1) > 1e-10 * sv(0)))
        throw DegenerateFitError("angle fit: angles do not separate Gamma_min from Gamma_max");
    const auto f = detail::weighted_linear_fit(X, y, w, all_err);
    out.n_used = static_cast<int>(n);
    out.gamma_min = f.beta(0);
    out.gamma_max = f.beta(1);
    out.covariance = f.covariance;
    if (!all_err && f.dof == 0) {
        out.covariance.setZero();
        out.warnings.push_back("no uncertainties and no residual degrees of freedom: errors set to 0");
    }
    out.gamma_min_err = std::sqrt(out.covariance(0, 0));
    out.gamma_max_err = std::sqrt(out.covariance(1, 1));
    out.ratio = out.gamma_max / out.gamma_min;
    // First-order propagation through r = b / a.
    const double a = out.gamma_min, b = out.gamma_max;
    const Eigen::Vector2d J(-b / (a * a), 1.0 / a);
    out.ratio_err = std::sqrt(std::max(0.0, J.dot(out.covariance * J)));
    return out;
}

// ---- stray field ----------------------------------------------------------

struct StrayRow {
    double x = 0.0;  // m
    std::array<double, 3> e{};
    std::array<double, 3> err{not_given, not_given, not_given};
    int line = 0;
};

struct StrayFieldDataset {
    std::string label;
    std::vector<StrayRow> rows;
};

inline const std::array<std::string, 4> spacer_ids{"spacer 1", "spacer 2", "spacer 3", "spacer 4"};
inline const std::array<std::string, 7> stray_parameter_names{
    "spacer 1", "spacer 2", "spacer 3", "spacer 4", "E_offset,x", "E_offset,y", "E_offset,z"};

inline double default_ion_height(const TrapGeometry& g) { return 0.5 * g.plane_separation; }

// E(x) along the trap axis at ion height: sum of the four charged facets plus
// a uniform offset. Densities in e/um^2 (signed, positive charge positive).
inline std::vector<std::array<double, 3>> spacer_field_profile(
    const TrapGeometry& g, const std::array<double, 4>& sigmas, const std::array<double, 3>& offset,
    const std::vector<double>& xs, std::optional<double> z_ion = std::nullopt) {
    const double z = z_ion.value_or(default_ion_height(g));
    std::vector<std::array<double, 3>> out;
    out.reserve(xs.size());
    for (double x : xs) {
        std::array<double, 3> e = offset;
        for (int i = 0; i < 4; ++i) {
            if (sigmas[static_cast<std::size_t>(i)] == 0.0) continue;
            const auto fi = field::charged_facet_field(g.facet(spacer_ids[static_cast<std::size_t>(i)]),
                                                       sigmas[static_cast<std::size_t>(i)], {x, 0.0, z});
            for (int k = 0; k < 3; ++k) e[static_cast<std::size_t>(k)] += fi[static_cast<std::size_t>(k)];
        }
        out.push_back(e);
    }
    return out;
}

struct StrayFieldFit {
    std::string label;
    std::array<double, 4> sigma{};      // e/um^2
    std::array<double, 4> sigma_err{};
    std::array<double, 3> offset{};     // V/m
    std::array<double, 3> offset_err{};
    Eigen::Matrix<double, 7, 7> covariance = Eigen::Matrix<double, 7, 7>::Zero();
    double residual_norm = 0.0;              // unweighted, V/m
    std::array<double, 3> residual_rms{};    // per component, V/m
    double chi2 = 0.0;
    int n_obs = 0;
    bool weighted = false;
    std::vector<std::string> warnings;
};

inline StrayFieldFit fit_stray_field(const StrayFieldDataset& data, const TrapGeometry& g,
                                     std::optional<double> z_ion = std::nullopt) {
    StrayFieldFit out;
    out.label = data.label;
    // Unit responses of each facet at every row position.
    std::vector<double> xs;
    for (const auto& r : data.rows) {
        if (std::abs(r.x) > 250e-6 * (1.0 + 1e-12))
            out.warnings.push_back("row at x = " + text::format_sig(r.x, 6) +
                                   " m lies outside the +-250 um range");
        xs.push_back(r.x);
    }
    std::array<std::vector<std::array<double, 3>>, 4> unit;
    for (int i = 0; i < 4; ++i) {
        std::array<double, 4> s{};
        s[static_cast<std::size_t>(i)] = 1.0;
        unit[static_cast<std::size_t>(i)] = spacer_field_profile(g, s, {0.0, 0.0, 0.0}, xs, z_ion);
    }
    struct Obs {
        std::size_t row;
        int comp;
    };
    std::vector<Obs> obs;
    bool all_err = true;
    for (std::size_t r = 0; r < data.rows.size(); ++r)
        for (int k = 0; k < 3; ++k) {
            const auto& row = data.rows[r];
            if (!std::isfinite(row.e[static_cast<std::size_t>(k)])) continue;
            obs.push_back({r, k});
            const double e = row.err[static_cast<std::size_t>(k)];
            if (!(given(e) && e > 0.0)) all_err = false;
        }
    if (obs.size() < 7)
        throw InsufficientDataError("stray-field fit needs at least 7 field values, got " +
                                    std::to_string(obs.size()));
    const auto n = static_cast<Eigen::Index>(obs.size());
    Eigen::MatrixXd X = Eigen::MatrixXd::Zero(n, 7);
    Eigen::VectorXd y(n), w(n);
    for (Eigen::Index m = 0; m < n; ++m) {
        const auto [r, k] = obs[static_cast<std::size_t>(m)];
        const auto kk = static_cast<std::size_t>(k);
        for (int i = 0; i < 4; ++i) X(m, i) = unit[static_cast<std::size_t>(i)][r][kk];
        X(m, 4 + k) = 1.0;
        y(m) = data.rows[r].e[kk];
        const double e = data.rows[r].err[kk];
        w(m) = all_err ? 1.0 / (e * e) : 1.0;
    }
    // Identifiability on the column-normalized weighted design.
    Eigen::MatrixXd Xw = w.cwiseSqrt().asDiagonal() * X;
    Eigen::VectorXd cn(7);
    for (int j = 0; j < 7; ++j) {
        cn(j) = Xw.col(j).norm();
        if (cn(j) == 0.0) cn(j) = 1.0;
    }
    Xw = Xw * cn.cwiseInverse().asDiagonal();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(Xw, Eigen::ComputeFullV);
    const auto sv = svd.singularValues();
    if (!(sv(6) > 1e-10 * sv(0))) {
        Eigen::VectorXd v = svd.matrixV().col(6);
        v = cn.cwiseInverse().asDiagonal() * v;
        v /= v.cwiseAbs().maxCoeff();
        std::ostringstream msg;
        msg << "stray-field fit is degenerate; unidentifiable combination:";
        bool first = true;
        for (int j = 0; j < 7; ++j) {
            if (std::abs(v(j)) < 1e-6) continue;
            msg << (first ? " " : (v(j) < 0.0 ? " - " : " + "));
            msg << text::format_sig(first ? v(j) : std::abs(v(j)), 4) << "*[" << stray_parameter_names[static_cast<std::size_t>(j)] << "]";
            first = false;
        }
        throw DegenerateFitError(msg.str());
    }
    const auto f = detail::weighted_linear_fit(X, y, w, all_err);
    if (!all_err && f.dof == 0)
        out.warnings.push_back("no uncertainties and no residual degrees of freedom");
    out.weighted = all_err;
    out.n_obs = static_cast<int>(n);
    out.covariance = f.covariance;
    if (!out.covariance.allFinite()) out.covariance.setZero();
    for (int i = 0; i < 4; ++i) {
        out.sigma[static_cast<std::size_t>(i)] = f.beta(i);
        out.sigma_err[static_cast<std::size_t>(i)] = std::sqrt(out.covariance(i, i));
    }
    for (int k = 0; k < 3; ++k) {
        out.offset[static_cast<std::size_t>(k)] = f.beta(4 + k);
        out.offset_err[static_cast<std::size_t>(k)] = std::sqrt(out.covariance(4 + k, 4 + k));
    }
    out.residual_norm = f.residuals.norm();
    out.chi2 = f.chi2;
    std::array<double, 3> ss{};
    std::array<int, 3> cnt{};
    for (Eigen::Index m = 0; m < n; ++m) {
        const auto k = static_cast<std::size_t>(obs[static_cast<std::size_t>(m)].comp);
        ss[k] += f.residuals(m) * f.residuals(m);
        ++cnt[k];
    }
    for (std::size_t k = 0; k < 3; ++k) out.residual_rms[k] = cnt[k] ? std::sqrt(ss[k] / cnt[k]) : 0.0;
    return out;
}

// Published fit results for two traps, kept as formatting fixtures.
inline std::array<StrayFieldFit, 2> published_stray_fits() {
    std::array<StrayFieldFit, 2> t;
    t[0].label = "trap #1";
    t[0].sigma = {-2120, 860, 1840, 390};
    t[0].sigma_err = {340, 400, 380, 260};
    t[0].offset = {-450, -380, -900};
    t[0].offset_err = {50, 50, 170};
    t[1].label = "trap #2";
    t[1].sigma = {1380, 630, -2510, 320};
    t[1].sigma_err = {200, 360, 450, 250};
    t[1].offset = {1310, 210, -1500};
    t[1].offset_err = {40, 50, 40};
    return t;
}

struct RateSeries {
    std::string mode;
    double freq_hz = 0.0;
    double temp_k = 0.0;
    std::vector<double> values;
    std::vector<double> errors;
};

// Nineteen sequential heating-rate measurements (phonons/s) per mode under
// identical conditions (153 K trap temperature).
inline std::array<RateSeries, 3> published_sequential_rates() {
    return {{
        {"axial", 0.95e6, 153.0,
         {43, 33, 30, 10, 50, 45, 34, 67, 31, 36, 9, 42, 18, 29, 16, 69, 91, 78, 37},
         {9, 23, 18, 28, 17, 15, 17, 20, 16, 25, 14, 25, 18, 23, 25, 27, 20, 23, 25}},
        {"radial-out-of-plane", 2.46e6, 153.0,
         {97, 115, 113, 109, 115, 94, 110, 96, 107, 109, 126, 109, 120, 94, 96, 103, 99, 100, 117},
         {5, 10, 10, 10, 8, 8, 5, 6, 7, 7, 9, 9, 8, 10, 7, 6, 12, 9, 10}},
        {"radial-in-plane", 2.65e6, 153.0,
         {45, 15, 16, 22, 19, 21, 17, 21, 20, 16, 24, 20, 18, 20, 11, 15, 23, 23, 12},
         {9, 4, 3, 3, 3, 3, 3, 3, 3, 3, 3, 3, 3, 3, 3, 3, 3, 4, 4}},
    }};
}

inline std::vector<HeatingRow> sequential_rate_rows() {
    std::vector<HeatingRow> rows;
    for (const auto& s : published_sequential_rates())
        for (std::size_t i = 0; i < s.values.size(); ++i) {
            HeatingRow r;
            r.mode = s.mode;
            r.freq_hz = s.freq_hz;
            r.rate = s.values[i];
            r.rate_err = s.errors[i];
            r.temp_k = s.temp_k;
            rows.push_back(r);
        }
    return rows;
}

// ---- CSV ------------------------------------------------------------------

namespace csv {

inline std::vector<std::string> split(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        auto cell = text::trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
        if (cell.size() >= 2 && cell.front() == '"' && cell.back() == '"')
            cell = cell.substr(1, cell.size() - 2);
        out.emplace_back(cell);
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<int> lines;

    int column(const std::string& name) const {
        const auto it = std::find(header.begin(), header.end(), name);
        return it == header.end() ? -1 : static_cast<int>(it - header.begin());
    }
};

// Blank lines and lines starting with '#' are skipped.
inline Table read(std::string_view content) {
    Table t;
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= content.size()) {
        const auto end = content.find('\n', pos);
        std::string_view line =
            content.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
        pos = end == std::string_view::npos ? content.size() + 1 : end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        const auto tl = text::trim(line);
        if (tl.empty() || tl.front() == '#') continue;
        auto cells = split(tl);
        if (t.header.empty()) {
            t.header = std::move(cells);
            continue;
        }
        if (cells.size() != t.header.size())
            throw ParseError("expected " + std::to_string(t.header.size()) + " fields, found " +
                                 std::to_string(cells.size()),
                             line_no);
        t.rows.push_back(std::move(cells));
        t.lines.push_back(line_no);
    }
    return t;
}

inline double number(const std::string& cell, int line, const std::string& column, bool optional) {
    if (cell.empty()) {
        if (optional) return not_given;
        throw ParseError("missing value for '" + column + "'", line);
    }
    double v = 0.0;
    if (!text::parse_double(cell, v) || !std::isfinite(v))
        throw ParseError("malformed number '" + cell + "' for '" + column + "'", line);
    return v;
}

inline std::string cell(double v) { return given(v) ? text::format_double(v) : std::string(); }

}  // namespace csv

inline const char* heating_header = "mode,freq_hz,rate_phonons_s,rate_err,temp_k,phi_deg";
inline const char* stray_header = "x_m,Ex,Ey,Ez,err_Ex,err_Ey,err_Ez";

// Heating CSV: the six documented columns (any order) plus an optional
// `timestamp`. Empty cells mark absent optional values.
inline HeatingDataset read_heating_csv(std::string_view content) {
    const auto t = csv::read(content);
    if (t.header.empty()) throw InsufficientDataError("heating data: file is empty");
    const std::array<std::string, 6> cols{"mode", "freq_hz", "rate_phonons_s", "rate_err", "temp_k", "phi_deg"};
    std::array<int, 6> idx{};
    for (std::size_t i = 0; i < cols.size(); ++i) {
        idx[i] = t.column(cols[i]);
        if (idx[i] < 0) throw ParseError("heating data: missing column '" + cols[i] + "'", 1);
    }
    const int ts = t.column("timestamp");
    for (const auto& h : t.header)
        if (std::find(cols.begin(), cols.end(), h) == cols.end() && h != "timestamp" &&
            h != "factor" && h != "excluded_from_fit")  // columns of our own exports
            throw ParseError("heating data: unknown column '" + h + "'", 1);
    HeatingDataset d;
    d.has_timestamp = ts >= 0;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& c = t.rows[r];
        const int line = t.lines[r];
        HeatingRow row;
        row.line = line;
        row.mode = c[static_cast<std::size_t>(idx[0])];
        if (row.mode.empty()) throw ParseError("missing mode label", line);
        row.freq_hz = csv::number(c[static_cast<std::size_t>(idx[1])], line, cols[1], false);
        row.rate = csv::number(c[static_cast<std::size_t>(idx[2])], line, cols[2], false);
        row.rate_err = csv::number(c[static_cast<std::size_t>(idx[3])], line, cols[3], true);
        row.temp_k = csv::number(c[static_cast<std::size_t>(idx[4])], line, cols[4], true);
        row.phi_deg = csv::number(c[static_cast<std::size_t>(idx[5])], line, cols[5], true);
        if (ts >= 0) row.timestamp = c[static_cast<std::size_t>(ts)];
        if (!(row.freq_hz > 0.0)) throw ParseError("frequency must be positive", line);
        if (given(row.rate_err) && !(row.rate_err > 0.0))
            throw ParseError("rate uncertainty must be positive", line);
        if (given(row.temp_k) && !(row.temp_k > 0.0)) throw ParseError("temperature must be positive", line);
        if (given(row.phi_deg)) d.has_phi = true;
        d.rows.push_back(row);
    }
    return d;
}

inline std::string write_heating_csv(const std::vector<HeatingRow>& rows, bool with_timestamp = false,
                                     const std::vector<double>* factors = nullptr) {
    std::ostringstream os;
    os << heating_header;
    if (with_timestamp) os << ",timestamp";
    if (factors) os << ",factor";
    os << ",excluded_from_fit\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        os << r.mode << ',' << csv::cell(r.freq_hz) << ',' << csv::cell(r.rate) << ','
           << csv::cell(r.rate_err) << ',' << csv::cell(r.temp_k) << ',' << csv::cell(r.phi_deg);
        if (with_timestamp) os << ',' << r.timestamp;
        if (factors) os << ',' << csv::cell((*factors)[i]);
        os << ',' << (r.rate > 0.0 ? 0 : 1) << '\n';
    }
    return os.str();
}

inline StrayFieldDataset read_stray_csv(std::string_view content, std::string label = {}) {
    const auto t = csv::read(content);
    StrayFieldDataset d;
    d.label = std::move(label);
    if (t.header.empty()) return d;
    const std::array<std::string, 7> cols{"x_m", "Ex", "Ey", "Ez", "err_Ex", "err_Ey", "err_Ez"};
    std::array<int, 7> idx{};
    for (std::size_t i = 0; i < cols.size(); ++i) {
        idx[i] = t.column(cols[i]);
        if (idx[i] < 0 && i < 4) throw ParseError("stray-field data: missing column '" + cols[i] + "'", 1);
    }
    for (const auto& h : t.header)
        if (std::find(cols.begin(), cols.end(), h) == cols.end())
            throw ParseError("stray-field data: unknown column '" + h + "'", 1);
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& c = t.rows[r];
        const int line = t.lines[r];
        StrayRow row;
        row.line = line;
        row.x = csv::number(c[static_cast<std::size_t>(idx[0])], line, cols[0], false);
        for (int k = 0; k < 3; ++k) {
            row.e[static_cast<std::size_t>(k)] =
                csv::number(c[static_cast<std::size_t>(idx[static_cast<std::size_t>(1 + k)])], line,
                            cols[static_cast<std::size_t>(1 + k)], false);
            const int ei = idx[static_cast<std::size_t>(4 + k)];
            if (ei >= 0) {
                const double e = csv::number(c[static_cast<std::size_t>(ei)], line,
                                             cols[static_cast<std::size_t>(4 + k)], true);
                if (given(e) && !(e > 0.0)) throw ParseError("field uncertainty must be positive", line);
                row.err[static_cast<std::size_t>(k)] = e;
            }
        }
        d.rows.push_back(row);
    }
    return d;
}

inline std::string write_stray_csv(const StrayFieldDataset& d) {
    std::ostringstream os;
    os << stray_header << '\n';
    for (const auto& r : d.rows) {
        os << csv::cell(r.x);
        for (double e : r.e) os << ',' << csv::cell(e);
        for (double e : r.err) os << ',' << csv::cell(e);
        os << '\n';
    }
    return os.str();
}

}  // namespace iontrap
