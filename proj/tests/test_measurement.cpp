#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include <iontrap/geometry.hpp>
#include <iontrap/measurement.hpp>

#include "oracles.hpp"

using namespace iontrap;

namespace {

constexpr double um = 1e-6;

std::vector<HeatingRow> power_law_rows(double amp, double alpha, const std::vector<double>& fs,
                                       const std::string& mode = "axial") {
    std::vector<HeatingRow> rows;
    for (double f : fs) {
        HeatingRow r;
        r.mode = mode;
        r.freq_hz = f;
        r.rate = amp * std::pow(f, -alpha);
        r.temp_k = 295.0;
        rows.push_back(r);
    }
    return rows;
}

StrayFieldDataset synthetic_stray(const TrapGeometry& g, const std::array<double, 4>& s,
                                  const std::array<double, 3>& off, int n = 21) {
    std::vector<double> xs;
    for (int i = 0; i < n; ++i) xs.push_back((-250.0 + 500.0 * i / (n - 1)) * um);
    const auto e = spacer_field_profile(g, s, off, xs);
    StrayFieldDataset d;
    d.label = "synthetic";
    for (int i = 0; i < n; ++i) {
        StrayRow r;
        r.x = xs[static_cast<std::size_t>(i)];
        r.e = e[static_cast<std::size_t>(i)];
        d.rows.push_back(r);
    }
    return d;
}

}  // namespace

// ---- spectral density -------------------------------------------------------

TEST(SpectralDensity, HandComputation) {
    // 4 m hbar omega Gamma / e^2 with m = 39.9625909 u - m_e
    const double m = 39.9625909 * 1.66053906660e-27 - 9.1093837015e-31;
    const double want = 4.0 * m * 1.054571817e-34 * (2.0 * oracle::pi * 1.0e6) * 40.0 /
                        (1.602176634e-19 * 1.602176634e-19);
    EXPECT_NEAR(spectral_density(40.0, 1.0e6), want, 1e-12 * want);
    EXPECT_EQ(spectral_density(0.0, 1.0e6), 0.0);
    EXPECT_NEAR(spectral_density(80.0, 1.0e6), 2.0 * spectral_density(40.0, 1.0e6), 1e-25);
    EXPECT_NEAR(spectral_density(40.0, 3.0e6), 3.0 * spectral_density(40.0, 1.0e6), 1e-25);
    EXPECT_THROW(spectral_density(1.0, 0.0), ConfigError);
}

TEST(SpectralDensity, PublishedAxialValue) {
    EXPECT_NEAR(spectral_density(40.0, 1.0e6), 2.8e-13, 0.02 * 2.8e-13);
}

TEST(SpectralDensity, PublishedRadialValue) {
    EXPECT_NEAR(spectral_density(10.0, 2.6e6), 1.8e-13, 0.02 * 1.8e-13);
}

// ---- power laws ---------------------------------------------------------------

TEST(PowerLaw, ExactModelRecovered) {
    const auto rows = power_law_rows(7.0, 2.5, {0.5e6, 0.8e6, 1.1e6, 1.7e6, 2.6e6});
    const auto f = fit_power_law(rows, PowerLawVariable::frequency);
    EXPECT_NEAR(f.exponent, 2.5, 1e-10);
    EXPECT_NEAR(f.amplitude, 7.0, 1e-9 * 7.0);
    EXPECT_NEAR(f.derived_exponent, 1.5, 1e-10);
    EXPECT_NEAR(f.predict(1.3e6), 7.0 * std::pow(1.3e6, -2.5), 1e-9 * 7.0 * std::pow(1.3e6, -2.5));
}

TEST(PowerLaw, DerivedAlphaPrime) {
    auto rows = power_law_rows(1e15, 2.3, {0.6e6, 1e6, 2e6, 3e6});
    EXPECT_NEAR(fit_power_law(rows, PowerLawVariable::frequency).derived_exponent, 1.3, 1e-10);
    for (auto& r : rows) {
        r.temp_k = r.freq_hz / 1e4;
        r.rate = 0.02 * std::pow(r.temp_k, 1.7);
    }
    const auto t = fit_power_law(rows, PowerLawVariable::temperature);
    EXPECT_NEAR(t.exponent, 1.7, 1e-10);
    EXPECT_NEAR(t.derived_exponent, 1.7, 1e-10);
}

TEST(PowerLaw, ExactDataIndependentOfWeights) {
    auto rows = power_law_rows(3.0, 1.8, {0.4e6, 0.9e6, 1.5e6, 2.2e6, 3.1e6});
    const auto a = fit_power_law(rows, PowerLawVariable::frequency);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> rel(0.02, 0.5);
    for (auto& r : rows) r.rate_err = rel(rng) * r.rate;
    const auto b = fit_power_law(rows, PowerLawVariable::frequency);
    EXPECT_TRUE(b.weighted);
    EXPECT_FALSE(a.weighted);
    EXPECT_NEAR(a.exponent, b.exponent, 1e-10);
    EXPECT_NEAR(a.amplitude, b.amplitude, 1e-9 * a.amplitude);
}

TEST(PowerLaw, NoisyCoverageOfTwoStandardErrors) {
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> noise(0.0, 0.1);
    std::uniform_real_distribution<double> lf(std::log(0.5e6), std::log(3e6));
    const int trials = 20000;
    int covered = 0;
    for (int t = 0; t < trials; ++t) {
        std::vector<HeatingRow> rows;
        for (int i = 0; i < 50; ++i) {
            HeatingRow r;
            r.mode = "axial";
            r.freq_hz = std::exp(lf(rng));
            const double truth = 7.0 * std::pow(r.freq_hz / 1e6, -2.5);
            r.rate = truth * (1.0 + noise(rng));
            r.rate_err = 0.1 * truth;
            rows.push_back(r);
        }
        const auto f = fit_power_law(rows, PowerLawVariable::frequency);
        if (std::abs(f.exponent - 2.5) <= 2.0 * f.exponent_err) ++covered;
    }
    EXPECT_GE(covered, 0.95 * trials);
}

TEST(PowerLaw, ExclusionsAndErrors) {
    auto rows = power_law_rows(7.0, 2.0, {0.5e6, 1e6, 2e6, 3e6});
    rows[1].rate = -3.0;
    const auto f = fit_power_law(rows, PowerLawVariable::frequency);
    ASSERT_EQ(f.excluded.size(), 1u);
    EXPECT_EQ(f.excluded[0], 1);
    EXPECT_EQ(f.n_used, 3);
    EXPECT_FALSE(f.warnings.empty());
    rows[2].rate = 0.0;
    EXPECT_THROW(fit_power_law(rows, PowerLawVariable::frequency), InsufficientDataError);
    const auto same = power_law_rows(7.0, 2.0, {1e6, 1e6, 1e6});
    EXPECT_THROW(fit_power_law(same, PowerLawVariable::frequency), DegenerateFitError);
    auto no_t = power_law_rows(7.0, 2.0, {1e6, 2e6, 3e6});
    no_t[0].temp_k = not_given;
    EXPECT_THROW(fit_power_law(no_t, PowerLawVariable::temperature), ConfigError);
}

// ---- normalization ------------------------------------------------------------

TEST(Normalization, FrequencyIdentitiesAndClosedForm) {
    auto rows = power_law_rows(1.0, 2.0, {1e6, 0.5e6});
    rows[0].rate_err = 0.1;
    const auto n = normalize_frequency(rows, {{"axial", 1e6}}, {{"axial", 2.0}});
    EXPECT_EQ(n.factors[0], 1.0);
    EXPECT_EQ(n.rows[0].rate, rows[0].rate);
    EXPECT_EQ(n.rows[0].rate_err, 0.1);
    EXPECT_NEAR(n.factors[1], 0.25, 1e-15);
    EXPECT_NEAR(n.rows[1].rate, 0.25 * rows[1].rate, 1e-15 * rows[1].rate);
    EXPECT_THROW(normalize_frequency(rows, {{"axial", 1e6}}, {}), ConfigError);
    EXPECT_THROW(normalize_frequency(rows, {}, {{"axial", 2.0}}), ConfigError);
}

TEST(Normalization, TemperatureIdentitiesAndClosedForm) {
    std::vector<HeatingRow> rows(2);
    rows[0].mode = rows[1].mode = "axial";
    rows[0].temp_k = 295.0;
    rows[1].temp_k = 147.5;
    rows[0].rate = rows[1].rate = 10.0;
    rows[0].freq_hz = rows[1].freq_hz = 1e6;
    const auto n = normalize_temperature(rows, 295.0, {{"axial", 1.0}});
    EXPECT_EQ(n.factors[0], 1.0);
    EXPECT_NEAR(n.factors[1], 2.0, 1e-15);
    EXPECT_THROW(normalize_temperature(rows, 295.0, {{"radial", 1.0}}), ConfigError);
    EXPECT_THROW(normalize_temperature(rows, 0.0, {{"axial", 1.0}}), ConfigError);
}

TEST(Normalization, ExactModelCollapse) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> f(0.3e6, 4e6), t(40.0, 300.0);
    std::vector<HeatingRow> rows;
    for (const auto& [mode, a, alpha] : {std::tuple{"axial", 5e13, 2.3}, std::tuple{"radial", 9e12, 1.9}})
        for (int i = 0; i < 12; ++i) {
            HeatingRow r;
            r.mode = mode;
            r.freq_hz = f(rng);
            r.rate = a * std::pow(r.freq_hz, -alpha);
            r.temp_k = t(rng);
            rows.push_back(r);
        }
    const std::map<std::string, double> fn{{"axial", 1e6}, {"radial", 2.5e6}};
    const std::map<std::string, double> al{{"axial", 2.3}, {"radial", 1.9}};
    const auto n = normalize_frequency(rows, fn, al);
    for (const auto& r : n.rows) {
        const double want = r.mode == "axial" ? 5e13 * std::pow(1e6, -2.3) : 9e12 * std::pow(2.5e6, -1.9);
        EXPECT_NEAR(r.rate, want, 1e-10 * want);
    }
    // temperature collapse: Gamma = B T^beta
    for (auto& r : rows) r.rate = 0.3 * std::pow(r.temp_k, 1.4);
    const auto nt = normalize_temperature(rows, 153.0, {{"axial", 1.4}, {"radial", 1.4}});
    const double want = 0.3 * std::pow(153.0, 1.4);
    for (const auto& r : nt.rows) EXPECT_NEAR(r.rate, want, 1e-10 * want);
}

TEST(Normalization, ExactlyInvertible) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> f(0.3e6, 4e6), g(1.0, 100.0);
    std::vector<HeatingRow> rows;
    for (int i = 0; i < 20; ++i) {
        HeatingRow r;
        r.mode = "axial";
        r.freq_hz = f(rng);
        r.rate = g(rng);
        r.rate_err = 0.1 * r.rate;
        rows.push_back(r);
    }
    const double fnorm = 1.3e6;
    const auto fwd = normalize_frequency(rows, {{"axial", fnorm}}, {{"axial", 2.3}});
    // back: chi with the roles of f and f_norm exchanged, per row
    for (std::size_t i = 0; i < rows.size(); ++i) {
        HeatingRow moved = fwd.rows[i];
        moved.freq_hz = fnorm;
        const auto back = normalize_frequency({moved}, {{"axial", rows[i].freq_hz}}, {{"axial", 2.3}});
        EXPECT_NEAR(back.rows[0].rate, rows[i].rate, 1e-12 * rows[i].rate);
        EXPECT_NEAR(back.rows[0].rate_err, rows[i].rate_err, 1e-12 * rows[i].rate_err);
    }
}

// ---- repeated measurements ------------------------------------------------------

TEST(RepeatedStats, DegenerateAndErrors) {
    const auto s = repeated_measurement_stats({4.0, 4.0, 4.0}, {1.0, 2.0, 3.0});
    EXPECT_EQ(s.mean, 4.0);
    EXPECT_EQ(s.stddev, 0.0);
    EXPECT_EQ(s.mean_uncertainty, 2.0);
    EXPECT_TRUE(std::isnan(repeated_measurement_stats({1.0, 2.0}).mean_uncertainty));
    EXPECT_NEAR(repeated_measurement_stats({1.0, 3.0}).stddev, std::sqrt(2.0), 1e-15);
    EXPECT_THROW(repeated_measurement_stats({1.0}), InsufficientDataError);
    EXPECT_THROW(repeated_measurement_stats({1.0, 2.0}, {1.0}), ConfigError);
}

TEST(RepeatedStats, PublishedAxialSeries) {
    const auto s = published_sequential_rates()[0];
    ASSERT_EQ(s.values.size(), 19u);
    const auto r = repeated_measurement_stats(s.values, s.errors);
    EXPECT_NEAR(r.mean, 41.0, 0.5);
    EXPECT_NEAR(r.stddev, 22.0, 0.5);
    EXPECT_NEAR(r.mean_uncertainty, 20.0, 0.5);
}

TEST(RepeatedStats, PublishedInPlaneSeries) {
    const auto s = published_sequential_rates()[2];
    ASSERT_EQ(s.values.size(), 19u);
    const auto r = repeated_measurement_stats(s.values, s.errors);
    EXPECT_NEAR(r.mean, 20.0, 0.5);
    EXPECT_NEAR(r.stddev, 7.0, 0.5);
    EXPECT_NEAR(r.mean_uncertainty, 3.5, 0.05);
}

// ---- angle model ----------------------------------------------------------------

TEST(AngleFit, RecoversRatioOfTen) {
    auto rows_for = [](std::mt19937_64* rng) {
        std::normal_distribution<double> noise(0.0, 0.05);
        std::vector<HeatingRow> rows;
        for (double phi : {0.0, 10.0, 25.0, 40.0, 55.0, 70.0, 80.0, 90.0}) {
            HeatingRow r;
            r.mode = "radial";
            r.freq_hz = 2.6e6;
            r.phi_deg = phi;
            const double s = std::sin(phi * oracle::pi / 180.0);
            const double truth = 10.0 + 90.0 * s * s;
            r.rate = rng ? truth * (1.0 + noise(*rng)) : truth;
            r.rate_err = 0.05 * truth;
            rows.push_back(r);
        }
        return rows;
    };
    const auto exact = fit_angle_model(rows_for(nullptr));
    EXPECT_NEAR(exact.ratio, 10.0, 1e-10);
    EXPECT_TRUE(exact.warnings.empty());
    // with noise: the reported error covers the truth at the nominal rate
    std::mt19937_64 rng(9);
    const int trials = 20000;
    int covered = 0;
    for (int t = 0; t < trials; ++t) {
        const auto f = fit_angle_model(rows_for(&rng));
        if (std::abs(f.ratio - 10.0) <= 2.0 * f.ratio_err) ++covered;
    }
    EXPECT_GE(covered, 0.95 * trials);
}

TEST(AngleFit, FlatAndTwoAngleCases) {
    std::vector<HeatingRow> rows(4);
    const double phis[] = {0.0, 30.0, 60.0, 90.0};
    for (int i = 0; i < 4; ++i) {
        rows[i].mode = "radial";
        rows[i].freq_hz = 2.6e6;
        rows[i].phi_deg = phis[i];
        rows[i].rate = 12.0;
    }
    const auto flat = fit_angle_model(rows);
    EXPECT_NEAR(flat.gamma_min, flat.gamma_max, 1e-12);
    EXPECT_NEAR(flat.ratio, 1.0, 1e-12);

    std::vector<HeatingRow> two{rows[0], rows[3]};
    two[0].rate = 7.0;
    two[1].rate = 70.0;
    const auto t = fit_angle_model(two);
    EXPECT_NEAR(t.gamma_min, 7.0, 1e-12);
    EXPECT_NEAR(t.gamma_max, 70.0, 1e-12);
    EXPECT_NEAR(t.predict(0.0), 7.0, 1e-12);
    EXPECT_NEAR(t.predict(90.0), 70.0, 1e-12);
    EXPECT_FALSE(t.warnings.empty());
}

TEST(AngleFit, NarrowSpanWarnsAndSingleAngleThrows) {
    std::vector<HeatingRow> rows(3);
    const double phis[] = {10.0, 15.0, 25.0};
    for (int i = 0; i < 3; ++i) {
        rows[i].mode = "radial";
        rows[i].freq_hz = 2.6e6;
        rows[i].phi_deg = phis[i];
        rows[i].rate = 10.0 + i;
    }
    const auto f = fit_angle_model(rows);
    bool warned = false;
    for (const auto& w : f.warnings) warned |= w.find("20 degrees") != std::string::npos;
    EXPECT_TRUE(warned);
    for (auto& r : rows) r.phi_deg = 45.0;
    EXPECT_THROW(fit_angle_model(rows), InsufficientDataError);
}

// ---- stray field ----------------------------------------------------------------

TEST(StrayField, ProfileBasics) {
    const auto g = build_reference_preset();
    const std::vector<double> xs{-200 * um, 0.0, 130 * um};
    const auto off = spacer_field_profile(g, {0, 0, 0, 0}, {1.0, -2.0, 3.0}, xs);
    for (const auto& e : off) {
        EXPECT_EQ(e[0], 1.0);
        EXPECT_EQ(e[1], -2.0);
        EXPECT_EQ(e[2], 3.0);
    }
    const std::array<double, 4> s{0.1, -0.05, 0.2, 0.03};
    const auto a = spacer_field_profile(g, s, {0, 0, 0}, xs);
    const auto b = spacer_field_profile(g, {0.2, -0.1, 0.4, 0.06}, {0, 0, 0}, xs);
    for (std::size_t i = 0; i < xs.size(); ++i)
        for (int k = 0; k < 3; ++k) EXPECT_NEAR(b[i][k], 2.0 * a[i][k], 1e-12 * std::abs(b[i][k]) + 1e-12);
}

TEST(StrayField, SingleFacetMatchesQuadrature) {
    const auto g = build_reference_preset();
    const auto& f = g.facet("spacer 1");
    const double z = default_ion_height(g);
    const double k = field::sigma_si(0.1) * constants::coulomb_constant;
    const double h = 0.2 * um;
    for (double x : {-150 * um, 0.0, 200 * um}) {
        const auto e = spacer_field_profile(g, {0.1, 0, 0, 0}, {0, 0, 0}, {x})[0];
        auto phi = [&](double px, double py, double pz) {
            return k * oracle::vertical_rectangle_coulomb(f.p0, f.p1, f.z_min, f.z_max, px, py, pz);
        };
        const double ex = -(phi(x + h, 0, z) - phi(x - h, 0, z)) / (2 * h);
        const double ey = -(phi(x, h, z) - phi(x, -h, z)) / (2 * h);
        const double ez = -(phi(x, 0, z + h) - phi(x, 0, z - h)) / (2 * h);
        const double scale = std::hypot(ex, ey, ez);
        EXPECT_NEAR(e[0], ex, 1e-6 * scale);
        EXPECT_NEAR(e[1], ey, 1e-6 * scale);
        EXPECT_NEAR(e[2], ez, 1e-6 * scale);
    }
}

TEST(StrayField, NoiseFreeRoundTrip) {
    const auto g = build_reference_preset();
    const std::array<double, 4> s{-2.12, 0.86, 1.84, 0.39};
    const std::array<double, 3> off{-450.0, -380.0, -900.0};
    const auto f = fit_stray_field(synthetic_stray(g, s, off), g);
    for (int i = 0; i < 4; ++i) EXPECT_NEAR(f.sigma[i], s[i], 1e-8 * std::abs(s[i])) << i;
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(f.offset[k], off[k], 1e-8 * std::abs(off[k])) << k;
    EXPECT_EQ(f.n_obs, 63);
    EXPECT_FALSE(f.weighted);
}

TEST(StrayField, ScaleEquivariant) {
    const auto g = build_reference_preset();
    auto d = synthetic_stray(g, {0.5, -0.3, 0.2, 0.7}, {100, -50, 30});
    std::mt19937_64 rng(4);
    std::normal_distribution<double> n(0.0, 20.0);
    for (auto& r : d.rows)
        for (auto& e : r.e) e += n(rng);
    const auto a = fit_stray_field(d, g);
    for (auto& r : d.rows)
        for (auto& e : r.e) e *= -3.0;
    const auto b = fit_stray_field(d, g);
    for (int i = 0; i < 4; ++i) EXPECT_NEAR(b.sigma[i], -3.0 * a.sigma[i], 1e-9 * std::abs(a.sigma[i]) + 1e-12);
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(b.offset[k], -3.0 * a.offset[k], 1e-9 * std::abs(a.offset[k]) + 1e-9);
}

TEST(StrayField, ErrorsMatchMonteCarloScatter) {
    const auto g = build_reference_preset();
    const std::array<double, 4> s{1.38, 0.63, -2.51, 0.32};
    const std::array<double, 3> off{1310, 210, -1500};
    const auto clean = synthetic_stray(g, s, off);
    const double sn = 50.0;
    std::mt19937_64 rng(77);
    std::normal_distribution<double> n(0.0, sn);
    std::array<std::vector<double>, 7> est;
    StrayFieldFit first;
    for (int seed = 0; seed < 200; ++seed) {
        auto d = clean;
        for (auto& r : d.rows) {
            for (auto& e : r.e) e += n(rng);
            r.err = {sn, sn, sn};
        }
        const auto f = fit_stray_field(d, g);
        if (seed == 0) first = f;
        for (int i = 0; i < 4; ++i) est[i].push_back(f.sigma[i]);
        for (int k = 0; k < 3; ++k) est[4 + k].push_back(f.offset[k]);
    }
    EXPECT_TRUE(first.weighted);
    for (int j = 0; j < 7; ++j) {
        const auto st = repeated_measurement_stats(est[j]);
        const double reported = j < 4 ? first.sigma_err[j] : first.offset_err[j - 4];
        EXPECT_NEAR(reported, st.stddev, 0.2 * st.stddev) << stray_parameter_names[j];
    }
}

TEST(StrayField, DegeneracyNamesCombination) {
    const auto g = build_reference_preset();
    auto d = synthetic_stray(g, {0.5, -0.3, 0.2, 0.7}, {100, -50, 30});
    // Measuring E_y alone: on the axis the facets mirrored in x give the same
    // E_y profile up to x -> -x, but E_x and E_z are needed to separate the
    // offsets; the unidentified directions are named.
    for (auto& r : d.rows) r.e[0] = r.e[2] = std::numeric_limits<double>::quiet_NaN();
    try {
        fit_stray_field(d, g);
        FAIL() << "expected a degenerate fit";
    } catch (const DegenerateFitError& e) {
        const std::string what = e.what();
        EXPECT_NE(what.find("unidentifiable combination"), std::string::npos) << what;
        EXPECT_NE(what.find("[E_offset,"), std::string::npos) << what;
    }
    // all rows at one position: only the summed field is measured
    auto same = synthetic_stray(g, {0.5, -0.3, 0.2, 0.7}, {100, -50, 30});
    for (auto& r : same.rows) {
        r.x = 0.0;
        r.e = same.rows[0].e;
    }
    EXPECT_THROW(fit_stray_field(same, g), DegenerateFitError);
    d.rows.resize(2);
    EXPECT_THROW(fit_stray_field(d, g), InsufficientDataError);
}

TEST(StrayField, RangeWarning) {
    const auto g = build_reference_preset();
    auto d = synthetic_stray(g, {0.5, -0.3, 0.2, 0.7}, {100, -50, 30});
    d.rows[0].x = -300 * um;
    EXPECT_FALSE(fit_stray_field(d, g).warnings.empty());
}

TEST(StrayField, PublishedFixtureLayout) {
    const auto t = published_stray_fits();
    EXPECT_EQ(t[1].label, "trap #2");
    EXPECT_EQ(t[1].sigma[0], 1380);
    EXPECT_EQ(t[1].sigma_err[0], 200);
    EXPECT_EQ(t[1].offset[2], -1500);
    EXPECT_EQ(t[1].offset_err[2], 40);
    EXPECT_EQ(stray_parameter_names[0], "spacer 1");
    EXPECT_EQ(stray_parameter_names[6], "E_offset,z");
}

// ---- CSV ------------------------------------------------------------------------

TEST(Csv, HeatingRoundTrip) {
    auto rows = sequential_rate_rows();
    rows[0].phi_deg = 12.5;
    rows[1].rate = -4.0;
    const auto text = write_heating_csv(rows);
    const auto d = read_heating_csv(text);
    ASSERT_EQ(d.rows.size(), rows.size());
    EXPECT_TRUE(d.has_phi);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        EXPECT_EQ(d.rows[i].mode, rows[i].mode);
        EXPECT_EQ(d.rows[i].rate, rows[i].rate);
        EXPECT_EQ(d.rows[i].rate_err, rows[i].rate_err);
        EXPECT_EQ(d.rows[i].freq_hz, rows[i].freq_hz);
    }
    EXPECT_TRUE(std::isnan(d.rows[2].phi_deg));
    EXPECT_NE(text.find(",1\n"), std::string::npos);  // excluded_from_fit flag
}

TEST(Csv, HeatingErrorsCarryLineNumbers) {
    const std::string head = std::string(heating_header) + "\n";
    try {
        read_heating_csv(head + "axial,1e6,40,5,295,\n# comment\naxial,abc,40,5,295,\n");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 4);
    }
    try {
        read_heating_csv(head + "axial,1e6,40\n");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 2);
    }
    EXPECT_THROW(read_heating_csv("mode,freq_hz\naxial,1\n"), ParseError);
    EXPECT_THROW(read_heating_csv(head.substr(0, head.size() - 1) + ",colour\n"), ParseError);
    EXPECT_THROW(read_heating_csv(head + "axial,-1e6,40,5,295,\n"), ParseError);
    EXPECT_THROW(read_heating_csv(head + "axial,1e6,40,0,295,\n"), ParseError);
    EXPECT_THROW(read_heating_csv(""), InsufficientDataError);
}

TEST(Csv, StrayRoundTripAndErrors) {
    const auto g = build_reference_preset();
    auto d = synthetic_stray(g, {0.5, -0.3, 0.2, 0.7}, {100, -50, 30}, 5);
    d.rows[2].err = {10.0, 20.0, 30.0};
    const auto back = read_stray_csv(write_stray_csv(d), "synthetic");
    ASSERT_EQ(back.rows.size(), 5u);
    for (std::size_t i = 0; i < 5; ++i) {
        EXPECT_EQ(back.rows[i].x, d.rows[i].x);
        for (int k = 0; k < 3; ++k) EXPECT_EQ(back.rows[i].e[k], d.rows[i].e[k]);
    }
    EXPECT_EQ(back.rows[2].err[1], 20.0);
    EXPECT_TRUE(std::isnan(back.rows[0].err[0]));
    EXPECT_TRUE(read_stray_csv("").rows.empty());
    try {
        read_stray_csv(std::string(stray_header) + "\n1e-4,1,2,3,,,\n1e-4,1,x,3,,,\n");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3);
    }
    EXPECT_THROW(read_stray_csv("x_m,Ex,Ey\n0,1,2\n"), ParseError);
}
