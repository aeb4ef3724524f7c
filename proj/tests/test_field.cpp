#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include <iontrap/field/basis.hpp>
#include <iontrap/field/charged_facet.hpp>
#include <iontrap/field/electrostatics.hpp>
#include <iontrap/geometry.hpp>
#include <iontrap/voltage_set.hpp>

#include "oracles.hpp"

using namespace iontrap;
using namespace iontrap::field;

namespace {

constexpr double um = 1e-6;

// Slab potential of a bottom-plane patch from the single-plane kernel by the
// alternating image series; terms far out use the point-patch limit.
double slab_oracle(const Rect& r, const Point& p, double d) {
    const double cx = 0.5 * (r.x_min + r.x_max), cy = 0.5 * (r.y_min + r.y_max);
    const double rho2 = (p[0] - cx) * (p[0] - cx) + (p[1] - cy) * (p[1] - cy);
    auto f = [&](double z, bool exact) {
        if (exact) return oracle::rectangle_potential(r.x_min, r.x_max, r.y_min, r.y_max, p[0], p[1], z, 1e-13);
        return r.area() * z / (2.0 * oracle::pi * std::pow(rho2 + z * z, 1.5));
    };
    double s = 0.0;
    for (int n = 0; n < 200000; ++n) {
        const bool exact = n < 30;
        s += f(p[2] + 2.0 * n * d, exact) - f(2.0 * (n + 1) * d - p[2], exact);
    }
    return s;
}

}  // namespace

TEST(RectangleKernel, MatchesQuadratureOnRandomRectangles) {
    std::mt19937_64 rng(20240611);
    std::uniform_real_distribution<double> pos(-300.0, 300.0), size(5.0, 400.0), height(5.0, 400.0);
    for (int i = 0; i < 100; ++i) {
        const double x0 = pos(rng), y0 = pos(rng);
        const Rect r{x0 * um, (x0 + size(rng)) * um, y0 * um, (y0 + size(rng)) * um};
        const Point p{pos(rng) * um, pos(rng) * um, height(rng) * um};
        const double got = rectangle_patch_potential(r, Plane::bottom, p);
        const double want = oracle::rectangle_potential(r.x_min, r.x_max, r.y_min, r.y_max, p[0], p[1], p[2]);
        EXPECT_NEAR(got, want, 1e-8 * std::abs(want) + 1e-15) << "case " << i;
    }
}

TEST(RectangleKernel, TopPlaneMirrorsBottom) {
    const Rect r{-50 * um, 80 * um, 10 * um, 200 * um};
    const double d = 400 * um;
    const Point p{20 * um, 30 * um, 150 * um};
    const Point q{20 * um, 30 * um, d - 150 * um};
    EXPECT_NEAR(rectangle_patch_potential(r, Plane::top, q, d), rectangle_patch_potential(r, Plane::bottom, p),
                1e-14);
}

TEST(RectangleKernel, HalfPlaneLimitAndBoundary) {
    // Very large patch under the point: potential -> 1.
    const Rect big{-1.0, 1.0, -1.0, 1.0};
    EXPECT_NEAR(rectangle_patch_potential(big, Plane::bottom, {0, 0, 1 * um}), 1.0, 1e-5);
    EXPECT_THROW(rectangle_patch_potential(big, Plane::bottom, {0, 0, 0}), BoundaryEvaluationError);
    EXPECT_THROW(rectangle_patch_potential(big, Plane::bottom, {0, 0, -1 * um}), BoundaryEvaluationError);
}

TEST(SlabImages, MatchesImageSeriesOracle) {
    const double d = 400 * um;
    const Rect r{-100 * um, 100 * um, -52.5 * um, 52.5 * um};
    for (const Point& p : {Point{0, 0, 200 * um}, Point{150 * um, 60 * um, 50 * um}, Point{-30 * um, 0, 350 * um}}) {
        BasisPotential b("A", d, 10);
        b.add_rectangle(r, Plane::bottom, 1.0);
        const double want = slab_oracle(r, p, d);
        EXPECT_NEAR(b.value(p), want, 1e-7 * std::abs(want)) << p[2];
    }
}

TEST(SlabImages, OrderConvergence) {
    const double d = 400 * um;
    const Rect r{-300 * um, 300 * um, 157.5 * um, 562.5 * um};
    for (double z : {50.0, 200.0, 350.0}) {
        const Point p{40 * um, -20 * um, z * um};
        BasisPotential b10("RF", d, 10), b20("RF", d, 20);
        b10.add_rectangle(r, Plane::bottom, 1.0);
        b20.add_rectangle(r, Plane::bottom, 1.0);
        EXPECT_NEAR(b10.value(p), b20.value(p), 1e-6 * std::abs(b20.value(p)));
        const Jet j10 = b10.jet(p), j20 = b20.jet(p);
        for (int k = 0; k < 6; ++k) EXPECT_NEAR(j10.h[k], j20.h[k], 1e-5 * std::abs(j20.v) / (um * um)) << k;
    }
    EXPECT_THROW(apply_image_correction(BasisPotential("x", 0.0, 0), d, -1), ConfigError);
}

TEST(SlabImages, PresetCentreConvergence) {
    const auto g = build_reference_preset();
    FieldOptions o10, o20;
    o20.image_order = 20;
    const ElectrodeSystem s10(g, o10), s20(g, o20);
    const Point p{0, 0, 200 * um};
    const double r10 = s10.rf_sources().value(p), r20 = s20.rf_sources().value(p);
    EXPECT_LT(std::abs(r10 - r20), 1e-4 * std::abs(r20));
    const auto v = preset_voltages("1eV");
    const double d10 = assemble_field(s10, v, p).potential, d20 = assemble_field(s20, v, p).potential;
    EXPECT_LT(std::abs(d10 - d20), 1e-4 * std::abs(d20));
}

TEST(SlabImages, VanishesOnTopPlane) {
    const double d = 400 * um;
    BasisPotential b("A", d, 10);
    b.add_rectangle({-100 * um, 100 * um, -50 * um, 50 * um}, Plane::bottom, 1.0);
    // linear approach to zero at the grounded top plane
    const double a = b.value({0, 0, d - 1e-8}), c = b.value({0, 0, d - 2e-8});
    EXPECT_NEAR(c, 2.0 * a, 1e-8);
    EXPECT_LT(std::abs(a), 1e-5);
    EXPECT_THROW(b.value({0, 0, d}), BoundaryEvaluationError);
}

TEST(Electrostatics, LaplaceResidualOnGrid) {
    const auto g = build_reference_preset();
    const ElectrodeSystem sys(g);
    const auto dc = sys.dc_sources(preset_voltages("1eV"));
    const auto rf = sys.rf_sources();
    double worst = 0.0;
    const int n = 20;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
                const Point p{(-300.0 + 600.0 * i / (n - 1)) * um, (-300.0 + 600.0 * j / (n - 1)) * um,
                              (30.0 + 340.0 * k / (n - 1)) * um};
                for (const auto* b : {&dc, &rf}) {
                    const Jet J = b->jet(p);
                    const double lap = J.hess(0, 0) + J.hess(1, 1) + J.hess(2, 2);
                    const double scale = std::abs(J.hess(0, 0)) + std::abs(J.hess(1, 1)) + std::abs(J.hess(2, 2)) + 1.0;
                    worst = std::max(worst, std::abs(lap) / scale);
                }
            }
    EXPECT_LT(worst, 1e-8);
}

TEST(Electrostatics, DerivativesMatchFiniteDifferences) {
    const auto g = build_reference_preset();
    const ElectrodeSystem sys(g);
    const auto dc = sys.dc_sources(preset_voltages("1eV"));
    const double h = 0.5 * um;
    for (const Point& p : {Point{0, 0, 200 * um}, Point{80 * um, -40 * um, 120 * um}, Point{-150 * um, 90 * um, 300 * um}}) {
        const Jet J = dc.jet(p);
        for (int a = 0; a < 3; ++a) {
            auto at = [&](double s) {
                Point q = p;
                q[a] += s;
                return q;
            };
            const double fd = (-dc.value(at(2 * h)) + 8 * dc.value(at(h)) - 8 * dc.value(at(-h)) + dc.value(at(-2 * h))) /
                              (12 * h);
            EXPECT_NEAR(J.g[a], fd, 1e-6 * std::abs(J.g[a]) + 1e-3) << a;
            for (int c = 0; c < 3; ++c) {
                auto ga = [&](double s) {
                    Point q = p;
                    q[c] += s;
                    return dc.jet(q).g[a];
                };
                const double fd2 = (-ga(2 * h) + 8 * ga(h) - 8 * ga(-h) + ga(-2 * h)) / (12 * h);
                EXPECT_NEAR(J.hess(a, c), fd2, 1e-6 * std::abs(J.hess(a, c)) + 1.0) << a << c;
            }
        }
        const auto gd = dc.gradient(p);
        for (int a = 0; a < 3; ++a) EXPECT_NEAR(gd.d[a], J.g[a], 1e-12 * std::abs(J.g[a]) + 1e-9);
    }
}

TEST(Electrostatics, SuperpositionAndUnknownNames) {
    const auto g = build_reference_preset();
    const ElectrodeSystem sys(g);
    const Point p{10 * um, 5 * um, 180 * um};
    const auto v = preset_voltages("1eV");
    double direct = 0.0;
    for (const auto& [name, value] : v.volts) direct += value * sys.basis(name).value(p);
    EXPECT_NEAR(assemble_field(sys, v, p).potential, direct, 1e-12);
    VoltageSet bad;
    bad["nope"] = 1.0;
    EXPECT_THROW(assemble_field(sys, bad, p), ConfigError);
    EXPECT_THROW(sys.basis("nope"), ConfigError);
    EXPECT_THROW(assemble_field(sys, v, {0, 0, 0}), BoundaryEvaluationError);
}

TEST(Electrostatics, MirrorSymmetryOfRfPotential) {
    const auto g = build_reference_preset();
    const ElectrodeSystem sys(g);
    const auto rf = sys.rf_sources();
    const Point p{70 * um, 40 * um, 220 * um};
    const double v = rf.value(p);
    EXPECT_NEAR(rf.value({-p[0], p[1], p[2]}), v, 1e-12);
    EXPECT_NEAR(rf.value({p[0], -p[1], p[2]}), v, 1e-12);
}

TEST(ChargedFacet, MatchesCoulombQuadrature) {
    const SpacerFacet f{"s", {300 * um, 500 * um}, {900 * um, 500 * um}, 0.0, 400 * um, ""};
    const double sigma = 0.05;  // e/um^2
    const double k = sigma_si(sigma) * constants::coulomb_constant;
    for (const Point& p : {Point{0, 0, 200 * um}, Point{600 * um, 450 * um, 100 * um}, Point{1000 * um, 700 * um, 380 * um}}) {
        const double want = k * oracle::vertical_rectangle_coulomb(f.p0, f.p1, f.z_min, f.z_max, p[0], p[1], p[2]);
        const double got = facet_potential(f, sigma, p[0], p[1], p[2]);
        EXPECT_NEAR(got, want, 1e-6 * std::abs(want)) << p[1];
    }
}

TEST(ChargedFacet, FieldSignAndBoundary) {
    const SpacerFacet f{"s", {-500 * um, 500 * um}, {500 * um, 500 * um}, 0.0, 400 * um, ""};
    // positive sheet at y = 500 um pushes a test charge at the axis toward -y
    const auto e = charged_facet_field(f, 0.1, {0, 0, 200 * um});
    EXPECT_LT(e[1], 0.0);
    EXPECT_NEAR(e[0], 0.0, 1e-9 * std::abs(e[1]));
    const auto e2 = charged_facet_field(f, -0.1, {0, 0, 200 * um});
    EXPECT_NEAR(e2[1], -e[1], 1e-12 * std::abs(e[1]));
    EXPECT_THROW(facet_potential(f, 0.1, 0.0, 500 * um, 200 * um), BoundaryEvaluationError);
    const SpacerFacet bad{"z", {0, 0}, {0, 0}, 0.0, 1.0, ""};
    EXPECT_THROW(charged_facet_field(bad, 0.1, {0, 1, 1}), ConfigError);
}
