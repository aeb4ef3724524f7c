#include <gtest/gtest.h>

#include <iontrap/geometry.hpp>
#include <iontrap/geometry_io.hpp>
#include <iontrap/voltage_set.hpp>

using namespace iontrap;

namespace {

const ElectrodePatch& patch(const TrapGeometry& g, const std::string& id) {
    for (const auto& p : g.patches)
        if (p.id == id) return p;
    throw std::runtime_error("no patch " + id);
}

constexpr double um = 1e-6;

}  // namespace

TEST(Preset, HasNamedElectrodes) {
    const auto g = build_reference_preset();
    for (const char* n : {"A", "B1", "B2", "C1", "C2", "shim 1a", "shim 1b", "shim 2a", "shim 2b",
                          "RF", "top 1", "top 2"})
        EXPECT_TRUE(g.has_electrode(n)) << n;
    EXPECT_EQ(g.electrode_role("RF"), Role::rf);
    EXPECT_EQ(g.electrode_role("top 1"), Role::dc);
    EXPECT_EQ(patch(g, "top 1").plane, Plane::top);
}

TEST(Preset, PublishedDimensions) {
    const auto g = build_reference_preset();
    EXPECT_NEAR(g.plane_separation, 400 * um, 1e-15);
    EXPECT_NEAR(g.slit_width, 550 * um, 1e-15);
    // shims centred 105 um off axis, 100 um wide
    const auto& s = patch(g, "shim 1a").rect;
    EXPECT_NEAR(0.5 * (s.y_min + s.y_max), 105 * um, 1e-12);
    EXPECT_NEAR(s.y_max - s.y_min, 105 * um, 1e-12);  // 100 um strip plus two half gaps
    // RF centred 360 um off axis, 400 um wide (plus half gaps on the inner side)
    const auto& rf = patch(g, "RF a").rect;
    EXPECT_NEAR(0.5 * (157.5 * um + 562.5 * um), 360 * um, 1e-12);
    EXPECT_NEAR(rf.y_min, 157.5 * um, 1e-12);
    EXPECT_NEAR(rf.y_max, 562.5 * um, 1e-12);
    // central island 200 um long
    const auto& a = patch(g, "A").rect;
    EXPECT_NEAR(a.x_max - a.x_min, 200 * um, 1e-12);
    EXPECT_NEAR(patch(g, "B1").rect.x_max - patch(g, "B1").rect.x_min, 200 * um, 1e-12);
}

TEST(Preset, MirrorSymmetricExtents) {
    const auto g = build_reference_preset();
    const std::vector<std::pair<std::string, std::string>> y_pairs{
        {"shim 1a", "shim 1b"}, {"shim 2a", "shim 2b"}, {"RF a", "RF b"}, {"top 1", "top 2"}};
    for (const auto& [a, b] : y_pairs) {
        const auto& ra = patch(g, a).rect;
        const auto& rb = patch(g, b).rect;
        EXPECT_NEAR(ra.y_min, -rb.y_max, 1e-15) << a;
        EXPECT_NEAR(ra.y_max, -rb.y_min, 1e-15) << a;
        EXPECT_NEAR(ra.x_min, rb.x_min, 1e-15) << a;
    }
    for (const auto& [a, b] : std::vector<std::pair<std::string, std::string>>{{"B1", "B2"}, {"C1", "C2"}}) {
        const auto& ra = patch(g, a).rect;
        const auto& rb = patch(g, b).rect;
        EXPECT_NEAR(ra.x_min, -rb.x_max, 1e-15) << a;
        EXPECT_NEAR(ra.y_min, rb.y_min, 1e-15) << a;
    }
}

TEST(Preset, FacetsSpanPlanes) {
    const auto g = build_reference_preset();
    ASSERT_EQ(g.facets.size(), 4u);
    for (int i = 0; i < 4; ++i) {
        const auto& f = g.facet("spacer " + std::to_string(i + 1));
        EXPECT_EQ(f.z_min, 0.0);
        EXPECT_EQ(f.z_max, g.plane_separation);
    }
    // quadrants counter-clockwise from (+x, +y)
    EXPECT_GT(g.facet("spacer 1").p0[0], 0.0);
    EXPECT_GT(g.facet("spacer 1").p0[1], 0.0);
    EXPECT_LT(g.facet("spacer 2").p0[0], 0.0);
    EXPECT_LT(g.facet("spacer 3").p0[1], 0.0);
    EXPECT_GT(g.facet("spacer 4").p0[0], 0.0);
}

TEST(LoadGeometry, SingleGroundPatch) {
    const auto g = load_geometry(R"(
[trap]
plane_separation_um = 100
[plane.bottom]
patch = { id = "g", role = ground, x_min = 0, x_max = 1000, y_min = 0, y_max = 1000 }
)");
    ASSERT_EQ(g.patches.size(), 1u);
    EXPECT_EQ(g.patches[0].role, Role::ground);
    EXPECT_NEAR(g.patches[0].rect.x_max, 1e-3, 1e-15);
}

TEST(LoadGeometry, OverlapRejectedNamingPatches) {
    try {
        load_geometry(R"([trap]
plane_separation_um = 100
[plane.bottom]
patch = { id = "p", role = dc, x_min = 0, x_max = 10, y_min = 0, y_max = 10 }
patch = { id = "q", role = dc, x_min = 5, x_max = 15, y_min = 5, y_max = 15 }
)");
        FAIL() << "expected a validation error";
    } catch (const ValidationError& e) {
        const std::string what = e.what();
        EXPECT_NE(what.find("'p'"), std::string::npos);
        EXPECT_NE(what.find("'q'"), std::string::npos);
    }
}

TEST(LoadGeometry, ParseErrorCarriesLine) {
    try {
        load_geometry("[trap]\nplane_separation_um = 100\n[plane.bottom]\npatch = { id = \"p\", role = dc, x_min = abc }\n");
        FAIL() << "expected a parse error";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 4);
    }
    EXPECT_THROW(load_geometry("[nonsense]\n"), ParseError);
}

TEST(LoadGeometry, MalformedRectangleRejected) {
    EXPECT_THROW(load_geometry("[trap]\nplane_separation_um = 100\n[plane.top]\n"
                               "patch = { id = \"p\", role = dc, x_min = 10, x_max = 0, y_min = 0, y_max = 1 }\n"),
                 ValidationError);
}

TEST(LoadGeometry, PresetRoundTrip) {
    const auto g = build_reference_preset();
    const auto text = serialize_geometry(g);
    const auto h = load_geometry(text);
    EXPECT_TRUE(approx_equal(g, h));
    EXPECT_EQ(serialize_geometry(h), text);
}

TEST(Geometry, ShiftAndSeparation) {
    const auto g = build_reference_preset();
    const auto s = shift_top_plane(g, 3 * um);
    EXPECT_NEAR(patch(s, "top 1").rect.y_min - patch(g, "top 1").rect.y_min, 3 * um, 1e-18);
    EXPECT_EQ(patch(s, "A").rect.y_min, patch(g, "A").rect.y_min);
    const auto d = with_plane_separation(g, 410 * um);
    EXPECT_EQ(d.plane_separation, 410 * um);
    for (const auto& f : d.facets) EXPECT_EQ(f.z_max, 410 * um);
}

TEST(VoltageSets, PresetsValidate) {
    const auto g = build_reference_preset();
    for (const char* n : {"1eV", "0.2eV"}) EXPECT_NO_THROW(validate(preset_voltages(n), g));
    EXPECT_DOUBLE_EQ(preset_voltages("1eV").at("shim 2b"), -24.03);
    EXPECT_DOUBLE_EQ(preset_voltages("0.2eV").at("A"), -1.07);
    EXPECT_THROW(preset_voltages("5eV"), ConfigError);
}

TEST(VoltageSets, LimitsAndUnknownNames) {
    const auto g = build_reference_preset();
    VoltageSet v;
    v["A"] = 31.0;
    EXPECT_THROW(validate(v, g), ConfigError);
    EXPECT_NO_THROW(validate(v, g, 40.0));
    VoltageSet u;
    u["Z"] = 1.0;
    EXPECT_THROW(validate(u, g), ConfigError);
    VoltageSet r;
    r["RF"] = 1.0;
    EXPECT_THROW(validate(r, g), ConfigError);
}

TEST(VoltageSets, TextRoundTrip) {
    const auto v = preset_voltages("1eV");
    EXPECT_EQ(parse_voltage_set(serialize_voltage_set(v)), v);
    EXPECT_THROW(parse_voltage_set("A = 1\nA = 2\n"), ParseError);
    EXPECT_THROW(parse_voltage_set("A 1\n"), ParseError);
}
