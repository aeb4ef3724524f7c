#pragma once

// Two-plane electrode layouts, dielectric spacer facets and the reference
// trap preset.
//
// Coordinates: x along the trap axis, y lateral, z normal to the planes. The
// bottom plane sits at z = 0 and the top plane at z = plane_separation. All
// lengths are meters. Plane area not covered by a patch is grounded, except
// for the optional slit in the top plane, which is an open aperture.

#include <algorithm>
#include <array>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "constants.hpp"
#include "errors.hpp"

namespace iontrap {

struct Rect {
    double x_min = 0.0;
    double x_max = 0.0;
    double y_min = 0.0;
    double y_max = 0.0;

    double width() const { return x_max - x_min; }
    double height() const { return y_max - y_min; }
    double area() const { return width() * height(); }

    bool interiors_overlap(const Rect& o) const {
        return x_min < o.x_max && o.x_min < x_max && y_min < o.y_max && o.y_min < y_max;
    }

    bool operator==(const Rect&) const = default;
};

enum class Plane { bottom, top };
enum class Role { dc, rf, ground };

inline const char* to_string(Plane p) { return p == Plane::bottom ? "bottom" : "top"; }

inline const char* to_string(Role r) {
    switch (r) {
        case Role::dc: return "dc";
        case Role::rf: return "rf";
        case Role::ground: return "ground";
    }
    return "dc";
}

// One rectangular piece of an electrode. Several patches may share an
// electrode name (the RF electrode has one patch on each side of the axis);
// voltages are applied per electrode.
struct ElectrodePatch {
    std::string id;
    std::string electrode;
    Plane plane = Plane::bottom;
    Rect rect;
    Role role = Role::dc;

    bool operator==(const ElectrodePatch&) const = default;
};

// Vertical dielectric sidewall between the planes: the segment p0 -> p1 in the
// xy-plane swept over z in [z_min, z_max].
struct SpacerFacet {
    std::string id;
    std::array<double, 2> p0{};
    std::array<double, 2> p1{};
    double z_min = 0.0;
    double z_max = 0.0;
    std::string notes;

    double length() const { return std::hypot(p1[0] - p0[0], p1[1] - p0[1]); }
    double area() const { return length() * (z_max - z_min); }

    bool operator==(const SpacerFacet&) const = default;
};

struct TrapGeometry {
    double plane_separation = 0.0;
    // Open slit in the top plane: |y - slit_center_y| < slit_width / 2 for
    // |x| < slit_length / 2. A zero width means no aperture.
    double slit_width = 0.0;
    double slit_center_y = 0.0;
    double slit_length = 0.0;
    std::vector<ElectrodePatch> patches;
    std::vector<SpacerFacet> facets;

    bool has_slit() const { return slit_width > 0.0 && slit_length > 0.0; }

    Rect slit_rect() const {
        return {-0.5 * slit_length, 0.5 * slit_length, slit_center_y - 0.5 * slit_width,
                slit_center_y + 0.5 * slit_width};
    }

    // Electrode names in first-appearance order.
    std::vector<std::string> electrodes() const {
        std::vector<std::string> out;
        for (const auto& p : patches)
            if (std::find(out.begin(), out.end(), p.electrode) == out.end())
                out.push_back(p.electrode);
        return out;
    }

    bool has_electrode(const std::string& name) const {
        return std::any_of(patches.begin(), patches.end(),
                           [&](const ElectrodePatch& p) { return p.electrode == name; });
    }

    Role electrode_role(const std::string& name) const {
        for (const auto& p : patches)
            if (p.electrode == name) return p.role;
        throw ConfigError("unknown electrode '" + name + "'");
    }

    const SpacerFacet& facet(const std::string& id) const {
        for (const auto& f : facets)
            if (f.id == id) return f;
        throw ConfigError("unknown spacer facet '" + id + "'");
    }

    bool operator==(const TrapGeometry&) const = default;
};

// Throws ValidationError naming the offending patches or facets.
inline void validate(const TrapGeometry& g) {
    if (!(g.plane_separation > 0.0) || !std::isfinite(g.plane_separation))
        throw ValidationError("plane separation must be positive");
    if (g.slit_width < 0.0 || g.slit_length < 0.0)
        throw ValidationError("slit dimensions must be non-negative");
    if (g.patches.empty()) throw ValidationError("geometry has no electrode patches");

    std::set<std::string> ids;
    for (const auto& p : g.patches) {
        if (p.id.empty()) throw ValidationError("patch with empty id");
        if (!ids.insert(p.id).second) throw ValidationError("duplicate patch id '" + p.id + "'");
        const Rect& r = p.rect;
        if (!std::isfinite(r.x_min) || !std::isfinite(r.x_max) || !std::isfinite(r.y_min) ||
            !std::isfinite(r.y_max) || !(r.x_max > r.x_min) || !(r.y_max > r.y_min))
            throw ValidationError("patch '" + p.id + "' has a malformed rectangle");
        if (p.electrode.empty())
            throw ValidationError("patch '" + p.id + "' has no electrode name");
    }
    for (std::size_t i = 0; i < g.patches.size(); ++i) {
        for (std::size_t k = i + 1; k < g.patches.size(); ++k) {
            const auto& a = g.patches[i];
            const auto& b = g.patches[k];
            if (a.plane == b.plane && a.rect.interiors_overlap(b.rect))
                throw ValidationError("patches '" + a.id + "' and '" + b.id + "' overlap");
        }
        const auto& a = g.patches[i];
        if (g.has_slit() && a.plane == Plane::top && a.rect.interiors_overlap(g.slit_rect()))
            throw ValidationError("patch '" + a.id + "' covers the slit aperture");
    }
    for (const auto& p : g.patches) {
        for (const auto& q : g.patches) {
            if (p.electrode == q.electrode && (p.role != q.role || p.plane != q.plane))
                throw ValidationError("patches '" + p.id + "' and '" + q.id +
                                      "' of one electrode differ in role or plane");
        }
    }

    std::set<std::string> fids;
    const double tol = 1e-12 * g.plane_separation;
    for (const auto& f : g.facets) {
        if (!fids.insert(f.id).second)
            throw ValidationError("duplicate spacer facet id '" + f.id + "'");
        if (!(f.length() > 0.0))
            throw ValidationError("spacer facet '" + f.id + "' has zero length");
        if (std::abs(f.z_min) > tol || std::abs(f.z_max - g.plane_separation) > tol)
            throw ValidationError("spacer facet '" + f.id + "' does not span the planes");
    }
}

// Reference layout. The published numbers fix the plane separation (400 um),
// the slit (550 um), the shim strips (centred 105 um off axis, 100 um wide),
// the RF strips (centred 360 um off axis, 400 um wide) and the 200 um central
// islands. Everything else is inferred and listed here:
//   - gaps are split midway (gapless plane): the 5 um gaps between the outer
//     edge of the shim strip (155 um) and the inner edge of the RF strip
//     (160 um) and between the central islands and shims 1 become boundaries
//     at 157.5 um and 52.5 um;
//   - the central row is A (|x| < 100 um), B1/B2 (100..300 um, B1 on +x) and
//     C1/C2 (300..1400 um, C1 on +x); beyond 1400 um the row is grounded;
//   - outer shims 2a/2b cover 562.5 um .. 2 mm laterally, "a" on +y;
//   - all long electrodes and the slit run over |x| < 2 mm;
//   - top electrodes cover 275 um .. 2 mm on either side of the slit;
//   - spacer sidewalls are chords at 1.1 mm radius between 10 and 35 degrees
//     from the axis, one per quadrant, numbered counter-clockwise from +x+y.
inline TrapGeometry build_reference_preset() {
    constexpr double um = constants::micrometer;
    constexpr double d = 400.0 * um;
    constexpr double half_length = 2000.0 * um;
    constexpr double lateral = 2000.0 * um;
    constexpr double y_island = 52.5 * um;
    constexpr double y_shim = 157.5 * um;
    constexpr double y_rf = 562.5 * um;
    constexpr double slit = 550.0 * um;
    constexpr double x_a = 100.0 * um;
    constexpr double x_b = 300.0 * um;
    constexpr double x_c = 1400.0 * um;

    TrapGeometry g;
    g.plane_separation = d;
    g.slit_width = slit;
    g.slit_center_y = 0.0;
    g.slit_length = 2.0 * half_length;

    auto add = [&](std::string id, std::string electrode, Plane plane, Rect r, Role role) {
        g.patches.push_back({std::move(id), std::move(electrode), plane, r, role});
    };
    const double L = half_length;
    add("A", "A", Plane::bottom, {-x_a, x_a, -y_island, y_island}, Role::dc);
    add("B1", "B1", Plane::bottom, {x_a, x_b, -y_island, y_island}, Role::dc);
    add("B2", "B2", Plane::bottom, {-x_b, -x_a, -y_island, y_island}, Role::dc);
    add("C1", "C1", Plane::bottom, {x_b, x_c, -y_island, y_island}, Role::dc);
    add("C2", "C2", Plane::bottom, {-x_c, -x_b, -y_island, y_island}, Role::dc);
    add("shim 1a", "shim 1a", Plane::bottom, {-L, L, y_island, y_shim}, Role::dc);
    add("shim 1b", "shim 1b", Plane::bottom, {-L, L, -y_shim, -y_island}, Role::dc);
    add("RF a", "RF", Plane::bottom, {-L, L, y_shim, y_rf}, Role::rf);
    add("RF b", "RF", Plane::bottom, {-L, L, -y_rf, -y_shim}, Role::rf);
    add("shim 2a", "shim 2a", Plane::bottom, {-L, L, y_rf, lateral}, Role::dc);
    add("shim 2b", "shim 2b", Plane::bottom, {-L, L, -lateral, -y_rf}, Role::dc);
    add("top 1", "top 1", Plane::top, {-L, L, 0.5 * slit, lateral}, Role::dc);
    add("top 2", "top 2", Plane::top, {-L, L, -lateral, -0.5 * slit}, Role::dc);

    const double r = 1100.0 * um;
    const double a0 = 10.0 * constants::pi / 180.0;
    const double a1 = 35.0 * constants::pi / 180.0;
    const std::array<std::array<double, 2>, 4> quadrant{{{1, 1}, {-1, 1}, {-1, -1}, {1, -1}}};
    const std::array<const char*, 4> notes{
        "+x +y sidewall", "-x +y sidewall", "-x -y sidewall", "+x -y sidewall"};
    for (int i = 0; i < 4; ++i) {
        const double sx = quadrant[i][0];
        const double sy = quadrant[i][1];
        SpacerFacet f;
        f.id = "spacer " + std::to_string(i + 1);
        f.p0 = {sx * r * std::cos(a0), sy * r * std::sin(a0)};
        f.p1 = {sx * r * std::cos(a1), sy * r * std::sin(a1)};
        f.z_min = 0.0;
        f.z_max = d;
        f.notes = notes[i];
        g.facets.push_back(f);
    }
    validate(g);
    return g;
}

// Rigid lateral displacement of the top wafer (electrodes and slit).
inline TrapGeometry shift_top_plane(TrapGeometry g, double dy) {
    for (auto& p : g.patches) {
        if (p.plane != Plane::top) continue;
        p.rect.y_min += dy;
        p.rect.y_max += dy;
    }
    g.slit_center_y += dy;
    return g;
}

// Changes the plane separation, keeping the bottom plane at z = 0. Facets are
// stretched to keep spanning the planes.
inline TrapGeometry with_plane_separation(TrapGeometry g, double d) {
    g.plane_separation = d;
    for (auto& f : g.facets) {
        f.z_min = 0.0;
        f.z_max = d;
    }
    return g;
}

// Field-by-field comparison with a relative tolerance on lengths (text
// round trips go through micrometers and may differ in the last bit).
inline bool approx_equal(const TrapGeometry& a, const TrapGeometry& b, double rel = 1e-12) {
    const double scale = std::max(a.plane_separation, b.plane_separation);
    auto close = [&](double u, double v) { return std::abs(u - v) <= rel * scale; };
    if (!close(a.plane_separation, b.plane_separation) || !close(a.slit_width, b.slit_width) ||
        !close(a.slit_center_y, b.slit_center_y) || !close(a.slit_length, b.slit_length))
        return false;
    if (a.patches.size() != b.patches.size() || a.facets.size() != b.facets.size()) return false;
    for (std::size_t i = 0; i < a.patches.size(); ++i) {
        const auto& p = a.patches[i];
        const auto& q = b.patches[i];
        if (p.id != q.id || p.electrode != q.electrode || p.plane != q.plane || p.role != q.role)
            return false;
        if (!close(p.rect.x_min, q.rect.x_min) || !close(p.rect.x_max, q.rect.x_max) ||
            !close(p.rect.y_min, q.rect.y_min) || !close(p.rect.y_max, q.rect.y_max))
            return false;
    }
    for (std::size_t i = 0; i < a.facets.size(); ++i) {
        const auto& f = a.facets[i];
        const auto& h = b.facets[i];
        if (f.id != h.id || f.notes != h.notes) return false;
        if (!close(f.p0[0], h.p0[0]) || !close(f.p0[1], h.p0[1]) || !close(f.p1[0], h.p1[0]) ||
            !close(f.p1[1], h.p1[1]) || !close(f.z_min, h.z_min) || !close(f.z_max, h.z_max))
            return false;
    }
    return true;
}

}  // namespace iontrap
