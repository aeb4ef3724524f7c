#pragma once

// Geometry config text format.
//
//   # comments start with '#'
//   [trap]
//   plane_separation_um = 400
//   slit_width_um = 550          # optional, default 0 (no slit)
//   slit_center_y_um = 0         # optional
//   slit_length_um = 4000        # optional
//
//   [plane.bottom]
//   patch = { id = "RF a", electrode = "RF", role = rf, x_min = -2000, x_max = 2000, y_min = 157.5, y_max = 562.5 }
//
//   [plane.top]
//   patch = { id = "top 1", role = dc, x_min = ..., x_max = ..., y_min = ..., y_max = ... }
//
//   [spacer]
//   facet = { id = "spacer 1", x0 = ..., y0 = ..., x1 = ..., y1 = ..., notes = "..." }
//
// Lengths are micrometers. `electrode` defaults to the patch id; `role` is
// one of dc, rf, ground. Facets span the full plane separation.
// serialize_geometry(build_reference_preset()) is the reference example.

#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "constants.hpp"
#include "errors.hpp"
#include "geometry.hpp"
#include "text.hpp"

namespace iontrap {

namespace detail {

using Record = std::vector<std::pair<std::string, std::string>>;

// Parses `{ key = value, key = "quoted, value", ... }`.
inline Record parse_record(std::string_view s, int line) {
    s = text::trim(s);
    if (s.size() < 2 || s.front() != '{' || s.back() != '}')
        throw ParseError("expected a { ... } record", line);
    s = s.substr(1, s.size() - 2);
    Record out;
    std::size_t i = 0;
    auto skip_ws = [&] {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    };
    while (true) {
        skip_ws();
        if (i >= s.size()) break;
        const std::size_t eq = s.find('=', i);
        if (eq == std::string_view::npos) throw ParseError("expected key = value", line);
        std::string key(text::trim(s.substr(i, eq - i)));
        if (key.empty()) throw ParseError("empty key in record", line);
        i = eq + 1;
        skip_ws();
        std::string value;
        if (i < s.size() && s[i] == '"') {
            ++i;
            bool closed = false;
            while (i < s.size()) {
                if (s[i] == '\\' && i + 1 < s.size()) {
                    value += s[i + 1];
                    i += 2;
                    continue;
                }
                if (s[i] == '"') {
                    closed = true;
                    ++i;
                    break;
                }
                value += s[i++];
            }
            if (!closed) throw ParseError("unterminated string", line);
            skip_ws();
        } else {
            const std::size_t comma = s.find(',', i);
            const std::size_t stop = comma == std::string_view::npos ? s.size() : comma;
            value = std::string(text::trim(s.substr(i, stop - i)));
            if (value.empty()) throw ParseError("missing value for '" + key + "'", line);
            i = stop;
        }
        for (const auto& kv : out)
            if (kv.first == key) throw ParseError("duplicate key '" + key + "'", line);
        out.emplace_back(std::move(key), std::move(value));
        if (i < s.size()) {
            if (s[i] != ',') throw ParseError("expected ',' between record fields", line);
            ++i;
        }
    }
    return out;
}

inline const std::string* find_field(const Record& r, const std::string& key) {
    for (const auto& kv : r)
        if (kv.first == key) return &kv.second;
    return nullptr;
}

inline double number_field(const Record& r, const std::string& key, int line) {
    const std::string* v = find_field(r, key);
    if (!v) throw ParseError("missing field '" + key + "'", line);
    double out = 0.0;
    if (!text::parse_double(*v, out))
        throw ParseError("field '" + key + "' is not a number: '" + *v + "'", line);
    return out;
}

inline void check_keys(const Record& r, std::initializer_list<const char*> allowed, int line) {
    for (const auto& kv : r) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || kv.first == a;
        if (!ok) throw ParseError("unknown field '" + kv.first + "'", line);
    }
}

inline std::string um(double meters) { return text::format_double(meters / constants::micrometer); }

}  // namespace detail

inline TrapGeometry load_geometry(const std::string& config_text) {
    constexpr double um = constants::micrometer;
    TrapGeometry g;
    bool have_separation = false;
    std::string section;
    std::istringstream in(config_text);
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const auto s = text::trim(text::strip_comment(raw));
        if (s.empty()) continue;
        if (s.front() == '[') {
            if (s.back() != ']') throw ParseError("malformed section header", line);
            section = std::string(text::trim(s.substr(1, s.size() - 2)));
            if (section != "trap" && section != "plane.bottom" && section != "plane.top" &&
                section != "spacer")
                throw ParseError("unknown section [" + section + "]", line);
            continue;
        }
        const auto eq = s.find('=');
        if (eq == std::string_view::npos) throw ParseError("expected key = value", line);
        const std::string key(text::trim(s.substr(0, eq)));
        const auto value = text::trim(s.substr(eq + 1));
        if (section.empty()) throw ParseError("entry outside of any section", line);

        if (section == "trap") {
            double v = 0.0;
            if (!text::parse_double(value, v))
                throw ParseError("'" + key + "' is not a number", line);
            if (key == "plane_separation_um") {
                g.plane_separation = v * um;
                have_separation = true;
            } else if (key == "slit_width_um") {
                g.slit_width = v * um;
            } else if (key == "slit_center_y_um") {
                g.slit_center_y = v * um;
            } else if (key == "slit_length_um") {
                g.slit_length = v * um;
            } else {
                throw ParseError("unknown [trap] key '" + key + "'", line);
            }
        } else if (section == "spacer") {
            if (key != "facet") throw ParseError("expected 'facet = { ... }'", line);
            const auto r = detail::parse_record(value, line);
            detail::check_keys(r, {"id", "x0", "y0", "x1", "y1", "notes"}, line);
            SpacerFacet f;
            const std::string* id = detail::find_field(r, "id");
            if (!id) throw ParseError("missing field 'id'", line);
            f.id = *id;
            f.p0 = {detail::number_field(r, "x0", line) * um, detail::number_field(r, "y0", line) * um};
            f.p1 = {detail::number_field(r, "x1", line) * um, detail::number_field(r, "y1", line) * um};
            if (const std::string* n = detail::find_field(r, "notes")) f.notes = *n;
            g.facets.push_back(std::move(f));
        } else {
            if (key != "patch") throw ParseError("expected 'patch = { ... }'", line);
            const auto r = detail::parse_record(value, line);
            detail::check_keys(r, {"id", "electrode", "role", "x_min", "x_max", "y_min", "y_max"},
                               line);
            ElectrodePatch p;
            const std::string* id = detail::find_field(r, "id");
            if (!id) throw ParseError("missing field 'id'", line);
            p.id = *id;
            const std::string* el = detail::find_field(r, "electrode");
            p.electrode = el ? *el : p.id;
            p.plane = section == "plane.bottom" ? Plane::bottom : Plane::top;
            const std::string* role = detail::find_field(r, "role");
            if (!role) throw ParseError("missing field 'role'", line);
            if (*role == "dc") p.role = Role::dc;
            else if (*role == "rf") p.role = Role::rf;
            else if (*role == "ground") p.role = Role::ground;
            else throw ParseError("unknown role '" + *role + "'", line);
            p.rect = {detail::number_field(r, "x_min", line) * um,
                      detail::number_field(r, "x_max", line) * um,
                      detail::number_field(r, "y_min", line) * um,
                      detail::number_field(r, "y_max", line) * um};
            g.patches.push_back(std::move(p));
        }
    }
    if (!have_separation) throw ValidationError("[trap] plane_separation_um is required");
    for (auto& f : g.facets) {
        f.z_min = 0.0;
        f.z_max = g.plane_separation;
    }
    validate(g);
    return g;
}

inline std::string serialize_geometry(const TrapGeometry& g) {
    using detail::um;
    std::ostringstream o;
    o << "[trap]\n";
    o << "plane_separation_um = " << um(g.plane_separation) << "\n";
    o << "slit_width_um = " << um(g.slit_width) << "\n";
    o << "slit_center_y_um = " << um(g.slit_center_y) << "\n";
    o << "slit_length_um = " << um(g.slit_length) << "\n";
    for (Plane plane : {Plane::bottom, Plane::top}) {
        o << "\n[plane." << to_string(plane) << "]\n";
        for (const auto& p : g.patches) {
            if (p.plane != plane) continue;
            o << "patch = { id = " << text::quote(p.id) << ", electrode = " << text::quote(p.electrode)
              << ", role = " << to_string(p.role) << ", x_min = " << um(p.rect.x_min)
              << ", x_max = " << um(p.rect.x_max) << ", y_min = " << um(p.rect.y_min)
              << ", y_max = " << um(p.rect.y_max) << " }\n";
        }
    }
    if (!g.facets.empty()) {
        o << "\n[spacer]\n";
        for (const auto& f : g.facets) {
            o << "facet = { id = " << text::quote(f.id) << ", x0 = " << um(f.p0[0])
              << ", y0 = " << um(f.p0[1]) << ", x1 = " << um(f.p1[0]) << ", y1 = " << um(f.p1[1])
              << ", notes = " << text::quote(f.notes) << " }\n";
        }
    }
    return o.str();
}

}  // namespace iontrap
