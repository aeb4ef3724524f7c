#pragma once

// Named DC electrode voltages and the reference voltage sets.
//
// Text form, one assignment per line, '#' comments:
//   shim 1a = 11.32
//   top 1 = 10.46

#include <cmath>
#include <map>
#include <sstream>
#include <string>

#include "errors.hpp"
#include "geometry.hpp"
#include "text.hpp"

namespace iontrap {

struct VoltageSet {
    std::map<std::string, double> volts;

    double at(const std::string& name) const {
        const auto it = volts.find(name);
        return it == volts.end() ? 0.0 : it->second;
    }
    double& operator[](const std::string& name) { return volts[name]; }

    bool operator==(const VoltageSet&) const = default;
};

// Every key must name a non-RF electrode of the geometry; |V| <= v_max.
inline void validate(const VoltageSet& v, const TrapGeometry& g, double v_max = 30.0) {
    for (const auto& [name, value] : v.volts) {
        if (!g.has_electrode(name)) throw ConfigError("unknown electrode '" + name + "'");
        if (g.electrode_role(name) == Role::rf)
            throw ConfigError("electrode '" + name + "' is an RF electrode");
        if (!std::isfinite(value)) throw ConfigError("voltage for '" + name + "' is not finite");
        if (std::abs(value) > v_max)
            throw ConfigError("voltage for '" + name + "' exceeds the " +
                              text::format_double(v_max) + " V limit");
    }
}

// Reference sets for the preset geometry; the matching RF amplitudes are
// 183 V (1 eV set) and 155 V (0.2 eV set) at 20.6 MHz.
inline VoltageSet preset_voltages(const std::string& name) {
    VoltageSet v;
    if (name == "1eV") {
        v.volts = {{"shim 2a", 0.04}, {"shim 1a", 11.32}, {"A", 7.66},       {"B1", 8.95},
                   {"B2", 8.95},     {"C1", 17.18},     {"C2", 17.18},      {"shim 1b", 12.77},
                   {"shim 2b", -24.03}, {"top 1", 10.46}, {"top 2", 10.46}};
    } else if (name == "0.2eV") {
        v.volts = {{"shim 2a", 8.16}, {"shim 1a", 0.24}, {"A", -1.07},     {"B1", 5.29},
                   {"B2", 5.29},     {"C1", 4.91},      {"C2", 4.91},      {"shim 1b", 1.28},
                   {"shim 2b", -9.04}, {"top 1", 0.58},  {"top 2", 0.58}};
    } else {
        throw ConfigError("unknown voltage preset '" + name + "' (expected 1eV or 0.2eV)");
    }
    return v;
}

inline double preset_rf_volts(const std::string& name) {
    if (name == "1eV") return 183.0;
    if (name == "0.2eV") return 155.0;
    throw ConfigError("unknown voltage preset '" + name + "'");
}

inline VoltageSet parse_voltage_set(const std::string& body) {
    VoltageSet v;
    std::istringstream in(body);
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const auto s = text::trim(text::strip_comment(raw));
        if (s.empty()) continue;
        const auto eq = s.rfind('=');
        if (eq == std::string_view::npos) throw ParseError("expected 'electrode = volts'", line);
        std::string name(text::trim(s.substr(0, eq)));
        if (name.size() >= 2 && name.front() == '"' && name.back() == '"')
            name = name.substr(1, name.size() - 2);
        if (name.empty()) throw ParseError("missing electrode name", line);
        double value = 0.0;
        if (!text::parse_double(s.substr(eq + 1), value))
            throw ParseError("voltage for '" + name + "' is not a number", line);
        if (v.volts.count(name)) throw ParseError("duplicate electrode '" + name + "'", line);
        v.volts[name] = value;
    }
    return v;
}

inline std::string serialize_voltage_set(const VoltageSet& v) {
    std::ostringstream o;
    for (const auto& [name, value] : v.volts) o << name << " = " << text::format_double(value) << "\n";
    return o.str();
}

}  // namespace iontrap
