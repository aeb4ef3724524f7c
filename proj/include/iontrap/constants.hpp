#pragma once

namespace iontrap::constants {

// CODATA 2018.
inline constexpr double pi = 3.14159265358979323846;
inline constexpr double elementary_charge = 1.602176634e-19;  // C
inline constexpr double hbar = 1.054571817e-34;               // J s
inline constexpr double atomic_mass_unit = 1.66053906660e-27; // kg
inline constexpr double electron_mass = 9.1093837015e-31;     // kg
inline constexpr double vacuum_permittivity = 8.8541878128e-12;  // F/m
inline constexpr double coulomb_constant = 1.0 / (4.0 * pi * vacuum_permittivity);

// 40Ca neutral atomic mass (AME2020), u.
inline constexpr double calcium40_atomic_mass_u = 39.9625909;
// Singly ionized: one electron removed.
inline constexpr double calcium40_ion_mass =
    calcium40_atomic_mass_u * atomic_mass_unit - electron_mass;

inline constexpr double micrometer = 1e-6;
inline constexpr double megahertz = 1e6;

}  // namespace iontrap::constants
