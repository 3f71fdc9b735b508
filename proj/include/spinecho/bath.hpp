#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "spinecho/model.hpp"

namespace spinecho {

/// Conventional cubic diamond cell: 8 carbon sites, lattice constant in
/// Angstrom. The supercell edge bounds how far configurations may extend.
struct LatticeSpec {
    double a = 3.57;
    int sites_per_cell = 8;
    double supercell_edge = 4000.0;

    double site_density() const { return sites_per_cell / (a * a * a); } // per A^3
};

/// One spatial realization of the electron-spin bath. Positions are in the
/// NV frame (z || [111]) and lie on diamond lattice sites inside the r_bath
/// sphere; the two sites of the defect itself are never occupied.
struct SpinBathConfiguration {
    std::vector<BathSpin> spins;
    double ppm = 0.0;     // bath spins per million carbon sites
    double r_bath = 0.0;  // Angstrom
    std::uint64_t seed = 0;
    std::string id;
    LatticeSpec lattice;

    int size() const { return static_cast<int>(spins.size()); }
};

/// Mean number of bath spins in the r_bath sphere at the given concentration:
/// site_density * (4pi/3) * r_bath^3 * ppm * 1e-6.
double expected_spin_count(double ppm, double r_bath, const LatticeSpec& lattice = {});

/// Draw a configuration: spin count ~ Binomial(sites in sphere, ppm*1e-6),
/// sites uniform without replacement, positions rotated to the NV frame.
/// Identical (seed, parameters) give identical output.
SpinBathConfiguration generate_configuration(double ppm, double r_bath,
                                             const LatticeSpec& lattice, std::uint64_t seed,
                                             const std::string& id = "");

/// JSON round-trip (schema "spinecho.bath-configuration/1"); positions keep
/// full double precision. Loading validates the stored invariants.
void save_configuration(const SpinBathConfiguration& config,
                        const std::filesystem::path& path);
SpinBathConfiguration load_configuration(const std::filesystem::path& path);

} // namespace spinecho
