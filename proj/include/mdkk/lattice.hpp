#ifndef MDKK_LATTICE_HPP
#define MDKK_LATTICE_HPP

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mdkk/domain.hpp"

namespace mdkk
{

enum class LatticeKind : std::uint8_t
{
    Fcc,
    Sc
};

LatticeKind parse_lattice(const std::string& name);

/// Lattice constant for a reduced number density.
double lattice_constant(LatticeKind kind, double density);

/// Fills cells[0] x cells[1] x cells[2] unit cells. Ids start at 1.
std::vector<AtomRecord> make_lattice(LatticeKind kind, double density, std::array<std::size_t, 3> cells, Box& box,
                                     std::int32_t type = 1);

/// Uniform random atoms with a minimum (minimum-image) separation.
/// Throws ConfigError if the packing cannot be reached.
std::vector<AtomRecord> random_gas(std::size_t n, const Box& box, double min_separation, std::uint64_t seed);

/// Gaussian velocities with zero total momentum scaled to `temperature`
/// (unit masses, 3N-3 degrees of freedom).
void assign_velocities(std::vector<AtomRecord>& atoms, double temperature, std::uint64_t seed);

} // namespace mdkk

#endif
