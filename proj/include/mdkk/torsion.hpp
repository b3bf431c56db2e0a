#ifndef MDKK_TORSION_HPP
#define MDKK_TORSION_HPP

#include <cstddef>
#include <cstdint>
#include <vector>

#include "mdkk/domain.hpp"
#include "mdkk/memspace.hpp"
#include "mdkk/neighbor.hpp"

namespace mdkk
{

struct BondParams
{
    double r_bond = 1.6;
    double r0 = 1.2;
    double p = 4.0;
    double bo_min = 0.01;

    void validate() const;
};

/// exp(-(r/r0)^p)
double bond_order(double r, const BondParams& params);

/// Per-atom bonded partners in a 2-D over-allocated table. Partners are
/// owner indices (single-rank stores).
struct BondTable
{
    std::size_t n_local = 0;
    std::size_t max_bonds = 0;
    DualArray<std::int32_t> bonds;
    DualArray<double> bond_order;
    std::vector<std::int32_t> counts;
    std::size_t regrowths = 0;

    std::int32_t partner(std::size_t i, std::size_t n) const { return bonds(Space::Host, i, n); }
    double bo(std::size_t i, std::size_t n) const { return bond_order(Space::Host, i, n); }
    /// Bond order of (i, j), or 0 if they are not bonded.
    double bo_between(std::size_t i, std::size_t j) const;
};

/// Bonds from a full neighbor list: r < r_bond and BO > bo_min.
BondTable build_bonds(const AtomStore& atoms, const NeighborList& full, const BondParams& params,
                      std::size_t initial_capacity = 0);

struct Quad
{
    std::int32_t i, j, k, l;
};

/// Bend j-i-k centered on i.
struct Triple
{
    std::int32_t j, i, k;
};

//---------------------------------------------------------------------------//
/*!
  \brief Compressed four- and three-body tuples.

  Quad (i,j,k,l) is stored when (i,j), (i,k), (j,l) are bonds, the four atoms
  are distinct, i < j and BO_ij BO_ik BO_jl exceeds the threshold. It stands
  for the dihedral k-i-j-l around the central bond (i,j). Triple (j,i,k) is
  stored when j < k are both bonded to i and BO_ij BO_ik exceeds the
  threshold. All tuples of atom i sit in [start[i], start[i+1]).
*/
struct QuadTable
{
    std::vector<Quad> quads;
    std::vector<std::int64_t> per_atom_start;
    std::vector<Triple> triples;
    std::vector<std::int64_t> triple_start;
    /// Tuples inspected by the count pass.
    std::size_t quad_candidates = 0;
    std::size_t triple_candidates = 0;

    std::size_t total() const { return quads.size(); }
    double survival() const;
};

QuadTable enumerate_quads(const BondTable& bonds, double bo_threshold);

struct TorsionParams
{
    double k_t = 1.0;
    double k_b = 1.0;
    double bo_threshold = 0.01;
};

struct TorsionResult
{
    double torsion_energy = 0.0;
    double bend_energy = 0.0;
    /// 3 * n_local
    std::vector<double> forces;
    std::size_t degenerate = 0;

    double energy() const { return torsion_energy + bend_energy; }
};

/// k_t (1 + cos phi) per quad plus k_b (1 + cos theta) per triple, parallel
/// over tuples with scatter accumulation.
TorsionResult compute_torsion(const QuadTable& table, const AtomStore& atoms, const Box& box,
                              const TorsionParams& params, AccumStrategy strategy = AccumStrategy::atomic());

/// Serial evaluation straight from the bond table with nested loops, no
/// pre-processing.
TorsionResult compute_torsion_reference(const BondTable& bonds, const AtomStore& atoms, const Box& box,
                                        const TorsionParams& params);

} // namespace mdkk

#endif
