#ifndef MDKK_SYSTEM_HPP
#define MDKK_SYSTEM_HPP

#include <cstddef>
#include <span>
#include <vector>

#include "mdkk/domain.hpp"

namespace mdkk
{

/// A box, its rank decomposition and the per-rank atom stores.
class System
{
public:
    System(Box box, std::size_t n_ranks);

    const Box& box() const { return box_; }
    const RankSet& ranks() const { return ranks_; }
    std::vector<AtomStore>& stores() { return stores_; }
    const std::vector<AtomStore>& stores() const { return stores_; }
    std::size_t n_atoms() const;

    /// Distributes atoms over ranks and builds ghosts for `halo`.
    void load(std::span<const AtomRecord> atoms, double halo);

    /// Migrates atoms to their current owners and rebuilds ghosts.
    void reneighbor(double halo);

    void forward_comm();
    void reverse_comm();
    void zero_forces();

    /// Owned atoms ordered by global id.
    std::vector<AtomRecord> gather() const;

    /// Owned-atom forces (host space) ordered by global id.
    std::vector<Vec3> forces_by_id() const;

    /// Bin width used to spatially sort owned atoms on migration.
    double sort_bin = 0.0;

private:
    Box box_;
    RankSet ranks_;
    std::vector<AtomStore> stores_;
};

} // namespace mdkk

#endif
