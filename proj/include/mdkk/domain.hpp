#ifndef MDKK_DOMAIN_HPP
#define MDKK_DOMAIN_HPP

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mdkk/memspace.hpp"

namespace mdkk
{

using Vec3 = std::array<double, 3>;

/// Orthogonal simulation box anchored at the origin, reduced units.
struct Box
{
    Vec3 lengths{1.0, 1.0, 1.0};
    std::array<bool, 3> periodic{true, true, true};

    double volume() const { return lengths[0] * lengths[1] * lengths[2]; }
    /// Shortest edge among periodic axes (infinity when none is periodic).
    double min_periodic_length() const;
    void validate() const;
};

/// Maps each periodic component into [-L/2, L/2).
Vec3 minimum_image(Vec3 dr, const Box& box);

/// Wraps a position into [0, L) along periodic axes.
Vec3 wrap_position(Vec3 x, const Box& box);

struct Brick
{
    Vec3 lo{};
    Vec3 hi{};

    double volume() const { return (hi[0] - lo[0]) * (hi[1] - lo[1]) * (hi[2] - lo[2]); }
};

/// Regular brick decomposition of a box into logical ranks.
struct RankSet
{
    std::size_t n_ranks = 1;
    std::array<std::size_t, 3> grid{1, 1, 1};
    std::vector<Brick> bricks;

    /// Rank owning a position. Positions outside the box along a
    /// non-periodic axis go to the nearest brick.
    std::size_t owner_of(const Vec3& x) const;
};

/// Splits the box into an px*py*pz = n_ranks grid minimising brick surface
/// area. Ties prefer more cuts on lower axis indices.
RankSet decompose(const Box& box, std::size_t n_ranks);

/// Where a ghost row comes from: owning rank, local index there, and the
/// periodic image shift applied to the owner's position.
struct GhostSource
{
    std::uint32_t rank = 0;
    std::uint32_t index = 0;
    std::array<std::int8_t, 3> image{0, 0, 0};
};

//---------------------------------------------------------------------------//
/*!
  \brief Per-rank atom storage.

  Rows [0, n_local) are owned atoms, rows [n_local, n_local + n_ghost) are
  ghosts. positions and forces cover both; velocities only owned atoms.
*/
struct AtomStore
{
    std::size_t rank = 0;
    std::size_t n_local = 0;
    std::size_t n_ghost = 0;
    DualArray<double> positions;
    DualArray<double> velocities;
    DualArray<double> forces;
    std::vector<std::int64_t> global_ids;
    std::vector<std::int32_t> types;
    std::vector<GhostSource> ghosts;

    std::size_t n_total() const { return n_local + n_ghost; }

    Vec3 position(std::size_t i) const
    {
        return {positions(Space::Host, i, 0), positions(Space::Host, i, 1), positions(Space::Host, i, 2)};
    }

    /// Owner-side local index for any row (ghosts resolve through their
    /// source; valid for single-rank stores only when the source is home).
    std::size_t owner_index(std::size_t row) const
    {
        return row < n_local ? row : ghosts[row - n_local].index;
    }

    /// Rank owning a row.
    std::size_t owner_rank(std::size_t row) const
    {
        return row < n_local ? rank : ghosts[row - n_local].rank;
    }

    void zero_forces();
};

/// Global per-atom record used to (re)distribute atoms over ranks.
struct AtomRecord
{
    std::int64_t id = 0;
    std::int32_t type = 1;
    Vec3 x{};
    Vec3 v{};
};

/// Rebuilds the per-rank stores from global records. Positions are wrapped
/// and each atom goes to the rank owning its brick. Within a rank atoms are
/// ordered by spatial bin (bin width `sort_bin`, 0 disables) then id.
std::vector<AtomStore> distribute(std::span<const AtomRecord> atoms, const Box& box, const RankSet& ranks,
                                  double sort_bin = 0.0);

/// Collects owned atoms of all ranks, ordered by global id.
std::vector<AtomRecord> gather(const std::vector<AtomStore>& stores);

/// Builds ghost rows on every rank: each owned atom (or periodic image)
/// within `halo` of a brick is copied to that rank. Throws ConfigError
/// when halo exceeds half the shortest periodic box length.
void exchange_ghosts(const RankSet& ranks, const Box& box, std::vector<AtomStore>& stores, double halo);

/// Refreshes ghost positions from their owners (owner position + image).
void forward_comm(const Box& box, std::vector<AtomStore>& stores);

/// Per-row data folded from ghosts back to owners.
class ReverseCommClient
{
public:
    virtual ~ReverseCommClient() = default;
    virtual std::size_t width() const = 0;
    /// Copies ghost row data of `store` into buf and clears the ghost row.
    virtual void pack_reverse(AtomStore& store, std::size_t row, double* buf) = 0;
    /// Adds buf into owned row `row` of `store`.
    virtual void unpack_reverse(AtomStore& store, std::size_t row, const double* buf) = 0;
};

/// Generic reverse communication: pack ghost rows per (source, owner) pair,
/// then unpack in rank order.
void reverse_comm(std::vector<AtomStore>& stores, ReverseCommClient& client);

/// Reverse communication of the host-space force array.
void reverse_comm_forces(std::vector<AtomStore>& stores);

/// Largest displacement of any owned atom relative to `reference`
/// (flat xyz of owned atoms, same ordering).
double max_displacement(const AtomStore& store, std::span<const double> reference);

} // namespace mdkk

#endif
