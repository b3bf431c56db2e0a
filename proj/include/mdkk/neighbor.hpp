#ifndef MDKK_NEIGHBOR_HPP
#define MDKK_NEIGHBOR_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mdkk/domain.hpp"
#include "mdkk/memspace.hpp"

namespace mdkk
{

enum class ListStyle : std::uint8_t
{
    Full,
    Half
};

const char* list_style_name(ListStyle style);

struct NeighborSettings
{
    double cutoff = 2.5;
    double skin = 0.3;
    ListStyle style = ListStyle::Half;
    bool newton = true;

    double list_cutoff() const { return cutoff + skin; }
};

/// Raised when a kernel is handed a list older than the skin allows.
class StaleListError : public Error
{
public:
    using Error::Error;
};

//---------------------------------------------------------------------------//
/*!
  \brief Per-atom neighbor rows in an over-allocated 2-D table.

  table is [n_local, max_neighbors]; the host layout keeps each atom's row
  contiguous, the device layout interleaves rows of consecutive atoms.
  Entries index rows of the AtomStore the list was built for (owned or
  ghost).

  Half lists store every owned-owned pair once, on the atom with the smaller
  global id. With newton on, an owned-ghost pair is kept by the side whose
  owning rank is smaller; for equal ranks (periodic self images) the partner
  must lie above in z, then y, then x. With newton off owned-ghost pairs are
  kept on both sides.
*/
class NeighborList
{
public:
    NeighborSettings settings;
    std::size_t n_local = 0;
    std::size_t max_neighbors = 0;
    DualArray<std::int32_t> table;
    std::vector<std::int32_t> counts;
    /// Owned positions at build time, flat xyz.
    std::vector<double> reference;
    /// Number of times the table had to grow during the last build.
    std::size_t regrowths = 0;

    ListStyle style() const { return settings.style; }
    bool newton() const { return settings.newton; }

    std::int32_t neighbor(Space space, std::size_t i, std::size_t n) const { return table(space, i, n); }

    /// Contiguous row of atom i (host layout).
    std::span<const std::int32_t> row(std::size_t i) const
    {
        return {table.data(Space::Host) + i * max_neighbors, static_cast<std::size_t>(counts[i])};
    }

    std::size_t total_pairs() const;

    /// True once some owned atom moved more than half the skin.
    bool needs_rebuild(const AtomStore& atoms) const;

    /// Throws StaleListError when needs_rebuild() holds.
    void check_current(const AtomStore& atoms) const;
};

/// Cell-list build over all rows of `atoms` with bins of width
/// cutoff+skin. The table starts at `initial_capacity` columns (0 picks a
/// density estimate) and grows by 1.5x until every row fits.
NeighborList build_neighbor_list(const AtomStore& atoms, const NeighborSettings& settings,
                                 std::size_t initial_capacity = 0);

/// True if the list may keep the pair (i, k) under its style/newton rule.
/// i must be owned; k any row.
bool half_list_keeps(const AtomStore& atoms, bool newton, std::size_t i, std::size_t k);

} // namespace mdkk

#endif
