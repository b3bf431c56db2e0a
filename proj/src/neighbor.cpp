#include "mdkk/neighbor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mdkk/parallel.hpp"

namespace mdkk
{

const char* list_style_name(ListStyle style)
{
    return style == ListStyle::Full ? "full" : "half";
}

std::size_t NeighborList::total_pairs() const
{
    return std::accumulate(counts.begin(), counts.end(), std::size_t{0});
}

bool NeighborList::needs_rebuild(const AtomStore& atoms) const
{
    if (atoms.n_local != n_local) {
        return true;
    }
    return max_displacement(atoms, reference) > 0.5 * settings.skin;
}

void NeighborList::check_current(const AtomStore& atoms) const
{
    if (needs_rebuild(atoms)) {
        throw StaleListError("neighbor list is stale: an atom moved more than half the skin since the last build");
    }
}

bool half_list_keeps(const AtomStore& atoms, bool newton, std::size_t i, std::size_t k)
{
    if (k < atoms.n_local) {
        return atoms.global_ids[i] < atoms.global_ids[k];
    }
    if (!newton) {
        return true;
    }
    const std::size_t other = atoms.ghosts[k - atoms.n_local].rank;
    if (other != atoms.rank) {
        return atoms.rank < other;
    }
    const Vec3 xi = atoms.position(i);
    const Vec3 xk = atoms.position(k);
    if (xk[2] != xi[2]) {
        return xk[2] > xi[2];
    }
    if (xk[1] != xi[1]) {
        return xk[1] > xi[1];
    }
    return xk[0] > xi[0];
}

namespace
{

struct CellGrid
{
    Vec3 origin{};
    Vec3 width{};
    std::array<long long, 3> dims{1, 1, 1};
    std::vector<std::size_t> start; // size ncells+1
    std::vector<std::int32_t> atoms;

    long long cell_coord(double x, std::size_t d) const
    {
        auto c = static_cast<long long>(std::floor((x - origin[d]) / width[d]));
        return std::clamp<long long>(c, 0, dims[d] - 1);
    }
};

CellGrid bin_atoms(const AtomStore& store, double bin_size)
{
    CellGrid grid;
    const std::size_t n = store.n_total();
    Vec3 lo{0.0, 0.0, 0.0};
    Vec3 hi{0.0, 0.0, 0.0};
    if (n > 0) {
        lo = store.position(0);
        hi = lo;
        for (std::size_t i = 1; i < n; ++i) {
            const Vec3 x = store.position(i);
            for (std::size_t d = 0; d < 3; ++d) {
                lo[d] = std::min(lo[d], x[d]);
                hi[d] = std::max(hi[d], x[d]);
            }
        }
    }
    for (std::size_t d = 0; d < 3; ++d) {
        const double extent = std::max(hi[d] - lo[d], bin_size);
        grid.dims[d] = std::max<long long>(1, static_cast<long long>(extent / bin_size));
        // cap to keep the cell count bounded for sparse inputs
        grid.dims[d] = std::min<long long>(grid.dims[d], 1024);
        grid.width[d] = extent / static_cast<double>(grid.dims[d]);
        grid.origin[d] = lo[d];
    }
    const auto ncells = static_cast<std::size_t>(grid.dims[0] * grid.dims[1] * grid.dims[2]);
    std::vector<std::size_t> cell_of(n);
    grid.start.assign(ncells + 1, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3 x = store.position(i);
        const auto c = static_cast<std::size_t>(
            grid.cell_coord(x[0], 0) + grid.dims[0] * (grid.cell_coord(x[1], 1) + grid.dims[1] * grid.cell_coord(x[2], 2)));
        cell_of[i] = c;
        ++grid.start[c + 1];
    }
    std::partial_sum(grid.start.begin(), grid.start.end(), grid.start.begin());
    grid.atoms.resize(n);
    std::vector<std::size_t> cursor(grid.start.begin(), grid.start.end() - 1);
    for (std::size_t i = 0; i < n; ++i) {
        grid.atoms[cursor[cell_of[i]]++] = static_cast<std::int32_t>(i);
    }
    return grid;
}

} // namespace

NeighborList build_neighbor_list(const AtomStore& atoms, const NeighborSettings& settings,
                                 std::size_t initial_capacity)
{
    if (!(settings.cutoff > 0.0) || !(settings.skin >= 0.0)) {
        throw ConfigError("neighbor list: cutoff must be positive and skin non-negative");
    }
    const double list_cut = settings.list_cutoff();
    const double cutsq = list_cut * list_cut;
    const CellGrid grid = bin_atoms(atoms, list_cut);

    NeighborList list;
    list.settings = settings;
    list.n_local = atoms.n_local;
    list.counts.assign(atoms.n_local, 0);
    list.reference.resize(3 * atoms.n_local);
    for (std::size_t i = 0; i < atoms.n_local; ++i) {
        for (std::size_t d = 0; d < 3; ++d) {
            list.reference[3 * i + d] = atoms.positions(Space::Host, i, d);
        }
    }

    std::size_t capacity = initial_capacity;
    if (capacity == 0) {
        double volume = 1.0;
        for (std::size_t d = 0; d < 3; ++d) {
            volume *= grid.width[d] * static_cast<double>(grid.dims[d]);
        }
        const double density = atoms.n_total() > 0 ? static_cast<double>(atoms.n_total()) / volume : 0.0;
        const double sphere = 4.0 / 3.0 * M_PI * list_cut * list_cut * list_cut;
        capacity = static_cast<std::size_t>(std::ceil(density * sphere)) + 8;
    }
    capacity = std::max<std::size_t>(capacity, 1);

    const bool full = settings.style == ListStyle::Full;
    const std::size_t workers = worker_count();
    std::vector<std::int32_t> rows;
    while (true) {
        rows.assign(std::max<std::size_t>(atoms.n_local, 1) * capacity, -1);
        std::vector<std::size_t> worst(workers, 0);
        parallel_for_dynamic(atoms.n_local, workers, 64, [&](std::size_t worker, std::size_t i) {
            const Vec3 xi = atoms.position(i);
            std::array<long long, 3> c{};
            for (std::size_t d = 0; d < 3; ++d) {
                c[d] = grid.cell_coord(xi[d], d);
            }
            std::size_t count = 0;
            std::int32_t* out = rows.data() + i * capacity;
            for (long long dz = -1; dz <= 1; ++dz) {
                const long long cz = c[2] + dz;
                if (cz < 0 || cz >= grid.dims[2]) {
                    continue;
                }
                for (long long dy = -1; dy <= 1; ++dy) {
                    const long long cy = c[1] + dy;
                    if (cy < 0 || cy >= grid.dims[1]) {
                        continue;
                    }
                    for (long long dx = -1; dx <= 1; ++dx) {
                        const long long cx = c[0] + dx;
                        if (cx < 0 || cx >= grid.dims[0]) {
                            continue;
                        }
                        const auto cell = static_cast<std::size_t>(cx + grid.dims[0] * (cy + grid.dims[1] * cz));
                        for (std::size_t n = grid.start[cell]; n < grid.start[cell + 1]; ++n) {
                            const auto k = static_cast<std::size_t>(grid.atoms[n]);
                            if (k == i) {
                                continue;
                            }
                            const Vec3 xk = atoms.position(k);
                            const double rx = xk[0] - xi[0];
                            const double ry = xk[1] - xi[1];
                            const double rz = xk[2] - xi[2];
                            if (rx * rx + ry * ry + rz * rz >= cutsq) {
                                continue;
                            }
                            if (!full && !half_list_keeps(atoms, settings.newton, i, k)) {
                                continue;
                            }
                            if (count < capacity) {
                                out[count] = static_cast<std::int32_t>(k);
                            }
                            ++count;
                        }
                    }
                }
            }
            list.counts[i] = static_cast<std::int32_t>(count);
            worst[worker] = std::max(worst[worker], count);
        });
        const std::size_t needed = *std::max_element(worst.begin(), worst.end());
        if (needed <= capacity) {
            break;
        }
        while (capacity < needed) {
            capacity = static_cast<std::size_t>(std::ceil(1.5 * static_cast<double>(capacity)));
        }
        ++list.regrowths;
    }

    list.max_neighbors = capacity;
    if (atoms.n_local > 0) {
        list.table = DualArray<std::int32_t>({atoms.n_local, capacity});
        std::copy(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(atoms.n_local * capacity),
                  list.table.data(Space::Host));
        list.table.modify(Space::Host);
    }
    return list;
}

} // namespace mdkk
