#ifndef MDKK_PAIR_HPP
#define MDKK_PAIR_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "mdkk/domain.hpp"
#include "mdkk/memspace.hpp"
#include "mdkk/neighbor.hpp"
#include "mdkk/parallel.hpp"
#include "mdkk/system.hpp"

namespace mdkk
{

struct PairParams
{
    double epsilon = 1.0;
    double sigma = 1.0;
    double cutoff = 2.5;
    /// Subtract U(rc) so the energy is continuous at the cutoff. Forces
    /// are unchanged.
    bool shift = false;

    void validate() const;
    double energy_offset() const;
};

/// Energy and the central-force scalar -dU/dr / r of one pair.
struct PairEval
{
    double energy = 0.0;
    double fpair = 0.0;
};

/// Lennard-Jones pair term at separation r. Zero at and beyond the cutoff;
/// truncated unless params.shift is set. Throws for r <= 0.
PairEval u2_lj(double r, const PairParams& params);

/// Inlined LJ kernel on r^2 with precomputed coefficients.
class LennardJones
{
public:
    explicit LennardJones(const PairParams& params);

    double cutsq() const { return cutsq_; }

    PairEval operator()(double rsq) const
    {
        const double r2inv = 1.0 / rsq;
        const double r6inv = r2inv * r2inv * r2inv;
        return {r6inv * (lj3_ * r6inv - lj4_) - offset_, r6inv * (lj1_ * r6inv - lj2_) * r2inv};
    }

private:
    double cutsq_;
    double lj1_, lj2_, lj3_, lj4_;
    double offset_;
};

/// Type-erased pair kernel on r^2, the generic route for any two-body form.
struct GenericPairKernel
{
    double cut_squared = 0.0;
    std::function<PairEval(double)> eval;

    double cutsq() const { return cut_squared; }
    PairEval operator()(double rsq) const { return eval(rsq); }
};

GenericPairKernel make_generic_lj(const PairParams& params);

enum class ExecMode : std::uint8_t
{
    AtomParallel,
    NeighborParallel
};

const char* exec_mode_name(ExecMode mode);

struct PairOptions
{
    ExecMode mode = ExecMode::AtomParallel;
    AccumStrategy strategy = AccumStrategy::serial();
    /// Space whose neighbor-table layout the kernel reads.
    Space space = Space::Host;
    /// Neighbors per work item in NeighborParallel mode.
    std::size_t neighbor_chunk = 8;
};

struct PairResult
{
    double energy = 0.0;
    /// xx, yy, zz, xy, xz, yz
    std::array<double, 6> virial{};
    /// 3 * n_total, including ghost rows.
    std::vector<double> forces;
};

namespace detail
{

/// How one listed pair is booked.
struct PairBooking
{
    double energy_weight; // share of the pair energy/virial booked here
    double force_i;       // factor applied to F on i
    double force_k;       // factor applied to -F on k
};

inline PairBooking book_pair(ListStyle style, bool newton, bool k_is_ghost)
{
    if (style == ListStyle::Full) {
        return newton ? PairBooking{0.5, 0.5, 0.5} : PairBooking{0.5, 1.0, 0.0};
    }
    if (newton || !k_is_ghost) {
        return {1.0, 1.0, 1.0};
    }
    return {0.5, 1.0, 0.0};
}

} // namespace detail

/// Evaluates a pair kernel over a neighbor list. All combinations of list
/// style, newton flag, execution mode and accumulation strategy produce the
/// same energy and owned-atom forces (after reverse communication) up to
/// floating-point reassociation.
template <class Kernel>
PairResult compute_pair(const Kernel& kernel, AtomStore& atoms, NeighborList& list, const PairOptions& options)
{
    list.check_current(atoms);
    atoms.positions.sync(Space::Host);
    list.table.sync(options.space);

    const std::size_t n_local = atoms.n_local;
    const std::size_t n_rows = 3 * atoms.n_total();
    const ListStyle style = list.style();
    const bool newton = list.newton();
    const double cutsq = kernel.cutsq();
    const double* x = atoms.positions.data(Space::Host);
    const std::size_t xs0 = atoms.positions.size() ? atoms.positions.stride(Space::Host, 0) : 0;
    const std::size_t xs1 = atoms.positions.size() ? atoms.positions.stride(Space::Host, 1) : 0;
    const std::int32_t* table = list.table.size() ? list.table.data(options.space) : nullptr;
    const std::size_t ts0 = list.table.size() ? list.table.stride(options.space, 0) : 0;
    const std::size_t ts1 = list.table.size() ? list.table.stride(options.space, 1) : 0;

    ScatterAccumulator acc(n_rows, options.strategy);
    const std::size_t workers = acc.workers();
    std::vector<std::array<double, 7>> partial(workers, std::array<double, 7>{});
    const bool owner_writes = style == ListStyle::Full && !newton && options.mode == ExecMode::AtomParallel;
    std::vector<double> direct;
    if (owner_writes) {
        direct.assign(n_rows, 0.0);
    }

    // Interaction of i with neighbors [begin, end) of its row. The partial
    // force on i is returned to the caller.
    auto visit = [&](std::size_t worker, std::size_t i, std::size_t begin, std::size_t end) {
        const double xi = x[i * xs0];
        const double yi = x[i * xs0 + xs1];
        const double zi = x[i * xs0 + 2 * xs1];
        std::array<double, 3> fi{0.0, 0.0, 0.0};
        auto& tally = partial[worker];
        for (std::size_t n = begin; n < end; ++n) {
            const auto k = static_cast<std::size_t>(table[i * ts0 + n * ts1]);
            const double dx = xi - x[k * xs0];
            const double dy = yi - x[k * xs0 + xs1];
            const double dz = zi - x[k * xs0 + 2 * xs1];
            const double rsq = dx * dx + dy * dy + dz * dz;
            if (rsq >= cutsq) {
                continue;
            }
            const PairEval e = kernel(rsq);
            const detail::PairBooking book = detail::book_pair(style, newton, k >= n_local);
            const double fx = e.fpair * dx;
            const double fy = e.fpair * dy;
            const double fz = e.fpair * dz;
            fi[0] += book.force_i * fx;
            fi[1] += book.force_i * fy;
            fi[2] += book.force_i * fz;
            if (book.force_k != 0.0) {
                acc.add3(worker, k, {-book.force_k * fx, -book.force_k * fy, -book.force_k * fz});
            }
            const double w = book.energy_weight;
            tally[0] += w * e.energy;
            tally[1] += w * dx * fx;
            tally[2] += w * dy * fy;
            tally[3] += w * dz * fz;
            tally[4] += w * dx * fy;
            tally[5] += w * dx * fz;
            tally[6] += w * dy * fz;
        }
        return fi;
    };

    if (options.mode == ExecMode::AtomParallel) {
        parallel_for_dynamic(n_local, workers, 32, [&](std::size_t worker, std::size_t i) {
            const auto fi = visit(worker, i, 0, static_cast<std::size_t>(list.counts[i]));
            if (owner_writes) {
                direct[3 * i] = fi[0];
                direct[3 * i + 1] = fi[1];
                direct[3 * i + 2] = fi[2];
            } else {
                acc.add3(worker, i, fi);
            }
        });
    } else {
        // One work item per (atom, chunk of neighbors); partial forces on the
        // atom from all its chunks meet in the accumulator.
        const std::size_t chunk = options.neighbor_chunk == 0 ? 1 : options.neighbor_chunk;
        std::vector<std::size_t> first(n_local + 1, 0);
        for (std::size_t i = 0; i < n_local; ++i) {
            const auto c = static_cast<std::size_t>(list.counts[i]);
            first[i + 1] = first[i] + (c + chunk - 1) / chunk;
        }
        const std::size_t items = first[n_local];
        parallel_for_dynamic(items, workers, 64, [&](std::size_t worker, std::size_t item) {
            const auto it = std::upper_bound(first.begin(), first.end(), item);
            const auto i = static_cast<std::size_t>(it - first.begin()) - 1;
            const std::size_t begin = (item - first[i]) * chunk;
            const std::size_t end = std::min(begin + chunk, static_cast<std::size_t>(list.counts[i]));
            acc.add3(worker, i, visit(worker, i, begin, end));
        });
    }

    PairResult result;
    result.forces = acc.finalize();
    if (owner_writes) {
        for (std::size_t n = 0; n < n_rows; ++n) {
            result.forces[n] += direct[n];
        }
    }
    for (const auto& tally : partial) {
        result.energy += tally[0];
        for (std::size_t c = 0; c < 6; ++c) {
            result.virial[c] += tally[c + 1];
        }
    }
    return result;
}

/// Copies a PairResult's forces into the store's host force array
/// (adding to what is there) and marks host modified.
void accumulate_forces(AtomStore& atoms, std::span<const double> forces);

struct SystemPairResult
{
    double energy = 0.0;
    std::array<double, 6> virial{};
};

/// Runs compute_pair on every rank with its list, stores forces on the
/// ranks and folds ghost forces back to owners when the list style writes
/// to ghosts (newton on).
template <class Kernel>
SystemPairResult compute_pair_system(const Kernel& kernel, System& system, std::vector<NeighborList>& lists,
                                     const PairOptions& options)
{
    system.zero_forces();
    SystemPairResult total;
    bool writes_ghosts = false;
    for (std::size_t r = 0; r < system.stores().size(); ++r) {
        AtomStore& atoms = system.stores()[r];
        const PairResult result = compute_pair(kernel, atoms, lists[r], options);
        accumulate_forces(atoms, result.forces);
        total.energy += result.energy;
        for (std::size_t c = 0; c < 6; ++c) {
            total.virial[c] += result.virial[c];
        }
        writes_ghosts = writes_ghosts || lists[r].newton();
    }
    if (writes_ghosts) {
        system.reverse_comm();
    }
    return total;
}

/// Builds one list per rank.
std::vector<NeighborList> build_lists(System& system, const NeighborSettings& settings);

} // namespace mdkk

#endif
