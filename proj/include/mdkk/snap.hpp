#ifndef MDKK_SNAP_HPP
#define MDKK_SNAP_HPP

#include <array>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mdkk/domain.hpp"
#include "mdkk/memspace.hpp"
#include "mdkk/neighbor.hpp"
#include "mdkk/system.hpp"

namespace mdkk
{

//---------------------------------------------------------------------------//
/*!
  \brief Quantum-number bookkeeping and Clebsch-Gordan tables.

  All angular momenta are stored doubled (j2 = 2j), so half-integers are
  plain ints. Element (mb, ma) of u_j lives at flat index
  u_block[j] + (j+1)*mb + ma: j slowest, ma fastest.

  Z and Y are only formed for rows 2*mb <= j; the remaining rows follow from
  u[j-ma][j-mb] = (-1)^(ma-mb) conj(u[ma][mb]).
*/
class SnapBasis
{
public:
    struct ZEntry
    {
        int j1, j2, j;
        int ma1min, ma2max, mb1min, mb2max, na, nb;
        int jju;
    };

    struct BTriple
    {
        int j1, j2, j;
    };

    explicit SnapBasis(double jmax);

    int twojmax() const { return twojmax_; }
    std::size_t u_size() const { return u_size_; }
    std::size_t u_block(int j) const { return u_block_[static_cast<std::size_t>(j)]; }
    std::size_t flat(int j, int mb, int ma) const
    {
        return u_block_[static_cast<std::size_t>(j)] + static_cast<std::size_t>((j + 1) * mb + ma);
    }

    const std::vector<ZEntry>& z_list() const { return z_; }
    const std::vector<BTriple>& b_list() const { return b_; }
    std::size_t n_b() const { return b_.size(); }
    std::size_t z_block(int j1, int j2, int j) const { return z_block_[cube(j1, j2, j)]; }
    int b_index(int j1, int j2, int j) const { return b_block_[cube(j1, j2, j)]; }

    /// <j1 m1; j2 m2 | j m> with doubled arguments. Zero when not coupled.
    double cg(int j1, int j2, int j, int m1, int m2) const;
    /// Coefficients of block (j1, j2, j), indexed [ma1 * (j2+1) + ma2].
    const double* cg_block(int j1, int j2, int j) const { return cg_.data() + cg_block_[cube(j1, j2, j)]; }

    double rootpq(int p, int q) const { return rootpq_[static_cast<std::size_t>(p * (twojmax_ + 1) + q)]; }

    /// Factor turning beta of the canonical triple into the adjoint weight
    /// for the Z block (j1, j2, j).
    double beta_weight(int j1, int j2, int j, const std::vector<double>& beta) const;

private:
    std::size_t cube(int j1, int j2, int j) const
    {
        const auto n = static_cast<std::size_t>(twojmax_ + 1);
        return (static_cast<std::size_t>(j1) * n + static_cast<std::size_t>(j2)) * n + static_cast<std::size_t>(j);
    }

    int twojmax_;
    std::size_t u_size_ = 0;
    std::vector<std::size_t> u_block_;
    std::vector<ZEntry> z_;
    std::vector<std::size_t> z_block_;
    std::vector<BTriple> b_;
    std::vector<int> b_block_;
    std::vector<double> cg_;
    std::vector<std::size_t> cg_block_;
    std::vector<double> rootpq_;
};

/// Hypersphere coordinates of one neighbor.
struct CayleyKlein
{
    std::complex<double> a;
    std::complex<double> b;
    double r = 0.0;
    double z0 = 0.0;
    double dz0dr = 0.0;
    double fc = 0.0;
    double dfc = 0.0;
};

/// theta0 = rfac0 * pi * r / rc, z0 = r cot(theta0), switching
/// fc = (1 + cos(pi r / rc)) / 2. Throws for r = 0.
CayleyKlein cayley_klein(const Vec3& d, double rc, double rfac0);

/// Unweighted u_j for all j of one neighbor, flat complex array.
std::vector<std::complex<double>> wigner_u(const SnapBasis& basis, const Vec3& d, double rc, double rfac0);

struct SnapCoefficients
{
    double jmax = 0.0;
    std::vector<double> beta;
};

/// Coefficient file: jmax, then one beta per bispectrum triple in basis
/// order. Whitespace separated, '#' starts a comment.
SnapCoefficients read_snap_coefficients(const std::string& path);
SnapCoefficients parse_snap_coefficients(const std::string& text);

struct SnapKnobs
{
    /// Neighbors per U work item; 0 takes the whole row.
    std::size_t batch_u = 0;
    /// Z blocks per Y work item; 0 takes all of them.
    std::size_t batch_y = 0;
    /// Atoms per Y tile.
    std::size_t tile_v = 4;
    /// Space whose layout U and Y kernels use (Host: quantum index fastest,
    /// Device: atom fastest).
    Space layout = Space::Host;
    bool fused = true;
    AccumStrategy strategy = AccumStrategy::atomic();
};

struct SnapParams
{
    double jmax = 1.0;
    double rcut = 2.5;
    double rfac0 = 0.99;
    std::vector<double> beta;
};

struct SnapResult
{
    double energy = 0.0;
    std::vector<double> atom_energy;
    /// 3 * n_total, ghost rows included.
    std::vector<double> forces;
};

class Snap
{
public:
    Snap(const SnapParams& params, const SnapKnobs& knobs = {});

    const SnapBasis& basis() const { return basis_; }
    const SnapParams& params() const { return params_; }
    SnapKnobs& knobs() { return knobs_; }

    void compute_ui(const AtomStore& atoms, const NeighborList& full);
    void compute_yi();
    /// Row-major [n_atoms, n_b].
    std::vector<double> compute_bi() const;
    /// Forces from Y and the neighbor derivatives, fused or split per knobs.
    std::vector<double> compute_deidrj(const AtomStore& atoms, const NeighborList& full) const;

    double energy_from_b() const;
    /// Y : U* summed over atoms and divided by 3 (the bispectrum is cubic in U).
    double energy_from_adjoint() const;

    std::complex<double> u(std::size_t atom, std::size_t jju) const;
    std::complex<double> y(std::size_t atom, std::size_t jju) const;

    SnapResult compute(const AtomStore& atoms, const NeighborList& full);

private:
    struct Pair
    {
        Vec3 d;
        std::int32_t k;
    };
    std::vector<std::vector<Pair>> gather_pairs(const AtomStore& atoms, const NeighborList& full) const;

    SnapParams params_;
    SnapKnobs knobs_;
    SnapBasis basis_;
    std::size_t n_atoms_ = 0;
    DualArray<double> u_re_, u_im_, y_re_, y_im_;
};

/// Runs Snap::compute on every rank, stores the forces and folds ghost
/// forces back to their owners. Returns the total energy.
double compute_snap_system(Snap& snap, System& system, std::vector<NeighborList>& lists);

} // namespace mdkk

#endif
