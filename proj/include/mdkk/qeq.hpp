#ifndef MDKK_QEQ_HPP
#define MDKK_QEQ_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mdkk/domain.hpp"
#include "mdkk/error.hpp"
#include "mdkk/neighbor.hpp"

namespace mdkk
{

//---------------------------------------------------------------------------//
/*!
  \brief CSR matrix whose rows are sized to a capacity bound.

  Row r owns slots [row_offsets[r], row_offsets[r+1]) of which only the first
  row_nnz[r] are live. Offsets are 64-bit so that the total slot count may
  pass 2^31 while column indices stay 32-bit.
*/
struct OverCSR
{
    std::size_t n_rows = 0;
    std::size_t n_cols = 0;
    std::vector<double> values;
    std::vector<std::int32_t> columns;
    std::vector<std::int64_t> row_offsets;
    std::vector<std::int32_t> row_nnz;

    std::size_t capacity(std::size_t r) const
    {
        return static_cast<std::size_t>(row_offsets[r + 1] - row_offsets[r]);
    }

    /// Throws Error if any structural invariant is broken.
    void validate() const;
};

/// Exclusive scan of row capacities in 64-bit arithmetic; result has one
/// more entry than the input.
std::vector<std::int64_t> scan_offsets_64(std::span<const std::int64_t> capacities);

struct QeqSpecies
{
    double chi = 0.0;   // electronegativity
    double eta = 1.0;   // self-interaction (diagonal)
    double gamma = 1.0; // shielding
};

struct QeqParams
{
    double cutoff = 2.0;
    /// Indexed by atom type - 1.
    std::vector<QeqSpecies> species;
    double net_charge = 0.0;
    double tol = 1e-6;
    std::size_t max_iter = 500;

    const QeqSpecies& of(std::int32_t type) const;
};

/// Shielded Coulomb element 1 / (r^3 + gamma^-3)^(1/3).
double shielded_coulomb(double r, double gamma_ij);

/// Fills the over-allocated matrix from a full neighbor list. Each row's
/// capacity is its list count plus one (the diagonal, stored first); only
/// neighbors within params.cutoff become nonzeros. Ghost columns fold onto
/// their owners, so the store must be single-rank. Throws ConfigError when a
/// row is not strictly diagonally dominant.
OverCSR build_qeq_matrix(const AtomStore& atoms, const NeighborList& full, const QeqParams& params);

/// y = H x over live entries only.
void spmv(const OverCSR& h, std::span<const double> x, std::span<double> y);

/// Two products sharing one pass over the matrix. Bit-identical to two
/// spmv calls.
void spmv_fused(const OverCSR& h, std::span<const double> x1, std::span<const double> x2, std::span<double> y1,
                std::span<double> y2);

/// Row-parallel product where each row is also split over `lanes` partial
/// sums that are combined at the end of the row.
void spmv_row_split(const OverCSR& h, std::span<const double> x, std::span<double> y, std::size_t lanes);

/// Dot product with a fixed blocking, so the result does not depend on
/// the worker count.
double deterministic_dot(std::span<const double> a, std::span<const double> b);

struct CgResult
{
    std::vector<double> x;
    std::size_t iterations = 0;
    double residual = 0.0;
    bool converged = false;
    /// Relative residual after every iteration, starting with the initial one.
    std::vector<double> history;
};

/// Unpreconditioned CG from x = 0. Does not throw on non-convergence.
CgResult conjugate_gradient(const OverCSR& h, std::span<const double> b, double tol, std::size_t max_iter);

/// Two CG solves advanced together, one fused product per iteration. A
/// converged system stops updating while the other continues.
std::pair<CgResult, CgResult> fused_conjugate_gradient(const OverCSR& h, std::span<const double> b1,
                                                       std::span<const double> b2, double tol, std::size_t max_iter);

class QeqConvergenceError : public Error
{
public:
    QeqConvergenceError(double residual_s, double residual_t);
    double residual_s;
    double residual_t;
};

struct QeqResult
{
    std::vector<double> q;
    CgResult s;
    CgResult t;
};

/// Solves H s = -chi and H t = -1 with the fused CG, then
/// q = s - ((sum s - Q) / sum t) t.
QeqResult solve_qeq(const OverCSR& h, std::span<const double> chi, const QeqParams& params);

/// Electronegativities per local atom.
std::vector<double> qeq_chi(const AtomStore& atoms, const QeqParams& params);

} // namespace mdkk

#endif
