#ifndef MDKK_TESTS_QEQ_ORACLE_HPP
#define MDKK_TESTS_QEQ_ORACLE_HPP

#include <cmath>
#include <random>
#include <vector>

#include "mdkk/pair.hpp"
#include "mdkk/qeq.hpp"
#include "oracles.hpp"

namespace oracle
{

using namespace mdkk;

inline QeqParams qeq_test_params()
{
    QeqParams p;
    p.cutoff = 2.0;
    p.species = {{0.5, 40.0, 0.8}, {-0.3, 35.0, 1.2}};
    return p;
}

struct QeqSystem
{
    System system;
    std::vector<NeighborList> lists;
    std::vector<AtomRecord> atoms;
};

inline QeqSystem qeq_system(std::size_t n, std::uint64_t seed, const QeqParams& p)
{
    Box box;
    auto atoms = gas(n, 0.5, seed, box);
    std::mt19937_64 rng(seed);
    for (auto& a : atoms) {
        a.type = 1 + static_cast<std::int32_t>(rng() % 2);
    }
    QeqSystem b{System(box, 1), {}, atoms};
    NeighborSettings s{p.cutoff, 0.3, ListStyle::Full, false};
    b.system.load(atoms, s.list_cutoff());
    b.lists = build_lists(b.system, s);
    return b;
}

/// Dense QEq matrix in store order straight from pair geometry.
inline std::vector<std::vector<double>> qeq_dense(const AtomStore& store, const Box& box, const QeqParams& p)
{
    const std::size_t n = store.n_local;
    std::vector<std::vector<double>> h(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        const auto& si = p.species[static_cast<std::size_t>(store.types[i] - 1)];
        h[i][i] = si.eta;
        for (std::size_t k = 0; k < n; ++k) {
            if (k == i) {
                continue;
            }
            const Vec3 xi = store.position(i);
            const Vec3 xk = store.position(k);
            const Vec3 d = min_image({xk[0] - xi[0], xk[1] - xi[1], xk[2] - xi[2]}, box);
            const double r = std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
            if (r >= p.cutoff) {
                continue;
            }
            const auto& sk = p.species[static_cast<std::size_t>(store.types[k] - 1)];
            const double g = std::sqrt(si.gamma * sk.gamma);
            h[i][k] = std::pow(std::pow(r, 3) + std::pow(g, -3), -1.0 / 3.0);
        }
    }
    return h;
}

/// Dense copy of an over-allocated matrix.
inline std::vector<std::vector<double>> densify(const OverCSR& h)
{
    std::vector<std::vector<double>> d(h.n_rows, std::vector<double>(h.n_cols, 0.0));
    for (std::size_t r = 0; r < h.n_rows; ++r) {
        for (std::int32_t n = 0; n < h.row_nnz[r]; ++n) {
            const auto slot = static_cast<std::size_t>(h.row_offsets[r] + n);
            d[r][static_cast<std::size_t>(h.columns[slot])] += h.values[slot];
        }
    }
    return d;
}

/// Gaussian elimination with partial pivoting.
inline std::vector<double> dense_solve(std::vector<std::vector<double>> a, std::vector<double> b)
{
    const std::size_t n = b.size();
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < n; ++r) {
            if (std::abs(a[r][c]) > std::abs(a[piv][c])) {
                piv = r;
            }
        }
        std::swap(a[c], a[piv]);
        std::swap(b[c], b[piv]);
        for (std::size_t r = c + 1; r < n; ++r) {
            const double f = a[r][c] / a[c][c];
            for (std::size_t k = c; k < n; ++k) {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    std::vector<double> x(n);
    for (std::size_t r = n; r-- > 0;) {
        double s = b[r];
        for (std::size_t k = r + 1; k < n; ++k) {
            s -= a[r][k] * x[k];
        }
        x[r] = s / a[r][r];
    }
    return x;
}

/// Random over-allocated matrix with unused slots filled with junk.
inline OverCSR random_over_csr(std::size_t n, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> val(-1.0, 1.0);
    OverCSR h;
    h.n_rows = n;
    h.n_cols = n;
    std::vector<std::int64_t> caps(n);
    for (auto& c : caps) {
        c = static_cast<std::int64_t>(rng() % 12);
    }
    h.row_offsets = scan_offsets_64(caps);
    h.values.assign(static_cast<std::size_t>(h.row_offsets.back()), 99.0);
    h.columns.assign(static_cast<std::size_t>(h.row_offsets.back()), 0);
    h.row_nnz.resize(n);
    for (std::size_t r = 0; r < n; ++r) {
        const auto nnz = caps[r] == 0 ? 0 : static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(caps[r] + 1));
        h.row_nnz[r] = static_cast<std::int32_t>(nnz);
        for (std::int64_t k = 0; k < nnz; ++k) {
            h.values[static_cast<std::size_t>(h.row_offsets[r] + k)] = val(rng);
            h.columns[static_cast<std::size_t>(h.row_offsets[r] + k)] = static_cast<std::int32_t>(rng() % n);
        }
    }
    return h;
}

} // namespace oracle

#endif
