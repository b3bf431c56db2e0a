#include "mdkk/qeq.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "mdkk/parallel.hpp"

namespace mdkk
{

void OverCSR::validate() const
{
    if (row_offsets.size() != n_rows + 1 || row_nnz.size() != n_rows || row_offsets.front() != 0) {
        throw Error("OverCSR: inconsistent row arrays");
    }
    for (std::size_t r = 0; r < n_rows; ++r) {
        if (row_offsets[r + 1] < row_offsets[r]) {
            throw Error("OverCSR: offsets decrease at row " + std::to_string(r));
        }
        if (row_nnz[r] < 0 || static_cast<std::size_t>(row_nnz[r]) > capacity(r)) {
            throw Error("OverCSR: row " + std::to_string(r) + " exceeds its capacity");
        }
        for (std::int32_t n = 0; n < row_nnz[r]; ++n) {
            const auto c = columns[static_cast<std::size_t>(row_offsets[r] + n)];
            if (c < 0 || static_cast<std::size_t>(c) >= n_cols) {
                throw Error("OverCSR: column out of range in row " + std::to_string(r));
            }
        }
    }
}

std::vector<std::int64_t> scan_offsets_64(std::span<const std::int64_t> capacities)
{
    const std::size_t n = capacities.size();
    std::vector<std::int64_t> offsets(n + 1, 0);
    // blocked scan: per-block totals, serial scan of totals, then per-block fill
    const std::size_t block = 1 << 14;
    const std::size_t n_blocks = (n + block - 1) / block;
    std::vector<std::int64_t> totals(n_blocks + 1, 0);
    parallel_for(n_blocks, worker_count(), [&](std::size_t, std::size_t b) {
        const std::size_t end = std::min(n, (b + 1) * block);
        std::int64_t s = 0;
        for (std::size_t i = b * block; i < end; ++i) {
            s += capacities[i];
        }
        totals[b + 1] = s;
    });
    std::partial_sum(totals.begin(), totals.end(), totals.begin());
    parallel_for(n_blocks, worker_count(), [&](std::size_t, std::size_t b) {
        const std::size_t end = std::min(n, (b + 1) * block);
        std::int64_t s = totals[b];
        for (std::size_t i = b * block; i < end; ++i) {
            s += capacities[i];
            offsets[i + 1] = s;
        }
    });
    return offsets;
}

const QeqSpecies& QeqParams::of(std::int32_t type) const
{
    if (type < 1 || static_cast<std::size_t>(type) > species.size()) {
        throw ConfigError("qeq: no parameters for atom type " + std::to_string(type));
    }
    return species[static_cast<std::size_t>(type) - 1];
}

double shielded_coulomb(double r, double gamma_ij)
{
    const double shield = 1.0 / (gamma_ij * gamma_ij * gamma_ij);
    return 1.0 / std::cbrt(r * r * r + shield);
}

OverCSR build_qeq_matrix(const AtomStore& atoms, const NeighborList& full, const QeqParams& params)
{
    if (full.style() != ListStyle::Full) {
        throw ConfigError("qeq: matrix build needs a full neighbor list");
    }
    if (full.settings.list_cutoff() < params.cutoff) {
        throw ConfigError("qeq: neighbor list cutoff is shorter than the qeq cutoff");
    }
    for (const auto& g : atoms.ghosts) {
        if (g.rank != atoms.rank) {
            throw ConfigError("qeq: multi-rank systems are not supported");
        }
    }
    const std::size_t n = atoms.n_local;
    std::vector<std::int64_t> caps(n);
    for (std::size_t i = 0; i < n; ++i) {
        caps[i] = full.counts[i] + 1;
    }

    OverCSR h;
    h.n_rows = n;
    h.n_cols = n;
    h.row_offsets = scan_offsets_64(caps);
    h.row_nnz.assign(n, 0);
    h.values.assign(static_cast<std::size_t>(h.row_offsets.back()), 0.0);
    h.columns.assign(static_cast<std::size_t>(h.row_offsets.back()), 0);

    const double cutsq = params.cutoff * params.cutoff;
    std::vector<std::size_t> bad;
    std::vector<std::vector<std::size_t>> bad_by_worker(worker_count());
    parallel_for_dynamic(n, worker_count(), 64, [&](std::size_t worker, std::size_t i) {
        const QeqSpecies& si = params.of(atoms.types[i]);
        const auto base = static_cast<std::size_t>(h.row_offsets[i]);
        h.values[base] = si.eta;
        h.columns[base] = static_cast<std::int32_t>(i);
        std::size_t nnz = 1;
        double offdiag = 0.0;
        const Vec3 xi = atoms.position(i);
        for (auto kk : full.row(i)) {
            const auto k = static_cast<std::size_t>(kk);
            const Vec3 xk = atoms.position(k);
            const double dx = xk[0] - xi[0];
            const double dy = xk[1] - xi[1];
            const double dz = xk[2] - xi[2];
            const double rsq = dx * dx + dy * dy + dz * dz;
            if (rsq >= cutsq) {
                continue;
            }
            const QeqSpecies& sk = params.of(atoms.types[k]);
            const double v = shielded_coulomb(std::sqrt(rsq), std::sqrt(si.gamma * sk.gamma));
            h.values[base + nnz] = v;
            h.columns[base + nnz] = static_cast<std::int32_t>(atoms.owner_index(k));
            offdiag += std::abs(v);
            ++nnz;
        }
        h.row_nnz[i] = static_cast<std::int32_t>(nnz);
        if (!(si.eta > offdiag)) {
            bad_by_worker[worker].push_back(i);
        }
    });
    for (const auto& b : bad_by_worker) {
        bad.insert(bad.end(), b.begin(), b.end());
    }
    if (!bad.empty()) {
        throw ConfigError("qeq: eta does not dominate the off-diagonal row sum for " + std::to_string(bad.size()) +
                          " atom(s); raise eta or lower the cutoff");
    }
    return h;
}

namespace
{

void check_dims(const OverCSR& h, std::size_t nx, std::size_t ny)
{
    if (nx != h.n_cols || ny != h.n_rows) {
        throw Error("spmv: dimension mismatch (matrix " + std::to_string(h.n_rows) + "x" + std::to_string(h.n_cols) +
                    ", x " + std::to_string(nx) + ", y " + std::to_string(ny) + ")");
    }
}

} // namespace

void spmv(const OverCSR& h, std::span<const double> x, std::span<double> y)
{
    check_dims(h, x.size(), y.size());
    parallel_for(h.n_rows, worker_count(), [&](std::size_t, std::size_t r) {
        const auto begin = static_cast<std::size_t>(h.row_offsets[r]);
        const auto end = begin + static_cast<std::size_t>(h.row_nnz[r]);
        double s = 0.0;
        for (std::size_t n = begin; n < end; ++n) {
            s += h.values[n] * x[static_cast<std::size_t>(h.columns[n])];
        }
        y[r] = s;
    });
}

void spmv_fused(const OverCSR& h, std::span<const double> x1, std::span<const double> x2, std::span<double> y1,
                std::span<double> y2)
{
    check_dims(h, x1.size(), y1.size());
    check_dims(h, x2.size(), y2.size());
    parallel_for(h.n_rows, worker_count(), [&](std::size_t, std::size_t r) {
        const auto begin = static_cast<std::size_t>(h.row_offsets[r]);
        const auto end = begin + static_cast<std::size_t>(h.row_nnz[r]);
        double s1 = 0.0;
        double s2 = 0.0;
        for (std::size_t n = begin; n < end; ++n) {
            const double v = h.values[n];
            const auto c = static_cast<std::size_t>(h.columns[n]);
            s1 += v * x1[c];
            s2 += v * x2[c];
        }
        y1[r] = s1;
        y2[r] = s2;
    });
}

void spmv_row_split(const OverCSR& h, std::span<const double> x, std::span<double> y, std::size_t lanes)
{
    check_dims(h, x.size(), y.size());
    lanes = std::max<std::size_t>(lanes, 1);
    parallel_for(h.n_rows, worker_count(), [&](std::size_t, std::size_t r) {
        const auto begin = static_cast<std::size_t>(h.row_offsets[r]);
        const auto nnz = static_cast<std::size_t>(h.row_nnz[r]);
        double total = 0.0;
        for (std::size_t lane = 0; lane < lanes; ++lane) {
            double s = 0.0;
            for (std::size_t n = lane; n < nnz; n += lanes) {
                s += h.values[begin + n] * x[static_cast<std::size_t>(h.columns[begin + n])];
            }
            total += s;
        }
        y[r] = total;
    });
}

double deterministic_dot(std::span<const double> a, std::span<const double> b)
{
    const std::size_t n = a.size();
    const std::size_t block = 4096;
    const std::size_t n_blocks = (n + block - 1) / block;
    std::vector<double> partial(n_blocks, 0.0);
    parallel_for(n_blocks, worker_count(), [&](std::size_t, std::size_t blk) {
        const std::size_t end = std::min(n, (blk + 1) * block);
        double s = 0.0;
        for (std::size_t i = blk * block; i < end; ++i) {
            s += a[i] * b[i];
        }
        partial[blk] = s;
    });
    double s = 0.0;
    for (double p : partial) {
        s += p;
    }
    return s;
}

namespace
{

// CG state for one right-hand side. step() consumes H p computed elsewhere.
struct CgState
{
    std::vector<double> x, r, p, hp;
    double rr = 0.0;
    double bnorm = 1.0;
    double tol = 0.0;
    CgResult result;

    CgState(std::span<const double> b, double tolerance) : x(b.size(), 0.0), r(b.begin(), b.end()), p(r), hp(b.size())
    {
        tol = tolerance;
        rr = deterministic_dot(r, r);
        bnorm = std::sqrt(rr);
        if (bnorm == 0.0) {
            bnorm = 1.0;
        }
        record();
    }

    void record()
    {
        result.residual = std::sqrt(rr) / bnorm;
        result.history.push_back(result.residual);
        result.converged = result.residual <= tol;
    }

    bool done() const { return result.converged; }

    void step()
    {
        const double alpha = rr / deterministic_dot(p, hp);
        const std::size_t n = x.size();
        for (std::size_t i = 0; i < n; ++i) {
            x[i] += alpha * p[i];
            r[i] -= alpha * hp[i];
        }
        const double rr_new = deterministic_dot(r, r);
        const double beta = rr_new / rr;
        for (std::size_t i = 0; i < n; ++i) {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_new;
        ++result.iterations;
        record();
    }

    CgResult finish()
    {
        result.x = std::move(x);
        return std::move(result);
    }
};

} // namespace

CgResult conjugate_gradient(const OverCSR& h, std::span<const double> b, double tol, std::size_t max_iter)
{
    CgState st(b, tol);
    while (!st.done() && st.result.iterations < max_iter) {
        spmv(h, st.p, st.hp);
        st.step();
    }
    return st.finish();
}

std::pair<CgResult, CgResult> fused_conjugate_gradient(const OverCSR& h, std::span<const double> b1,
                                                       std::span<const double> b2, double tol, std::size_t max_iter)
{
    CgState a(b1, tol);
    CgState b(b2, tol);
    while (true) {
        const bool run_a = !a.done() && a.result.iterations < max_iter;
        const bool run_b = !b.done() && b.result.iterations < max_iter;
        if (run_a && run_b) {
            spmv_fused(h, a.p, b.p, a.hp, b.hp);
            a.step();
            b.step();
        } else if (run_a) {
            spmv(h, a.p, a.hp);
            a.step();
        } else if (run_b) {
            spmv(h, b.p, b.hp);
            b.step();
        } else {
            break;
        }
    }
    return {a.finish(), b.finish()};
}

QeqConvergenceError::QeqConvergenceError(double rs, double rt)
    : Error("qeq: CG did not converge (residual s = " + std::to_string(rs) + ", t = " + std::to_string(rt) + ")"),
      residual_s(rs), residual_t(rt)
{
}

QeqResult solve_qeq(const OverCSR& h, std::span<const double> chi, const QeqParams& params)
{
    if (chi.size() != h.n_rows) {
        throw Error("qeq: chi has " + std::to_string(chi.size()) + " entries for " + std::to_string(h.n_rows) +
                    " rows");
    }
    std::vector<double> b1(chi.size());
    for (std::size_t i = 0; i < chi.size(); ++i) {
        b1[i] = -chi[i];
    }
    const std::vector<double> b2(chi.size(), -1.0);
    auto [s, t] = fused_conjugate_gradient(h, b1, b2, params.tol, params.max_iter);
    if (!s.converged || !t.converged) {
        throw QeqConvergenceError(s.residual, t.residual);
    }
    double sum_s = 0.0;
    double sum_t = 0.0;
    for (std::size_t i = 0; i < chi.size(); ++i) {
        sum_s += s.x[i];
        sum_t += t.x[i];
    }
    QeqResult out;
    const double mu = (sum_s - params.net_charge) / sum_t;
    out.q.resize(chi.size());
    for (std::size_t i = 0; i < chi.size(); ++i) {
        out.q[i] = s.x[i] - mu * t.x[i];
    }
    out.s = std::move(s);
    out.t = std::move(t);
    return out;
}

std::vector<double> qeq_chi(const AtomStore& atoms, const QeqParams& params)
{
    std::vector<double> chi(atoms.n_local);
    for (std::size_t i = 0; i < atoms.n_local; ++i) {
        chi[i] = params.of(atoms.types[i]).chi;
    }
    return chi;
}

} // namespace mdkk
