#include "mdkk/torsion.hpp"

#include <algorithm>
#include <cmath>

#include "mdkk/parallel.hpp"

namespace mdkk
{

void BondParams::validate() const
{
    if (!(r_bond > 0.0) || !(r0 > 0.0) || !(p > 0.0)) {
        throw ConfigError("bond parameters r_bond, r0 and p must be positive");
    }
    if (!(bo_min >= 0.0) || !(bo_min < 1.0)) {
        throw ConfigError("bond order floor must lie in [0, 1)");
    }
}

double bond_order(double r, const BondParams& params)
{
    return std::exp(-std::pow(r / params.r0, params.p));
}

double BondTable::bo_between(std::size_t i, std::size_t j) const
{
    for (std::size_t n = 0; n < static_cast<std::size_t>(counts[i]); ++n) {
        if (static_cast<std::size_t>(partner(i, n)) == j) {
            return bo(i, n);
        }
    }
    return 0.0;
}

BondTable build_bonds(const AtomStore& atoms, const NeighborList& full, const BondParams& params,
                      std::size_t initial_capacity)
{
    params.validate();
    if (full.style() != ListStyle::Full) {
        throw ConfigError("bonds: needs a full neighbor list");
    }
    if (full.settings.list_cutoff() < params.r_bond) {
        throw ConfigError("bonds: neighbor list cutoff is shorter than r_bond");
    }
    for (const auto& g : atoms.ghosts) {
        if (g.rank != atoms.rank) {
            throw ConfigError("bonds: multi-rank systems are not supported");
        }
    }
    const std::size_t n = atoms.n_local;
    BondTable t;
    t.n_local = n;
    t.counts.assign(n, 0);
    std::size_t cap = std::max<std::size_t>(initial_capacity == 0 ? 8 : initial_capacity, 1);
    const double rbsq = params.r_bond * params.r_bond;
    std::vector<std::int32_t> partners;
    std::vector<double> orders;
    while (true) {
        partners.assign(std::max<std::size_t>(n, 1) * cap, -1);
        orders.assign(std::max<std::size_t>(n, 1) * cap, 0.0);
        std::vector<std::size_t> worst(worker_count(), 0);
        parallel_for_dynamic(n, worker_count(), 64, [&](std::size_t worker, std::size_t i) {
            const Vec3 xi = atoms.position(i);
            std::size_t c = 0;
            for (auto kk : full.row(i)) {
                const auto k = static_cast<std::size_t>(kk);
                const Vec3 xk = atoms.position(k);
                const double dx = xk[0] - xi[0];
                const double dy = xk[1] - xi[1];
                const double dz = xk[2] - xi[2];
                const double rsq = dx * dx + dy * dy + dz * dz;
                if (rsq >= rbsq) {
                    continue;
                }
                const double b = bond_order(std::sqrt(rsq), params);
                if (!(b > params.bo_min)) {
                    continue;
                }
                if (c < cap) {
                    partners[i * cap + c] = static_cast<std::int32_t>(atoms.owner_index(k));
                    orders[i * cap + c] = b;
                }
                ++c;
            }
            t.counts[i] = static_cast<std::int32_t>(c);
            worst[worker] = std::max(worst[worker], c);
        });
        const std::size_t needed = *std::max_element(worst.begin(), worst.end());
        if (needed <= cap) {
            break;
        }
        while (cap < needed) {
            cap = static_cast<std::size_t>(std::ceil(1.5 * static_cast<double>(cap)));
        }
        ++t.regrowths;
    }
    t.max_bonds = cap;
    if (n > 0) {
        t.bonds = DualArray<std::int32_t>({n, cap});
        t.bond_order = DualArray<double>({n, cap});
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t c = 0; c < cap; ++c) {
                t.bonds(Space::Host, i, c) = partners[i * cap + c];
                t.bond_order(Space::Host, i, c) = orders[i * cap + c];
            }
        }
        t.bonds.modify(Space::Host);
        t.bond_order.modify(Space::Host);
    }
    return t;
}

double QuadTable::survival() const
{
    return quad_candidates == 0 ? 0.0 : static_cast<double>(quads.size()) / static_cast<double>(quad_candidates);
}

namespace
{

// Walks the quads and triples of atom i. Emits through the callbacks and
// returns the number of candidates inspected.
template <class OnQuad, class OnTriple>
std::pair<std::size_t, std::size_t> visit_tuples(const BondTable& b, std::size_t i, double threshold, OnQuad&& on_quad,
                                                 OnTriple&& on_triple)
{
    std::size_t quad_cand = 0;
    std::size_t triple_cand = 0;
    const auto ci = static_cast<std::size_t>(b.counts[i]);
    for (std::size_t a = 0; a < ci; ++a) {
        const auto j = static_cast<std::size_t>(b.partner(i, a));
        const double bij = b.bo(i, a);
        for (std::size_t c = a + 1; c < ci; ++c) {
            const auto k = static_cast<std::size_t>(b.partner(i, c));
            ++triple_cand;
            if (bij * b.bo(i, c) > threshold) {
                on_triple(std::min(j, k), std::max(j, k));
            }
        }
        if (j <= i) {
            continue;
        }
        const auto cj = static_cast<std::size_t>(b.counts[j]);
        for (std::size_t c = 0; c < ci; ++c) {
            const auto k = static_cast<std::size_t>(b.partner(i, c));
            const double bijk = bij * b.bo(i, c);
            for (std::size_t d = 0; d < cj; ++d) {
                const auto l = static_cast<std::size_t>(b.partner(j, d));
                ++quad_cand;
                if (k == j || l == i || k == l) {
                    continue;
                }
                if (bijk * b.bo(j, d) > threshold) {
                    on_quad(j, k, l);
                }
            }
        }
    }
    return {quad_cand, triple_cand};
}

} // namespace

QuadTable enumerate_quads(const BondTable& bonds, double bo_threshold)
{
    const std::size_t n = bonds.n_local;
    const std::size_t workers = worker_count();
    std::vector<std::int64_t> nq(n), nt(n);
    std::vector<std::size_t> qc(workers, 0), tc(workers, 0);

    // pass 1: count
    parallel_for_dynamic(n, workers, 32, [&](std::size_t w, std::size_t i) {
        std::int64_t q = 0;
        std::int64_t t = 0;
        const auto cand = visit_tuples(
            bonds, i, bo_threshold, [&](std::size_t, std::size_t, std::size_t) { ++q; },
            [&](std::size_t, std::size_t) { ++t; });
        nq[i] = q;
        nt[i] = t;
        qc[w] += cand.first;
        tc[w] += cand.second;
    });

    QuadTable table;
    table.per_atom_start.assign(n + 1, 0);
    table.triple_start.assign(n + 1, 0);
    for (std::size_t i = 0; i < n; ++i) {
        table.per_atom_start[i + 1] = table.per_atom_start[i] + nq[i];
        table.triple_start[i + 1] = table.triple_start[i] + nt[i];
    }
    for (std::size_t w = 0; w < workers; ++w) {
        table.quad_candidates += qc[w];
        table.triple_candidates += tc[w];
    }
    table.quads.resize(static_cast<std::size_t>(table.per_atom_start[n]));
    table.triples.resize(static_cast<std::size_t>(table.triple_start[n]));

    // pass 2: fill each atom's span through its own cursor
    parallel_for_dynamic(n, workers, 32, [&](std::size_t, std::size_t i) {
        auto qcur = static_cast<std::size_t>(table.per_atom_start[i]);
        auto tcur = static_cast<std::size_t>(table.triple_start[i]);
        const auto ii = static_cast<std::int32_t>(i);
        visit_tuples(
            bonds, i, bo_threshold,
            [&](std::size_t j, std::size_t k, std::size_t l) {
                table.quads[qcur++] = {ii, static_cast<std::int32_t>(j), static_cast<std::int32_t>(k),
                                       static_cast<std::int32_t>(l)};
            },
            [&](std::size_t j, std::size_t k) {
                table.triples[tcur++] = {static_cast<std::int32_t>(j), ii, static_cast<std::int32_t>(k)};
            });
    });
    return table;
}

namespace
{

Vec3 sub(const Vec3& a, const Vec3& b)
{
    return {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
}

Vec3 cross(const Vec3& a, const Vec3& b)
{
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

double dot(const Vec3& a, const Vec3& b)
{
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

struct Geometry
{
    const AtomStore& atoms;
    const Box& box;

    /// x_b - x_a under minimum image
    Vec3 bond(std::size_t a, std::size_t b) const { return minimum_image(sub(atoms.position(b), atoms.position(a)), box); }
};

// Dihedral k-i-j-l. Returns false for a degenerate geometry. grad holds
// dE/dx for k, i, j, l.
bool dihedral(const Geometry& g, const Quad& q, double k_t, double& energy, std::array<Vec3, 4>& grad)
{
    const auto i = static_cast<std::size_t>(q.i);
    const auto j = static_cast<std::size_t>(q.j);
    const auto k = static_cast<std::size_t>(q.k);
    const auto l = static_cast<std::size_t>(q.l);
    const Vec3 b1 = g.bond(k, i);
    const Vec3 b2 = g.bond(i, j);
    const Vec3 b3 = g.bond(j, l);
    const Vec3 m = cross(b1, b2);
    const Vec3 n = cross(b2, b3);
    const double mm = dot(m, m);
    const double nn = dot(n, n);
    const double scale = dot(b2, b2);
    if (mm <= 1e-24 * dot(b1, b1) * scale || nn <= 1e-24 * dot(b3, b3) * scale) {
        return false;
    }
    const double inv = 1.0 / std::sqrt(mm * nn);
    const double c = dot(m, n) * inv;
    energy = k_t * (1.0 + c);
    Vec3 a{}, b{};
    for (int d = 0; d < 3; ++d) {
        a[d] = n[d] * inv - c * m[d] / mm;
        b[d] = m[d] * inv - c * n[d] / nn;
    }
    const Vec3 g1 = cross(b2, a);
    const Vec3 ab1 = cross(a, b1);
    const Vec3 b3b = cross(b3, b);
    const Vec3 g3 = cross(b, b2);
    for (int d = 0; d < 3; ++d) {
        const double g2 = ab1[d] + b3b[d];
        grad[0][d] = -k_t * g1[d];
        grad[1][d] = k_t * (g1[d] - g2);
        grad[2][d] = k_t * (g2 - g3[d]);
        grad[3][d] = k_t * g3[d];
    }
    return true;
}

// Bend j-i-k. grad holds dE/dx for j, i, k.
void bend(const Geometry& g, const Triple& t, double k_b, double& energy, std::array<Vec3, 3>& grad)
{
    const Vec3 u = g.bond(static_cast<std::size_t>(t.i), static_cast<std::size_t>(t.j));
    const Vec3 v = g.bond(static_cast<std::size_t>(t.i), static_cast<std::size_t>(t.k));
    const double uu = dot(u, u);
    const double vv = dot(v, v);
    const double inv = 1.0 / std::sqrt(uu * vv);
    const double c = dot(u, v) * inv;
    energy = k_b * (1.0 + c);
    for (int d = 0; d < 3; ++d) {
        const double du = k_b * (v[d] * inv - c * u[d] / uu);
        const double dv = k_b * (u[d] * inv - c * v[d] / vv);
        grad[0][d] = du;
        grad[1][d] = -du - dv;
        grad[2][d] = dv;
    }
}

} // namespace

TorsionResult compute_torsion(const QuadTable& table, const AtomStore& atoms, const Box& box,
                              const TorsionParams& params, AccumStrategy strategy)
{
    const Geometry geo{atoms, box};
    const std::size_t n = atoms.n_local;
    ScatterAccumulator acc(3 * n, strategy);
    const std::size_t workers = acc.workers();
    std::vector<std::array<double, 2>> energy(workers, {0.0, 0.0});
    std::vector<std::size_t> degenerate(workers, 0);

    parallel_for(table.quads.size(), workers, [&](std::size_t w, std::size_t qi) {
        const Quad& q = table.quads[qi];
        double e = 0.0;
        std::array<Vec3, 4> grad{};
        if (!dihedral(geo, q, params.k_t, e, grad)) {
            ++degenerate[w];
            return;
        }
        energy[w][0] += e;
        const std::array<std::int32_t, 4> who{q.k, q.i, q.j, q.l};
        for (std::size_t a = 0; a < 4; ++a) {
            acc.add3(w, static_cast<std::size_t>(who[a]), {-grad[a][0], -grad[a][1], -grad[a][2]});
        }
    });
    parallel_for(table.triples.size(), workers, [&](std::size_t w, std::size_t ti) {
        const Triple& t = table.triples[ti];
        double e = 0.0;
        std::array<Vec3, 3> grad{};
        bend(geo, t, params.k_b, e, grad);
        energy[w][1] += e;
        const std::array<std::int32_t, 3> who{t.j, t.i, t.k};
        for (std::size_t a = 0; a < 3; ++a) {
            acc.add3(w, static_cast<std::size_t>(who[a]), {-grad[a][0], -grad[a][1], -grad[a][2]});
        }
    });

    TorsionResult out;
    out.forces = acc.finalize();
    for (std::size_t w = 0; w < workers; ++w) {
        out.torsion_energy += energy[w][0];
        out.bend_energy += energy[w][1];
        out.degenerate += degenerate[w];
    }
    return out;
}

TorsionResult compute_torsion_reference(const BondTable& bonds, const AtomStore& atoms, const Box& box,
                                        const TorsionParams& params)
{
    const Geometry geo{atoms, box};
    TorsionResult out;
    out.forces.assign(3 * atoms.n_local, 0.0);
    auto apply = [&](std::size_t atom, const Vec3& g) {
        for (std::size_t d = 0; d < 3; ++d) {
            out.forces[3 * atom + d] -= g[d];
        }
    };
    for (std::size_t i = 0; i < bonds.n_local; ++i) {
        const auto ci = static_cast<std::size_t>(bonds.counts[i]);
        for (std::size_t a = 0; a < ci; ++a) {
            const auto j = static_cast<std::size_t>(bonds.partner(i, a));
            for (std::size_t c = 0; c < ci; ++c) {
                const auto k = static_cast<std::size_t>(bonds.partner(i, c));
                if (k == j) {
                    continue;
                }
                const double bijk = bonds.bo(i, a) * bonds.bo(i, c);
                if (j < k && bijk > params.bo_threshold) {
                    double e = 0.0;
                    std::array<Vec3, 3> g{};
                    bend(geo, {static_cast<std::int32_t>(j), static_cast<std::int32_t>(i), static_cast<std::int32_t>(k)},
                         params.k_b, e, g);
                    out.bend_energy += e;
                    apply(j, g[0]);
                    apply(i, g[1]);
                    apply(k, g[2]);
                }
                if (j <= i) {
                    continue;
                }
                for (std::size_t d = 0; d < static_cast<std::size_t>(bonds.counts[j]); ++d) {
                    const auto l = static_cast<std::size_t>(bonds.partner(j, d));
                    if (l == i || l == k || bijk * bonds.bo(j, d) <= params.bo_threshold) {
                        continue;
                    }
                    const Quad q{static_cast<std::int32_t>(i), static_cast<std::int32_t>(j),
                                 static_cast<std::int32_t>(k), static_cast<std::int32_t>(l)};
                    double e = 0.0;
                    std::array<Vec3, 4> g{};
                    if (!dihedral(geo, q, params.k_t, e, g)) {
                        ++out.degenerate;
                        continue;
                    }
                    out.torsion_energy += e;
                    apply(k, g[0]);
                    apply(i, g[1]);
                    apply(j, g[2]);
                    apply(l, g[3]);
                }
            }
        }
    }
    return out;
}

} // namespace mdkk
