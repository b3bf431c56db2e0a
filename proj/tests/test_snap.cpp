#include <doctest.h>

#include <cmath>
#include <complex>
#include <map>
#include <numbers>
#include <random>

#include "mdkk/pair.hpp"
#include "mdkk/snap.hpp"
#include "snap_oracle.hpp"

using namespace mdkk;
using namespace oracle;
using cplx = std::complex<double>;


TEST_CASE("Clebsch-Gordan coefficients")
{
    const SnapBasis half(1.0);
    CHECK(half.cg(1, 1, 2, 1, -1) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-15));

    const SnapBasis zero(0.0);
    CHECK(zero.cg(0, 0, 0, 0, 0) == 1.0);
    CHECK(zero.n_b() == 1);

    const SnapBasis basis(2.0);
    const int t = basis.twojmax();
    double worst = 0.0;
    for (int j1 = 0; j1 <= t; ++j1) {
        for (int j2 = 0; j2 <= t; ++j2) {
            for (int j = std::abs(j1 - j2); j <= std::min(t, j1 + j2); j += 2) {
                for (int m = -j; m <= j; m += 2) {
                    double norm = 0.0;
                    for (int m1 = -j1; m1 <= j1; m1 += 2) {
                        const int m2 = m - m1;
                        if (std::abs(m2) > j2 || (m2 + j2) % 2) {
                            continue;
                        }
                        const double c = basis.cg(j1, j2, j, m1, m2);
                        worst = std::max(worst, std::abs(c - racah_cg(j1, j2, j, m1, m2)));
                        norm += c * c;
                    }
                    CHECK(norm == doctest::Approx(1.0).epsilon(1e-12));
                }
            }
        }
    }
    CHECK(worst < 1e-13);
    CHECK_THROWS_AS(SnapBasis(0.3), ConfigError);
}

TEST_CASE("flat quantum index is a bijection, j slowest")
{
    const SnapBasis basis(4.0);
    std::vector<int> seen(basis.u_size(), 0);
    std::size_t expect = 0;
    for (int j = 0; j <= basis.twojmax(); ++j) {
        for (int mb = 0; mb <= j; ++mb) {
            for (int ma = 0; ma <= j; ++ma) {
                CHECK(basis.flat(j, mb, ma) == expect++);
                ++seen[basis.flat(j, mb, ma)];
            }
        }
    }
    CHECK(std::all_of(seen.begin(), seen.end(), [](int v) { return v == 1; }));
    CHECK(basis.u_size() == 285);
}

TEST_CASE("hypersphere map and switching function")
{
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int n = 0; n < 100; ++n) {
        const Vec3 d{u(rng), u(rng), u(rng)};
        const auto ck = cayley_klein(d, 3.5, 0.99);
        CHECK(std::norm(ck.a) + std::norm(ck.b) == doctest::Approx(1.0).epsilon(1e-12));
    }
    const auto at = cayley_klein({2.5 * (1 - 1e-12), 0, 0}, 2.5, 0.99);
    CHECK(std::abs(at.fc) < 1e-12);
    CHECK(std::abs(at.dfc) < 1e-10);
    const auto beyond = cayley_klein({2.5, 0, 0}, 2.5, 0.99);
    CHECK(beyond.fc == 0.0);
    CHECK(beyond.dfc == 0.0);
    CHECK_THROWS_AS(cayley_klein({0, 0, 0}, 2.5, 0.99), Error);
}

TEST_CASE("each u_j of one neighbor is unitary")
{
    const SnapBasis basis(4.0);
    for (const Vec3& d : random_shell(10, 0.5, 3.0, 7)) {
        const auto u = wigner_u(basis, d, 3.2, 0.99);
        for (int j = 0; j <= basis.twojmax(); ++j) {
            for (int r1 = 0; r1 <= j; ++r1) {
                for (int r2 = 0; r2 <= j; ++r2) {
                    cplx s = 0.0;
                    for (int c = 0; c <= j; ++c) {
                        s += u[basis.flat(j, r1, c)] * std::conj(u[basis.flat(j, r2, c)]);
                    }
                    CHECK(std::abs(s - cplx(r1 == r2 ? 1.0 : 0.0)) < 1e-12);
                }
            }
        }
    }
}

TEST_CASE("isolated atom has zero U and B")
{
    SnapParams p;
    p.jmax = 2.0;
    p.rcut = 2.0;
    Snap snap(p);
    auto s = single_center({}, p.rcut);
    snap.compute_ui(s.system.stores()[0], s.lists[0]);
    for (std::size_t q = 0; q < snap.basis().u_size(); ++q) {
        CHECK(snap.u(0, q) == cplx(0.0));
    }
    for (double b : snap.compute_bi()) {
        CHECK(b == 0.0);
    }
}

TEST_CASE("jmax 1/2 single neighbor closed form")
{
    SnapParams p;
    p.jmax = 0.5;
    p.rcut = 2.0;
    p.beta = {0.7, -1.3};
    Snap snap(p);
    REQUIRE(snap.basis().n_b() == 2);
    const double r = 1.1;
    auto s = single_center({{0.3, -0.6, std::sqrt(r * r - 0.45)}}, p.rcut);
    const auto res = snap.compute(s.system.stores()[0], s.lists[0]);
    const double fc = 0.5 * (std::cos(std::numbers::pi * r / p.rcut) + 1.0);
    const double fc3 = fc * fc * fc;
    // B_{0,0,0} = fc^3, B_{1/2,0,1/2} = 2 fc^3
    CHECK(res.atom_energy[0] == doctest::Approx(0.7 * fc3 - 1.3 * 2.0 * fc3).epsilon(1e-13));
}

TEST_CASE("bispectrum equals a dense full-matrix contraction")
{
    for (double jmax : {0.5, 1.0, 1.5, 2.0}) {
        SnapParams p;
        p.jmax = jmax;
        p.rcut = 2.6;
        Snap snap(p);
        const SnapBasis& basis = snap.basis();
        auto s = single_center(random_shell(9, 0.8, 2.5, 11), p.rcut);
        snap.compute_ui(s.system.stores()[0], s.lists[0]);
        const auto b = snap.compute_bi();
        auto U = [&](int j, int mb, int ma) { return snap.u(0, basis.flat(j, mb, ma)); };
        for (std::size_t n = 0; n < basis.n_b(); ++n) {
            const auto [j1, j2, j] = basis.b_list()[n];
            cplx total = 0.0;
            for (int mb = 0; mb <= j; ++mb) {
                for (int ma = 0; ma <= j; ++ma) {
                    cplx z = 0.0;
                    for (int ma1 = 0; ma1 <= j1; ++ma1) {
                        for (int ma2 = 0; ma2 <= j2; ++ma2) {
                            if ((2 * ma1 - j1) + (2 * ma2 - j2) != 2 * ma - j) {
                                continue;
                            }
                            for (int mb1 = 0; mb1 <= j1; ++mb1) {
                                for (int mb2 = 0; mb2 <= j2; ++mb2) {
                                    if ((2 * mb1 - j1) + (2 * mb2 - j2) != 2 * mb - j) {
                                        continue;
                                    }
                                    z += racah_cg(j1, j2, j, 2 * ma1 - j1, 2 * ma2 - j2) *
                                         racah_cg(j1, j2, j, 2 * mb1 - j1, 2 * mb2 - j2) * U(j1, mb1, ma1) *
                                         U(j2, mb2, ma2);
                                }
                            }
                        }
                    }
                    total += std::conj(U(j, mb, ma)) * z;
                }
            }
            CHECK(std::abs(total.imag()) < 1e-10);
            CHECK(b[n] == doctest::Approx(total.real()).epsilon(1e-12));
        }
    }
}

TEST_CASE("zero beta gives zero adjoint and forces")
{
    SnapParams p;
    p.jmax = 1.0;
    p.rcut = 2.2;
    Snap snap(p);
    auto c = random_cluster(60, 0.4, 5);
    const auto e = evaluate(snap, c.box, c.atoms);
    CHECK(e.energy == 0.0);
    for (const auto& [id, f] : e.forces) {
        CHECK(f[0] == 0.0);
        CHECK(f[1] == 0.0);
        CHECK(f[2] == 0.0);
    }
    for (std::size_t q = 0; q < snap.basis().u_size(); ++q) {
        CHECK(snap.y(0, q) == cplx(0.0));
    }
}

TEST_CASE("beta extents are checked")
{
    SnapParams p;
    p.jmax = 1.0;
    p.beta = {1.0, 2.0};
    CHECK_THROWS_AS(Snap{p}, ConfigError);
    CHECK_THROWS_AS(parse_snap_coefficients("1.0\n0.1 0.2\n"), ConfigError);
    const auto c = parse_snap_coefficients("# comment\n0.5   # jmax\n0.25\n-1e-2 # tail\n");
    CHECK(c.jmax == 0.5);
    CHECK(c.beta == std::vector<double>{0.25, -0.01});
    CHECK_THROWS_AS(parse_snap_coefficients("0.5\n0.1 x\n"), ConfigError);
}

TEST_CASE("energy from beta.B equals one third of Y:U*")
{
    for (double jmax : {1.0, 2.0, 4.0}) {
        SnapParams p;
        p.jmax = jmax;
        p.rcut = 2.2;
        p.beta = random_beta(SnapBasis(jmax), 17);
        Snap snap(p);
        auto c = random_cluster(50, 0.4, 23);
        System system(c.box, 1);
        NeighborSettings ns{p.rcut, 0.3, ListStyle::Full, false};
        system.load(c.atoms, ns.list_cutoff());
        auto lists = build_lists(system, ns);
        snap.compute_ui(system.stores()[0], lists[0]);
        snap.compute_yi();
        const double eb = snap.energy_from_b();
        const double ey = snap.energy_from_adjoint();
        CHECK(std::abs(eb - ey) <= 1e-10 * std::max(1.0, std::abs(eb)));
    }
}

TEST_CASE("snap forces match finite differences")
{
    for (double jmax : {1.0, 2.0, 4.0}) {
        const auto rep = snap_fd(jmax);
        MESSAGE("jmax " << jmax << ": energy " << rep.energy << ", worst relative FD error " << rep.worst);
        CHECK(rep.force_sum <= 1e-10);
        CHECK(rep.worst <= 1e-6);
    }
}

TEST_CASE("snap energy and bispectrum are rotation invariant")
{
    const auto rep = snap_rotation();
    CHECK(rep.energy <= 1e-8);
    CHECK(rep.bispectrum <= 1e-8);
    CHECK(rep.force <= 1e-8);
}

TEST_CASE("neighbor order does not change B")
{
    SnapParams p;
    p.jmax = 2.0;
    p.rcut = 2.4;
    Snap snap(p);
    auto shell = random_shell(10, 0.8, 2.3, 3);
    auto a = single_center(shell, p.rcut);
    snap.compute_ui(a.system.stores()[0], a.lists[0]);
    const auto ba = snap.compute_bi();
    std::reverse(shell.begin(), shell.end());
    std::swap(shell[2], shell[7]);
    auto b = single_center(shell, p.rcut);
    snap.compute_ui(b.system.stores()[0], b.lists[0]);
    const auto bb = snap.compute_bi();
    auto center = [&](const Single& s, const std::vector<double>& b) {
        const AtomStore& st = s.system.stores()[0];
        const std::size_t nb = snap.basis().n_b();
        for (std::size_t r = 0; r < st.n_local; ++r) {
            if (st.global_ids[r] == 1) {
                return std::vector<double>(b.begin() + static_cast<std::ptrdiff_t>(r * nb),
                                           b.begin() + static_cast<std::ptrdiff_t>((r + 1) * nb));
            }
        }
        return std::vector<double>{};
    };
    CHECK(center(a, ba) == center(b, bb));
    CHECK_FALSE(center(a, ba).empty());
}

TEST_CASE("tuning knobs and force paths do not change results")
{
    const auto rep = snap_knobs_sweep();
    CHECK(rep.energy <= 1e-12);
    CHECK(rep.force <= 1e-12);
    // serial fused and split paths agree bit for bit on the energy
    CHECK(rep.split_energy_identical);
}

TEST_CASE("snap results agree across rank counts")
{
    SnapParams p;
    p.jmax = 1.5;
    p.rcut = 2.0;
    p.beta = random_beta(SnapBasis(1.5), 6);
    Snap snap(p);
    Box box;
    auto atoms = oracle::gas(400, 0.5, 19, box);
    const auto one = evaluate(snap, box, atoms, 1);
    const auto two = evaluate(snap, box, atoms, 4);
    CHECK(std::abs(one.energy - two.energy) <= 1e-12 * std::abs(one.energy));
    double fscale = 1.0;
    for (const auto& [id, f] : one.forces) {
        fscale = std::max({fscale, std::abs(f[0]), std::abs(f[1]), std::abs(f[2])});
    }
    for (const auto& [id, f] : one.forces) {
        for (int d = 0; d < 3; ++d) {
            CHECK(std::abs(f[d] - two.forces.at(id)[d]) <= 1e-12 * fscale);
        }
    }
}
