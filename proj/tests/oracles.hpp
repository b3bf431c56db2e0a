// Independent brute-force references used by the tests. Nothing here calls
// into the kernels it checks.
#ifndef MDKK_TESTS_ORACLES_HPP
#define MDKK_TESTS_ORACLES_HPP

#include <cmath>
#include <cstdint>
#include <set>
#include <utility>
#include <vector>

#include "mdkk/domain.hpp"
#include "mdkk/lattice.hpp"
#include "mdkk/system.hpp"

namespace oracle
{

using mdkk::AtomRecord;
using mdkk::Box;
using mdkk::Vec3;

inline Vec3 min_image(Vec3 d, const Box& box)
{
    for (int k = 0; k < 3; ++k) {
        if (box.periodic[k]) {
            const double l = box.lengths[k];
            while (d[k] >= 0.5 * l) {
                d[k] -= l;
            }
            while (d[k] < -0.5 * l) {
                d[k] += l;
            }
        }
    }
    return d;
}

struct LJ
{
    double energy = 0.0;
    std::vector<Vec3> forces;
    std::array<double, 6> virial{};
};

/// O(N^2) Lennard-Jones sum, truncated at rc, minimum image, records in id order.
inline LJ lennard_jones(const std::vector<AtomRecord>& atoms, const Box& box, double eps, double sigma, double rc)
{
    LJ out;
    out.forces.assign(atoms.size(), Vec3{0.0, 0.0, 0.0});
    for (std::size_t i = 0; i < atoms.size(); ++i) {
        for (std::size_t k = i + 1; k < atoms.size(); ++k) {
            const Vec3 d = min_image({atoms[i].x[0] - atoms[k].x[0], atoms[i].x[1] - atoms[k].x[1],
                                      atoms[i].x[2] - atoms[k].x[2]},
                                     box);
            const double r = std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
            if (r >= rc) {
                continue;
            }
            const double sr6 = std::pow(sigma / r, 6);
            out.energy += 4.0 * eps * (sr6 * sr6 - sr6);
            const double dudr = 4.0 * eps * (-12.0 * sr6 * sr6 + 6.0 * sr6) / r;
            for (int c = 0; c < 3; ++c) {
                const double f = -dudr * d[c] / r;
                out.forces[i][c] += f;
                out.forces[k][c] -= f;
            }
            const double fr = -dudr / r;
            out.virial[0] += d[0] * d[0] * fr;
            out.virial[1] += d[1] * d[1] * fr;
            out.virial[2] += d[2] * d[2] * fr;
            out.virial[3] += d[0] * d[1] * fr;
            out.virial[4] += d[0] * d[2] * fr;
            out.virial[5] += d[1] * d[2] * fr;
        }
    }
    return out;
}

/// Unordered id pairs closer than rc under minimum image.
inline std::set<std::pair<std::int64_t, std::int64_t>> pairs_within(const std::vector<AtomRecord>& atoms,
                                                                     const Box& box, double rc)
{
    std::set<std::pair<std::int64_t, std::int64_t>> out;
    for (std::size_t i = 0; i < atoms.size(); ++i) {
        for (std::size_t k = i + 1; k < atoms.size(); ++k) {
            const Vec3 d = min_image({atoms[i].x[0] - atoms[k].x[0], atoms[i].x[1] - atoms[k].x[1],
                                      atoms[i].x[2] - atoms[k].x[2]},
                                     box);
            if (d[0] * d[0] + d[1] * d[1] + d[2] * d[2] < rc * rc) {
                out.insert({std::min(atoms[i].id, atoms[k].id), std::max(atoms[i].id, atoms[k].id)});
            }
        }
    }
    return out;
}

inline Box cubic_box(double length)
{
    Box box;
    box.lengths = {length, length, length};
    return box;
}

/// Random gas at the given number density with a soft-core exclusion.
inline std::vector<AtomRecord> gas(std::size_t n, double density, std::uint64_t seed, Box& box)
{
    box = cubic_box(std::cbrt(static_cast<double>(n) / density));
    return mdkk::random_gas(n, box, 0.9, seed);
}

inline double rel_diff(double a, double b)
{
    const double scale = std::max(std::abs(a), std::abs(b));
    return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

} // namespace oracle

#endif
