#include "mdkk/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace mdkk
{

LatticeKind parse_lattice(const std::string& name)
{
    if (name == "fcc") {
        return LatticeKind::Fcc;
    }
    if (name == "sc") {
        return LatticeKind::Sc;
    }
    throw ConfigError("unknown lattice '" + name + "'");
}

double lattice_constant(LatticeKind kind, double density)
{
    if (!(density > 0.0)) {
        throw ConfigError("lattice density must be positive");
    }
    const double per_cell = kind == LatticeKind::Fcc ? 4.0 : 1.0;
    return std::cbrt(per_cell / density);
}

std::vector<AtomRecord> make_lattice(LatticeKind kind, double density, std::array<std::size_t, 3> cells, Box& box,
                                     std::int32_t type)
{
    const double a = lattice_constant(kind, density);
    for (std::size_t d = 0; d < 3; ++d) {
        if (cells[d] == 0) {
            throw ConfigError("lattice needs at least one cell per axis");
        }
        box.lengths[d] = a * static_cast<double>(cells[d]);
    }
    std::vector<Vec3> basis{{0.0, 0.0, 0.0}};
    if (kind == LatticeKind::Fcc) {
        basis = {{0.0, 0.0, 0.0}, {0.5, 0.5, 0.0}, {0.5, 0.0, 0.5}, {0.0, 0.5, 0.5}};
    }
    std::vector<AtomRecord> atoms;
    atoms.reserve(cells[0] * cells[1] * cells[2] * basis.size());
    std::int64_t id = 1;
    for (std::size_t k = 0; k < cells[2]; ++k) {
        for (std::size_t j = 0; j < cells[1]; ++j) {
            for (std::size_t i = 0; i < cells[0]; ++i) {
                for (const auto& b : basis) {
                    AtomRecord rec;
                    rec.id = id++;
                    rec.type = type;
                    rec.x = {a * (static_cast<double>(i) + b[0]), a * (static_cast<double>(j) + b[1]),
                             a * (static_cast<double>(k) + b[2])};
                    atoms.push_back(rec);
                }
            }
        }
    }
    return atoms;
}

std::vector<AtomRecord> random_gas(std::size_t n, const Box& box, double min_separation, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<AtomRecord> atoms;
    atoms.reserve(n);
    const double minsq = min_separation * min_separation;
    std::size_t attempts = 0;
    while (atoms.size() < n) {
        if (++attempts > 1000 * n + 1000) {
            throw ConfigError("random_gas: could not place atoms at the requested separation");
        }
        Vec3 x{unit(rng) * box.lengths[0], unit(rng) * box.lengths[1], unit(rng) * box.lengths[2]};
        bool ok = true;
        for (const auto& other : atoms) {
            const Vec3 dr = minimum_image({x[0] - other.x[0], x[1] - other.x[1], x[2] - other.x[2]}, box);
            if (dr[0] * dr[0] + dr[1] * dr[1] + dr[2] * dr[2] < minsq) {
                ok = false;
                break;
            }
        }
        if (ok) {
            AtomRecord rec;
            rec.id = static_cast<std::int64_t>(atoms.size()) + 1;
            rec.x = x;
            atoms.push_back(rec);
        }
    }
    return atoms;
}

void assign_velocities(std::vector<AtomRecord>& atoms, double temperature, std::uint64_t seed)
{
    if (atoms.empty()) {
        return;
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Vec3 momentum{0.0, 0.0, 0.0};
    for (auto& a : atoms) {
        for (std::size_t d = 0; d < 3; ++d) {
            a.v[d] = gauss(rng);
            momentum[d] += a.v[d];
        }
    }
    const double n = static_cast<double>(atoms.size());
    double twice_ke = 0.0;
    for (auto& a : atoms) {
        for (std::size_t d = 0; d < 3; ++d) {
            a.v[d] -= momentum[d] / n;
            twice_ke += a.v[d] * a.v[d];
        }
    }
    const double dof = std::max(1.0, 3.0 * n - 3.0);
    const double current = twice_ke / dof;
    const double scale = current > 0.0 ? std::sqrt(temperature / current) : 0.0;
    for (auto& a : atoms) {
        for (std::size_t d = 0; d < 3; ++d) {
            a.v[d] *= scale;
        }
    }
}

} // namespace mdkk
