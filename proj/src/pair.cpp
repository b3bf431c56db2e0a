#include "mdkk/pair.hpp"

#include <string>

namespace mdkk
{

void PairParams::validate() const
{
    if (!(epsilon > 0.0) || !(sigma > 0.0) || !(cutoff > 0.0)) {
        throw ConfigError("pair parameters must be positive");
    }
    if (!(cutoff > sigma)) {
        throw ConfigError("pair cutoff must exceed sigma");
    }
}

double PairParams::energy_offset() const
{
    if (!shift) {
        return 0.0;
    }
    const double sr6 = std::pow(sigma / cutoff, 6.0);
    return 4.0 * epsilon * (sr6 * sr6 - sr6);
}

PairEval u2_lj(double r, const PairParams& params)
{
    if (!(r > 0.0)) {
        throw Error("u2_lj: coincident atoms (r = " + std::to_string(r) + ")");
    }
    if (r >= params.cutoff) {
        return {};
    }
    const double sr = params.sigma / r;
    const double sr6 = sr * sr * sr * sr * sr * sr;
    const double sr12 = sr6 * sr6;
    // dU/dr = -24 eps (2 sr12 - sr6) / r
    return {4.0 * params.epsilon * (sr12 - sr6) - params.energy_offset(), 24.0 * params.epsilon * (2.0 * sr12 - sr6) / (r * r)};
}

LennardJones::LennardJones(const PairParams& params)
{
    params.validate();
    cutsq_ = params.cutoff * params.cutoff;
    const double s6 = std::pow(params.sigma, 6.0);
    lj1_ = 48.0 * params.epsilon * s6 * s6;
    lj2_ = 24.0 * params.epsilon * s6;
    lj3_ = 4.0 * params.epsilon * s6 * s6;
    lj4_ = 4.0 * params.epsilon * s6;
    offset_ = params.energy_offset();
}

GenericPairKernel make_generic_lj(const PairParams& params)
{
    params.validate();
    GenericPairKernel kernel;
    kernel.cut_squared = params.cutoff * params.cutoff;
    kernel.eval = [params](double rsq) { return u2_lj(std::sqrt(rsq), params); };
    return kernel;
}

const char* exec_mode_name(ExecMode mode)
{
    return mode == ExecMode::AtomParallel ? "atom" : "neighbor";
}

void accumulate_forces(AtomStore& atoms, std::span<const double> forces)
{
    if (atoms.n_total() == 0) {
        return;
    }
    atoms.forces.sync(Space::Host);
    for (std::size_t i = 0; i < atoms.n_total(); ++i) {
        for (std::size_t d = 0; d < 3; ++d) {
            atoms.forces(Space::Host, i, d) += forces[3 * i + d];
        }
    }
    atoms.forces.modify(Space::Host);
}

std::vector<NeighborList> build_lists(System& system, const NeighborSettings& settings)
{
    std::vector<NeighborList> lists;
    lists.reserve(system.stores().size());
    for (auto& atoms : system.stores()) {
        atoms.positions.sync(Space::Host);
        lists.push_back(build_neighbor_list(atoms, settings));
    }
    return lists;
}

} // namespace mdkk
