#include "mdkk/system.hpp"

#include <algorithm>

namespace mdkk
{

System::System(Box box, std::size_t n_ranks)
    : box_(box)
    , ranks_(decompose(box, n_ranks))
{
    stores_.resize(ranks_.n_ranks);
    for (std::size_t r = 0; r < stores_.size(); ++r) {
        stores_[r].rank = r;
    }
}

std::size_t System::n_atoms() const
{
    std::size_t n = 0;
    for (const auto& s : stores_) {
        n += s.n_local;
    }
    return n;
}

void System::load(std::span<const AtomRecord> atoms, double halo)
{
    stores_ = distribute(atoms, box_, ranks_, sort_bin);
    exchange_ghosts(ranks_, box_, stores_, halo);
}

void System::reneighbor(double halo)
{
    for (auto& s : stores_) {
        s.positions.sync(Space::Host);
        s.velocities.sync(Space::Host);
    }
    const auto atoms = mdkk::gather(stores_);
    load(atoms, halo);
}

void System::forward_comm()
{
    mdkk::forward_comm(box_, stores_);
}

void System::reverse_comm()
{
    reverse_comm_forces(stores_);
}

void System::zero_forces()
{
    for (auto& s : stores_) {
        s.zero_forces();
    }
}

std::vector<AtomRecord> System::gather() const
{
    return mdkk::gather(stores_);
}

std::vector<Vec3> System::forces_by_id() const
{
    std::vector<std::pair<std::int64_t, Vec3>> tagged;
    for (const auto& s : stores_) {
        for (std::size_t i = 0; i < s.n_local; ++i) {
            tagged.push_back({s.global_ids[i],
                              {s.forces(Space::Host, i, 0), s.forces(Space::Host, i, 1), s.forces(Space::Host, i, 2)}});
        }
    }
    std::sort(tagged.begin(), tagged.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<Vec3> result;
    result.reserve(tagged.size());
    for (const auto& t : tagged) {
        result.push_back(t.second);
    }
    return result;
}

} // namespace mdkk
