#include <doctest.h>

#include <map>
#include <set>

#include "mdkk/neighbor.hpp"
#include "mdkk/pair.hpp"
#include "mdkk/system.hpp"
#include "oracles.hpp"

using namespace mdkk;

namespace
{

using IdPair = std::pair<std::int64_t, std::int64_t>;

/// Multiset of unordered id pairs listed across all ranks.
std::multiset<IdPair> listed_pairs(System& system, const std::vector<NeighborList>& lists)
{
    std::multiset<IdPair> out;
    for (std::size_t r = 0; r < lists.size(); ++r) {
        const AtomStore& s = system.stores()[r];
        for (std::size_t i = 0; i < s.n_local; ++i) {
            for (auto k : lists[r].row(i)) {
                const auto a = s.global_ids[i];
                const auto b = s.global_ids[static_cast<std::size_t>(k)];
                out.insert({std::min(a, b), std::max(a, b)});
            }
        }
    }
    return out;
}

std::vector<AtomRecord> dimer(double r)
{
    std::vector<AtomRecord> atoms(2);
    atoms[0].id = 1;
    atoms[0].x = {5.0, 5.0, 5.0};
    atoms[1].id = 2;
    atoms[1].x = {5.0 + r, 5.0, 5.0};
    return atoms;
}

} // namespace

TEST_CASE("dimer inside and outside the list cutoff")
{
    const Box box = oracle::cubic_box(12.0);
    NeighborSettings settings{2.5, 0.3, ListStyle::Full, false};

    System system(box, 1);
    system.load(dimer(0.9 * 2.5), settings.list_cutoff());
    auto full = build_lists(system, settings);
    CHECK(full[0].counts == std::vector<std::int32_t>{1, 1});

    settings.style = ListStyle::Half;
    settings.newton = true;
    auto half = build_lists(system, settings);
    CHECK(half[0].total_pairs() == 1);

    System far(box, 1);
    far.load(dimer(1.1 * 2.8), settings.list_cutoff());
    auto empty = build_lists(far, settings);
    CHECK(empty[0].total_pairs() == 0);
}

TEST_CASE("neighbor pair sets equal brute force")
{
    std::uint64_t seed = 100;
    for (std::size_t n : {150u, 300u, 500u, 1000u, 2000u}) {
        for (int rep = 0; rep < 4; ++rep, ++seed) {
            Box box;
            const auto atoms = oracle::gas(n, 0.6, seed, box);
            const double cutoff = 2.0;
            const double skin = 0.3;
            const auto expected = oracle::pairs_within(atoms, box, cutoff + skin);
            for (std::size_t nr : {1u, 2u, 4u}) {
                System system(box, nr);
                system.load(atoms, cutoff + skin);

                NeighborSettings full{cutoff, skin, ListStyle::Full, false};
                auto fl = build_lists(system, full);
                const auto fpairs = listed_pairs(system, fl);
                // full: every pair twice
                std::multiset<IdPair> twice;
                for (const auto& p : expected) {
                    twice.insert(p);
                    twice.insert(p);
                }
                CHECK(fpairs == twice);

                NeighborSettings half{cutoff, skin, ListStyle::Half, true};
                auto hl = build_lists(system, half);
                const auto hpairs = listed_pairs(system, hl);
                CHECK(hpairs == std::multiset<IdPair>(expected.begin(), expected.end()));

                // half + newton off: the deduplicated set still matches
                NeighborSettings half_off{cutoff, skin, ListStyle::Half, false};
                auto ho = build_lists(system, half_off);
                const auto opairs = listed_pairs(system, ho);
                CHECK(std::set<IdPair>(opairs.begin(), opairs.end()) == expected);
                // full list symmetry for owned pairs on each rank
                for (std::size_t r = 0; r < nr; ++r) {
                    const AtomStore& s = system.stores()[r];
                    std::set<std::pair<std::int32_t, std::int32_t>> local;
                    for (std::size_t i = 0; i < s.n_local; ++i) {
                        for (auto k : fl[r].row(i)) {
                            if (static_cast<std::size_t>(k) < s.n_local) {
                                local.insert({static_cast<std::int32_t>(i), k});
                            }
                        }
                    }
                    for (const auto& [i, k] : local) {
                        CHECK(local.count({k, i}) == 1);
                    }
                }
            }
        }
    }
}

TEST_CASE("capacity overflow grows instead of truncating")
{
    Box box;
    const auto atoms = oracle::gas(400, 0.8, 7, box);
    System system(box, 1);
    NeighborSettings settings{2.5, 0.3, ListStyle::Full, false};
    system.load(atoms, settings.list_cutoff());
    const auto reference = build_neighbor_list(system.stores()[0], settings);
    const auto tiny = build_neighbor_list(system.stores()[0], settings, 2);
    CHECK(tiny.regrowths > 0);
    CHECK(tiny.counts == reference.counts);
    for (std::size_t i = 0; i < tiny.n_local; ++i) {
        CHECK(static_cast<std::size_t>(tiny.counts[i]) <= tiny.max_neighbors);
        const auto a = tiny.row(i);
        const auto b = reference.row(i);
        CHECK(std::multiset<std::int32_t>(a.begin(), a.end()) == std::multiset<std::int32_t>(b.begin(), b.end()));
    }
}

TEST_CASE("device layout interleaves rows and reads the same entries")
{
    Box box;
    const auto atoms = oracle::gas(100, 0.6, 8, box);
    System system(box, 1);
    NeighborSettings settings{2.0, 0.3, ListStyle::Half, true};
    system.load(atoms, settings.list_cutoff());
    auto list = build_neighbor_list(system.stores()[0], settings);
    list.table.sync(Space::Device);
    CHECK(list.table.transfer_count() == 1);
    CHECK(list.table.stride(Space::Device, 0) == 1);
    for (std::size_t i = 0; i < list.n_local; ++i) {
        for (std::size_t n = 0; n < static_cast<std::size_t>(list.counts[i]); ++n) {
            CHECK(list.neighbor(Space::Device, i, n) == list.neighbor(Space::Host, i, n));
        }
    }
}

TEST_CASE("stale list detection")
{
    Box box;
    const auto atoms = oracle::gas(200, 0.5, 2, box);
    System system(box, 1);
    NeighborSettings settings{2.0, 0.4, ListStyle::Half, true};
    system.load(atoms, settings.list_cutoff());
    auto list = build_neighbor_list(system.stores()[0], settings);
    AtomStore& s = system.stores()[0];
    CHECK_FALSE(list.needs_rebuild(s));
    s.positions(Space::Host, 3, 1) += 0.19;
    CHECK_FALSE(list.needs_rebuild(s));
    s.positions(Space::Host, 3, 1) += 0.02;
    CHECK(list.needs_rebuild(s));
    CHECK_THROWS_AS(list.check_current(s), StaleListError);
}
