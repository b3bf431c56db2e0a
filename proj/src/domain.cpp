#include "mdkk/domain.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace mdkk
{

namespace
{

DualArray<double> make_rows(std::size_t n)
{
    if (n == 0) {
        return {};
    }
    return DualArray<double>({n, 3});
}

double boundary(const Box& box, const RankSet& ranks, std::size_t axis, std::size_t cut)
{
    const std::size_t p = ranks.grid[axis];
    if (cut >= p) {
        return box.lengths[axis];
    }
    return box.lengths[axis] * static_cast<double>(cut) / static_cast<double>(p);
}

} // namespace

double Box::min_periodic_length() const
{
    double result = std::numeric_limits<double>::infinity();
    for (std::size_t d = 0; d < 3; ++d) {
        if (periodic[d]) {
            result = std::min(result, lengths[d]);
        }
    }
    return result;
}

void Box::validate() const
{
    for (double l : lengths) {
        if (!(l > 0.0) || !std::isfinite(l)) {
            throw ConfigError("Box: edge lengths must be positive and finite");
        }
    }
}

Vec3 minimum_image(Vec3 dr, const Box& box)
{
    for (std::size_t d = 0; d < 3; ++d) {
        if (box.periodic[d]) {
            const double l = box.lengths[d];
            dr[d] -= l * std::floor(dr[d] / l + 0.5);
        }
    }
    return dr;
}

Vec3 wrap_position(Vec3 x, const Box& box)
{
    for (std::size_t d = 0; d < 3; ++d) {
        if (box.periodic[d]) {
            const double l = box.lengths[d];
            x[d] -= l * std::floor(x[d] / l);
            if (x[d] >= l) {
                x[d] -= l;
            }
            if (x[d] < 0.0) {
                x[d] = 0.0;
            }
        }
    }
    return x;
}

//---------------------------------------------------------------------------//

std::size_t RankSet::owner_of(const Vec3& x) const
{
    std::array<std::size_t, 3> cell{};
    for (std::size_t d = 0; d < 3; ++d) {
        // bricks[0].lo is the origin and the last brick's hi is the box edge
        const double length = bricks.back().hi[d];
        const std::size_t p = grid[d];
        double guess = std::floor(x[d] / length * static_cast<double>(p));
        guess = std::clamp(guess, 0.0, static_cast<double>(p - 1));
        std::size_t c = static_cast<std::size_t>(guess);
        auto lo = [&](std::size_t k) { return length * static_cast<double>(k) / static_cast<double>(p); };
        while (c > 0 && x[d] < lo(c)) {
            --c;
        }
        while (c + 1 < p && x[d] >= lo(c + 1)) {
            ++c;
        }
        cell[d] = c;
    }
    return cell[0] + grid[0] * (cell[1] + grid[1] * cell[2]);
}

RankSet decompose(const Box& box, std::size_t n_ranks)
{
    box.validate();
    if (n_ranks == 0) {
        throw ConfigError("decompose: n_ranks must be at least 1");
    }
    std::array<std::size_t, 3> best{n_ranks, 1, 1};
    double best_area = std::numeric_limits<double>::infinity();
    for (std::size_t px = n_ranks; px >= 1; --px) {
        if (n_ranks % px != 0) {
            continue;
        }
        const std::size_t rest = n_ranks / px;
        for (std::size_t py = rest; py >= 1; --py) {
            if (rest % py != 0) {
                continue;
            }
            const std::size_t pz = rest / py;
            const double lx = box.lengths[0] / static_cast<double>(px);
            const double ly = box.lengths[1] / static_cast<double>(py);
            const double lz = box.lengths[2] / static_cast<double>(pz);
            const double area = lx * ly + ly * lz + lx * lz;
            // strict improvement only, so the first (largest px, then py) wins ties
            if (area < best_area * (1.0 - 1e-12)) {
                best_area = area;
                best = {px, py, pz};
            }
        }
    }

    RankSet ranks;
    ranks.n_ranks = n_ranks;
    ranks.grid = best;
    ranks.bricks.resize(n_ranks);
    for (std::size_t iz = 0; iz < best[2]; ++iz) {
        for (std::size_t iy = 0; iy < best[1]; ++iy) {
            for (std::size_t ix = 0; ix < best[0]; ++ix) {
                const std::size_t r = ix + best[0] * (iy + best[1] * iz);
                const std::array<std::size_t, 3> c{ix, iy, iz};
                for (std::size_t d = 0; d < 3; ++d) {
                    ranks.bricks[r].lo[d] = boundary(box, ranks, d, c[d]);
                    ranks.bricks[r].hi[d] = boundary(box, ranks, d, c[d] + 1);
                }
            }
        }
    }
    return ranks;
}

//---------------------------------------------------------------------------//

void AtomStore::zero_forces()
{
    if (forces.size() > 0) {
        forces.fill(Space::Host, 0.0);
        forces.fill(Space::Device, 0.0);
        forces.clear_sync_state();
    }
}

std::vector<AtomStore> distribute(std::span<const AtomRecord> atoms, const Box& box, const RankSet& ranks,
                                  double sort_bin)
{
    std::vector<std::vector<AtomRecord>> per_rank(ranks.n_ranks);
    for (const auto& atom : atoms) {
        AtomRecord rec = atom;
        rec.x = wrap_position(rec.x, box);
        per_rank[ranks.owner_of(rec.x)].push_back(rec);
    }

    std::array<std::size_t, 3> nbins{1, 1, 1};
    if (sort_bin > 0.0) {
        for (std::size_t d = 0; d < 3; ++d) {
            nbins[d] = std::max<std::size_t>(1, static_cast<std::size_t>(box.lengths[d] / sort_bin));
        }
    }
    auto bin_key = [&](const Vec3& x) {
        std::size_t key = 0;
        for (std::size_t d = 3; d-- > 0;) {
            auto c = static_cast<long long>(std::floor(x[d] / box.lengths[d] * static_cast<double>(nbins[d])));
            c = std::clamp<long long>(c, 0, static_cast<long long>(nbins[d]) - 1);
            key = key * nbins[d] + static_cast<std::size_t>(c);
        }
        return key;
    };

    std::vector<AtomStore> stores(ranks.n_ranks);
    for (std::size_t r = 0; r < ranks.n_ranks; ++r) {
        auto& recs = per_rank[r];
        std::vector<std::pair<std::size_t, std::size_t>> order(recs.size());
        for (std::size_t n = 0; n < recs.size(); ++n) {
            order[n] = {bin_key(recs[n].x), n};
        }
        std::sort(order.begin(), order.end(), [&](const auto& a, const auto& b) {
            if (a.first != b.first) {
                return a.first < b.first;
            }
            return recs[a.second].id < recs[b.second].id;
        });

        AtomStore& s = stores[r];
        s.rank = r;
        s.n_local = recs.size();
        s.n_ghost = 0;
        s.positions = make_rows(s.n_local);
        s.velocities = make_rows(s.n_local);
        s.forces = make_rows(s.n_local);
        s.global_ids.resize(s.n_local);
        s.types.resize(s.n_local);
        for (std::size_t n = 0; n < s.n_local; ++n) {
            const auto& rec = recs[order[n].second];
            s.global_ids[n] = rec.id;
            s.types[n] = rec.type;
            for (std::size_t d = 0; d < 3; ++d) {
                s.positions(Space::Host, n, d) = rec.x[d];
                s.velocities(Space::Host, n, d) = rec.v[d];
            }
        }
        if (s.n_local > 0) {
            s.positions.modify(Space::Host);
            s.velocities.modify(Space::Host);
        }
    }
    return stores;
}

std::vector<AtomRecord> gather(const std::vector<AtomStore>& stores)
{
    std::vector<AtomRecord> all;
    for (const auto& s : stores) {
        for (std::size_t n = 0; n < s.n_local; ++n) {
            AtomRecord rec;
            rec.id = s.global_ids[n];
            rec.type = s.types[n];
            for (std::size_t d = 0; d < 3; ++d) {
                rec.x[d] = s.positions(Space::Host, n, d);
                rec.v[d] = s.velocities(Space::Host, n, d);
            }
            all.push_back(rec);
        }
    }
    std::sort(all.begin(), all.end(), [](const AtomRecord& a, const AtomRecord& b) { return a.id < b.id; });
    return all;
}

//---------------------------------------------------------------------------//

namespace
{

struct GhostMessage
{
    std::vector<std::int64_t> ids;
    std::vector<std::int32_t> types;
    std::vector<double> xyz;
    std::vector<GhostSource> sources;
};

} // namespace

void exchange_ghosts(const RankSet& ranks, const Box& box, std::vector<AtomStore>& stores, double halo)
{
    if (!(halo >= 0.0)) {
        throw ConfigError("exchange_ghosts: negative halo");
    }
    if (halo > 0.5 * box.min_periodic_length()) {
        throw ConfigError("exchange_ghosts: cutoff+skin " + std::to_string(halo) +
                          " exceeds half the shortest periodic box length");
    }
    const std::size_t nr = ranks.n_ranks;
    std::vector<GhostMessage> messages(nr * nr); // [source * nr + dest]

    // pack
    for (std::size_t s = 0; s < nr; ++s) {
        AtomStore& store = stores[s];
        store.positions.sync(Space::Host);
        for (std::size_t i = 0; i < store.n_local; ++i) {
            const Vec3 x = store.position(i);
            std::array<std::array<int, 3>, 3> shifts{};
            std::array<std::size_t, 3> nshift{};
            for (std::size_t d = 0; d < 3; ++d) {
                nshift[d] = 0;
                shifts[d][nshift[d]++] = 0;
                if (box.periodic[d]) {
                    if (x[d] < halo) {
                        shifts[d][nshift[d]++] = 1;
                    }
                    if (x[d] - box.lengths[d] >= -halo) {
                        shifts[d][nshift[d]++] = -1;
                    }
                }
            }
            for (std::size_t a = 0; a < nshift[0]; ++a) {
                for (std::size_t b = 0; b < nshift[1]; ++b) {
                    for (std::size_t c = 0; c < nshift[2]; ++c) {
                        const std::array<int, 3> image{shifts[0][a], shifts[1][b], shifts[2][c]};
                        Vec3 p{};
                        for (std::size_t d = 0; d < 3; ++d) {
                            p[d] = x[d] + image[d] * box.lengths[d];
                        }
                        const bool home = image[0] == 0 && image[1] == 0 && image[2] == 0;
                        for (std::size_t dst = 0; dst < nr; ++dst) {
                            if (home && dst == s) {
                                continue;
                            }
                            const Brick& brick = ranks.bricks[dst];
                            bool inside = true;
                            for (std::size_t d = 0; d < 3 && inside; ++d) {
                                inside = p[d] >= brick.lo[d] - halo && p[d] < brick.hi[d] + halo;
                            }
                            if (!inside) {
                                continue;
                            }
                            GhostMessage& msg = messages[s * nr + dst];
                            msg.ids.push_back(store.global_ids[i]);
                            msg.types.push_back(store.types[i]);
                            msg.xyz.insert(msg.xyz.end(), p.begin(), p.end());
                            GhostSource src;
                            src.rank = static_cast<std::uint32_t>(s);
                            src.index = static_cast<std::uint32_t>(i);
                            src.image = {static_cast<std::int8_t>(image[0]), static_cast<std::int8_t>(image[1]),
                                         static_cast<std::int8_t>(image[2])};
                            msg.sources.push_back(src);
                        }
                    }
                }
            }
        }
    }

    // unpack
    for (std::size_t dst = 0; dst < nr; ++dst) {
        AtomStore& store = stores[dst];
        std::size_t n_ghost = 0;
        for (std::size_t s = 0; s < nr; ++s) {
            n_ghost += messages[s * nr + dst].ids.size();
        }
        const std::size_t n_total = store.n_local + n_ghost;
        DualArray<double> positions = make_rows(n_total);
        for (std::size_t i = 0; i < store.n_local; ++i) {
            for (std::size_t d = 0; d < 3; ++d) {
                positions(Space::Host, i, d) = store.positions(Space::Host, i, d);
            }
        }
        store.global_ids.resize(store.n_local);
        store.types.resize(store.n_local);
        store.ghosts.clear();
        store.ghosts.reserve(n_ghost);
        std::size_t row = store.n_local;
        for (std::size_t s = 0; s < nr; ++s) {
            const GhostMessage& msg = messages[s * nr + dst];
            for (std::size_t g = 0; g < msg.ids.size(); ++g, ++row) {
                for (std::size_t d = 0; d < 3; ++d) {
                    positions(Space::Host, row, d) = msg.xyz[3 * g + d];
                }
                store.global_ids.push_back(msg.ids[g]);
                store.types.push_back(msg.types[g]);
                store.ghosts.push_back(msg.sources[g]);
            }
        }
        if (n_total > 0) {
            positions.modify(Space::Host);
        }
        store.positions = std::move(positions);
        store.forces = make_rows(n_total);
        store.n_ghost = n_ghost;
    }
}

void forward_comm(const Box& box, std::vector<AtomStore>& stores)
{
    for (auto& s : stores) {
        s.positions.sync(Space::Host);
    }
    for (auto& store : stores) {
        for (std::size_t g = 0; g < store.n_ghost; ++g) {
            const GhostSource& src = store.ghosts[g];
            const AtomStore& owner = stores[src.rank];
            for (std::size_t d = 0; d < 3; ++d) {
                store.positions(Space::Host, store.n_local + g, d) =
                    owner.positions(Space::Host, src.index, d) + src.image[d] * box.lengths[d];
            }
        }
        if (store.n_ghost > 0) {
            store.positions.modify(Space::Host);
        }
    }
}

void reverse_comm(std::vector<AtomStore>& stores, ReverseCommClient& client)
{
    const std::size_t nr = stores.size();
    const std::size_t width = client.width();
    struct Buffer
    {
        std::vector<std::uint32_t> rows;
        std::vector<double> data;
    };
    std::vector<Buffer> buffers(nr * nr); // [holder * nr + owner]

    for (std::size_t h = 0; h < nr; ++h) {
        AtomStore& store = stores[h];
        std::vector<double> tmp(width);
        for (std::size_t g = 0; g < store.n_ghost; ++g) {
            const GhostSource& src = store.ghosts[g];
            client.pack_reverse(store, store.n_local + g, tmp.data());
            Buffer& buf = buffers[h * nr + src.rank];
            buf.rows.push_back(src.index);
            buf.data.insert(buf.data.end(), tmp.begin(), tmp.end());
        }
    }
    for (std::size_t o = 0; o < nr; ++o) {
        for (std::size_t h = 0; h < nr; ++h) {
            const Buffer& buf = buffers[h * nr + o];
            for (std::size_t n = 0; n < buf.rows.size(); ++n) {
                client.unpack_reverse(stores[o], buf.rows[n], buf.data.data() + n * width);
            }
        }
    }
}

namespace
{

class ForceComm final : public ReverseCommClient
{
public:
    std::size_t width() const override { return 3; }

    void pack_reverse(AtomStore& store, std::size_t row, double* buf) override
    {
        for (std::size_t d = 0; d < 3; ++d) {
            buf[d] = store.forces(Space::Host, row, d);
            store.forces(Space::Host, row, d) = 0.0;
        }
    }

    void unpack_reverse(AtomStore& store, std::size_t row, const double* buf) override
    {
        for (std::size_t d = 0; d < 3; ++d) {
            store.forces(Space::Host, row, d) += buf[d];
        }
    }
};

} // namespace

void reverse_comm_forces(std::vector<AtomStore>& stores)
{
    for (auto& s : stores) {
        s.forces.sync(Space::Host);
    }
    ForceComm client;
    reverse_comm(stores, client);
    for (auto& s : stores) {
        if (s.n_total() > 0) {
            s.forces.modify(Space::Host);
        }
    }
}

double max_displacement(const AtomStore& store, std::span<const double> reference)
{
    double max_sq = 0.0;
    for (std::size_t i = 0; i < store.n_local; ++i) {
        double sq = 0.0;
        for (std::size_t d = 0; d < 3; ++d) {
            const double dx = store.positions(Space::Host, i, d) - reference[3 * i + d];
            sq += dx * dx;
        }
        max_sq = std::max(max_sq, sq);
    }
    return std::sqrt(max_sq);
}

} // namespace mdkk
