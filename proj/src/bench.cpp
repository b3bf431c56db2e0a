#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "mdkk/driver.hpp"

namespace mdkk
{

BenchOptions default_bench_options(const std::string& potential)
{
    BenchOptions o;
    o.config.strategy = AccumStrategy::duplicate(worker_count());
    o.config.newton = true;
    o.config.list_style = ListStyle::Half;
    if (potential == "snap") {
        o.atom_steps = 1.0e5;
        o.min_steps = 1;
    } else if (potential != "lj") {
        throw ConfigError("bench: unknown potential '" + potential + "' (expected lj or snap)");
    }
    return o;
}

namespace
{

std::unique_ptr<PairStyle> bench_pair(const std::string& potential)
{
    if (potential == "lj") {
        PairParams p;
        p.cutoff = 2.5;
        return make_lj_style(p, true);
    }
    if (potential == "snap") {
        SnapParams p;
        p.jmax = 1.0;
        p.rcut = 2.5;
        const SnapBasis basis(p.jmax);
        for (std::size_t k = 0; k < basis.n_b(); ++k) {
            p.beta.push_back(0.01 / static_cast<double>(k + 1));
        }
        return make_snap_style(p);
    }
    throw ConfigError("bench: unknown potential '" + potential + "' (expected lj or snap)");
}

} // namespace

std::vector<BenchRow> bench_saturation(const std::string& potential, const std::vector<std::size_t>& sizes,
                                       std::size_t reps, const BenchOptions& options, std::ostream* progress)
{
    if (reps == 0) {
        throw ConfigError("bench: reps must be at least 1");
    }
    std::vector<BenchRow> rows;
    for (const std::size_t target : sizes) {
        const auto cells = static_cast<std::size_t>(
            std::max(1.0, std::round(std::cbrt(static_cast<double>(target) / 4.0))));
        Box box;
        auto atoms = make_lattice(LatticeKind::Fcc, options.density, {cells, cells, cells}, box);
        assign_velocities(atoms, options.temperature, options.config.rng_seed);
        const std::size_t n = atoms.size();

        Simulation sim;
        sim.config() = options.config;
        sim.set_atoms(std::move(atoms), box);
        sim.set_pair(bench_pair(potential));
        if (options.warmup_steps > 0) {
            sim.run(options.warmup_steps);
        }
        const auto steps = std::max<std::size_t>(
            options.min_steps, static_cast<std::size_t>(std::ceil(options.atom_steps / static_cast<double>(n))));
        sim.run(steps * reps);
        const auto& times = sim.step_seconds();
        double best = 0.0;
        for (std::size_t r = 0; r < reps; ++r) {
            double seconds = 0.0;
            for (std::size_t k = r * steps; k < (r + 1) * steps; ++k) {
                seconds += times[k];
            }
            best = std::max(best, static_cast<double>(n * steps) / std::max(seconds, 1e-9));
        }
        rows.push_back({n, best});
        if (progress) {
            char buf[160];
            std::snprintf(buf, sizeof(buf), "bench %s: %zu atoms, %zu steps x %zu reps, %.4e atom-steps/s\n",
                          potential.c_str(), n, steps, reps, best);
            *progress << buf << std::flush;
        }
    }
    return rows;
}

void write_bench_csv(const std::vector<BenchRow>& rows, std::ostream& out)
{
    out << "n_atoms,atom_steps_per_second\n";
    for (const auto& r : rows) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%zu,%.6e\n", r.n_atoms, r.atom_steps_per_second);
        out << buf;
    }
}

void write_bench_csv(const std::vector<BenchRow>& rows, const std::string& path)
{
    std::ofstream out(path);
    if (!out) {
        throw Error("cannot write '" + path + "'");
    }
    write_bench_csv(rows, out);
}

std::vector<BenchRow> read_bench_csv(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot read '" + path + "'");
    }
    std::string line;
    std::getline(in, line);
    if (line != "n_atoms,atom_steps_per_second") {
        throw Error("'" + path + "': unexpected header '" + line + "'");
    }
    std::vector<BenchRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        const auto comma = line.find(',');
        if (comma == std::string::npos) {
            throw Error("'" + path + "': malformed row '" + line + "'");
        }
        rows.push_back({static_cast<std::size_t>(std::stoull(line.substr(0, comma))), std::stod(line.substr(comma + 1))});
    }
    return rows;
}

SaturationReport analyze_saturation(const std::vector<BenchRow>& rows, double band)
{
    SaturationReport rep;
    if (rows.empty()) {
        return rep;
    }
    double running = 0.0;
    rep.non_decreasing = true;
    for (const auto& r : rows) {
        if (running > 0.0) {
            const double drop = 1.0 - r.atom_steps_per_second / running;
            rep.worst_drop = std::max(rep.worst_drop, drop);
            if (drop > band) {
                rep.non_decreasing = false;
            }
        }
        running = std::max(running, r.atom_steps_per_second);
    }
    rep.max_throughput = running;
    for (const auto& r : rows) {
        if (r.atom_steps_per_second >= 0.9 * running) {
            rep.n90 = r.n_atoms;
            break;
        }
    }
    return rep;
}

std::vector<std::size_t> parse_sizes(const std::string& text)
{
    std::vector<std::size_t> sizes;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        if (!is_integer(item) || item[0] == '-' || std::stoll(item) < 1) {
            throw ConfigError("sizes: expected positive integers, got '" + item + "'");
        }
        sizes.push_back(static_cast<std::size_t>(std::stoull(item)));
    }
    if (sizes.empty()) {
        throw ConfigError("sizes: empty list");
    }
    if (!std::is_sorted(sizes.begin(), sizes.end())) {
        throw ConfigError("sizes must be ascending");
    }
    return sizes;
}

} // namespace mdkk
