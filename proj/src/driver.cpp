#include "mdkk/driver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>

namespace mdkk
{

NonFiniteError::NonFiniteError(std::size_t step, const std::string& what)
    : Error("non-finite " + what + " at step " + std::to_string(step)), step_(step)
{
}

std::string thermo_header()
{
    return "    step               pe               ke             etot             temp";
}

std::string format_thermo(const ThermoRecord& r)
{
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%8zu %16.10f %16.10f %16.10f %16.10f", r.step, r.pe, r.ke, r.etot, r.temp);
    return buf;
}

void PairStyle::set_shift(bool shift)
{
    if (shift) {
        throw ConfigError("pair_modify shift is not supported by " + name());
    }
}

namespace
{

double style_number(const std::string& token, const std::string& who)
{
    if (!is_number(token)) {
        throw ConfigError(who + ": expected a number, got '" + token + "'");
    }
    return std::stod(token);
}

class LjStyle : public PairStyle
{
public:
    LjStyle(const PairParams& params, bool inlined, bool have_coeff)
        : params_(params), inlined_(inlined), have_coeff_(have_coeff)
    {
    }

    std::string name() const override { return inlined_ ? "lj/cut/opt" : "lj/cut"; }

    void coeff(const std::vector<std::string>& args, const std::string&) override
    {
        if (args.size() < 4 || args.size() > 5) {
            throw ConfigError(name() + ": pair_coeff expects <i> <j> <epsilon> <sigma> [cutoff]");
        }
        if ((args[0] != "*" && args[0] != "1") || (args[1] != "*" && args[1] != "1")) {
            throw ConfigError(name() + ": only one parameter set (types '* *' or '1 1') is supported");
        }
        PairParams p = params_;
        p.epsilon = style_number(args[2], name());
        p.sigma = style_number(args[3], name());
        if (args.size() == 5) {
            p.cutoff = style_number(args[4], name());
        }
        p.validate();
        params_ = p;
        have_coeff_ = true;
    }

    void set_shift(bool shift) override { params_.shift = shift; }
    double cutoff() const override { return params_.cutoff; }

    void init(std::int32_t) const override
    {
        if (!have_coeff_) {
            throw ConfigError(name() + ": pair_coeff not set");
        }
    }

    double compute(System& system, std::vector<NeighborList>& lists, const RunConfig& config) override
    {
        PairOptions options;
        options.mode = config.mode;
        options.strategy = config.strategy;
        if (inlined_) {
            return compute_pair_system(LennardJones(params_), system, lists, options).energy;
        }
        return compute_pair_system(make_generic_lj(params_), system, lists, options).energy;
    }

private:
    PairParams params_;
    bool inlined_;
    bool have_coeff_;
};

class SnapStyle : public PairStyle
{
public:
    SnapStyle(const SnapParams& params, bool have_coeff) : params_(params), have_coeff_(have_coeff) {}

    std::string name() const override { return "snap"; }

    void coeff(const std::vector<std::string>& args, const std::string& base_dir) override
    {
        if (args.size() != 3 || args[0] != "*" || args[1] != "*") {
            throw ConfigError("snap: pair_coeff expects * * <coefficient file>");
        }
        std::filesystem::path path(args[2]);
        if (path.is_relative()) {
            path = std::filesystem::path(base_dir) / path;
        }
        const SnapCoefficients c = read_snap_coefficients(path.string());
        params_.jmax = c.jmax;
        params_.beta = c.beta;
        have_coeff_ = true;
        snap_.reset();
    }

    double cutoff() const override { return params_.rcut; }
    ListStyle list_style(ListStyle) const override { return ListStyle::Full; }

    void init(std::int32_t) const override
    {
        if (!have_coeff_) {
            throw ConfigError("snap: pair_coeff not set");
        }
    }

    double compute(System& system, std::vector<NeighborList>& lists, const RunConfig& config) override
    {
        if (!snap_) {
            snap_ = std::make_unique<Snap>(params_);
        }
        snap_->knobs() = config.knobs;
        snap_->knobs().strategy = config.strategy;
        return compute_snap_system(*snap_, system, lists);
    }

private:
    SnapParams params_;
    bool have_coeff_;
    std::unique_ptr<Snap> snap_;
};

std::unique_ptr<PairStyle> lj_from_args(const std::vector<std::string>& args, bool inlined)
{
    const std::string name = inlined ? "lj/cut/opt" : "lj/cut";
    if (args.size() != 1) {
        throw ConfigError(name + ": pair_style expects one cutoff");
    }
    PairParams p;
    p.cutoff = style_number(args[0], name);
    if (!(p.cutoff > 0.0)) {
        throw ConfigError(name + ": cutoff must be positive");
    }
    return std::make_unique<LjStyle>(p, inlined, false);
}

} // namespace

std::unique_ptr<PairStyle> make_lj_style(const PairParams& params, bool inlined)
{
    params.validate();
    return std::make_unique<LjStyle>(params, inlined, true);
}

std::unique_ptr<PairStyle> make_snap_style(const SnapParams& params)
{
    // validates the parameters up front
    (void)Snap(params);
    return std::make_unique<SnapStyle>(params, true);
}

StyleRegistry<PairFactory> default_pair_registry()
{
    StyleRegistry<PairFactory> reg;
    reg.add("lj/cut", [](const std::vector<std::string>& a) { return lj_from_args(a, false); });
    reg.add("lj/cut/opt", [](const std::vector<std::string>& a) { return lj_from_args(a, true); });
    reg.add("snap", [](const std::vector<std::string>& a) -> std::unique_ptr<PairStyle> {
        if (a.empty() || a.size() > 2) {
            throw ConfigError("snap: pair_style expects <rcut> [rfac0]");
        }
        SnapParams p;
        p.rcut = style_number(a[0], "snap");
        if (a.size() == 2) {
            p.rfac0 = style_number(a[1], "snap");
        }
        if (!(p.rcut > 0.0) || !(p.rfac0 > 0.0) || !(p.rfac0 < 1.0)) {
            throw ConfigError("snap: need rcut > 0 and 0 < rfac0 < 1");
        }
        return std::make_unique<SnapStyle>(p, false);
    });
    return reg;
}

//---------------------------------------------------------------------------//

Simulation::Simulation(std::ostream* log) : log_(log), registry_(default_pair_registry()) {}

void Simulation::set_atoms(std::vector<AtomRecord> atoms, const Box& box)
{
    box.validate();
    box_ = box;
    have_box_ = true;
    std::sort(atoms.begin(), atoms.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    atoms_ = std::move(atoms);
    charges_.clear();
}

void Simulation::set_pair(std::unique_ptr<PairStyle> pair)
{
    pair_ = std::move(pair);
    if (pair_ && shift_) {
        pair_->set_shift(true);
    }
}

void Simulation::set_mass(std::int32_t type, double mass)
{
    if (type < 1 || !(mass > 0.0)) {
        throw ConfigError("mass: need type >= 1 and a positive mass");
    }
    masses_[type] = mass;
}

double Simulation::mass(std::int32_t type) const
{
    const auto it = masses_.find(type);
    return it == masses_.end() ? 1.0 : it->second;
}

void Simulation::execute(const Script& script, const std::string& base_dir)
{
    for (const auto& cmd : script.commands) {
        execute(cmd, base_dir);
    }
}

void Simulation::require_box(const Command& command) const
{
    if (!have_box_) {
        throw ConfigError(command.name + " needs a box (create_box first)");
    }
}

void Simulation::execute(const Command& cmd, const std::string& base_dir)
{
    const auto& a = cmd.args;
    const std::size_t l = cmd.line;
    try {
        if (cmd.name == "units") {
            // reduced units only; the parser has checked the argument
        } else if (cmd.name == "boundary") {
            for (std::size_t d = 0; d < 3; ++d) {
                periodic_[d] = a[d] == "p";
            }
            box_.periodic = periodic_;
        } else if (cmd.name == "lattice") {
            lattice_ = parse_lattice(a[0]);
            lattice_density_ = to_number(a[1], l);
        } else if (cmd.name == "create_box") {
            if (!lattice_) {
                throw ConfigError("create_box needs a lattice");
            }
            const double c = lattice_constant(*lattice_, lattice_density_);
            for (std::size_t d = 0; d < 3; ++d) {
                cells_[d] = static_cast<std::size_t>(to_integer(a[d], l));
                box_.lengths[d] = c * static_cast<double>(cells_[d]);
            }
            box_.periodic = periodic_;
            box_.validate();
            have_box_ = true;
            atoms_.clear();
            charges_.clear();
        } else if (cmd.name == "create_atoms") {
            require_box(cmd);
            if (!lattice_ || cells_[0] == 0) {
                throw ConfigError("create_atoms needs a lattice box");
            }
            const auto type = a.empty() ? 1 : static_cast<std::int32_t>(to_integer(a[0], l));
            Box box = box_;
            atoms_ = make_lattice(*lattice_, lattice_density_, cells_, box, type);
            box.periodic = periodic_;
            box_ = box;
            charges_.clear();
        } else if (cmd.name == "mass") {
            set_mass(static_cast<std::int32_t>(to_integer(a[0], l)), to_number(a[1], l));
        } else if (cmd.name == "velocity") {
            if (atoms_.empty()) {
                throw ConfigError("velocity: no atoms");
            }
            const double temperature = to_number(a[0], l);
            config_.rng_seed = static_cast<std::uint64_t>(to_integer(a[1], l));
            assign_velocities(atoms_, temperature, config_.rng_seed);
            const bool unit = std::all_of(atoms_.begin(), atoms_.end(),
                                          [&](const AtomRecord& r) { return mass(r.type) == 1.0; });
            if (!unit && atoms_.size() > 1) {
                // v ~ N(0, T/m): rescale, drop the momentum, renormalize T
                Vec3 p{0.0, 0.0, 0.0};
                double m_total = 0.0;
                for (auto& r : atoms_) {
                    const double m = mass(r.type);
                    for (std::size_t d = 0; d < 3; ++d) {
                        r.v[d] /= std::sqrt(m);
                        p[d] += m * r.v[d];
                    }
                    m_total += m;
                }
                double ke2 = 0.0;
                for (auto& r : atoms_) {
                    for (std::size_t d = 0; d < 3; ++d) {
                        r.v[d] -= p[d] / m_total;
                        ke2 += mass(r.type) * r.v[d] * r.v[d];
                    }
                }
                const double dof = 3.0 * static_cast<double>(atoms_.size()) - 3.0;
                const double scale = ke2 > 0.0 ? std::sqrt(temperature * dof / ke2) : 0.0;
                for (auto& r : atoms_) {
                    for (auto& v : r.v) {
                        v *= scale;
                    }
                }
            }
        } else if (cmd.name == "pair_style") {
            const std::string resolved = registry_.resolve_name(a[0], suffix_);
            const std::vector<std::string> rest(a.begin() + 1, a.end());
            set_pair(registry_.resolve(a[0], suffix_)(rest));
            if (log_ && resolved != a[0]) {
                *log_ << "pair_style " << a[0] << " resolved to " << resolved << "\n";
            }
        } else if (cmd.name == "pair_coeff") {
            if (!pair_) {
                throw ConfigError("pair_coeff before pair_style");
            }
            pair_->coeff(a, base_dir);
        } else if (cmd.name == "pair_modify") {
            shift_ = a[1] == "yes";
            if (pair_) {
                pair_->set_shift(shift_);
            }
        } else if (cmd.name == "qeq") {
            qeq_.enabled = a[0] == "on";
            for (std::size_t n = 1; n < a.size();) {
                const std::string& key = a[n];
                if (key == "species") {
                    const auto type = to_integer(a[n + 1], l);
                    if (type < 1) {
                        throw ConfigError("qeq species: type must be >= 1");
                    }
                    auto& sp = qeq_.params.species;
                    if (sp.size() < static_cast<std::size_t>(type)) {
                        sp.resize(static_cast<std::size_t>(type));
                    }
                    sp[static_cast<std::size_t>(type - 1)] = {to_number(a[n + 2], l), to_number(a[n + 3], l),
                                                              to_number(a[n + 4], l)};
                    n += 5;
                    continue;
                }
                const double v = to_number(a[n + 1], l);
                if (key == "cutoff") {
                    qeq_.params.cutoff = v;
                } else if (key == "tol") {
                    qeq_.params.tol = v;
                } else if (key == "maxiter") {
                    qeq_.params.max_iter = static_cast<std::size_t>(to_integer(a[n + 1], l));
                } else if (key == "net") {
                    qeq_.params.net_charge = v;
                }
                n += 2;
            }
        } else if (cmd.name == "torsion") {
            torsion_.enabled = a[0] == "on";
            for (std::size_t n = 1; n + 1 < a.size(); n += 2) {
                const double v = to_number(a[n + 1], l);
                const std::string& key = a[n];
                if (key == "r_bond") {
                    torsion_.bonds.r_bond = v;
                } else if (key == "r0") {
                    torsion_.bonds.r0 = v;
                } else if (key == "p") {
                    torsion_.bonds.p = v;
                } else if (key == "bo_min") {
                    torsion_.bonds.bo_min = v;
                } else if (key == "threshold") {
                    torsion_.params.bo_threshold = v;
                } else if (key == "k_t") {
                    torsion_.params.k_t = v;
                } else if (key == "k_b") {
                    torsion_.params.k_b = v;
                }
            }
            torsion_.bonds.validate();
        } else if (cmd.name == "suffix") {
            suffix_ = a[0] == "off" ? std::string() : a[0];
        } else if (cmd.name == "timestep") {
            config_.dt = to_number(a[0], l);
        } else if (cmd.name == "thermo") {
            config_.thermo_every = static_cast<std::size_t>(to_integer(a[0], l));
        } else if (cmd.name == "neighbor") {
            config_.skin = to_number(a[0], l);
            if (a.size() == 2) {
                config_.list_style = a[1] == "full" ? ListStyle::Full : ListStyle::Half;
            }
        } else if (cmd.name == "newton") {
            config_.newton = a[0] == "on";
        } else if (cmd.name == "processors") {
            config_.n_ranks = static_cast<std::size_t>(to_integer(a[0], l));
        } else if (cmd.name == "accumulate") {
            config_.strategy = parse_strategy(a[0]);
        } else if (cmd.name == "execution") {
            config_.mode = a[0] == "atom" ? ExecMode::AtomParallel : ExecMode::NeighborParallel;
        } else if (cmd.name == "snap_knobs") {
            for (std::size_t n = 0; n + 1 < a.size(); n += 2) {
                const std::string& key = a[n];
                const std::string& v = a[n + 1];
                if (key == "batch_u") {
                    config_.knobs.batch_u = static_cast<std::size_t>(to_integer(v, l));
                } else if (key == "batch_y") {
                    config_.knobs.batch_y = static_cast<std::size_t>(to_integer(v, l));
                } else if (key == "tile_v") {
                    config_.knobs.tile_v = static_cast<std::size_t>(to_integer(v, l));
                } else if (key == "layout") {
                    config_.knobs.layout = v == "device" ? Space::Device : Space::Host;
                } else if (key == "fused") {
                    config_.knobs.fused = v == "yes";
                }
            }
        } else if (cmd.name == "run") {
            run(static_cast<std::size_t>(to_integer(a[0], l)));
        } else if (cmd.name == "bench") {
            const auto sizes = parse_sizes(a[1]);
            const auto reps = static_cast<std::size_t>(to_integer(a[2], l));
            last_bench_ = bench_saturation(a[0], sizes, reps, default_bench_options(a[0]), log_);
            if (a.size() == 5) {
                write_bench_csv(last_bench_, a[4]);
            } else if (log_) {
                write_bench_csv(last_bench_, *log_);
            }
        } else {
            throw ConfigError("command not handled by the driver");
        }
    } catch (const ParseError&) {
        throw;
    } catch (const NonFiniteError&) {
        throw;
    } catch (const std::exception& e) {
        throw Error("line " + std::to_string(l) + " (" + cmd.name + "): " + e.what());
    }
}

double Simulation::halo() const
{
    double cut = pair_->cutoff();
    if (qeq_.enabled) {
        cut = std::max(cut, qeq_.params.cutoff);
    }
    if (torsion_.enabled) {
        cut = std::max(cut, torsion_.bonds.r_bond);
    }
    return cut + config_.skin;
}

void Simulation::build_lists()
{
    NeighborSettings settings;
    settings.cutoff = pair_->cutoff();
    settings.skin = config_.skin;
    settings.style = pair_->list_style(config_.list_style);
    settings.newton = config_.newton;
    lists_ = mdkk::build_lists(*system_, settings);
    aux_lists_.clear();
    if (qeq_.enabled || torsion_.enabled) {
        NeighborSettings aux;
        aux.cutoff = std::max(qeq_.enabled ? qeq_.params.cutoff : 0.0, torsion_.enabled ? torsion_.bonds.r_bond : 0.0);
        aux.skin = config_.skin;
        aux.style = ListStyle::Full;
        aux.newton = config_.newton;
        aux_lists_ = mdkk::build_lists(*system_, aux);
    }
    ++rebuilds_;
}

void Simulation::solve_charges()
{
    if (!qeq_.enabled) {
        return;
    }
    AtomStore& s = system_->stores()[0];
    const OverCSR h = build_qeq_matrix(s, aux_lists_[0], qeq_.params);
    const std::vector<double> chi = qeq_chi(s, qeq_.params);
    const QeqResult res = solve_qeq(h, chi, qeq_.params);
    std::vector<std::size_t> order(s.n_local);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](auto x, auto y) { return s.global_ids[x] < s.global_ids[y]; });
    charges_.resize(s.n_local);
    for (std::size_t n = 0; n < s.n_local; ++n) {
        charges_[n] = res.q[order[n]];
    }
    if (log_) {
        const double total = std::accumulate(charges_.begin(), charges_.end(), 0.0);
        char buf[160];
        std::snprintf(buf, sizeof(buf), "qeq: cg iterations %zu/%zu, total charge %.3e\n", res.s.iterations,
                      res.t.iterations, total);
        *log_ << buf;
    }
}

double Simulation::compute_forces(std::size_t step)
{
    double pe = pair_->compute(*system_, lists_, config_);
    if (torsion_.enabled) {
        AtomStore& s = system_->stores()[0];
        const BondTable bonds = build_bonds(s, aux_lists_[0], torsion_.bonds);
        const QuadTable quads = enumerate_quads(bonds, torsion_.params.bo_threshold);
        const TorsionResult t = compute_torsion(quads, s, box_, torsion_.params, config_.strategy);
        s.forces.sync(Space::Host);
        for (std::size_t i = 0; i < s.n_local; ++i) {
            for (std::size_t d = 0; d < 3; ++d) {
                s.forces(Space::Host, i, d) += t.forces[3 * i + d];
            }
        }
        s.forces.modify(Space::Host);
        pe += t.energy();
    }
    if (!std::isfinite(pe)) {
        throw NonFiniteError(step, "potential energy");
    }
    for (auto& s : system_->stores()) {
        s.forces.sync(Space::Host);
        for (std::size_t i = 0; i < s.n_local; ++i) {
            for (std::size_t d = 0; d < 3; ++d) {
                if (!std::isfinite(s.forces(Space::Host, i, d))) {
                    throw NonFiniteError(step, "force on atom " + std::to_string(s.global_ids[i]));
                }
            }
        }
    }
    return pe;
}

ThermoRecord Simulation::measure(std::size_t step, double pe)
{
    double ke2 = 0.0;
    std::size_t n = 0;
    for (auto& s : system_->stores()) {
        s.velocities.sync(Space::Host);
        for (std::size_t i = 0; i < s.n_local; ++i) {
            const double m = mass(s.types[i]);
            for (std::size_t d = 0; d < 3; ++d) {
                const double v = s.velocities(Space::Host, i, d);
                ke2 += m * v * v;
            }
        }
        n += s.n_local;
    }
    ThermoRecord r;
    r.step = step;
    r.pe = pe;
    r.ke = 0.5 * ke2;
    r.etot = r.pe + r.ke;
    const double dof = std::max(1.0, 3.0 * static_cast<double>(n) - 3.0);
    r.temp = ke2 / dof;
    return r;
}

void Simulation::emit(const ThermoRecord& record)
{
    thermo_.push_back(record);
    if (log_) {
        *log_ << format_thermo(record) << "\n";
    }
}

std::vector<ThermoRecord> Simulation::run(std::size_t n_steps)
{
    if (!pair_) {
        throw ConfigError("run: no pair_style defined");
    }
    if (atoms_.empty()) {
        throw ConfigError("run: no atoms");
    }
    if (!(config_.dt > 0.0)) {
        throw ConfigError("run: timestep must be positive");
    }
    if ((qeq_.enabled || torsion_.enabled) && config_.n_ranks != 1) {
        throw ConfigError("run: qeq and torsion need processors 1");
    }
    std::int32_t max_type = 1;
    for (const auto& r : atoms_) {
        max_type = std::max(max_type, r.type);
    }
    pair_->init(max_type);

    system_ = std::make_unique<System>(box_, config_.n_ranks);
    system_->sort_bin = pair_->cutoff();
    system_->load(atoms_, halo());
    rebuilds_ = 0;
    build_lists();
    solve_charges();

    const std::size_t first = thermo_.size();
    if (log_) {
        *log_ << thermo_header() << "\n";
    }
    emit(measure(step_, compute_forces(step_)));

    const double dt = config_.dt;
    // per-row dt / (2 m); refreshed whenever rows are reordered
    std::vector<std::vector<double>> half_dt_over_m;
    auto refresh_masses = [&]() {
        half_dt_over_m.clear();
        for (const auto& s : system_->stores()) {
            std::vector<double> w(s.n_local);
            for (std::size_t i = 0; i < s.n_local; ++i) {
                w[i] = 0.5 * dt / mass(s.types[i]);
            }
            half_dt_over_m.push_back(std::move(w));
        }
    };
    auto kick = [&]() {
        auto& stores = system_->stores();
        for (std::size_t r = 0; r < stores.size(); ++r) {
            auto& s = stores[r];
            if (s.n_local == 0) {
                continue;
            }
            s.velocities.sync(Space::Host);
            s.forces.sync(Space::Host);
            for (std::size_t i = 0; i < s.n_local; ++i) {
                for (std::size_t d = 0; d < 3; ++d) {
                    s.velocities(Space::Host, i, d) += half_dt_over_m[r][i] * s.forces(Space::Host, i, d);
                }
            }
            s.velocities.modify(Space::Host);
        }
    };
    refresh_masses();

    step_seconds_.assign(n_steps, 0.0);
    const auto t0 = std::chrono::steady_clock::now();
    auto t_prev = t0;
    for (std::size_t k = 1; k <= n_steps; ++k) {
        const std::size_t step = step_ + k;
        kick();
        bool stale = false;
        auto& stores = system_->stores();
        for (std::size_t r = 0; r < stores.size(); ++r) {
            auto& s = stores[r];
            if (s.n_local == 0) {
                continue;
            }
            s.positions.sync(Space::Host);
            s.velocities.sync(Space::Host);
            for (std::size_t i = 0; i < s.n_local; ++i) {
                for (std::size_t d = 0; d < 3; ++d) {
                    s.positions(Space::Host, i, d) += dt * s.velocities(Space::Host, i, d);
                }
            }
            s.positions.modify(Space::Host);
            stale = stale || lists_[r].needs_rebuild(s);
        }
        if (stale) {
            system_->reneighbor(halo());
            build_lists();
            solve_charges();
            refresh_masses();
        } else {
            system_->forward_comm();
        }
        const double pe = compute_forces(step);
        kick();
        const auto t_now = std::chrono::steady_clock::now();
        step_seconds_[k - 1] = std::chrono::duration<double>(t_now - t_prev).count();
        t_prev = t_now;
        if ((config_.thermo_every > 0 && step % config_.thermo_every == 0) || k == n_steps) {
            emit(measure(step, pe));
            t_prev = std::chrono::steady_clock::now();
        }
    }
    last_run_seconds_ = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    step_ += n_steps;
    atoms_ = system_->gather();
    return {thermo_.begin() + static_cast<std::ptrdiff_t>(first), thermo_.end()};
}

} // namespace mdkk
