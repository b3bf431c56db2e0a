#ifndef MDKK_DRIVER_HPP
#define MDKK_DRIVER_HPP

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "mdkk/domain.hpp"
#include "mdkk/lattice.hpp"
#include "mdkk/memspace.hpp"
#include "mdkk/neighbor.hpp"
#include "mdkk/pair.hpp"
#include "mdkk/qeq.hpp"
#include "mdkk/registry.hpp"
#include "mdkk/script.hpp"
#include "mdkk/snap.hpp"
#include "mdkk/system.hpp"
#include "mdkk/torsion.hpp"

namespace mdkk
{

struct RunConfig
{
    double dt = 0.005;
    std::size_t thermo_every = 0;
    std::uint64_t rng_seed = 12345;
    std::size_t n_ranks = 1;
    AccumStrategy strategy = AccumStrategy::serial();
    ExecMode mode = ExecMode::AtomParallel;
    double skin = 0.3;
    bool newton = true;
    ListStyle list_style = ListStyle::Half;
    SnapKnobs knobs;
};

struct ThermoRecord
{
    std::size_t step = 0;
    double pe = 0.0;
    double ke = 0.0;
    double etot = 0.0;
    double temp = 0.0;
};

/// Formats one thermo line; identical records give identical text.
std::string format_thermo(const ThermoRecord& r);
std::string thermo_header();

class PairStyle
{
public:
    virtual ~PairStyle() = default;

    virtual std::string name() const = 0;
    /// Arguments of one pair_coeff command; relative paths resolve against
    /// base_dir.
    virtual void coeff(const std::vector<std::string>& args, const std::string& base_dir) = 0;
    virtual void set_shift(bool shift);
    virtual double cutoff() const = 0;
    virtual ListStyle list_style(ListStyle requested) const { return requested; }
    /// Throws ConfigError if the style is not ready for the given types.
    virtual void init(std::int32_t max_type) const = 0;
    /// Zeroes and fills forces on every rank; returns the potential energy.
    virtual double compute(System& system, std::vector<NeighborList>& lists, const RunConfig& config) = 0;
};

using PairFactory = std::function<std::unique_ptr<PairStyle>(const std::vector<std::string>& args)>;

/// lj/cut (generic kernel), lj/cut/opt (inlined kernel) and snap.
StyleRegistry<PairFactory> default_pair_registry();

/// Ready-to-run styles without pair_coeff.
std::unique_ptr<PairStyle> make_lj_style(const PairParams& params, bool inlined);
std::unique_ptr<PairStyle> make_snap_style(const SnapParams& params);

struct QeqConfig
{
    bool enabled = false;
    QeqParams params;
};

struct TorsionConfig
{
    bool enabled = false;
    BondParams bonds;
    TorsionParams params;
};

class NonFiniteError : public Error
{
public:
    NonFiniteError(std::size_t step, const std::string& what);

    std::size_t step() const { return step_; }

private:
    std::size_t step_;
};

struct BenchRow
{
    std::size_t n_atoms = 0;
    double atom_steps_per_second = 0.0;
};

//---------------------------------------------------------------------------//
/*!
  \brief Script-driven simulation state and the velocity-Verlet integrator.

  Commands execute in order. run(n) rebuilds the rank stores from the
  current atoms, computes forces, logs step 0 and then takes n steps.
  Neighbor lists are rebuilt (with migration) once any atom moved more than
  half the skin; otherwise ghost positions are refreshed.
*/
class Simulation
{
public:
    explicit Simulation(std::ostream* log = nullptr);

    void execute(const Script& script, const std::string& base_dir = ".");
    void execute(const Command& command, const std::string& base_dir = ".");

    /// Replaces the atoms and the box.
    void set_atoms(std::vector<AtomRecord> atoms, const Box& box);
    void set_pair(std::unique_ptr<PairStyle> pair);
    void set_mass(std::int32_t type, double mass);
    double mass(std::int32_t type) const;

    std::vector<ThermoRecord> run(std::size_t n_steps);

    RunConfig& config() { return config_; }
    QeqConfig& qeq() { return qeq_; }
    TorsionConfig& torsion() { return torsion_; }
    PairStyle* pair() { return pair_.get(); }
    const Box& box() const { return box_; }
    const std::string& suffix() const { return suffix_; }
    std::size_t step() const { return step_; }

    /// Current atoms ordered by id.
    const std::vector<AtomRecord>& atoms() const { return atoms_; }
    /// Charges from the last QEq solve, ordered by id.
    const std::vector<double>& charges() const { return charges_; }
    /// Every thermo record since construction.
    const std::vector<ThermoRecord>& thermo() const { return thermo_; }
    /// Neighbor list builds during the last run (setup included).
    std::size_t rebuilds() const { return rebuilds_; }
    /// Wall time of the stepping loop of the last run.
    double last_run_seconds() const { return last_run_seconds_; }
    /// Wall time of each step of the last run.
    const std::vector<double>& step_seconds() const { return step_seconds_; }
    const std::vector<BenchRow>& last_bench() const { return last_bench_; }

private:
    double halo() const;
    void build_lists();
    double compute_forces(std::size_t step);
    void solve_charges();
    ThermoRecord measure(std::size_t step, double pe);
    void emit(const ThermoRecord& record);
    void require_box(const Command& command) const;

    std::ostream* log_;
    RunConfig config_;
    QeqConfig qeq_;
    TorsionConfig torsion_;
    StyleRegistry<PairFactory> registry_;
    std::string suffix_;
    std::unique_ptr<PairStyle> pair_;
    bool shift_ = false;
    std::map<std::int32_t, double> masses_;

    std::optional<LatticeKind> lattice_;
    double lattice_density_ = 0.0;
    std::array<bool, 3> periodic_{true, true, true};
    std::array<std::size_t, 3> cells_{0, 0, 0};
    bool have_box_ = false;

    Box box_;
    std::vector<AtomRecord> atoms_;
    std::vector<double> charges_;
    std::vector<ThermoRecord> thermo_;
    std::vector<BenchRow> last_bench_;
    std::size_t step_ = 0;

    std::unique_ptr<System> system_;
    std::vector<NeighborList> lists_;
    std::vector<NeighborList> aux_lists_;
    std::size_t rebuilds_ = 0;
    double last_run_seconds_ = 0.0;
    std::vector<double> step_seconds_;
};

struct BenchOptions
{
    /// Timed atom-steps per repetition; the step count is this over
    /// n_atoms, at least min_steps. All repetitions of a size run as
    /// consecutive segments of one run.
    double atom_steps = 2.0e6;
    std::size_t min_steps = 10;
    /// Untimed steps before the first segment (setup and the initial force
    /// evaluation are never timed).
    std::size_t warmup_steps = 0;
    double temperature = 1.0;
    double density = 0.8442;
    RunConfig config;
};

/// Defaults used by `bench <potential>` for "lj" and "snap".
BenchOptions default_bench_options(const std::string& potential);

/// fcc lattices with about `sizes[k]` atoms each; best-of-reps throughput.
std::vector<BenchRow> bench_saturation(const std::string& potential, const std::vector<std::size_t>& sizes,
                                       std::size_t reps, const BenchOptions& options,
                                       std::ostream* progress = nullptr);

void write_bench_csv(const std::vector<BenchRow>& rows, std::ostream& out);
void write_bench_csv(const std::vector<BenchRow>& rows, const std::string& path);
std::vector<BenchRow> read_bench_csv(const std::string& path);

struct SaturationReport
{
    double max_throughput = 0.0;
    /// Smallest size reaching 90% of the maximum.
    std::size_t n90 = 0;
    /// Every point is at least (1 - band) times the best earlier point.
    bool non_decreasing = false;
    /// Largest shortfall below the running maximum, as a fraction.
    double worst_drop = 0.0;
};

SaturationReport analyze_saturation(const std::vector<BenchRow>& rows, double band = 0.10);

/// Parses "a,b,c" into ascending positive sizes.
std::vector<std::size_t> parse_sizes(const std::string& text);

} // namespace mdkk

#endif
