#pragma once

#include "sph/domain.hpp"
#include "sph/kernel.hpp"
#include "sph/octree.hpp"
#include "sph/particles.hpp"
#include "sph/physics.hpp"

#include <chrono>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>

namespace sph {

struct SimulationConfig {
    PhysicsConfig physics{};
    PeriodicZ periodic{};
    double kernel_exponent = 6.0;
    bool use_table = true;
    std::size_t table_size = KernelTable::kDefaultSize;

    int ranks = 1;
    int threads = 1;
    std::size_t bucket_size = 64;
    std::size_t global_bucket_size = 128;
    double box_slack = 0.005;

    double target_neighbors = 300.0;
    std::size_t max_neighbors = 0;  // 0 selects 2 * target_neighbors
    bool adaptive_h = true;
    bool track_energy = true;
    double u_floor_fraction = 1e-12;
    double u_reference = 0.0;  // floor base; 0 uses the mean u of the initial state

    void validate() const;
    std::size_t neighbor_capacity() const;
};

/// Conserved quantities and bookkeeping after a step.
struct Diagnostics {
    std::uint64_t iteration = 0;
    double time = 0.0;
    double dt = 0.0;
    double kinetic = 0.0;
    double internal = 0.0;
    double energy = 0.0;
    Vec3 momentum{};
    Vec3 angular_momentum{};
    double neighbors_mean = 0.0;
    double halo_ratio_mean = 0.0;
    double halo_ratio_max = 0.0;
    bool tracked = true;
};

/// Conserved sums over a particle range using fixed-order pairwise sums:
/// {sum m u, sum m v^2 / 2, p_x, p_y, p_z, L_x, L_y, L_z}.
std::array<double, 8> conserved_sums(const ParticleSystem& ps, std::size_t count);

/// Wall time per named phase.
class PhaseTimer {
public:
    void add(const std::string& phase, double seconds) { totals_[phase] += seconds; }
    double total() const;
    const std::map<std::string, double>& phases() const { return totals_; }
    void clear() { totals_.clear(); }

private:
    std::map<std::string, double> totals_;
};

struct StepCounters {
    std::size_t omega_clamped = 0;
    std::size_t iad_fallbacks = 0;
    std::size_t coincident_pairs = 0;
    std::size_t energy_clamped = 0;
    std::size_t neighbor_truncations = 0;
    std::size_t tree_rebuilds = 0;
    std::size_t tree_refreshes = 0;
};

/// Time-step loop over simulated ranks. Each step runs, in order:
/// domain sync (reduction 1) -> global tree, cell assignment, migration ->
/// halo search -> halo exchange 1 (positions) -> neighbors -> density,
/// Omega, EOS -> halo exchange 2 (density) -> IAD -> halo exchange 3 (IAD) ->
/// momentum/energy -> dt (reduction 2) -> positions, energy, h ->
/// conserved sums (reduction 3, when tracking).
class Simulation {
public:
    Simulation(SimulationConfig config, const ParticleSystem& initial, std::uint64_t iteration = 0,
               double time = 0.0);

    Diagnostics step();

    /// Conserved quantities of the current state, computed locally without
    /// touching the communication log.
    Diagnostics snapshot() const;

    /// All owned particles, sorted by id.
    ParticleSystem gather() const;

    std::uint64_t iteration() const { return iteration_; }
    double time() const { return time_; }
    double last_dt() const { return dt_prev_; }

    const SimulationConfig& config() const { return config_; }
    const CommLog& comm_log() const { return log_; }
    const DomainLayout& layout() const { return layout_; }
    const Octree& global_tree() const { return global_tree_; }
    const HaloPlan& halo_plan() const { return plan_; }
    std::span<const RankState> ranks() const { return ranks_; }
    const PhaseTimer& timer() const { return timer_; }
    double step_wall_time() const { return step_seconds_; }
    const StepCounters& counters() const { return counters_; }
    double max_smoothing_length() const { return h_max_; }

private:
    template <class F>
    void timed(const char* phase, F&& body);

    void domain_phase();
    void neighbor_phase();

    SimulationConfig config_;
    SincKernel kernel_;
    std::unique_ptr<KernelTable> table_;
    KernelEvaluator evaluator_;

    std::vector<RankState> ranks_;
    std::vector<Octree> local_trees_;
    CommLog log_;
    Channel channel_;
    Octree global_tree_;
    Box domain_box_{};
    bool have_box_ = false;
    DomainLayout layout_;
    HaloPlan plan_;
    double h_max_ = 0.0;

    std::uint64_t iteration_ = 0;
    double time_ = 0.0;
    double dt_prev_ = 0.0;
    double u_floor_ = 0.0;

    PhaseTimer timer_;
    double step_seconds_ = 0.0;
    StepCounters counters_;
};

struct RunConfig {
    SimulationConfig simulation{};
    int side = 50;
    int layers = 20;
    double omega = 5.0;
    int series_terms = 39;
    int steps = 10;
    double t_end = 0.0;        // 0 disables the time limit
    int checkpoint_every = 0;  // 0 writes only initial and final checkpoints
    std::filesystem::path output_dir = "out";
    std::optional<std::filesystem::path> resume;
};

/// Runs a square-patch simulation (or resumes one) and writes
/// diagnostics.csv, commlog.csv, reductions.csv, timing.txt and
/// checkpoint_<iteration>.bin files into output_dir. Returns the process
/// exit status: 0 ok, 1 numeric failure, 2 bad configuration.
int run(const RunConfig& config, std::ostream& log);

std::string checkpoint_name(std::uint64_t iteration);
void write_diagnostics_header(std::ostream& out);
void write_diagnostics_row(std::ostream& out, const Diagnostics& d);

} // namespace sph
