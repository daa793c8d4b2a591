#pragma once

#include "sph/common.hpp"
#include "sph/octree.hpp"
#include "sph/particles.hpp"

#include <deque>
#include <filesystem>
#include <map>
#include <span>
#include <vector>

namespace sph {

struct CommRecord {
    std::uint64_t bytes = 0;
    std::uint64_t messages = 0;
};

/// Point-to-point traffic and collective counts, per step.
class CommLog {
public:
    struct StepEntry {
        std::uint64_t step = 0;
        std::map<std::pair<int, int>, CommRecord> matrix;  // (sender, receiver)
        int reductions = 0;
        int halo_phases = 0;
    };

    explicit CommLog(int ranks = 1) : ranks_(ranks) {}

    int ranks() const { return ranks_; }
    void begin_step(std::uint64_t step);
    void record_message(int sender, int receiver, std::uint64_t bytes);
    void record_reduction();
    void record_halo_phase();

    const std::vector<StepEntry>& steps() const { return steps_; }
    const StepEntry& current() const { return steps_.back(); }
    std::uint64_t total_reductions() const;
    /// Dense ranks x ranks totals over all steps, row = sender.
    std::vector<CommRecord> total_matrix() const;

    /// CSV `step,sender,receiver,bytes,messages`.
    void write_csv(const std::filesystem::path& path) const;
    /// CSV `step,reductions,halo_phases`.
    void write_reduction_csv(const std::filesystem::path& path) const;

private:
    StepEntry& entry();

    int ranks_;
    std::vector<StepEntry> steps_;
};

enum class ReduceOp { min, max, sum };

/// Deterministic reduction over one value per simulated rank, counted as
/// one global synchronization.
double global_reduce(ReduceOp op, std::span<const double> per_rank, CommLog& log);
/// Elementwise variant: all vectors have the same length; one synchronization.
std::vector<double> global_reduce(ReduceOp op, std::span<const std::vector<double>> per_rank,
                                  CommLog& log);

/// In-process mailbox between simulated ranks. Every send is logged; an
/// optional adjacency matrix turns sends between non-adjacent ranks into
/// ContractError.
class Channel {
public:
    Channel(int ranks, CommLog& log) : ranks_(ranks), log_(&log), boxes_(ranks * ranks) {}

    void restrict_to(std::vector<std::uint8_t> adjacency) { adjacency_ = std::move(adjacency); }
    void lift_restriction() { adjacency_.clear(); }

    void send(int sender, int receiver, std::vector<double> payload);
    /// Pops the oldest message from sender to receiver; ContractError if none.
    std::vector<double> receive(int receiver, int sender);
    bool pending(int receiver, int sender) const;

private:
    int ranks_;
    CommLog* log_;
    std::vector<std::uint8_t> adjacency_;
    std::vector<std::deque<std::vector<double>>> boxes_;  // index sender * ranks + receiver
};

/// State of one simulated rank: owned particles first, halo copies after.
struct RankState {
    ParticleSystem local;
    std::size_t owned = 0;

    std::size_t halo_count() const { return local.size() - owned; }
};

/// Assignment of global-tree leaves (depth-first order) to ranks.
struct DomainLayout {
    int rank_count = 1;
    std::size_t global_bucket_size = 128;
    std::size_t total = 0;
    std::vector<int> cell_rank;                 // per leaf position
    std::vector<std::size_t> first_leaf;        // per rank, size rank_count + 1
    std::vector<std::size_t> owned_count;       // per rank

    int rank_of_leaf(std::size_t leaf) const { return cell_rank[leaf]; }
    double particles_per_rank() const { return static_cast<double>(total) / rank_count; }
    /// max_r |owned_r - n / R|
    double imbalance() const;
};

/// globalBucketSize / particlesPerRank * 100%.
double imbalance_bound_percent(std::size_t global_bucket_size, double particles_per_rank);

/// Greedy depth-first packing of the leaves of a tree built with
/// bucket_size = global_bucket_size into contiguous rank ranges, each
/// boundary placed at the leaf edge closest to r * n / R.
/// Throws ConfigError if rank_count exceeds the number of non-empty leaves.
DomainLayout assign_cells(const Octree& global_tree, int rank_count,
                          std::size_t global_bucket_size);

/// ranks x ranks matrix: 1 when some leaf of r and some leaf of s lie within
/// `reach` of each other (min-image z), diagonal excluded.
std::vector<std::uint8_t> layout_adjacency(const DomainLayout& layout, const Octree& global_tree,
                                           double reach);

/// send[s][r]: owned indices on s that r needs as halos, i.e. particles j
/// with |x_a - x_j| < 2 h_a for some a owned by r (min-image z).
struct HaloPlan {
    int rank_count = 1;
    std::vector<std::vector<std::vector<std::size_t>>> send;

    std::size_t halo_count(int receiver) const;
    bool communicates(int sender, int receiver) const { return !send[sender][receiver].empty(); }
};

HaloPlan find_halos(std::span<const RankState> ranks, const PeriodicZ& periodic);

enum class HaloPhase {
    positions = 1,  // x, v, h, m, u, id; rebuilds the halo section
    density = 2,    // rho, p, c, omega
    gradients = 3,  // IAD coefficients and fallback flags
};

/// Ships the phase's fields from owners to every rank in the plan, through
/// the channel. Counts one halo phase in the log.
void exchange_halos(const HaloPlan& plan, std::span<RankState> ranks, HaloPhase phase,
                    Channel& channel, CommLog& log);

/// Moves every owned particle to the rank owning its leaf and sorts each
/// rank's owned particles by (leaf, id). Drops halo sections.
void migrate(const DomainLayout& layout, const Octree& global_tree, std::span<RankState> ranks,
             Channel& channel);

} // namespace sph
