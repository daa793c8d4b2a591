#include "sph/simulation.hpp"

#include "sph/integrator.hpp"
#include "sph/parallel.hpp"
#include "sph/sqpatch.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <sstream>

namespace sph {

void SimulationConfig::validate() const {
    physics.validate();
    if (ranks < 1) throw ConfigError("ranks must be >= 1");
    if (threads < 1) throw ConfigError("threads must be >= 1");
    if (bucket_size == 0 || global_bucket_size == 0) throw ConfigError("bucket sizes must be positive");
    if (!(kernel_exponent >= 3.0)) throw ConfigError("kernel exponent must be >= 3");
    if (!(target_neighbors > 0.0)) throw ConfigError("target neighbor count must be positive");
    if (periodic.enabled && !(periodic.hi > periodic.lo)) throw ConfigError("empty periodic z range");
}

std::size_t SimulationConfig::neighbor_capacity() const {
    if (max_neighbors > 0) return max_neighbors;
    return static_cast<std::size_t>(std::ceil(2.0 * target_neighbors));
}

std::array<double, 8> conserved_sums(const ParticleSystem& ps, std::size_t count) {
    std::array<std::vector<double>, 8> parts;
    for (auto& p : parts) p.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        const double m = ps.m[i];
        const double vx = ps.vx[i], vy = ps.vy[i], vz = ps.vz[i];
        const double x = ps.x[i], y = ps.y[i], z = ps.z[i];
        parts[0][i] = m * ps.u[i];
        parts[1][i] = 0.5 * m * (vx * vx + vy * vy + vz * vz);
        parts[2][i] = m * vx;
        parts[3][i] = m * vy;
        parts[4][i] = m * vz;
        parts[5][i] = m * (y * vz - z * vy);
        parts[6][i] = m * (z * vx - x * vz);
        parts[7][i] = m * (x * vy - y * vx);
    }
    std::array<double, 8> sums{};
    for (std::size_t k = 0; k < 8; ++k) sums[k] = pairwise_sum(parts[k]);
    return sums;
}

double PhaseTimer::total() const {
    double t = 0.0;
    for (const auto& [_, s] : totals_) t += s;
    return t;
}

Simulation::Simulation(SimulationConfig config, const ParticleSystem& initial,
                       std::uint64_t iteration, double time)
    : config_(std::move(config)),
      kernel_(config_.kernel_exponent),
      table_(config_.use_table ? std::make_unique<KernelTable>(kernel_, config_.table_size) : nullptr),
      evaluator_(kernel_, table_.get()),
      log_(config_.ranks),
      channel_(config_.ranks, log_),
      iteration_(iteration),
      time_(time) {
    config_.validate();
    if (initial.size() == 0) throw ConfigError("simulation: no particles");
    set_worker_count(config_.threads);

    dt_prev_ = initial.dt_prev.front();
    double u_ref = config_.u_reference;
    if (!(u_ref > 0.0)) {
        for (double u : initial.u) u_ref += u;
        u_ref /= static_cast<double>(initial.size());
    }
    u_floor_ = config_.u_floor_fraction * u_ref;

    // Initial load: every rank receives its cells directly.
    ParticleSystem all = initial;
    for (std::size_t i = 0; i < all.size(); ++i) all.z[i] = config_.periodic.wrap(all.z[i]);
    domain_box_ = compute_bbox(all, config_.box_slack, config_.periodic);
    have_box_ = true;
    Octree::Options opt;
    opt.bucket_size = config_.global_bucket_size;
    opt.periodic = config_.periodic;
    global_tree_ = Octree::build(all.x, all.y, all.z, {}, domain_box_, opt);
    layout_ = assign_cells(global_tree_, config_.ranks, config_.global_bucket_size);

    ranks_.resize(config_.ranks);
    const auto leaf = global_tree_.leaf_of_particles();
    for (std::size_t k : global_tree_.order()) {
        ranks_[layout_.rank_of_leaf(leaf[k])].local.push_back_from(all, k);
    }
    for (auto& r : ranks_) r.owned = r.local.size();
    local_trees_.resize(config_.ranks);
}

template <class F>
void Simulation::timed(const char* phase, F&& body) {
    const auto start = std::chrono::steady_clock::now();
    body();
    const auto stop = std::chrono::steady_clock::now();
    timer_.add(phase, std::chrono::duration<double>(stop - start).count());
}

void Simulation::domain_phase() {
    // One collective carries the bounding box and the largest h; in the
    // in-process harness the same synchronization also provides the
    // per-cell counts of the shared top tree.
    std::vector<std::vector<double>> payload(ranks_.size());
    for (std::size_t r = 0; r < ranks_.size(); ++r) {
        const auto& ps = ranks_[r].local;
        const std::size_t n = ranks_[r].owned;
        Box b = raw_bounds({ps.x.data(), n}, {ps.y.data(), n}, {ps.z.data(), n});
        double hm = 0.0;
        for (std::size_t i = 0; i < n; ++i) hm = std::max(hm, ps.h[i]);
        payload[r] = {-b.lo[0], -b.lo[1], -b.lo[2], b.hi[0], b.hi[1], b.hi[2], hm};
    }
    const auto reduced = global_reduce(ReduceOp::max, payload, log_);
    const Box raw{{-reduced[0], -reduced[1], -reduced[2]}, {reduced[3], reduced[4], reduced[5]}};
    h_max_ = reduced[6];
    Box check = raw;
    if (config_.periodic.enabled) {
        check.lo[2] = config_.periodic.lo;
        check.hi[2] = config_.periodic.hi;
    }
    if (!have_box_ || !domain_box_.contains(check)) {
        domain_box_ = inflate(raw, config_.box_slack, config_.periodic);
        have_box_ = true;
    }

    std::vector<double> x, y, z;
    for (const auto& r : ranks_) {
        x.insert(x.end(), r.local.x.begin(), r.local.x.begin() + static_cast<std::ptrdiff_t>(r.owned));
        y.insert(y.end(), r.local.y.begin(), r.local.y.begin() + static_cast<std::ptrdiff_t>(r.owned));
        z.insert(z.end(), r.local.z.begin(), r.local.z.begin() + static_cast<std::ptrdiff_t>(r.owned));
    }
    Octree::Options opt;
    opt.bucket_size = config_.global_bucket_size;
    opt.periodic = config_.periodic;
    // Rebuilt every step so that no leaf exceeds the bucket, which keeps the
    // assignment imbalance within one bucket.
    global_tree_ = Octree::build(x, y, z, {}, domain_box_, opt);
    layout_ = assign_cells(global_tree_, config_.ranks, config_.global_bucket_size);

    channel_.lift_restriction();
    migrate(layout_, global_tree_, ranks_, channel_);
}

void Simulation::neighbor_phase() {
    Octree::Options opt;
    opt.bucket_size = config_.bucket_size;
    opt.periodic = config_.periodic;
    counters_.neighbor_truncations = 0;
    for (std::size_t r = 0; r < ranks_.size(); ++r) {
        auto& rank = ranks_[r];
        auto& tree = local_trees_[r];
        const auto& ps = rank.local;
        // Without halos the particle set is stable between steps and the
        // tree can be refreshed in place.
        const bool reuse = ranks_.size() == 1 && tree.particle_count() == ps.size() &&
                           tree.particle_count() > 0 && tree.box().contains(domain_box_) &&
                           domain_box_.contains(tree.box());
        if (reuse && tree.refresh(ps.x, ps.y, ps.z, {})) {
            ++counters_.tree_refreshes;
        } else {
            tree = Octree::build(ps.x, ps.y, ps.z, {}, domain_box_, opt);
            ++counters_.tree_rebuilds;
        }
        find_neighbors(tree, rank.local, rank.owned, config_.neighbor_capacity());
        counters_.neighbor_truncations += rank.local.neighbors.truncated;
    }
}

Diagnostics Simulation::step() {
    const auto step_start = std::chrono::steady_clock::now();
    timer_.clear();
    log_.begin_step(iteration_ + 1);
    const auto& physics = config_.physics;

    timed("domain", [&] { domain_phase(); });

    timed("halo_search", [&] {
        plan_ = find_halos(ranks_, config_.periodic);
        channel_.restrict_to(layout_adjacency(layout_, global_tree_, 2.0 * h_max_));
    });
    timed("halo_positions", [&] { exchange_halos(plan_, ranks_, HaloPhase::positions, channel_, log_); });
    timed("neighbors", [&] { neighbor_phase(); });

    timed("density", [&] {
        counters_.omega_clamped = 0;
        for (auto& rank : ranks_) {
            const PassContext ctx{evaluator_, config_.periodic, rank.owned};
            compute_density(ctx, rank.local);
            counters_.omega_clamped += compute_omega(ctx, rank.local, physics);
            apply_eos(rank.local, rank.owned, physics.eos);
        }
    });
    timed("halo_density", [&] { exchange_halos(plan_, ranks_, HaloPhase::density, channel_, log_); });

    timed("iad", [&] {
        counters_.iad_fallbacks = 0;
        for (auto& rank : ranks_) {
            const PassContext ctx{evaluator_, config_.periodic, rank.owned};
            counters_.iad_fallbacks += compute_iad(ctx, rank.local, physics);
        }
    });
    timed("halo_gradients", [&] { exchange_halos(plan_, ranks_, HaloPhase::gradients, channel_, log_); });

    timed("momentum_energy", [&] {
        counters_.coincident_pairs = 0;
        for (auto& rank : ranks_) {
            const PassContext ctx{evaluator_, config_.periodic, rank.owned};
            counters_.coincident_pairs += momentum_energy(ctx, rank.local, physics).coincident_pairs;
        }
    });

    double dt = 0.0;
    timed("timestep", [&] {
        std::vector<double> local(ranks_.size());
        for (std::size_t r = 0; r < ranks_.size(); ++r) {
            local[r] = compute_timestep(ranks_[r].local, ranks_[r].owned, physics.courant, dt_prev_);
        }
        dt = global_reduce(ReduceOp::min, local, log_);
        if (!std::isfinite(dt) || !(dt > 0.0)) {
            throw NumericError("timestep: reduced dt " + std::to_string(dt) + " at iteration " +
                               std::to_string(iteration_ + 1));
        }
    });

    Diagnostics d;
    timed("integrate", [&] {
        counters_.energy_clamped = 0;
        std::size_t neighbor_total = 0;
        std::size_t owned_total = 0;
        for (auto& rank : ranks_) {
            advance_positions(rank.local, rank.owned, dt, dt_prev_, config_.periodic);
            counters_.energy_clamped += advance_energy(rank.local, rank.owned, dt, dt_prev_, u_floor_);
            for (std::size_t i = 0; i < rank.owned; ++i) neighbor_total += rank.local.neighbors.count[i];
            owned_total += rank.owned;
            if (config_.adaptive_h) {
                update_smoothing_length(rank.local, rank.owned, config_.target_neighbors,
                                        domain_box_.diagonal());
            }
        }
        d.neighbors_mean = static_cast<double>(neighbor_total) / static_cast<double>(owned_total);
    });

    iteration_ += 1;
    time_ += dt;
    dt_prev_ = dt;

    timed("diagnostics", [&] {
        d.iteration = iteration_;
        d.time = time_;
        d.dt = dt;
        double ratio_sum = 0.0;
        for (std::size_t r = 0; r < ranks_.size(); ++r) {
            const double ratio = ranks_[r].owned > 0
                                     ? static_cast<double>(plan_.halo_count(static_cast<int>(r))) /
                                           static_cast<double>(ranks_[r].owned)
                                     : 0.0;
            ratio_sum += ratio;
            d.halo_ratio_max = std::max(d.halo_ratio_max, ratio);
        }
        d.halo_ratio_mean = ratio_sum / static_cast<double>(ranks_.size());
        d.tracked = config_.track_energy;
        if (!config_.track_energy) return;
        std::vector<std::vector<double>> partial(ranks_.size());
        for (std::size_t r = 0; r < ranks_.size(); ++r) {
            const auto s = conserved_sums(ranks_[r].local, ranks_[r].owned);
            partial[r].assign(s.begin(), s.end());
        }
        const auto total = global_reduce(ReduceOp::sum, partial, log_);
        d.internal = total[0];
        d.kinetic = total[1];
        d.energy = total[0] + total[1];
        d.momentum = {total[2], total[3], total[4]};
        d.angular_momentum = {total[5], total[6], total[7]};
    });

    step_seconds_ = std::chrono::duration<double>(std::chrono::steady_clock::now() - step_start).count();
    return d;
}

Diagnostics Simulation::snapshot() const {
    const ParticleSystem all = gather();
    const auto s = conserved_sums(all, all.size());
    Diagnostics d;
    d.iteration = iteration_;
    d.time = time_;
    d.dt = dt_prev_;
    d.internal = s[0];
    d.kinetic = s[1];
    d.energy = s[0] + s[1];
    d.momentum = {s[2], s[3], s[4]};
    d.angular_momentum = {s[5], s[6], s[7]};
    return d;
}

ParticleSystem Simulation::gather() const {
    std::vector<std::pair<std::uint64_t, std::pair<std::size_t, std::size_t>>> index;
    for (std::size_t r = 0; r < ranks_.size(); ++r) {
        for (std::size_t i = 0; i < ranks_[r].owned; ++i) index.push_back({ranks_[r].local.id[i], {r, i}});
    }
    std::sort(index.begin(), index.end());
    ParticleSystem all;
    for (const auto& [id, where] : index) all.push_back_from(ranks_[where.first].local, where.second);
    return all;
}

std::string checkpoint_name(std::uint64_t iteration) {
    std::ostringstream name;
    name << "checkpoint_" << std::setw(6) << std::setfill('0') << iteration << ".bin";
    return name.str();
}

void write_diagnostics_header(std::ostream& out) {
    out << "iter,t,dt,Etot,px,py,pz,Lx,Ly,Lz,neigh_mean,halo_ratio_mean,halo_ratio_max\n";
}

void write_diagnostics_row(std::ostream& out, const Diagnostics& d) {
    out << std::setprecision(17) << d.iteration << ',' << d.time << ',' << d.dt << ',';
    if (d.tracked) {
        out << d.energy << ',' << d.momentum[0] << ',' << d.momentum[1] << ',' << d.momentum[2] << ','
            << d.angular_momentum[0] << ',' << d.angular_momentum[1] << ',' << d.angular_momentum[2];
    } else {
        out << ",,,,,,";
    }
    out << ',' << d.neighbors_mean << ',' << d.halo_ratio_mean << ',' << d.halo_ratio_max << '\n';
}

namespace {

void write_timing(const std::filesystem::path& path, const PhaseTimer& totals, double wall,
                  std::uint64_t steps) {
    std::ofstream out(path);
    out << std::fixed << std::setprecision(6);
    out << "steps " << steps << "\n";
    out << "wall_seconds " << wall << "\n";
    out << "per_step_seconds " << (steps > 0 ? wall / static_cast<double>(steps) : 0.0) << "\n";
    for (const auto& [phase, seconds] : totals.phases()) {
        out << "phase " << phase << ' ' << seconds << ' '
            << (wall > 0.0 ? 100.0 * seconds / wall : 0.0) << "%\n";
    }
}

} // namespace

int run(const RunConfig& config, std::ostream& log) {
    try {
        namespace fs = std::filesystem;
        if (config.steps < 0) throw ConfigError("steps must be non-negative");
        if (config.checkpoint_every < 0) throw ConfigError("checkpoint interval must be non-negative");
        fs::create_directories(config.output_dir);

        SimulationConfig sim = config.simulation;
        ParticleSystem initial;
        std::uint64_t iteration = 0;
        double time = 0.0;
        SquarePatchConfig patch;
        patch.side = config.side;
        patch.layers = config.layers;
        patch.omega = config.omega;
        patch.series_terms = config.series_terms;
        patch.rho0 = sim.physics.eos.rho0;
        patch.target_neighbors = sim.target_neighbors;
        patch.validate();
        sim.physics.eos = patch.eos();
        sim.periodic = patch.periodic();
        sim.u_reference = patch.u0;

        if (config.resume) {
            Checkpoint cp = read_checkpoint(*config.resume);
            initial = std::move(cp.particles);
            iteration = cp.iteration;
            time = cp.time;
            log << "resuming from " << config.resume->string() << " at iteration " << iteration << "\n";
        } else {
            initial = make_square_patch(patch);
            write_checkpoint(config.output_dir / checkpoint_name(0), initial, 0, 0.0);
            log << "square patch: " << initial.size() << " particles, c0 = " << patch.sound_speed()
                << ", h = " << initial.h.front() << "\n";
        }
        if (config.steps == 0) return 0;

        Simulation simulation(sim, initial, iteration, time);
        std::ofstream diag(config.output_dir / "diagnostics.csv");
        write_diagnostics_header(diag);

        PhaseTimer totals;
        double wall = 0.0;
        std::uint64_t done = 0;
        for (int s = 0; s < config.steps; ++s) {
            if (config.t_end > 0.0 && simulation.time() >= config.t_end) break;
            const Diagnostics d = simulation.step();
            ++done;
            write_diagnostics_row(diag, d);
            wall += simulation.step_wall_time();
            for (const auto& [phase, seconds] : simulation.timer().phases()) totals.add(phase, seconds);
            if (config.checkpoint_every > 0 && simulation.iteration() % config.checkpoint_every == 0) {
                write_checkpoint(config.output_dir / checkpoint_name(simulation.iteration()),
                                 simulation.gather(), simulation.iteration(), simulation.time());
            }
            log << "iter " << d.iteration << " t " << d.time << " dt " << d.dt;
            if (d.tracked) log << " E " << d.energy << " Lz " << d.angular_momentum[2];
            log << "\n";
        }
        diag.flush();
        if (config.checkpoint_every == 0 || simulation.iteration() % config.checkpoint_every != 0) {
            write_checkpoint(config.output_dir / checkpoint_name(simulation.iteration()),
                             simulation.gather(), simulation.iteration(), simulation.time());
        }
        simulation.comm_log().write_csv(config.output_dir / "commlog.csv");
        simulation.comm_log().write_reduction_csv(config.output_dir / "reductions.csv");
        write_timing(config.output_dir / "timing.txt", totals, wall, done);
        return 0;
    } catch (const ConfigError& e) {
        log << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        log << "numeric failure: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        log << "error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace sph
