#include "sph/domain.hpp"

#include "sph/parallel.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <numeric>

namespace sph {

void CommLog::begin_step(std::uint64_t step) {
    StepEntry e;
    e.step = step;
    steps_.push_back(std::move(e));
}

CommLog::StepEntry& CommLog::entry() {
    if (steps_.empty()) begin_step(0);
    return steps_.back();
}

void CommLog::record_message(int sender, int receiver, std::uint64_t bytes) {
    if (sender < 0 || sender >= ranks_ || receiver < 0 || receiver >= ranks_) {
        throw ContractError("commlog: rank index out of range");
    }
    auto& rec = entry().matrix[{sender, receiver}];
    rec.bytes += bytes;
    rec.messages += 1;
}

void CommLog::record_reduction() { ++entry().reductions; }

void CommLog::record_halo_phase() { ++entry().halo_phases; }

std::uint64_t CommLog::total_reductions() const {
    std::uint64_t total = 0;
    for (const auto& s : steps_) total += static_cast<std::uint64_t>(s.reductions);
    return total;
}

std::vector<CommRecord> CommLog::total_matrix() const {
    std::vector<CommRecord> dense(static_cast<std::size_t>(ranks_) * ranks_);
    for (const auto& s : steps_) {
        for (const auto& [key, rec] : s.matrix) {
            auto& d = dense[static_cast<std::size_t>(key.first) * ranks_ + key.second];
            d.bytes += rec.bytes;
            d.messages += rec.messages;
        }
    }
    return dense;
}

void CommLog::write_csv(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw ConfigError("commlog: cannot write " + path.string());
    out << "step,sender,receiver,bytes,messages\n";
    for (const auto& s : steps_) {
        for (const auto& [key, rec] : s.matrix) {
            out << s.step << ',' << key.first << ',' << key.second << ',' << rec.bytes << ','
                << rec.messages << '\n';
        }
    }
}

void CommLog::write_reduction_csv(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw ConfigError("commlog: cannot write " + path.string());
    out << "step,reductions,halo_phases\n";
    for (const auto& s : steps_) out << s.step << ',' << s.reductions << ',' << s.halo_phases << '\n';
}

namespace {

double combine(ReduceOp op, double a, double b) {
    switch (op) {
    case ReduceOp::min: return std::min(a, b);
    case ReduceOp::max: return std::max(a, b);
    case ReduceOp::sum: return a + b;
    }
    return a;
}

// Fixed binary tree over rank order, as an allreduce would do.
double tree_reduce(ReduceOp op, std::span<const double> v) {
    if (v.size() == 1) return v.front();
    const std::size_t half = v.size() / 2;
    return combine(op, tree_reduce(op, v.first(half)), tree_reduce(op, v.subspan(half)));
}

} // namespace

double global_reduce(ReduceOp op, std::span<const double> per_rank, CommLog& log) {
    if (per_rank.empty()) throw ContractError("global_reduce: no ranks");
    log.record_reduction();
    return tree_reduce(op, per_rank);
}

std::vector<double> global_reduce(ReduceOp op, std::span<const std::vector<double>> per_rank,
                                  CommLog& log) {
    if (per_rank.empty()) throw ContractError("global_reduce: no ranks");
    const std::size_t width = per_rank.front().size();
    std::vector<double> result(width);
    std::vector<double> column(per_rank.size());
    for (std::size_t k = 0; k < width; ++k) {
        for (std::size_t r = 0; r < per_rank.size(); ++r) {
            if (per_rank[r].size() != width) throw ContractError("global_reduce: ragged input");
            column[r] = per_rank[r][k];
        }
        result[k] = tree_reduce(op, column);
    }
    log.record_reduction();
    return result;
}

void Channel::send(int sender, int receiver, std::vector<double> payload) {
    if (sender == receiver) throw ContractError("channel: self message");
    if (!adjacency_.empty() &&
        !adjacency_[static_cast<std::size_t>(sender) * ranks_ + receiver]) {
        throw ContractError("channel: rank " + std::to_string(sender) + " shares no boundary with rank " +
                            std::to_string(receiver));
    }
    log_->record_message(sender, receiver, payload.size() * sizeof(double));
    boxes_[static_cast<std::size_t>(sender) * ranks_ + receiver].push_back(std::move(payload));
}

std::vector<double> Channel::receive(int receiver, int sender) {
    auto& box = boxes_[static_cast<std::size_t>(sender) * ranks_ + receiver];
    if (box.empty()) {
        throw ContractError("channel: no message from rank " + std::to_string(sender) + " to rank " +
                            std::to_string(receiver));
    }
    auto payload = std::move(box.front());
    box.pop_front();
    return payload;
}

bool Channel::pending(int receiver, int sender) const {
    return !boxes_[static_cast<std::size_t>(sender) * ranks_ + receiver].empty();
}

double DomainLayout::imbalance() const {
    const double target = particles_per_rank();
    double worst = 0.0;
    for (auto c : owned_count) worst = std::max(worst, std::abs(static_cast<double>(c) - target));
    return worst;
}

double imbalance_bound_percent(std::size_t global_bucket_size, double particles_per_rank) {
    return static_cast<double>(global_bucket_size) / particles_per_rank * 100.0;
}

DomainLayout assign_cells(const Octree& global_tree, int rank_count,
                          std::size_t global_bucket_size) {
    if (rank_count < 1) throw ConfigError("assign_cells: rank count must be >= 1");
    const auto leaves = global_tree.leaves();
    const auto nodes = global_tree.nodes();
    const std::size_t L = leaves.size();

    std::vector<std::size_t> cum(L + 1, 0);
    std::size_t non_empty = 0;
    for (std::size_t l = 0; l < L; ++l) {
        const std::size_t c = nodes[leaves[l]].count();
        cum[l + 1] = cum[l] + c;
        if (c > 0) ++non_empty;
    }
    if (static_cast<std::size_t>(rank_count) > non_empty) {
        throw ConfigError("assign_cells: " + std::to_string(rank_count) + " ranks for only " +
                          std::to_string(non_empty) + " occupied leaf cells");
    }

    DomainLayout layout;
    layout.rank_count = rank_count;
    layout.global_bucket_size = global_bucket_size;
    layout.total = cum[L];
    layout.first_leaf.assign(rank_count + 1, 0);
    layout.first_leaf[rank_count] = L;

    // Boundary r sits at the leaf edge k whose prefix count is closest to
    // r n / R, while leaving enough occupied leaves for the ranks after it.
    std::vector<std::size_t> occupied_after(L + 1, 0);
    for (std::size_t l = L; l-- > 0;) {
        occupied_after[l] = occupied_after[l + 1] + (nodes[leaves[l]].count() > 0 ? 1 : 0);
    }
    for (int r = 1; r < rank_count; ++r) {
        const double target = static_cast<double>(layout.total) * r / rank_count;
        const std::size_t prev = layout.first_leaf[r - 1];
        // first edge after prev that gives rank r-1 at least one occupied leaf
        std::size_t lo = prev + 1;
        while (lo < L && cum[lo] == cum[prev]) ++lo;
        std::size_t best = lo;
        double best_err = std::numeric_limits<double>::infinity();
        for (std::size_t k = lo; k <= L; ++k) {
            if (occupied_after[k] < static_cast<std::size_t>(rank_count - r)) break;
            const double err = std::abs(static_cast<double>(cum[k]) - target);
            if (err < best_err) {
                best_err = err;
                best = k;
            }
            if (static_cast<double>(cum[k]) > target) break;
        }
        layout.first_leaf[r] = best;
    }

    layout.cell_rank.assign(L, 0);
    layout.owned_count.assign(rank_count, 0);
    for (int r = 0; r < rank_count; ++r) {
        for (std::size_t l = layout.first_leaf[r]; l < layout.first_leaf[r + 1]; ++l) {
            layout.cell_rank[l] = r;
        }
        layout.owned_count[r] = cum[layout.first_leaf[r + 1]] - cum[layout.first_leaf[r]];
    }
    return layout;
}

std::vector<std::uint8_t> layout_adjacency(const DomainLayout& layout, const Octree& global_tree,
                                           double reach) {
    const int R = layout.rank_count;
    std::vector<std::uint8_t> adj(static_cast<std::size_t>(R) * R, 0);
    const auto leaves = global_tree.leaves();
    const auto nodes = global_tree.nodes();
    const double reach2 = reach * reach;
    for (std::size_t a = 0; a < leaves.size(); ++a) {
        const auto& na = nodes[leaves[a]];
        if (na.count() == 0) continue;
        const int ra = layout.cell_rank[a];
        for (std::size_t b = a + 1; b < leaves.size(); ++b) {
            const auto& nb = nodes[leaves[b]];
            const int rb = layout.cell_rank[b];
            if (nb.count() == 0 || ra == rb) continue;
            if (adj[static_cast<std::size_t>(ra) * R + rb]) continue;
            if (global_tree.box_box_distance2(na.box, nb.box) < reach2) {
                adj[static_cast<std::size_t>(ra) * R + rb] = 1;
                adj[static_cast<std::size_t>(rb) * R + ra] = 1;
            }
        }
    }
    return adj;
}

std::size_t HaloPlan::halo_count(int receiver) const {
    std::size_t total = 0;
    for (int s = 0; s < rank_count; ++s) total += send[s][receiver].size();
    return total;
}

HaloPlan find_halos(std::span<const RankState> ranks, const PeriodicZ& periodic) {
    const int R = static_cast<int>(ranks.size());
    HaloPlan plan;
    plan.rank_count = R;
    plan.send.assign(R, std::vector<std::vector<std::size_t>>(R));
    if (R == 1) return plan;

    struct Reach {
        Octree tree;
        Box bounds;
        double h_max = 0.0;
    };
    std::vector<Reach> reach(R);
    std::vector<Box> owned_bounds(R, empty_box());
    for (int r = 0; r < R; ++r) {
        const auto& ps = ranks[r].local;
        const std::size_t n = ranks[r].owned;
        if (n == 0) continue;
        std::span<const double> x(ps.x.data(), n), y(ps.y.data(), n), z(ps.z.data(), n),
            h(ps.h.data(), n);
        owned_bounds[r] = raw_bounds(x, y, z);
        Octree::Options opt;
        opt.bucket_size = 32;
        opt.periodic = periodic;
        reach[r].tree = Octree::build(x, y, z, h, inflate(owned_bounds[r], 1e-9, periodic), opt);
        reach[r].h_max = *std::max_element(h.begin(), h.end());
    }

    parallel_for(static_cast<std::size_t>(R), [&](std::size_t rr) {
        const int r = static_cast<int>(rr);
        if (ranks[r].owned == 0) return;
        const auto& tree = reach[r].tree;
        const auto& own = ranks[r].local;
        const std::size_t n_own = ranks[r].owned;
        std::span<const double> ox(own.x.data(), n_own), oy(own.y.data(), n_own),
            oz(own.z.data(), n_own), oh(own.h.data(), n_own);
        const double reach2 = 4.0 * reach[r].h_max * reach[r].h_max * (1.0 + 1e-10);
        for (int s = 0; s < R; ++s) {
            if (s == r || ranks[s].owned == 0) continue;
            if (tree.box_box_distance2(owned_bounds[r], owned_bounds[s]) > reach2) continue;
            const auto& src = ranks[s].local;
            auto& list = plan.send[s][r];
            for (std::size_t j = 0; j < ranks[s].owned; ++j) {
                if (tree.any_reaches(ox, oy, oz, oh, src.x[j], src.y[j], src.z[j])) list.push_back(j);
            }
        }
    });
    return plan;
}

namespace {

using Member = std::vector<double> ParticleSystem::*;

std::vector<Member> phase_fields(HaloPhase phase) {
    switch (phase) {
    case HaloPhase::positions:
        return {&ParticleSystem::x,  &ParticleSystem::y,  &ParticleSystem::z,
                &ParticleSystem::vx, &ParticleSystem::vy, &ParticleSystem::vz,
                &ParticleSystem::h,  &ParticleSystem::m,  &ParticleSystem::u};
    case HaloPhase::density:
        return {&ParticleSystem::rho, &ParticleSystem::p, &ParticleSystem::c, &ParticleSystem::omega};
    case HaloPhase::gradients:
        return {&ParticleSystem::c11, &ParticleSystem::c12, &ParticleSystem::c13,
                &ParticleSystem::c22, &ParticleSystem::c23, &ParticleSystem::c33};
    }
    return {};
}

} // namespace

void exchange_halos(const HaloPlan& plan, std::span<RankState> ranks, HaloPhase phase,
                    Channel& channel, CommLog& log) {
    const int R = static_cast<int>(ranks.size());
    if (plan.rank_count != R) throw ContractError("exchange_halos: plan does not match rank count");
    const auto fields = phase_fields(phase);
    // positions also carries the id; gradients also carries the fallback flag
    const std::size_t extra = (phase == HaloPhase::density) ? 0 : 1;
    const std::size_t width = fields.size() + extra;

    for (int s = 0; s < R; ++s) {
        const auto& src = ranks[s].local;
        for (int r = 0; r < R; ++r) {
            const auto& list = plan.send[s][r];
            if (list.empty()) continue;
            std::vector<double> payload;
            payload.reserve(list.size() * width);
            for (std::size_t j : list) {
                for (Member f : fields) payload.push_back((src.*f)[j]);
                if (phase == HaloPhase::positions) payload.push_back(static_cast<double>(src.id[j]));
                if (phase == HaloPhase::gradients) payload.push_back(src.iad_fallback[j]);
            }
            channel.send(s, r, std::move(payload));
        }
    }

    for (int r = 0; r < R; ++r) {
        auto& dst = ranks[r];
        if (phase == HaloPhase::positions) {
            dst.local.truncate(dst.owned);
            dst.local.resize(dst.owned + plan.halo_count(r));
        } else if (dst.local.size() != dst.owned + plan.halo_count(r)) {
            throw ContractError("exchange_halos: halo section out of date on rank " + std::to_string(r));
        }
        std::size_t slot = dst.owned;
        for (int s = 0; s < R; ++s) {
            const std::size_t n = plan.send[s][r].size();
            if (n == 0) continue;
            const auto payload = channel.receive(r, s);
            if (payload.size() != n * width) throw ContractError("exchange_halos: payload size mismatch");
            for (std::size_t k = 0; k < n; ++k, ++slot) {
                const double* row = payload.data() + k * width;
                for (std::size_t f = 0; f < fields.size(); ++f) (dst.local.*fields[f])[slot] = row[f];
                if (phase == HaloPhase::positions) {
                    dst.local.id[slot] = static_cast<std::uint64_t>(row[fields.size()]);
                }
                if (phase == HaloPhase::gradients) {
                    dst.local.iad_fallback[slot] = row[fields.size()] != 0.0 ? 1 : 0;
                }
            }
        }
    }
    log.record_halo_phase();
}

void migrate(const DomainLayout& layout, const Octree& global_tree, std::span<RankState> ranks,
             Channel& channel) {
    const int R = static_cast<int>(ranks.size());
    if (layout.rank_count != R) throw ContractError("migrate: layout does not match rank count");
    const auto table = ParticleSystem::field_table();
    const std::size_t width = table.size() + 1;

    std::vector<std::vector<std::size_t>> outgoing_count(R, std::vector<std::size_t>(R, 0));
    for (int s = 0; s < R; ++s) {
        auto& rank = ranks[s];
        rank.local.truncate(rank.owned);
        const auto& ps = rank.local;
        std::vector<std::vector<double>> packs(R);
        std::vector<std::size_t> keep;
        keep.reserve(ps.size());
        for (std::size_t i = 0; i < ps.size(); ++i) {
            const int leaf = global_tree.locate(ps.x[i], ps.y[i], ps.z[i]);
            if (leaf < 0) {
                throw ContractError("migrate: particle " + std::to_string(ps.id[i]) +
                                    " lies outside the global tree");
            }
            const int dest = layout.rank_of_leaf(static_cast<std::size_t>(leaf));
            if (dest == s) {
                keep.push_back(i);
                continue;
            }
            for (const auto& f : table) packs[dest].push_back((ps.*f.member)[i]);
            packs[dest].push_back(static_cast<double>(ps.id[i]));
        }
        for (int r = 0; r < R; ++r) {
            if (packs[r].empty()) continue;
            outgoing_count[s][r] = packs[r].size() / width;
            channel.send(s, r, std::move(packs[r]));
        }
        if (keep.size() != ps.size()) {
            ParticleSystem kept;
            for (std::size_t i : keep) kept.push_back_from(ps, i);
            rank.local = std::move(kept);
        }
        rank.owned = rank.local.size();
    }

    for (int r = 0; r < R; ++r) {
        auto& ps = ranks[r].local;
        for (int s = 0; s < R; ++s) {
            if (outgoing_count[s][r] == 0) continue;
            const auto payload = channel.receive(r, s);
            const std::size_t n = payload.size() / width;
            const std::size_t base = ps.size();
            ps.resize(base + n);
            for (std::size_t k = 0; k < n; ++k) {
                const double* row = payload.data() + k * width;
                for (std::size_t f = 0; f < table.size(); ++f) (ps.*table[f].member)[base + k] = row[f];
                ps.id[base + k] = static_cast<std::uint64_t>(row[table.size()]);
            }
        }
        ranks[r].owned = ps.size();

        // depth-first locality inside the rank
        std::vector<int> leaf(ps.size());
        for (std::size_t i = 0; i < ps.size(); ++i) leaf[i] = global_tree.locate(ps.x[i], ps.y[i], ps.z[i]);
        std::vector<std::size_t> order(ps.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return leaf[a] != leaf[b] ? leaf[a] < leaf[b] : ps.id[a] < ps.id[b];
        });
        ps.permute(order);
    }
}

} // namespace sph
