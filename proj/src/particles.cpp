#include "sph/particles.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <numeric>

namespace sph {

void NeighborList::reset(std::size_t particles, std::size_t cap) {
    capacity = cap;
    slots.assign(particles * cap, -1);
    count.assign(particles, 0);
    truncated = 0;
}

std::span<const ParticleSystem::FieldDesc> ParticleSystem::field_table() {
    static const FieldDesc table[] = {
        {"x", &ParticleSystem::x},
        {"y", &ParticleSystem::y},
        {"z", &ParticleSystem::z},
        {"vx", &ParticleSystem::vx},
        {"vy", &ParticleSystem::vy},
        {"vz", &ParticleSystem::vz},
        {"u", &ParticleSystem::u},
        {"h", &ParticleSystem::h},
        {"m", &ParticleSystem::m},
        {"rho", &ParticleSystem::rho},
        {"p", &ParticleSystem::p},
        {"c", &ParticleSystem::c},
        {"ax", &ParticleSystem::ax},
        {"ay", &ParticleSystem::ay},
        {"az", &ParticleSystem::az},
        {"dudt", &ParticleSystem::dudt},
        {"dudt_prev", &ParticleSystem::dudt_prev},
        {"omega", &ParticleSystem::omega},
        {"c11", &ParticleSystem::c11},
        {"c12", &ParticleSystem::c12},
        {"c13", &ParticleSystem::c13},
        {"c22", &ParticleSystem::c22},
        {"c23", &ParticleSystem::c23},
        {"c33", &ParticleSystem::c33},
        {"vhx", &ParticleSystem::vhx},
        {"vhy", &ParticleSystem::vhy},
        {"vhz", &ParticleSystem::vhz},
        {"dt_prev", &ParticleSystem::dt_prev},
    };
    return table;
}

void ParticleSystem::resize(std::size_t n) {
    for (const auto& f : field_table()) (this->*f.member).resize(n, 0.0);
    const std::size_t old = id.size();
    id.resize(n);
    for (std::size_t i = old; i < n; ++i) id[i] = i;
    vsig_max.resize(n, 0.0);
    iad_fallback.resize(n, 0);
    neighbors.clear();
}

void ParticleSystem::permute(std::span<const std::size_t> order) {
    const std::size_t n = size();
    if (order.size() != n) {
        throw ConfigError("permute: order has " + std::to_string(order.size()) +
                          " entries for " + std::to_string(n) + " particles");
    }
    std::vector<char> seen(n, 0);
    for (std::size_t k : order) {
        if (k >= n) throw ConfigError("permute: index " + std::to_string(k) + " out of range");
        if (seen[k]) throw ConfigError("permute: duplicate index " + std::to_string(k));
        seen[k] = 1;
    }

    std::vector<double> scratch(n);
    auto apply = [&](std::vector<double>& field) {
        for (std::size_t i = 0; i < n; ++i) scratch[i] = field[order[i]];
        field.swap(scratch);
    };
    for (const auto& f : field_table()) apply(this->*f.member);
    apply(vsig_max);

    std::vector<std::uint64_t> ids(n);
    std::vector<std::uint8_t> flags(n);
    for (std::size_t i = 0; i < n; ++i) {
        ids[i] = id[order[i]];
        flags[i] = iad_fallback[order[i]];
    }
    id.swap(ids);
    iad_fallback.swap(flags);
    neighbors.clear();
}

void ParticleSystem::push_back_from(const ParticleSystem& src, std::size_t i) {
    for (const auto& f : field_table()) (this->*f.member).push_back((src.*f.member)[i]);
    id.push_back(src.id[i]);
    vsig_max.push_back(src.vsig_max[i]);
    iad_fallback.push_back(src.iad_fallback[i]);
}

void ParticleSystem::truncate(std::size_t n) {
    if (n >= size()) return;
    for (const auto& f : field_table()) (this->*f.member).resize(n);
    id.resize(n);
    vsig_max.resize(n);
    iad_fallback.resize(n);
}

double ParticleSystem::total_mass() const { return std::accumulate(m.begin(), m.end(), 0.0); }

namespace {

template <class T>
void put_le(std::ostream& out, T value) {
    auto bits = std::bit_cast<std::array<unsigned char, sizeof(T)>>(value);
    if constexpr (std::endian::native == std::endian::big) std::reverse(bits.begin(), bits.end());
    out.write(reinterpret_cast<const char*>(bits.data()), sizeof(T));
}

template <class T>
T get_le(std::istream& in) {
    std::array<unsigned char, sizeof(T)> bits{};
    in.read(reinterpret_cast<char*>(bits.data()), sizeof(T));
    if (!in) throw ConfigError("checkpoint: unexpected end of file");
    if constexpr (std::endian::native == std::endian::big) std::reverse(bits.begin(), bits.end());
    return std::bit_cast<T>(bits);
}

} // namespace

void write_checkpoint(const std::filesystem::path& path, const ParticleSystem& particles,
                      std::uint64_t iteration, double time) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("checkpoint: cannot open " + path.string() + " for writing");
    out.write(kCheckpointMagic, 4);
    put_le<std::uint32_t>(out, kCheckpointVersion);
    put_le<std::uint64_t>(out, particles.size());
    put_le<std::uint64_t>(out, iteration);
    put_le<double>(out, time);
    for (const auto& f : ParticleSystem::field_table()) {
        for (double v : particles.*f.member) put_le<double>(out, v);
    }
    if (!out) throw ConfigError("checkpoint: write failed for " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("checkpoint: cannot open " + path.string());
    char magic[4] = {};
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kCheckpointMagic, 4) != 0) {
        throw ConfigError("checkpoint: bad magic in " + path.string());
    }
    const auto version = get_le<std::uint32_t>(in);
    if (version != kCheckpointVersion) {
        throw ConfigError("checkpoint: unsupported version " + std::to_string(version));
    }
    Checkpoint cp;
    const auto n = get_le<std::uint64_t>(in);
    cp.iteration = get_le<std::uint64_t>(in);
    cp.time = get_le<double>(in);
    cp.particles.resize(n);
    for (const auto& f : ParticleSystem::field_table()) {
        for (auto& v : cp.particles.*f.member) v = get_le<double>(in);
    }
    return cp;
}

} // namespace sph
