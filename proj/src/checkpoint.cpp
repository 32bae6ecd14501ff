#include "bmaml/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "bmaml/errors.hpp"

namespace bmaml::checkpoint {

namespace {

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const unsigned char* p) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    return v;
}

std::uint64_t get_u64(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
}

std::uint64_t payload_checksum(const std::string& payload) {
    std::uint64_t sum = 0;
    for (unsigned char c : payload) sum += c;
    return sum;
}

}  // namespace

void save(const std::filesystem::path& path, const ParticleSet& particles) {
    particles.check();
    std::string payload;
    payload.reserve(static_cast<std::size_t>(particles.count()) * particles.dim() * 8);
    for (const auto& p : particles.particles) {
        for (double v : p) {
            std::uint64_t bits;
            std::memcpy(&bits, &v, 8);
            put_u64(payload, bits);
        }
    }
    std::string out;
    out.reserve(28 + payload.size());
    out += "BMLC";
    put_u32(out, kCheckpointVersion);
    put_u32(out, static_cast<std::uint32_t>(particles.count()));
    put_u64(out, static_cast<std::uint64_t>(particles.dim()));
    out += payload;
    put_u64(out, payload_checksum(payload));

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw CheckpointParseError("cannot open checkpoint for writing: " + path.string());
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw CheckpointParseError("short write to checkpoint: " + path.string());
}

ParticleSet load(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw CheckpointParseError("cannot open checkpoint: " + path.string());
    std::string raw((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (raw.size() < 28) throw CheckpointParseError("checkpoint truncated: header incomplete");

    const auto* p = reinterpret_cast<const unsigned char*>(raw.data());
    if (std::memcmp(p, "BMLC", 4) != 0)
        throw CheckpointParseError("checkpoint magic mismatch (expected BMLC)");
    const std::uint32_t version = get_u32(p + 4);
    if (version != kCheckpointVersion)
        throw CheckpointVersionError("unsupported checkpoint version " + std::to_string(version));
    const std::uint32_t m = get_u32(p + 8);
    const std::uint64_t dim = get_u64(p + 12);
    if (m == 0 || dim == 0) throw CheckpointParseError("checkpoint declares empty particle set");

    const std::uint64_t payload_len = static_cast<std::uint64_t>(m) * dim * 8;
    if (raw.size() != 20 + payload_len + 8)
        throw CheckpointParseError("checkpoint truncated or oversized payload");

    const std::string payload = raw.substr(20, payload_len);
    const std::uint64_t recorded = get_u64(p + 20 + payload_len);
    if (payload_checksum(payload) != recorded)
        throw CheckpointChecksumError("checkpoint checksum mismatch");

    ParticleSet set;
    set.particles.assign(m, ParamVector(dim, 0.0));
    const auto* q = reinterpret_cast<const unsigned char*>(payload.data());
    for (std::uint32_t i = 0; i < m; ++i) {
        for (std::uint64_t j = 0; j < dim; ++j) {
            const std::uint64_t bits = get_u64(q);
            q += 8;
            double v;
            std::memcpy(&v, &bits, 8);
            set.particles[i][j] = v;
        }
    }
    return set;
}

}  // namespace bmaml::checkpoint
