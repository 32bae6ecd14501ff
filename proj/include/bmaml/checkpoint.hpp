#pragma once

#include <filesystem>

#include "bmaml/param_vector.hpp"

namespace bmaml::checkpoint {

/// Binary particle-set checkpoint:
///   bytes 0..3   magic "BMLC"
///   bytes 4..7   format version, uint32 little-endian (currently 1)
///   bytes 8..11  particle count M, uint32 little-endian
///   bytes 12..19 particle dimension, uint64 little-endian
///   payload      M * dim doubles, IEEE-754 little-endian, particle-major
///   trailer      uint64 little-endian checksum: sum of payload bytes mod 2^64
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save(const std::filesystem::path& path, const ParticleSet& particles);

/// Validates magic, version, length, and checksum. Throws
/// CheckpointParseError / CheckpointVersionError / CheckpointChecksumError.
ParticleSet load(const std::filesystem::path& path);

}  // namespace bmaml::checkpoint
