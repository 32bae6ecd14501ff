#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace bmaml {

/// Counter-based deterministic random stream. Streams are identified by a
/// 64-bit key derived from (root seed, purpose tag, indices), so results do
/// not depend on scheduling or on how many streams other components consume.
class RngStream {
public:
    explicit RngStream(std::uint64_t key) : state_(key) {}

    std::uint64_t next_u64() {
        // splitmix64
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform on [0, 1).
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    int uniform_int(int n) { return static_cast<int>(next_u64() % static_cast<std::uint64_t>(n)); }

    /// Standard normal via Box-Muller; consumes two draws per sample.
    double normal() {
        double u1 = 1.0 - uniform01();  // (0, 1], keeps log finite
        double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    double normal(double mean, double sd) { return mean + sd * normal(); }

private:
    std::uint64_t state_;
};

namespace detail {
inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}
}  // namespace detail

/// Derive a stream key from a root seed, a purpose tag, and up to three
/// indices (e.g. iteration, task, particle).
inline std::uint64_t derive_stream(std::uint64_t root, std::string_view tag, std::uint64_t a = 0,
                                   std::uint64_t b = 0, std::uint64_t c = 0) {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a over the tag
    for (char ch : tag) {
        h ^= static_cast<unsigned char>(ch);
        h *= 0x100000001b3ULL;
    }
    std::uint64_t k = detail::mix64(root ^ h);
    k = detail::mix64(k ^ (a + 0x9e3779b97f4a7c15ULL));
    k = detail::mix64(k ^ (b + 0x7f4a7c159e3779b9ULL));
    k = detail::mix64(k ^ (c + 0x2545f4914f6cdd1dULL));
    return k;
}

}  // namespace bmaml
