#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace pulasso {

/// FNV-1a 64-bit hash. Used for named RNG substreams and file digests.
inline std::uint64_t fnv1a64(const void* data, std::size_t len,
                             std::uint64_t h = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::uint64_t fnv1a64(std::string_view s) {
    return fnv1a64(s.data(), s.size());
}

/// Deterministic substream: one root seed fans out to independent named
/// streams so that e.g. fold RNG never disturbs the data-generation RNG.
inline std::mt19937_64 substream(std::uint64_t seed, std::string_view name,
                                 std::uint64_t index = 0) {
    std::uint64_t h = fnv1a64(name);
    h = fnv1a64(&seed, sizeof(seed), h);
    h = fnv1a64(&index, sizeof(index), h);
    return std::mt19937_64(h);
}

} // namespace pulasso
