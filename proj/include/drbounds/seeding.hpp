#pragma once

#include <cstdint>
#include <vector>

namespace drbounds {

// splitmix64 finalizer (Steele/Lea/Flood). Used to derive decorrelated
// child seeds from a base seed plus a small tag, so that nearby base
// seeds (seed^0, seed^1, ...) do not produce nearby generator states.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Derived stream seed: mixes (base, tag) through two splitmix rounds.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag) {
    return splitmix64(splitmix64(base) ^ splitmix64(tag));
}

// FNV-1a over a little-endian byte view of covariate indices. Gives every
// covariate subset a stable hash so per-subset seeds are independent of
// enumeration order.
inline std::uint64_t fnv1a64(const std::vector<int>& indices) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (int v : indices) {
        auto u = static_cast<std::uint32_t>(v);
        for (int b = 0; b < 4; ++b) {
            h ^= (u >> (8 * b)) & 0xffU;
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

} // namespace drbounds
