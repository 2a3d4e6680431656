#pragma once

#include <cstdint>
#include <random>

namespace alloceval {

// splitmix64: a strong 64-bit mixer; used to derive independent child seeds
// from (root seed, stream index) so replicate results do not depend on how
// work is distributed across threads.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t child_seed(std::uint64_t root, std::uint64_t stream) {
    return splitmix64(splitmix64(root) ^ (stream + 1) * 0xd1342543de82ef95ULL);
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

}  // namespace alloceval
