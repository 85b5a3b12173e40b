#pragma once
#include <cstdint>
#include <random>

namespace mivs {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Independent stream seed for (base, stream, substream). All randomness in
// the library is derived from one user seed through this function.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t substream = 0)
{
    return splitmix64(splitmix64(splitmix64(base) ^ stream) ^ (substream * 0xd1b54a32d192ed03ULL));
}

} // namespace mivs
