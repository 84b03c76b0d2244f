#pragma once

#include <array>
#include <cstdint>

#include "psf4d/tensor.hpp"

namespace psf4d {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
///
/// A keyed bijection on 128-bit counters: output block `c` under key `k` is
/// a pure function of (k, c), so any element of any stream can be produced
/// without generating its predecessors.
struct Philox4x32 {
    using Block = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static constexpr std::uint32_t kMul0 = 0xD2511F53u;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
    static constexpr int kRounds = 10;

    static constexpr Block generate(Block ctr, Key key) noexcept {
        for (int r = 0; r < kRounds; ++r) {
            if (r > 0) {
                key[0] += kWeyl0;
                key[1] += kWeyl1;
            }
            const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
            const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
            const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
            const auto lo0 = static_cast<std::uint32_t>(p0);
            const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
            const auto lo1 = static_cast<std::uint32_t>(p1);
            ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        }
        return ctr;
    }
};

/// SplitMix64 finalizer; used only to derive sub-stream identifiers.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

/// Deterministic child stream id of `parent`. Distinct children of one parent
/// map to distinct ids except with probability ~2^-64.
constexpr std::uint64_t child_stream(std::uint64_t parent, std::uint64_t child) noexcept {
    return splitmix64(parent ^ splitmix64(child + 0x632BE59BD9B4E019ull));
}

/// Address of a position in the normal-variate sequence.
///
/// The generator key is `seed`; the upper half of the Philox counter holds
/// `stream`; the lower half holds `block`. One block yields two normals.
struct RngState {
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
    std::uint64_t block = 0;

    RngState child(std::uint64_t id) const noexcept {
        return RngState{seed, child_stream(stream, id), 0};
    }
};

/// Two independent N(0,1) variates from counter block `block` of `stream`.
///
/// Box-Muller on two 53-bit uniforms: u1 = (a>>11 + 1)·2^-53 in (0,1],
/// u2 = (b>>11)·2^-53 in [0,1), z0 = r·cos(2πu2), z1 = r·sin(2πu2) with
/// r = sqrt(-2 ln u1). `a` and `b` are the high and low 64-bit halves of the
/// Philox output. This mapping is part of the stable output contract.
std::array<double, 2> normal_pair(std::uint64_t seed, std::uint64_t stream,
                                  std::uint64_t block) noexcept;

/// Uniform variate in [0, 1) with 53 random bits: the high 64-bit half of
/// Philox block `block` of `stream`.
double uniform01(std::uint64_t seed, std::uint64_t stream, std::uint64_t block) noexcept;

/// I.i.d. N(0,1) tensor; advances `rng.block` by ceil(size/2).
Tensor standard_normal(const Shape& shape, RngState& rng);

}  // namespace psf4d
