#include "psf4d/rng.hpp"

#include <cmath>
#include <numbers>

#include "psf4d/kernels.hpp"

namespace psf4d {

namespace {

Philox4x32::Block philox_block(std::uint64_t seed, std::uint64_t stream,
                               std::uint64_t block) noexcept {
    const Philox4x32::Block ctr{static_cast<std::uint32_t>(block),
                                static_cast<std::uint32_t>(block >> 32),
                                static_cast<std::uint32_t>(stream),
                                static_cast<std::uint32_t>(stream >> 32)};
    const Philox4x32::Key key{static_cast<std::uint32_t>(seed),
                              static_cast<std::uint32_t>(seed >> 32)};
    return Philox4x32::generate(ctr, key);
}

constexpr double kInv53 = 1.0 / 9007199254740992.0;

}  // namespace

double uniform01(std::uint64_t seed, std::uint64_t stream, std::uint64_t block) noexcept {
    const auto out = philox_block(seed, stream, block);
    const std::uint64_t a = (std::uint64_t{out[0]} << 32) | out[1];
    return static_cast<double>(a >> 11) * kInv53;
}

std::array<double, 2> normal_pair(std::uint64_t seed, std::uint64_t stream,
                                  std::uint64_t block) noexcept {
    const auto out = philox_block(seed, stream, block);
    const std::uint64_t a = (std::uint64_t{out[0]} << 32) | out[1];
    const std::uint64_t b = (std::uint64_t{out[2]} << 32) | out[3];
    const double u1 = static_cast<double>((a >> 11) + 1) * kInv53;
    const double u2 = static_cast<double>(b >> 11) * kInv53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    return {r * std::cos(theta), r * std::sin(theta)};
}

Tensor standard_normal(const Shape& shape, RngState& rng) {
    Tensor out(shape);
    kernels::parallel::fill_normal(out.values(), rng.seed, rng.stream, rng.block);
    rng.block += (out.size() + 1) / 2;
    return out;
}

}  // namespace psf4d
