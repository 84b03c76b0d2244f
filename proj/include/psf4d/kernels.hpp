#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

// Element-wise and reduction kernels behind the numerical modules.
//
// Two implementations with identical signatures:
//   serial::   plain loops; the reference the tests compare against.
//   parallel:: OpenMP worksharing (falls back to serial loops when built
//              without OpenMP).
//
// Element-wise kernels produce bit-identical results in both namespaces.
// Reductions in parallel:: sum fixed-size chunks and then add the chunk sums
// in order, so results depend on neither thread count nor scheduling; they
// agree with serial:: to rounding.

namespace psf4d::kernels {

/// Sufficient statistics for Pearson correlation of paired samples.
struct CrossMoments {
    std::size_t n = 0;
    double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;

    CrossMoments& operator+=(const CrossMoments& o) noexcept {
        n += o.n;
        sx += o.sx;
        sy += o.sy;
        sxx += o.sxx;
        syy += o.syy;
        sxy += o.sxy;
        return *this;
    }
};

/// Elements per reduction chunk in parallel:: reductions.
inline constexpr std::size_t kReduceChunk = 4096;

namespace serial {
/// out[j] = j-th N(0,1) variate of (seed, stream), starting at counter block
/// `first_block` (two variates per block).
void fill_normal(std::span<double> out, std::uint64_t seed, std::uint64_t stream,
                 std::uint64_t first_block);
/// cur = gamma*prev + sqrt(1-gamma^2)*cur
void ar_update(std::span<double> cur, std::span<const double> prev, double gamma);
/// out = a*x + b*y; out may alias x or y.
void lincomb(std::span<double> out, double a, std::span<const double> x, double b,
             std::span<const double> y);
/// Posterior-mean noise E[eps | z_t] for z0 ~ N(mu, sigma2 I) at cumulative
/// alpha `alpha_bar`. `mu` has either one element (broadcast) or z.size().
void gaussian_eps(std::span<double> out, std::span<const double> z,
                  std::span<const double> mu, double alpha_bar, double sigma2);
double sum(std::span<const double> x);
double sum_squares(std::span<const double> x);
double sum_squared_diff(std::span<const double> a, std::span<const double> b);
CrossMoments cross_moments(std::span<const double> x, std::span<const double> y);
}  // namespace serial

namespace parallel {
// Same contracts as serial::.
void fill_normal(std::span<double> out, std::uint64_t seed, std::uint64_t stream,
                 std::uint64_t first_block);
void ar_update(std::span<double> cur, std::span<const double> prev, double gamma);
void lincomb(std::span<double> out, double a, std::span<const double> x, double b,
             std::span<const double> y);
void gaussian_eps(std::span<double> out, std::span<const double> z,
                  std::span<const double> mu, double alpha_bar, double sigma2);
double sum(std::span<const double> x);
double sum_squares(std::span<const double> x);
double sum_squared_diff(std::span<const double> a, std::span<const double> b);
CrossMoments cross_moments(std::span<const double> x, std::span<const double> y);
}  // namespace parallel

/// Cap on OpenMP threads used by parallel:: kernels; 0 restores the default.
void set_thread_limit(int threads);
int thread_limit();

}  // namespace psf4d::kernels
