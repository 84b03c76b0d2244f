#include <cmath>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "psf4d/kernels.hpp"
#include "psf4d/rng.hpp"

namespace psf4d::kernels {

namespace {

int g_thread_limit = 0;

int team_size() {
#ifdef _OPENMP
    return g_thread_limit > 0 ? g_thread_limit : omp_get_max_threads();
#else
    return 1;
#endif
}

// Below this many elements the fork/join cost dominates.
constexpr std::size_t kMinParallel = 1 << 14;

using Index = std::ptrdiff_t;

// Chunk partials are combined in chunk order so the result is independent of
// the team size.
template <typename T, typename ChunkFn>
T chunked_reduce(std::size_t n, ChunkFn&& fn) {
    const std::size_t chunks = (n + kReduceChunk - 1) / kReduceChunk;
    std::vector<T> partial(chunks);
    const int threads = n >= kMinParallel ? team_size() : 1;
#pragma omp parallel for schedule(static) num_threads(threads)
    for (Index c = 0; c < static_cast<Index>(chunks); ++c) {
        const std::size_t lo = static_cast<std::size_t>(c) * kReduceChunk;
        const std::size_t hi = std::min(n, lo + kReduceChunk);
        partial[c] = fn(lo, hi);
    }
    T total{};
    for (const T& p : partial) total += p;
    return total;
}

}  // namespace

void set_thread_limit(int threads) { g_thread_limit = threads > 0 ? threads : 0; }

int thread_limit() { return team_size(); }

namespace parallel {

void fill_normal(std::span<double> out, std::uint64_t seed, std::uint64_t stream,
                 std::uint64_t first_block) {
    const auto n = static_cast<Index>(out.size());
    const Index blocks = (n + 1) / 2;
    const int threads = out.size() >= kMinParallel / 4 ? team_size() : 1;
#pragma omp parallel for schedule(static) num_threads(threads)
    for (Index b = 0; b < blocks; ++b) {
        const auto z = normal_pair(seed, stream, first_block + static_cast<std::uint64_t>(b));
        out[2 * b] = z[0];
        if (2 * b + 1 < n) out[2 * b + 1] = z[1];
    }
}

void ar_update(std::span<double> cur, std::span<const double> prev, double gamma) {
    const double innov = std::sqrt(1.0 - gamma * gamma);
    const auto n = static_cast<Index>(cur.size());
    const int threads = cur.size() >= kMinParallel ? team_size() : 1;
#pragma omp parallel for simd schedule(static) num_threads(threads)
    for (Index j = 0; j < n; ++j) cur[j] = gamma * prev[j] + innov * cur[j];
}

void lincomb(std::span<double> out, double a, std::span<const double> x, double b,
             std::span<const double> y) {
    const auto n = static_cast<Index>(out.size());
    const int threads = out.size() >= kMinParallel ? team_size() : 1;
#pragma omp parallel for simd schedule(static) num_threads(threads)
    for (Index j = 0; j < n; ++j) out[j] = a * x[j] + b * y[j];
}

void gaussian_eps(std::span<double> out, std::span<const double> z,
                  std::span<const double> mu, double alpha_bar, double sigma2) {
    const double sa = std::sqrt(alpha_bar);
    const double gain = std::sqrt(1.0 - alpha_bar) / (alpha_bar * sigma2 + 1.0 - alpha_bar);
    const auto n = static_cast<Index>(out.size());
    const int threads = out.size() >= kMinParallel ? team_size() : 1;
    if (mu.size() == 1) {
        const double m = mu[0];
#pragma omp parallel for simd schedule(static) num_threads(threads)
        for (Index j = 0; j < n; ++j) out[j] = (z[j] - sa * m) * gain;
    } else {
#pragma omp parallel for simd schedule(static) num_threads(threads)
        for (Index j = 0; j < n; ++j) out[j] = (z[j] - sa * mu[j]) * gain;
    }
}

double sum(std::span<const double> x) {
    return chunked_reduce<double>(x.size(), [&](std::size_t lo, std::size_t hi) {
        return serial::sum(x.subspan(lo, hi - lo));
    });
}

double sum_squares(std::span<const double> x) {
    return chunked_reduce<double>(x.size(), [&](std::size_t lo, std::size_t hi) {
        return serial::sum_squares(x.subspan(lo, hi - lo));
    });
}

double sum_squared_diff(std::span<const double> a, std::span<const double> b) {
    return chunked_reduce<double>(a.size(), [&](std::size_t lo, std::size_t hi) {
        return serial::sum_squared_diff(a.subspan(lo, hi - lo), b.subspan(lo, hi - lo));
    });
}

CrossMoments cross_moments(std::span<const double> x, std::span<const double> y) {
    return chunked_reduce<CrossMoments>(x.size(), [&](std::size_t lo, std::size_t hi) {
        return serial::cross_moments(x.subspan(lo, hi - lo), y.subspan(lo, hi - lo));
    });
}

}  // namespace parallel
}  // namespace psf4d::kernels
