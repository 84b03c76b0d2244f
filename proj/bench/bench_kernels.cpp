// Serial reference vs OpenMP kernels. Range argument is the element count;
// the parallel variants run with the OpenMP runtime's default thread count.

#include <benchmark/benchmark.h>

#include <vector>

#include "psf4d/kernels.hpp"
#include "psf4d/noise.hpp"

namespace k = psf4d::kernels;

namespace {

std::vector<double> normals(std::size_t n, std::uint64_t stream) {
    std::vector<double> v(n);
    k::serial::fill_normal(v, 1, stream, 0);
    return v;
}

template <void (*Fill)(std::span<double>, std::uint64_t, std::uint64_t, std::uint64_t)>
void BM_FillNormal(benchmark::State& state) {
    std::vector<double> out(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        Fill(out, 1, 2, 0);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <void (*Update)(std::span<double>, std::span<const double>, double)>
void BM_ArUpdate(benchmark::State& state) {
    auto cur = normals(static_cast<std::size_t>(state.range(0)), 1);
    const auto prev = normals(cur.size(), 2);
    for (auto _ : state) {
        Update(cur, prev, 0.65);
        benchmark::ClobberMemory();
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <void (*Eps)(std::span<double>, std::span<const double>, std::span<const double>, double,
                      double)>
void BM_GaussianEps(benchmark::State& state) {
    const auto z = normals(static_cast<std::size_t>(state.range(0)), 3);
    std::vector<double> out(z.size());
    const std::vector<double> mu{0.3};
    for (auto _ : state) {
        Eps(out, z, mu, 0.4, 0.25);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <k::CrossMoments (*Moments)(std::span<const double>, std::span<const double>)>
void BM_CrossMoments(benchmark::State& state) {
    const auto x = normals(static_cast<std::size_t>(state.range(0)), 4);
    const auto y = normals(x.size(), 5);
    for (auto _ : state) benchmark::DoNotOptimize(Moments(x, y));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_SampleStructured(benchmark::State& state) {
    psf4d::noise::NoiseConfig c;
    c.height = c.width = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(psf4d::noise::sample_structured(c));
    state.SetItemsProcessed(state.iterations() *
                            static_cast<std::int64_t>(psf4d::element_count(psf4d::noise::noise_shape(c))));
}

#define PSF4D_SIZES RangeMultiplier(16)->Range(1 << 12, 1 << 22)

BENCHMARK(BM_FillNormal<k::serial::fill_normal>)->PSF4D_SIZES;
BENCHMARK(BM_FillNormal<k::parallel::fill_normal>)->PSF4D_SIZES;
BENCHMARK(BM_ArUpdate<k::serial::ar_update>)->PSF4D_SIZES;
BENCHMARK(BM_ArUpdate<k::parallel::ar_update>)->PSF4D_SIZES;
BENCHMARK(BM_GaussianEps<k::serial::gaussian_eps>)->PSF4D_SIZES;
BENCHMARK(BM_GaussianEps<k::parallel::gaussian_eps>)->PSF4D_SIZES;
BENCHMARK(BM_CrossMoments<k::serial::cross_moments>)->PSF4D_SIZES;
BENCHMARK(BM_CrossMoments<k::parallel::cross_moments>)->PSF4D_SIZES;
BENCHMARK(BM_SampleStructured)->Arg(8)->Arg(64);

}  // namespace

BENCHMARK_MAIN();
