#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "psf4d/kernels.hpp"
#include "psf4d/tensor.hpp"

namespace ks = psf4d::kernels::serial;
namespace kp = psf4d::kernels::parallel;

namespace {

// Sizes straddling the parallel threshold and the reduction chunk.
const std::size_t kSizes[] = {1, 7, 4095, 4096, 4097, 20000, 100003};

std::vector<double> filled(std::size_t n, std::uint64_t stream) {
    std::vector<double> v(n);
    ks::fill_normal(v, 17, stream, 0);
    return v;
}

bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
    return a.size() == b.size() &&
           std::equal(a.begin(), a.end(), b.begin(), [](double x, double y) {
               return std::memcmp(&x, &y, sizeof x) == 0;
           });
}

class ThreadCounts : public ::testing::TestWithParam<int> {
  protected:
    void SetUp() override { psf4d::kernels::set_thread_limit(GetParam()); }
    void TearDown() override { psf4d::kernels::set_thread_limit(0); }
};

}  // namespace

TEST_P(ThreadCounts, FillNormalBitIdentical) {
    for (std::size_t n : kSizes) {
        std::vector<double> a(n), b(n);
        ks::fill_normal(a, 3, 9, 5);
        kp::fill_normal(b, 3, 9, 5);
        EXPECT_TRUE(same_bits(a, b)) << n;
    }
}

TEST_P(ThreadCounts, ElementwiseBitIdentical) {
    for (std::size_t n : kSizes) {
        const auto x = filled(n, 1), y = filled(n, 2);
        auto a = x, b = x;
        ks::ar_update(a, y, 0.65);
        kp::ar_update(b, y, 0.65);
        EXPECT_TRUE(same_bits(a, b));

        std::vector<double> la(n), lb(n);
        ks::lincomb(la, 0.3, x, -1.7, y);
        kp::lincomb(lb, 0.3, x, -1.7, y);
        EXPECT_TRUE(same_bits(la, lb));

        std::vector<double> ga(n), gb(n);
        ks::gaussian_eps(ga, x, y, 0.4, 0.25);
        kp::gaussian_eps(gb, x, y, 0.4, 0.25);
        EXPECT_TRUE(same_bits(ga, gb));
    }
}

TEST_P(ThreadCounts, ReductionsAgreeToRounding) {
    for (std::size_t n : kSizes) {
        const auto x = filled(n, 4), y = filled(n, 5);
        const double tol = 1e-12 * static_cast<double>(n);
        EXPECT_NEAR(ks::sum(x), kp::sum(x), tol);
        EXPECT_NEAR(ks::sum_squares(x), kp::sum_squares(x), tol);
        EXPECT_NEAR(ks::sum_squared_diff(x, y), kp::sum_squared_diff(x, y), tol);
        const auto ms = ks::cross_moments(x, y), mp = kp::cross_moments(x, y);
        EXPECT_EQ(ms.n, mp.n);
        EXPECT_NEAR(ms.sxy, mp.sxy, tol);
        EXPECT_NEAR(ms.syy, mp.syy, tol);
    }
}

INSTANTIATE_TEST_SUITE_P(Kernels, ThreadCounts, ::testing::Values(1, 2, 4));

TEST(Kernels, ParallelReductionIndependentOfThreadCount) {
    const auto x = filled(250000, 8);
    psf4d::kernels::set_thread_limit(1);
    const double one = kp::sum_squares(x);
    psf4d::kernels::set_thread_limit(3);
    const double three = kp::sum_squares(x);
    psf4d::kernels::set_thread_limit(0);
    EXPECT_EQ(one, three);
}

TEST(Kernels, LincombAllowsAliasing) {
    std::vector<double> x{1, 2, 3}, y{10, 20, 30};
    kp::lincomb(x, 2.0, x, 1.0, y);
    EXPECT_EQ(x, (std::vector<double>{12, 24, 36}));
}

TEST(Kernels, ArUpdateFormula) {
    std::vector<double> cur{1.0, -2.0}, prev{0.5, 4.0};
    ks::ar_update(cur, prev, 0.6);
    EXPECT_DOUBLE_EQ(cur[0], 0.6 * 0.5 + 0.8 * 1.0);
    EXPECT_DOUBLE_EQ(cur[1], 0.6 * 4.0 + 0.8 * -2.0);
}

TEST(Kernels, GaussianEpsBroadcastsScalarMean) {
    std::vector<double> z{0.3, -1.0}, mu{0.2}, out(2);
    ks::gaussian_eps(out, z, mu, 0.5, 0.25);
    const double k = std::sqrt(1.0 - 0.5) / (0.5 * 0.25 + 1.0 - 0.5);
    EXPECT_NEAR(out[0], (0.3 - std::sqrt(0.5) * 0.2) * k, 1e-15);
    EXPECT_NEAR(out[1], (-1.0 - std::sqrt(0.5) * 0.2) * k, 1e-15);
}
