#include <cmath>

#include "psf4d/kernels.hpp"
#include "psf4d/rng.hpp"

namespace psf4d::kernels::serial {

void fill_normal(std::span<double> out, std::uint64_t seed, std::uint64_t stream,
                 std::uint64_t first_block) {
    for (std::size_t j = 0; j < out.size(); j += 2) {
        const auto z = normal_pair(seed, stream, first_block + j / 2);
        out[j] = z[0];
        if (j + 1 < out.size()) out[j + 1] = z[1];
    }
}

void ar_update(std::span<double> cur, std::span<const double> prev, double gamma) {
    const double innov = std::sqrt(1.0 - gamma * gamma);
    for (std::size_t j = 0; j < cur.size(); ++j) cur[j] = gamma * prev[j] + innov * cur[j];
}

void lincomb(std::span<double> out, double a, std::span<const double> x, double b,
             std::span<const double> y) {
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = a * x[j] + b * y[j];
}

void gaussian_eps(std::span<double> out, std::span<const double> z,
                  std::span<const double> mu, double alpha_bar, double sigma2) {
    const double sa = std::sqrt(alpha_bar);
    const double gain = std::sqrt(1.0 - alpha_bar) / (alpha_bar * sigma2 + 1.0 - alpha_bar);
    const bool broadcast = mu.size() == 1;
    for (std::size_t j = 0; j < out.size(); ++j) {
        const double m = broadcast ? mu[0] : mu[j];
        out[j] = (z[j] - sa * m) * gain;
    }
}

double sum(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v;
    return s;
}

double sum_squares(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return s;
}

double sum_squared_diff(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        const double d = a[j] - b[j];
        s += d * d;
    }
    return s;
}

CrossMoments cross_moments(std::span<const double> x, std::span<const double> y) {
    CrossMoments m;
    m.n = x.size();
    for (std::size_t j = 0; j < x.size(); ++j) {
        m.sx += x[j];
        m.sy += y[j];
        m.sxx += x[j] * x[j];
        m.syy += y[j] * y[j];
        m.sxy += x[j] * y[j];
    }
    return m;
}

}  // namespace psf4d::kernels::serial
