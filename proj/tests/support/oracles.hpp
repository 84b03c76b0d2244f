#pragma once

// Reference computations the tests compare the library against. Nothing
// here calls into psf4d, so a bug in the library cannot leak into its own
// oracle.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <random>
#include <vector>

namespace oracle {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// Kolmogorov-Smirnov distance between the sample and N(0,1).
inline double ks_vs_normal(std::vector<double> x) {
    std::sort(x.begin(), x.end());
    const double n = static_cast<double>(x.size());
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double f = normal_cdf(x[i]);
        d = std::max({d, (i + 1) / n - f, f - i / n});
    }
    return d;
}

/// Two-sample Kolmogorov-Smirnov distance.
inline double ks_two_sample(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double v = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= v) ++i;
        while (j < b.size() && b[j] <= v) ++j;
        d = std::max(d, std::abs(i / na - j / nb));
    }
    return d;
}

/// Critical two-sample KS distance at level alpha (asymptotic).
inline double ks_two_sample_critical(double alpha, std::size_t n, std::size_t m) {
    const double c = std::sqrt(-0.5 * std::log(alpha / 2.0));
    return c * std::sqrt(static_cast<double>(n + m) / (static_cast<double>(n) * m));
}

/// I.i.d. N(0,1) from the standard library; an independent generator.
inline std::vector<double> reference_normals(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> dist;
    std::vector<double> x(n);
    for (double& v : x) v = dist(gen);
    return x;
}

struct Moments {
    double mean;
    double variance;
};

inline Moments moments(const std::vector<double>& x) {
    double s = 0.0, ss = 0.0;
    for (double v : x) s += v;
    const double m = s / x.size();
    for (double v : x) ss += (v - m) * (v - m);
    return {m, ss / x.size()};
}

inline double pearson(const double* x, const double* y, std::size_t n) {
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

/// Composite Simpson rule on [a, b] with an even number of panels.
inline double simpson(const std::function<double(double)>& f, double a, double b, int panels) {
    const double h = (b - a) / panels;
    double s = f(a) + f(b);
    for (int i = 1; i < panels; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
    return s * h / 3.0;
}

/// E[eps | z_t] for z0 ~ N(mu, sigma2), z_t = sqrt(ab) z0 + sqrt(1-ab) eps,
/// by brute-force Bayes over a z0 grid.
inline double posterior_eps(double z_t, double alpha_bar, double mu, double sigma2) {
    const double sa = std::sqrt(alpha_bar), sn = std::sqrt(1.0 - alpha_bar);
    const double sd = std::sqrt(sigma2);
    auto log_joint = [&](double z0) {
        const double r = (z_t - sa * z0) / sn;
        return -0.5 * (z0 - mu) * (z0 - mu) / sigma2 - 0.5 * r * r;
    };
    // Coarse scan for the mode over both supports, then integrate a window
    // around it with the peak factored out so nothing underflows.
    const double width = std::min(sd, sn / sa);
    const double scan_lo = std::min(mu - 12 * sd, z_t / sa - 12 * sn / sa);
    const double scan_hi = std::max(mu + 12 * sd, z_t / sa + 12 * sn / sa);
    double mode = scan_lo;
    const int scan = 200000;
    for (int i = 0; i <= scan; ++i) {
        const double x = scan_lo + (scan_hi - scan_lo) * i / scan;
        if (log_joint(x) > log_joint(mode)) mode = x;
    }
    const double peak = log_joint(mode);
    auto joint = [&](double z0) { return std::exp(log_joint(z0) - peak); };
    const double lo = mode - 14 * width, hi = mode + 14 * width;
    const double norm = simpson(joint, lo, hi, 8000);
    const double ez0 = simpson([&](double z0) { return z0 * joint(z0); }, lo, hi, 8000) / norm;
    return (z_t - sa * ez0) / sn;
}

/// Central difference of f at x along coordinate i.
template <typename F>
double central_difference(F&& f, std::vector<double> x, std::size_t i, double h) {
    x[i] += h;
    const double up = f(x);
    x[i] -= 2 * h;
    const double down = f(x);
    return (up - down) / (2 * h);
}

/// |a - b| / max(|a|, |b|, floor).
inline double relative_error(double a, double b, double floor = 1e-8) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace oracle
