#pragma once

#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "psf4d/kernels.hpp"
#include "psf4d/tensor.hpp"
#include "psf4d/view_map.hpp"

namespace psf4d::metrics {

/// Frame-to-frame mean squared differences of a [n, w, ...] sequence.
///
/// Frame (i, f) is compared with its successor (i, f+1) inside the window and
/// with the same slot (i+1, f) of the next window, the frame the window-level
/// AR recursion couples it to. `pooled` averages over all compared elements.
struct Flicker {
    double pooled = 0.0;
    double intra_window = 0.0;  ///< NaN when w == 1
    double cross_window = 0.0;  ///< NaN when n == 1
    std::size_t intra_pairs = 0;
    std::size_t cross_pairs = 0;
};

/// `latents` has axes [n, w, ...]. Throws MetricError with fewer than two
/// frames in total.
Flicker temporal_flicker_breakdown(const Tensor& latents);
double temporal_flicker(const Tensor& latents);

/// Per-view flicker of [K, n, w, ...] pooled over views.
Flicker view_flicker(const Tensor& views);

/// Inverse-map [K, ..., H, W] views to canonical space (dividing by gain) and
/// return the mean squared deviation from the per-pixel cross-view mean, over
/// every (view, canonical element) entry whose pixel is seen by >= 2 views.
/// Throws MetricError if K < 2 or no pixel is shared.
double cross_view_inconsistency(const Tensor& views, const ViewGeometry& geometry);

/// Infinite for identical inputs.
inline constexpr double kInfinitePsnr = std::numeric_limits<double>::infinity();

double psnr(const Tensor& a, const Tensor& b, double peak);

struct SsimOptions {
    std::size_t window = 11;
    double sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
};

/// Mean SSIM over every H x W image of the last two axes, using
/// Gaussian-weighted local statistics over the valid region. The window is
/// shrunk to the largest odd size fitting the image when it does not fit.
double ssim(const Tensor& a, const Tensor& b, double peak, const SsimOptions& options = {});

/// Selects blocks [view_a, window_a] and [view_b, window_b] of a
/// [K, n, ...] noise tensor.
struct PairSpec {
    std::size_t view_a = 0;
    std::size_t window_a = 0;
    std::size_t view_b = 0;
    std::size_t window_b = 0;
};

/// Pearson correlation of paired elements; MetricError on zero variance.
double pearson(const kernels::CrossMoments& m);

double empirical_correlation(const Tensor& noise, const PairSpec& pair);

/// Accumulates cross moments for every ordered (view, window) pair over many
/// [K, n, ...] draws.
class CorrelationAccumulator {
  public:
    CorrelationAccumulator(std::size_t views, std::size_t windows);

    void add(const Tensor& noise);

    std::size_t views() const noexcept { return views_; }
    std::size_t windows() const noexcept { return windows_; }
    std::size_t samples_per_pair() const;
    double correlation(const PairSpec& pair) const;

  private:
    std::size_t index(std::size_t view, std::size_t window) const {
        return view * windows_ + window;
    }

    std::size_t views_;
    std::size_t windows_;
    std::vector<kernels::CrossMoments> moments_;  // slots x slots
};

/// One row of a metrics trace.
struct MetricsReport {
    std::size_t iteration = 0;
    double omega = 1.0;
    double temporal_flicker = 0.0;
    double flicker_intra = 0.0;
    double flicker_cross = 0.0;
    double cross_view_inconsistency = 0.0;
    double psnr = 0.0;
    double ssim = 0.0;
    double fit_residual_rms = 0.0;
    std::size_t sample_count = 0;

    std::string to_json() const;
    static MetricsReport from_json(const std::string& line);

    /// iteration,omega,temporal_flicker,flicker_intra,flicker_cross,
    /// cross_view_inconsistency,psnr,ssim,fit_residual_rms,sample_count
    static std::string csv_header();
    std::string to_csv() const;
};

}  // namespace psf4d::metrics
