#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "psf4d/rng.hpp"
#include "psf4d/tensor.hpp"

namespace psf4d::noise {

/// Whether the cross-view shared component is itself AR(1) across windows.
enum class SharedMode { independent_per_window, ar_chained };

std::string to_string(SharedMode mode);
SharedMode shared_mode_from_string(std::string_view name);

struct NoiseConfig {
    double gamma = 0.65;   ///< correlation between consecutive windows, in [0,1)
    double lambda = 0.7;   ///< variance fraction shared across views, in [0,1)
    std::size_t views = 4;
    std::size_t windows = 6;
    std::size_t frames = 8;  ///< frames per window
    std::size_t channels = 4;
    std::size_t height = 8;
    std::size_t width = 8;
    std::uint64_t seed = 0;
    SharedMode shared_mode = SharedMode::independent_per_window;

    friend bool operator==(const NoiseConfig&, const NoiseConfig&) = default;
};

/// Throws ParameterError / ShapeError on an invalid configuration.
void validate(const NoiseConfig& config);

/// [K, n, w, C, H, W]
Shape noise_shape(const NoiseConfig& config);

/// Elements in one (view, window) block: w*C*H*W.
std::size_t window_block_size(const NoiseConfig& config);

/// Stream holding the AR innovation of (view, window); window 0 holds the
/// initial draw.
std::uint64_t innovation_stream(const RngState& base, std::size_t view, std::size_t window);

/// Stream holding the shared cross-view draw of `window`.
std::uint64_t shared_stream(const RngState& base, std::size_t window);

struct StructuredNoise {
    Tensor tensor;  ///< [K, n, w, C, H, W]
    NoiseConfig config;
};

/// Per-view window-level AR(1) noise:
///   e^1 = eta_1,  e^i = gamma e^(i-1) + sqrt(1-gamma^2) eta_i,
/// applied element-wise to the whole (w, C, H, W) window block.
Tensor sample_ar(const NoiseConfig& config, const RngState& base);

/// Adds a window-shared component of variance lambda to sqrt(1-lambda)-scaled
/// per-view noise. Unit marginal variance is preserved when `ar_noise` has it.
StructuredNoise apply_cross_view(const NoiseConfig& config, const Tensor& ar_noise,
                                 const RngState& base);

StructuredNoise sample_structured(const NoiseConfig& config, const RngState& base);

/// Uses RngState{config.seed, 0}.
StructuredNoise sample_structured(const NoiseConfig& config);

/// Closed-form element-wise correlation between block (view_a, window_i) and
/// block (view_b, window_j) of sample_structured output.
double theoretical_covariance(const NoiseConfig& config, std::size_t view_a,
                              std::size_t window_i, std::size_t view_b, std::size_t window_j);

/// Sidecar record: keys gamma, lambda, K, n, w, C, H, W, seed, shared_temporal_mode.
std::string config_to_json(const NoiseConfig& config);
NoiseConfig config_from_json(std::string_view text);

/// Writes `<stem>.psf4d` and `<stem>.json`.
void save(const std::filesystem::path& stem, const StructuredNoise& noise);

/// Reads `tensor_path` and its `.json` sidecar, checking the shape agrees.
StructuredNoise load(const std::filesystem::path& tensor_path);

}  // namespace psf4d::noise
