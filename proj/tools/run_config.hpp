#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "psf4d/noise.hpp"
#include "psf4d/pipeline.hpp"

namespace psf4d::cli {

/// Every knob the commands expose. Field names match the long flags with
/// '-' replaced by '_'.
struct RunConfig {
    // noise
    double gamma = 0.65;
    double lambda = 0.7;
    std::string shared_mode = "independent_per_window";
    std::size_t views = 4;
    std::size_t windows = 6;
    std::size_t frames = 8;
    std::size_t channels = 4;
    std::size_t height = 8;
    std::size_t width = 8;
    // scene
    std::size_t margin = 0;
    double noise_floor = 0.01;
    // schedule
    int timesteps = 1000;
    double beta_start = 1e-4;
    double beta_end = 0.02;
    std::string beta_kind = "linear";
    int ddim_steps = 30;
    // pipeline
    double edit_strength = 0.6;
    double edit_sigma2 = 0.04;
    int iterations = 3;
    double omega_start = 0.9;
    double omega_end = 0.6;
    std::vector<double> edit_scale{1.5, 1.0, 1.0, 1.0};
    std::vector<double> edit_bias{0.0, 0.2, 0.0, 0.0};
    std::vector<std::string> ablate;
    // verification
    double tolerance = 0.015;
    // common
    std::uint64_t seed = 0;
    int threads = 0;
    bool json = false;
    bool csv = false;
    bool dump_latents = false;
    std::string out;
};

using ConfigEntries = std::vector<std::pair<std::string, std::string>>;

/// Flat `key = value` text; '#' and ';' start comments. Keys may use '_' or
/// '-'. Throws ParameterError naming the line of a malformed entry.
ConfigEntries parse_config_text(std::string_view text);

/// Turns file entries into `--key=value` tokens placed ahead of `args`,
/// skipping keys that `args` already sets so flags win over the file.
/// Repeated keys in the file are kept in order (for repeatable flags).
std::vector<std::string> merge_config_args(const ConfigEntries& file,
                                           const std::vector<std::string>& args);

/// Path given by `--config PATH` or `--config=PATH`, empty when absent.
std::string find_config_path(const std::vector<std::string>& args);

/// no-anm -> gamma = 0, no-cnm -> lambda = 0, no-vcr -> iterations = 0.
void apply_ablations(RunConfig& config);

noise::NoiseConfig noise_config(const RunConfig& config);
pipeline::SceneSpec scene_spec(const RunConfig& config);
pipeline::PipelineConfig pipeline_config(const RunConfig& config);
pipeline::EditOperator edit_operator(const RunConfig& config);

/// Throws a psf4d::Error subclass on the first invalid value.
void validate_noise(const RunConfig& config);
void validate_pipeline(const RunConfig& config);

/// 16 hex digits identifying the experiment setup: scene, schedule, edit
/// and seed. The ablated knobs (gamma, lambda, shared mode, iterations,
/// omega range) are left out so arms of one experiment share a hash.
std::string config_hash(const RunConfig& config);

}  // namespace psf4d::cli
