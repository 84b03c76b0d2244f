#include "psf4d/noise.hpp"

#include <cmath>
#include <sstream>

#include "json.hpp"
#include "psf4d/error.hpp"
#include "psf4d/kernels.hpp"
#include "psf4d/tensor_io.hpp"

namespace psf4d::noise {

namespace {

constexpr std::uint64_t kInnovationTag = 1;
constexpr std::uint64_t kSharedTag = 2;

void require_unit_interval(double v, const char* name) {
    if (!(v >= 0.0 && v < 1.0)) {
        std::ostringstream os;
        os << name << " must be in [0, 1), got " << v;
        throw ParameterError(os.str());
    }
}

}  // namespace

std::string to_string(SharedMode mode) {
    return mode == SharedMode::ar_chained ? "ar_chained" : "independent_per_window";
}

SharedMode shared_mode_from_string(std::string_view name) {
    if (name == "independent_per_window") return SharedMode::independent_per_window;
    if (name == "ar_chained") return SharedMode::ar_chained;
    throw ParameterError("unknown shared_temporal_mode '" + std::string(name) + "'");
}

void validate(const NoiseConfig& c) {
    require_unit_interval(c.gamma, "gamma");
    require_unit_interval(c.lambda, "lambda");
    element_count(noise_shape(c));
}

Shape noise_shape(const NoiseConfig& c) {
    return {c.views, c.windows, c.frames, c.channels, c.height, c.width};
}

std::size_t window_block_size(const NoiseConfig& c) {
    return c.frames * c.channels * c.height * c.width;
}

std::uint64_t innovation_stream(const RngState& base, std::size_t view, std::size_t window) {
    return child_stream(child_stream(child_stream(base.stream, kInnovationTag), view), window);
}

std::uint64_t shared_stream(const RngState& base, std::size_t window) {
    return child_stream(child_stream(base.stream, kSharedTag), window);
}

Tensor sample_ar(const NoiseConfig& config, const RngState& base) {
    validate(config);
    Tensor out(noise_shape(config));
    for (std::size_t k = 0; k < config.views; ++k) {
        for (std::size_t i = 0; i < config.windows; ++i) {
            auto cur = out.block({k, i});
            kernels::parallel::fill_normal(cur, base.seed, innovation_stream(base, k, i), 0);
            if (i > 0) {
                kernels::parallel::ar_update(cur, out.block({k, i - 1}), config.gamma);
            }
        }
    }
    return out;
}

StructuredNoise apply_cross_view(const NoiseConfig& config, const Tensor& ar_noise,
                                 const RngState& base) {
    validate(config);
    if (ar_noise.shape() != noise_shape(config)) {
        throw ShapeError("apply_cross_view: noise shape " + shape_string(ar_noise.shape()) +
                         " does not match config " + shape_string(noise_shape(config)));
    }
    StructuredNoise result{ar_noise, config};
    const double shared_std = std::sqrt(config.lambda);
    const double own_std = std::sqrt(1.0 - config.lambda);
    const std::size_t block = window_block_size(config);

    // Unit-variance shared draw; scaled by sqrt(lambda) when mixed in.
    Tensor shared({block});
    Tensor prev_shared({block});
    for (std::size_t i = 0; i < config.windows; ++i) {
        kernels::parallel::fill_normal(shared.values(), base.seed, shared_stream(base, i), 0);
        if (config.shared_mode == SharedMode::ar_chained && i > 0) {
            kernels::parallel::ar_update(shared.values(), prev_shared.values(), config.gamma);
        }
        for (std::size_t k = 0; k < config.views; ++k) {
            auto dst = result.tensor.block({k, i});
            kernels::parallel::lincomb(dst, shared_std, shared.values(), own_std, dst);
        }
        std::swap(shared, prev_shared);
    }
    return result;
}

StructuredNoise sample_structured(const NoiseConfig& config, const RngState& base) {
    return apply_cross_view(config, sample_ar(config, base), base);
}

StructuredNoise sample_structured(const NoiseConfig& config) {
    return sample_structured(config, RngState{config.seed, 0, 0});
}

double theoretical_covariance(const NoiseConfig& c, std::size_t view_a, std::size_t window_i,
                              std::size_t view_b, std::size_t window_j) {
    if (view_a >= c.views || view_b >= c.views || window_i >= c.windows ||
        window_j >= c.windows) {
        throw IndexError("theoretical_covariance: (view, window) index out of range");
    }
    const auto lag = static_cast<int>(window_i > window_j ? window_i - window_j
                                                          : window_j - window_i);
    const double temporal = std::pow(c.gamma, lag);
    const bool chained = c.shared_mode == SharedMode::ar_chained;
    const double shared = lag == 0 ? 1.0 : (chained ? temporal : 0.0);
    if (view_a == view_b) {
        return c.lambda * shared + (1.0 - c.lambda) * temporal;
    }
    return c.lambda * shared;
}

std::string config_to_json(const NoiseConfig& c) {
    nlohmann::json j;
    j["gamma"] = c.gamma;
    j["lambda"] = c.lambda;
    j["K"] = c.views;
    j["n"] = c.windows;
    j["w"] = c.frames;
    j["C"] = c.channels;
    j["H"] = c.height;
    j["W"] = c.width;
    j["seed"] = c.seed;
    j["shared_temporal_mode"] = to_string(c.shared_mode);
    return j.dump(2) + "\n";
}

NoiseConfig config_from_json(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
        NoiseConfig c;
        c.gamma = j.at("gamma").get<double>();
        c.lambda = j.at("lambda").get<double>();
        c.views = j.at("K").get<std::size_t>();
        c.windows = j.at("n").get<std::size_t>();
        c.frames = j.at("w").get<std::size_t>();
        c.channels = j.at("C").get<std::size_t>();
        c.height = j.at("H").get<std::size_t>();
        c.width = j.at("W").get<std::size_t>();
        c.seed = j.at("seed").get<std::uint64_t>();
        c.shared_mode = shared_mode_from_string(j.at("shared_temporal_mode").get<std::string>());
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("malformed noise sidecar: ") + e.what());
    }
}

void save(const std::filesystem::path& stem, const StructuredNoise& noise) {
    auto tensor_path = stem;
    tensor_path += ".psf4d";
    auto json_path = stem;
    json_path += ".json";
    save_tensor(tensor_path, noise.tensor);
    const std::string text = config_to_json(noise.config);
    write_file(json_path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()),
                                    text.size()));
}

StructuredNoise load(const std::filesystem::path& tensor_path) {
    auto json_path = tensor_path;
    json_path.replace_extension(".json");
    const auto bytes = read_file(json_path);
    StructuredNoise out{load_tensor(tensor_path),
                        config_from_json(std::string_view(
                            reinterpret_cast<const char*>(bytes.data()), bytes.size()))};
    if (out.tensor.shape() != noise_shape(out.config)) {
        throw ShapeError("noise tensor " + shape_string(out.tensor.shape()) +
                         " disagrees with sidecar " + shape_string(noise_shape(out.config)));
    }
    return out;
}

}  // namespace psf4d::noise
