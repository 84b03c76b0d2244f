#include "run_config.hpp"

#include <algorithm>
#include <cstdio>

#include "psf4d/error.hpp"
#include "psf4d/schedule.hpp"

namespace psf4d::cli {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

bool sets_key(const std::vector<std::string>& args, const std::string& key) {
    const std::string flag = "--" + key;
    return std::any_of(args.begin(), args.end(), [&](const std::string& a) {
        return a == flag || a.rfind(flag + "=", 0) == 0;
    });
}

void append(std::string& s, std::string_view name, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    s.append(name).append("=").append(buf).append(";");
}

void append(std::string& s, std::string_view name, std::string_view v) {
    s.append(name).append("=").append(v).append(";");
}

}  // namespace

ConfigEntries parse_config_text(std::string_view text) {
    ConfigEntries out;
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        if (const auto c = line.find_first_of("#;"); c != std::string_view::npos) {
            line = line.substr(0, c);
        }
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        const std::string_view key = eq == std::string_view::npos ? "" : trim(line.substr(0, eq));
        if (key.empty()) {
            throw ParameterError("config line " + std::to_string(line_no) +
                                 ": expected key = value");
        }
        std::string k(key);
        std::replace(k.begin(), k.end(), '_', '-');
        std::string v(trim(line.substr(eq + 1)));
        if (v.size() >= 2 && v.front() == '"' && v.back() == '"') v = v.substr(1, v.size() - 2);
        out.emplace_back(std::move(k), std::move(v));
    }
    return out;
}

std::vector<std::string> merge_config_args(const ConfigEntries& file,
                                           const std::vector<std::string>& args) {
    // The subcommand name must stay first so its options resolve.
    std::vector<std::string> merged;
    std::size_t rest = 0;
    if (!args.empty() && args[0].rfind("-", 0) != 0) {
        merged.push_back(args[0]);
        rest = 1;
    }
    for (const auto& [key, value] : file) {
        if (key == "config" || sets_key(args, key)) continue;
        merged.push_back("--" + key + "=" + value);
    }
    merged.insert(merged.end(), args.begin() + static_cast<std::ptrdiff_t>(rest), args.end());
    return merged;
}

std::string find_config_path(const std::vector<std::string>& args) {
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) return args[i + 1];
        if (args[i].rfind("--config=", 0) == 0) return args[i].substr(9);
    }
    return {};
}

void apply_ablations(RunConfig& c) {
    for (const std::string& a : c.ablate) {
        if (a == "no-anm") {
            c.gamma = 0.0;
        } else if (a == "no-cnm") {
            c.lambda = 0.0;
        } else if (a == "no-vcr") {
            c.iterations = 0;
        } else {
            throw ParameterError("unknown ablation '" + a + "' (expected no-anm, no-cnm, no-vcr)");
        }
    }
}

noise::NoiseConfig noise_config(const RunConfig& c) {
    noise::NoiseConfig nc;
    nc.gamma = c.gamma;
    nc.lambda = c.lambda;
    nc.views = c.views;
    nc.windows = c.windows;
    nc.frames = c.frames;
    nc.channels = c.channels;
    nc.height = c.height;
    nc.width = c.width;
    nc.seed = c.seed;
    nc.shared_mode = noise::shared_mode_from_string(c.shared_mode);
    return nc;
}

pipeline::SceneSpec scene_spec(const RunConfig& c) {
    pipeline::SceneSpec s;
    s.views = c.views;
    s.windows = c.windows;
    s.frames = c.frames;
    s.channels = c.channels;
    s.height = c.height;
    s.width = c.width;
    s.margin = c.margin;
    s.noise_floor = c.noise_floor;
    s.seed = c.seed;
    return s;
}

pipeline::PipelineConfig pipeline_config(const RunConfig& c) {
    pipeline::PipelineConfig p;
    p.gamma = c.gamma;
    p.lambda = c.lambda;
    p.shared_mode = noise::shared_mode_from_string(c.shared_mode);
    p.timesteps = c.timesteps;
    p.beta_start = c.beta_start;
    p.beta_end = c.beta_end;
    p.beta_kind = schedule::beta_kind_from_string(c.beta_kind);
    p.ddim_steps = c.ddim_steps;
    p.edit_strength = c.edit_strength;
    p.edit_sigma2 = c.edit_sigma2;
    p.refine_iterations = c.iterations;
    p.omega_start = c.omega_start;
    p.omega_end = c.omega_end;
    p.seed = c.seed;
    return p;
}

pipeline::EditOperator edit_operator(const RunConfig& c) {
    return {c.edit_scale, c.edit_bias, std::nullopt};
}

void validate_noise(const RunConfig& c) {
    noise::validate(noise_config(c));
    if (c.threads < 0) throw ParameterError("threads must be >= 0");
}

void validate_pipeline(const RunConfig& c) {
    validate_noise(c);
    if (!(c.noise_floor >= 0.0)) throw ParameterError("noise_floor must be >= 0");
    if (c.edit_scale.size() != c.channels || c.edit_bias.size() != c.channels) {
        throw ShapeError("edit_scale and edit_bias need one entry per channel (" +
                         std::to_string(c.channels) + ")");
    }
    if (c.views < 2) throw ShapeError("the pipeline needs at least two views");
    schedule::make_schedule(c.timesteps, c.beta_start, c.beta_end,
                            schedule::beta_kind_from_string(c.beta_kind), c.ddim_steps);
    pipeline_config(c).validate();
}

std::string config_hash(const RunConfig& c) {
    std::string s;
    for (auto [name, v] : {std::pair<const char*, std::size_t>{"views", c.views},
                           {"windows", c.windows}, {"frames", c.frames},
                           {"channels", c.channels}, {"height", c.height},
                           {"width", c.width}, {"margin", c.margin}}) {
        append(s, name, std::to_string(v));
    }
    append(s, "noise_floor", c.noise_floor);
    append(s, "timesteps", std::to_string(c.timesteps));
    append(s, "beta_start", c.beta_start);
    append(s, "beta_end", c.beta_end);
    append(s, "beta_kind", c.beta_kind);
    append(s, "ddim_steps", std::to_string(c.ddim_steps));
    append(s, "edit_strength", c.edit_strength);
    append(s, "edit_sigma2", c.edit_sigma2);
    for (double v : c.edit_scale) append(s, "edit_scale", v);
    for (double v : c.edit_bias) append(s, "edit_bias", v);
    append(s, "seed", std::to_string(c.seed));

    // FNV-1a, 64 bit.
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace psf4d::cli
