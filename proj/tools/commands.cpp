#include "commands.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "psf4d/error.hpp"
#include "psf4d/kernels.hpp"
#include "psf4d/metrics.hpp"
#include "psf4d/noise.hpp"
#include "psf4d/pipeline.hpp"
#include "psf4d/tensor_io.hpp"

namespace psf4d::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fixed(double v, int precision = 6) {
    if (!std::isfinite(v)) return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
    std::ostringstream os;
    os << std::fixed << std::setprecision(precision) << v;
    return os.str();
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

void write_text(const fs::path& path, const std::string& text) {
    write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string read_text(const fs::path& path) {
    const auto bytes = read_file(path);
    return std::string(bytes.begin(), bytes.end());
}

}  // namespace

// ---------------------------------------------------------------- sample-noise

void prepare_sample_noise(const RunConfig& config) {
    validate_noise(config);
    if (config.out.empty()) throw ParameterError("--out is required");
}

int cmd_sample_noise(const RunConfig& config, std::ostream& out) {
    const noise::NoiseConfig nc = noise_config(config);
    const noise::StructuredNoise sn = noise::sample_structured(nc);
    noise::save(config.out, sn);

    const auto v = sn.tensor.values();
    const double n = static_cast<double>(v.size());
    const double mean = kernels::parallel::sum(v) / n;
    const double var = kernels::parallel::sum_squares(v) / n - mean * mean;
    const std::string path = config.out + ".psf4d";
    if (config.json) {
        json j{{"path", path},
               {"sidecar", config.out + ".json"},
               {"shape", sn.tensor.shape()},
               {"mean", mean},
               {"variance", var},
               {"config", json::parse(noise::config_to_json(nc))}};
        out << j.dump() << '\n';
    } else {
        out << "wrote " << path << " " << shape_string(sn.tensor.shape()) << "\n"
            << "  mean     " << fixed(mean) << "\n"
            << "  variance " << fixed(var) << "\n";
    }
    return 0;
}

// ----------------------------------------------------------- verify-covariance

void prepare_verify_covariance(const RunConfig& config, const std::string& noise_path) {
    if (!(config.tolerance > 0.0)) throw ParameterError("tolerance must be > 0");
    if (noise_path.empty()) throw ParameterError("a noise file is required");
}

int cmd_verify_covariance(const RunConfig& config, const std::string& noise_path,
                          std::ostream& out) {
    const noise::StructuredNoise sn = noise::load(noise_path);
    const noise::NoiseConfig& nc = sn.config;
    metrics::CorrelationAccumulator acc(nc.views, nc.windows);
    acc.add(sn.tensor);

    struct Row {
        metrics::PairSpec pair;
        double expected;
        double measured;  // NaN when undefined
        bool ok;
    };
    std::vector<Row> rows;
    std::size_t failures = 0;
    for (std::size_t a = 0; a < nc.views * nc.windows; ++a) {
        for (std::size_t b = a + 1; b < nc.views * nc.windows; ++b) {
            const metrics::PairSpec p{a / nc.windows, a % nc.windows, b / nc.windows,
                                      b % nc.windows};
            const double expected =
                noise::theoretical_covariance(nc, p.view_a, p.window_a, p.view_b, p.window_b);
            double measured = std::nan("");
            try {
                measured = acc.correlation(p);
            } catch (const MetricError&) {
                // Zero variance in one slot: leave as NaN, counted as a failure.
            }
            const bool ok = std::abs(measured - expected) <= config.tolerance;
            failures += ok ? 0 : 1;
            rows.push_back({p, expected, measured, ok});
        }
    }
    const bool pass = failures == 0;

    if (config.json) {
        json pairs = json::array();
        for (const Row& r : rows) {
            pairs.push_back({{"view_a", r.pair.view_a},
                             {"window_a", r.pair.window_a},
                             {"view_b", r.pair.view_b},
                             {"window_b", r.pair.window_b},
                             {"theoretical", r.expected},
                             {"empirical", number_or_null(r.measured)},
                             {"ok", r.ok}});
        }
        out << json{{"file", noise_path},
                    {"tolerance", config.tolerance},
                    {"samples_per_pair", acc.samples_per_pair()},
                    {"pairs", pairs},
                    {"failures", failures},
                    {"pass", pass}}
                   .dump()
            << '\n';
    } else {
        out << "pair (view,window)   theoretical   empirical      diff\n";
        for (const Row& r : rows) {
            char buf[128];
            std::snprintf(buf, sizeof buf, "(%zu,%zu)-(%zu,%zu)  %12.4f  %10s  %8s  %s\n",
                          r.pair.view_a, r.pair.window_a, r.pair.view_b, r.pair.window_b,
                          r.expected, fixed(r.measured, 4).c_str(),
                          fixed(r.measured - r.expected, 4).c_str(), r.ok ? "" : "FAIL");
            out << buf;
        }
        out << (pass ? "PASS" : "FAIL") << ": " << rows.size() - failures << "/" << rows.size()
            << " pairs within " << config.tolerance << " (" << acc.samples_per_pair()
            << " samples per pair)\n";
        for (const Row& r : rows) {
            if (r.ok) continue;
            out << "  offending pair view " << r.pair.view_a << " window " << r.pair.window_a
                << " / view " << r.pair.view_b << " window " << r.pair.window_b << "\n";
        }
    }
    return pass ? 0 : 1;
}

// ---------------------------------------------------------------- run-pipeline

void prepare_run_pipeline(RunConfig& config) {
    apply_ablations(config);
    validate_pipeline(config);
    if (config.out.empty()) throw ParameterError("--out is required");
}

int cmd_run_pipeline(const RunConfig& config, std::ostream& out) {
    const pipeline::SyntheticScene scene = pipeline::make_default_scene(scene_spec(config));
    const pipeline::RunResult result = pipeline::run_psf4d(
        scene, edit_operator(config), pipeline_config(config), config.dump_latents);

    const fs::path dir(config.out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

    const std::string hash = config_hash(config);
    std::string trace;
    for (const auto& r : result.trace) {
        json j = json::parse(r.to_json());
        j["config_hash"] = hash;
        j["ablate"] = config.ablate;
        trace += j.dump() + "\n";
    }
    write_text(dir / "trace.jsonl", trace);
    save_tensor(dir / "model.psf4d", result.model.canonical);
    for (std::size_t l = 0; l < result.latents.size(); ++l) {
        save_tensor(dir / ("latents_" + std::to_string(l) + ".psf4d"), result.latents[l]);
    }

    json cfg{{"config_hash", hash},
             {"ablate", config.ablate},
             {"gamma", config.gamma},
             {"lambda", config.lambda},
             {"shared_mode", config.shared_mode},
             {"views", config.views},
             {"windows", config.windows},
             {"frames", config.frames},
             {"channels", config.channels},
             {"height", config.height},
             {"width", config.width},
             {"margin", config.margin},
             {"noise_floor", config.noise_floor},
             {"timesteps", config.timesteps},
             {"beta_start", config.beta_start},
             {"beta_end", config.beta_end},
             {"beta_kind", config.beta_kind},
             {"ddim_steps", config.ddim_steps},
             {"edit_strength", config.edit_strength},
             {"edit_sigma2", config.edit_sigma2},
             {"iterations", config.iterations},
             {"omega_start", config.omega_start},
             {"omega_end", config.omega_end},
             {"edit_scale", config.edit_scale},
             {"edit_bias", config.edit_bias},
             {"seed", config.seed}};
    write_text(dir / "config.json", cfg.dump(2) + "\n");

    if (config.json) {
        out << trace;
        return 0;
    }
    out << "config " << hash << "  -> " << dir.string() << "\n"
        << "  l  omega   flicker      cross-view   psnr     ssim     fit-rms\n";
    for (const auto& r : result.trace) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "%3zu  %.3f  %.6f  %.6f  %7s  %.4f  %.6f\n", r.iteration,
                      r.omega, r.temporal_flicker, r.cross_view_inconsistency,
                      fixed(r.psnr, 2).c_str(), r.ssim, r.fit_residual_rms);
        out << buf;
    }
    return 0;
}

// --------------------------------------------------------------------- compare

namespace {

struct Trace {
    std::string path;
    std::string hash;
    std::vector<metrics::MetricsReport> records;
};

Trace read_trace(const std::string& path) {
    Trace t{path, {}, {}};
    std::istringstream in(read_text(path));
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        t.records.push_back(metrics::MetricsReport::from_json(line));
        try {
            const json j = json::parse(line);
            if (j.contains("config_hash")) t.hash = j["config_hash"].get<std::string>();
        } catch (const json::exception&) {
        }
    }
    if (t.records.empty()) throw MetricError(path + ": empty trace");
    return t;
}

struct MetricDef {
    const char* name;
    double metrics::MetricsReport::*field;
    bool lower_is_better;
};

constexpr MetricDef kCompared[] = {
    {"temporal_flicker", &metrics::MetricsReport::temporal_flicker, true},
    {"cross_view_inconsistency", &metrics::MetricsReport::cross_view_inconsistency, true},
    {"fit_residual_rms", &metrics::MetricsReport::fit_residual_rms, true},
    {"psnr", &metrics::MetricsReport::psnr, false},
    {"ssim", &metrics::MetricsReport::ssim, false},
};

// "baseline", "other" or "tie".
const char* better_of(double base, double other, bool lower_is_better) {
    if (base == other || std::isnan(base) || std::isnan(other)) return "tie";
    return (base < other) == lower_is_better ? "baseline" : "other";
}

}  // namespace

void prepare_compare(const RunConfig& config, const std::vector<std::string>& traces) {
    if (traces.size() < 2) throw ParameterError("compare needs at least two traces");
    if (config.json && config.csv) throw ParameterError("--json and --csv are exclusive");
}

int cmd_compare(const RunConfig& config, const std::vector<std::string>& paths,
                std::ostream& out, std::ostream& err) {
    std::vector<Trace> traces;
    for (const auto& p : paths) traces.push_back(read_trace(p));
    const Trace& base = traces.front();
    for (std::size_t i = 1; i < traces.size(); ++i) {
        if (traces[i].hash != base.hash) {
            err << "warning: config_hash mismatch: " << base.path << " (" << base.hash
                << ") vs " << traces[i].path << " (" << traces[i].hash << ")\n";
        }
    }

    json rows = json::array();
    if (config.csv) out << "baseline,other,metric,baseline_value,other_value,delta,better\n";
    for (std::size_t i = 1; i < traces.size(); ++i) {
        const auto& a = base.records.back();
        const auto& b = traces[i].records.back();
        if (!config.csv && !config.json) {
            out << base.path << " (" << base.records.size() << " records) vs " << traces[i].path
                << " (" << traces[i].records.size() << " records)\n"
                << "  metric                      baseline        other        delta  better\n";
        }
        for (const MetricDef& m : kCompared) {
            const double va = a.*m.field, vb = b.*m.field;
            const double delta = vb - va;
            const char* better = better_of(va, vb, m.lower_is_better);
            if (config.json) {
                rows.push_back({{"baseline", base.path},
                                {"other", traces[i].path},
                                {"metric", m.name},
                                {"baseline_value", number_or_null(va)},
                                {"other_value", number_or_null(vb)},
                                {"delta", number_or_null(delta)},
                                {"better", better}});
            } else if (config.csv) {
                char buf[96];
                std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g", va, vb, delta);
                out << base.path << ',' << traces[i].path << ',' << m.name << ',' << buf << ','
                    << better << '\n';
            } else {
                char buf[160];
                std::snprintf(buf, sizeof buf, "  %-26s %10s %12s %12s  %s\n", m.name,
                              fixed(va).c_str(), fixed(vb).c_str(), fixed(delta).c_str(), better);
                out << buf;
            }
        }
    }
    if (config.json) out << json{{"baseline_hash", base.hash}, {"rows", rows}}.dump() << '\n';
    return 0;
}

}  // namespace psf4d::cli
