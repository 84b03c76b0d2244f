#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "commands.hpp"
#include "psf4d/error.hpp"
#include "psf4d/kernels.hpp"
#include "psf4d/tensor_io.hpp"

using psf4d::cli::RunConfig;

namespace {

constexpr int kRuntimeFailure = 1;
constexpr int kUsageFailure = 2;

std::string quoted(const std::string& s) {
    std::string q = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') q += '\\';
        q += c == '\n' ? ' ' : c;
    }
    return q + '"';
}

void report(const std::string& kind, const std::string& message) {
    std::cerr << "error: kind=" << kind << " message=" << quoted(message) << '\n';
}

void add_common(CLI::App* sub, RunConfig& c) {
    sub->add_option("--config", "key = value file; command-line flags take precedence");
    sub->add_option("--seed", c.seed, "Base seed")->capture_default_str();
    sub->add_option("--threads", c.threads, "OpenMP thread cap (0 = runtime default)")
        ->capture_default_str();
    sub->add_flag("--json", c.json, "Machine-readable output");
}

void add_noise(CLI::App* sub, RunConfig& c) {
    sub->add_option("--gamma", c.gamma, "Window AR(1) coefficient in [0, 1)")->capture_default_str();
    sub->add_option("--lambda", c.lambda, "Shared cross-view variance fraction in [0, 1)")
        ->capture_default_str();
    sub->add_option("--shared-mode", c.shared_mode,
                    "independent_per_window | ar_chained")
        ->capture_default_str();
    sub->add_option("--views", c.views, "K")->capture_default_str();
    sub->add_option("--windows", c.windows, "n")->capture_default_str();
    sub->add_option("--frames", c.frames, "Frames per window w")->capture_default_str();
    sub->add_option("--channels", c.channels, "Latent channels C")->capture_default_str();
    sub->add_option("--height", c.height, "Latent height H")->capture_default_str();
    sub->add_option("--width", c.width, "Latent width W")->capture_default_str();
}

void add_pipeline(CLI::App* sub, RunConfig& c) {
    sub->add_option("--margin", c.margin, "Canonical margin; 0 = registered views")
        ->capture_default_str();
    sub->add_option("--noise-floor", c.noise_floor, "Observation noise std")->capture_default_str();
    sub->add_option("--timesteps", c.timesteps, "T")->capture_default_str();
    sub->add_option("--beta-start", c.beta_start)->capture_default_str();
    sub->add_option("--beta-end", c.beta_end)->capture_default_str();
    sub->add_option("--beta-kind", c.beta_kind, "linear | scaled_linear")->capture_default_str();
    sub->add_option("--ddim-steps", c.ddim_steps)->capture_default_str();
    sub->add_option("--edit-strength", c.edit_strength, "t_edit / T")->capture_default_str();
    sub->add_option("--edit-sigma2", c.edit_sigma2, "Spread of the edit predictor")
        ->capture_default_str();
    sub->add_option("--iterations", c.iterations, "Refinement iterations L")
        ->capture_default_str();
    sub->add_option("--omega-start", c.omega_start)->capture_default_str();
    sub->add_option("--omega-end", c.omega_end)->capture_default_str();
    sub->add_option("--edit-scale", c.edit_scale, "Per-channel edit scale")
        ->delimiter(',')
        ->capture_default_str();
    sub->add_option("--edit-bias", c.edit_bias, "Per-channel edit bias")
        ->delimiter(',')
        ->capture_default_str();
    sub->add_option("--ablate", c.ablate, "no-anm | no-cnm | no-vcr (repeatable)");
    sub->add_flag("--dump-latents", c.dump_latents, "Also write per-iteration latents");
}

}  // namespace

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);

    try {
        if (const std::string path = psf4d::cli::find_config_path(args); !path.empty()) {
            const auto bytes = psf4d::read_file(path);
            const auto entries =
                psf4d::cli::parse_config_text(std::string(bytes.begin(), bytes.end()));
            args = psf4d::cli::merge_config_args(entries, args);
        }
    } catch (const psf4d::Error& e) {
        report(e.kind(), e.what());
        return kUsageFailure;
    }

    CLI::App app{"Structured-noise multi-view video latent editing toolkit", "psf4d"};
    app.require_subcommand(1);

    RunConfig sample_cfg;
    sample_cfg.height = 64;
    sample_cfg.width = 64;
    auto* sample = app.add_subcommand("sample-noise", "Draw structured noise and save it");
    add_common(sample, sample_cfg);
    add_noise(sample, sample_cfg);
    sample->add_option("--out", sample_cfg.out, "Output stem; writes STEM.psf4d and STEM.json");

    RunConfig verify_cfg;
    std::string noise_path;
    auto* verify = app.add_subcommand("verify-covariance",
                                      "Compare empirical and theoretical correlations");
    add_common(verify, verify_cfg);
    verify->add_option("noise", noise_path, "Noise tensor (.psf4d with .json sidecar)");
    verify->add_option("--tolerance", verify_cfg.tolerance, "Allowed |empirical - theoretical|")
        ->capture_default_str();

    RunConfig run_cfg;
    auto* run = app.add_subcommand("run-pipeline", "Initial edit plus refinement on the synthetic scene");
    add_common(run, run_cfg);
    add_noise(run, run_cfg);
    add_pipeline(run, run_cfg);
    run->add_option("--out", run_cfg.out, "Output directory");

    RunConfig cmp_cfg;
    std::vector<std::string> traces;
    auto* cmp = app.add_subcommand("compare", "Metric deltas of trace files against the first");
    add_common(cmp, cmp_cfg);
    cmp->add_option("traces", traces, "trace.jsonl files; the first is the baseline");
    cmp->add_flag("--csv", cmp_cfg.csv, "CSV output");

    std::vector<std::string> rev(args.rbegin(), args.rend());
    try {
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        report("usage", e.what());
        return kUsageFailure;
    }

    RunConfig* active = sample->parsed()   ? &sample_cfg
                        : verify->parsed() ? &verify_cfg
                        : run->parsed()    ? &run_cfg
                                           : &cmp_cfg;
    try {
        if (sample->parsed()) psf4d::cli::prepare_sample_noise(sample_cfg);
        if (verify->parsed()) psf4d::cli::prepare_verify_covariance(verify_cfg, noise_path);
        if (run->parsed()) psf4d::cli::prepare_run_pipeline(run_cfg);
        if (cmp->parsed()) psf4d::cli::prepare_compare(cmp_cfg, traces);
        if (active->threads < 0) throw psf4d::ParameterError("threads must be >= 0");
    } catch (const psf4d::Error& e) {
        report(e.kind(), e.what());
        return kUsageFailure;
    }

    psf4d::kernels::set_thread_limit(active->threads);
    try {
        if (sample->parsed()) return psf4d::cli::cmd_sample_noise(sample_cfg, std::cout);
        if (verify->parsed()) {
            return psf4d::cli::cmd_verify_covariance(verify_cfg, noise_path, std::cout);
        }
        if (run->parsed()) return psf4d::cli::cmd_run_pipeline(run_cfg, std::cout);
        return psf4d::cli::cmd_compare(cmp_cfg, traces, std::cout, std::cerr);
    } catch (const psf4d::Error& e) {
        report(e.kind(), e.what());
    } catch (const std::exception& e) {
        report("runtime", e.what());
    }
    return kRuntimeFailure;
}
