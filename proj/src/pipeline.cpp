#include "psf4d/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "psf4d/error.hpp"
#include "psf4d/kernels.hpp"
#include "psf4d/rng.hpp"

namespace psf4d::pipeline {

namespace {

namespace kp = kernels::parallel;

constexpr std::uint64_t kObservationStream = 0x0B5E'4A71'0000'0001ull;
constexpr std::uint64_t kStageStream = 0x5747'E000'0000'0002ull;

// Trailing [C, H, W] extents of a tensor of rank >= 3.
struct Planes {
    std::size_t count;     // product of all axes before H, W
    std::size_t channels;  // C
    std::size_t height;
    std::size_t width;
};

Planes planes_of(const Tensor& t, std::size_t leading) {
    if (t.rank() < leading + 3) {
        throw ShapeError("expected [..., C, H, W], got " + shape_string(t.shape()));
    }
    const std::size_t r = t.rank();
    return {t.size() / (t.dim(r - 2) * t.dim(r - 1)), t.dim(r - 3), t.dim(r - 2), t.dim(r - 1)};
}

void check_views(const Tensor& views, const ViewGeometry& geometry) {
    geometry.validate();
    const Planes p = planes_of(views, 1);
    if (views.dim(0) != geometry.views()) {
        throw ShapeError("views axis has " + std::to_string(views.dim(0)) + " entries, geometry " +
                         std::to_string(geometry.views()));
    }
    if (p.height != geometry.view_height || p.width != geometry.view_width) {
        throw ShapeError("view extent " + shape_string(views.shape()) +
                         " does not match the geometry");
    }
}

double value_range(const Tensor& t) {
    const auto [lo, hi] = std::minmax_element(t.values().begin(), t.values().end());
    return *hi - *lo;
}

}  // namespace

Shape SyntheticScene::view_shape() const {
    return {views(), canonical.dim(0), canonical.dim(1), canonical.dim(2), geometry.view_height,
            geometry.view_width};
}

void SyntheticScene::validate() const {
    if (canonical.rank() != 5) {
        throw ShapeError("canonical content must be [n, w, C, Hc, Wc], got " +
                         shape_string(canonical.shape()));
    }
    geometry.validate();
    if (canonical.dim(3) != geometry.canonical_height ||
        canonical.dim(4) != geometry.canonical_width) {
        throw ShapeError("canonical extent does not match the geometry");
    }
    if (noise_floor.size() != views()) {
        throw ShapeError("noise_floor needs one entry per view");
    }
    for (double s : noise_floor) {
        if (!(std::isfinite(s) && s >= 0.0)) throw ParameterError("noise_floor must be >= 0");
    }
}

SyntheticScene make_default_scene(const SceneSpec& spec) {
    if (spec.views == 0) throw ShapeError("scene needs at least one view");
    const std::size_t hc = spec.height + spec.margin;
    const std::size_t wc = spec.width + spec.margin;
    Tensor canonical({spec.windows, spec.frames, spec.channels, hc, wc});

    constexpr double kBase[4] = {1.0, 0.5, -0.3, 0.2};
    constexpr double kBlobSigma = 1.5;
    for (std::size_t i = 0; i < spec.windows; ++i) {
        for (std::size_t f = 0; f < spec.frames; ++f) {
            const double tau = static_cast<double>(i * spec.frames + f);
            const double cx = 1.0 + (static_cast<double>(wc) - 3.0) * (0.5 + 0.5 * std::sin(0.1 * tau));
            const double cy = 1.0 + (static_cast<double>(hc) - 3.0) * (0.5 + 0.5 * std::cos(0.07 * tau));
            for (std::size_t c = 0; c < spec.channels; ++c) {
                auto plane = canonical.block({i, f, c});
                for (std::size_t y = 0; y < hc; ++y) {
                    for (std::size_t x = 0; x < wc; ++x) {
                        const double dx = static_cast<double>(x) - cx;
                        const double dy = static_cast<double>(y) - cy;
                        plane[y * wc + x] =
                            kBase[c % 4] +
                            0.4 * std::sin(0.7 * x + 0.5 * y + 0.2 * tau + static_cast<double>(c)) +
                            0.6 * std::exp(-(dx * dx + dy * dy) / (2 * kBlobSigma * kBlobSigma));
                    }
                }
            }
        }
    }

    ViewGeometry g{hc, wc, spec.height, spec.width, {}};
    const double mid = 0.5 * static_cast<double>(spec.views - 1);
    for (std::size_t k = 0; k < spec.views; ++k) {
        const std::size_t corner = k % 4;
        g.maps.push_back({(corner / 2) * spec.margin, (corner % 2) * spec.margin,
                          1.0 + 0.05 * (static_cast<double>(k) - mid)});
    }

    SyntheticScene scene{std::move(canonical), std::move(g),
                         std::vector<double>(spec.views, spec.noise_floor), spec.seed};
    scene.validate();
    return scene;
}

Tensor render(const Tensor& canonical, const ViewGeometry& geometry) {
    geometry.validate();
    const Planes cp = planes_of(canonical, 0);
    if (cp.height != geometry.canonical_height || cp.width != geometry.canonical_width) {
        throw ShapeError("canonical extent does not match the geometry");
    }
    Shape shape = canonical.shape();
    shape.insert(shape.begin(), geometry.views());
    shape[shape.size() - 2] = geometry.view_height;
    shape[shape.size() - 1] = geometry.view_width;
    Tensor out(shape);

    const std::size_t h = geometry.view_height, w = geometry.view_width;
    const std::size_t wc = cp.width;
    const auto src = canonical.values();
    for (std::size_t k = 0; k < geometry.views(); ++k) {
        const ViewMap& m = geometry.maps[k];
        auto dst = out.block({k});
        for (std::size_t p = 0; p < cp.count; ++p) {
            const double* in = src.data() + p * cp.height * wc;
            double* o = dst.data() + p * h * w;
            for (std::size_t y = 0; y < h; ++y) {
                for (std::size_t x = 0; x < w; ++x) {
                    o[y * w + x] = m.gain * in[(y + m.row_offset) * wc + x + m.col_offset];
                }
            }
        }
    }
    return out;
}

Tensor render_views(const SyntheticScene& scene) {
    scene.validate();
    Tensor views = render(scene.canonical, scene.geometry);
    const RngState base = RngState{scene.seed, 0, 0}.child(kObservationStream);
    for (std::size_t k = 0; k < scene.views(); ++k) {
        if (scene.noise_floor[k] == 0.0) continue;
        auto v = views.block({k});
        std::vector<double> eps(v.size());
        kp::fill_normal(eps, base.seed, child_stream(base.stream, k), 0);
        kp::lincomb(v, 1.0, v, scene.noise_floor[k], eps);
    }
    return views;
}

EditOperator EditOperator::identity(std::size_t channels) {
    return {std::vector<double>(channels, 1.0), std::vector<double>(channels, 0.0), std::nullopt};
}

namespace {

void check_edit(const EditOperator& e, std::size_t channels) {
    if (e.scale.size() != channels || e.bias.size() != channels) {
        throw ShapeError("edit has " + std::to_string(e.scale.size()) + " scales and " +
                         std::to_string(e.bias.size()) + " biases for " +
                         std::to_string(channels) + " channels");
    }
    if (e.mask && e.mask->rank() != 2) throw ShapeError("edit mask must be [Hc, Wc]");
}

// out = v + m * (s v + g b - v); m = 1 without a mask.
void edit_plane(std::span<double> out, std::span<const double> v, double s, double gb,
                const Tensor* mask, std::size_t row0, std::size_t col0, std::size_t width) {
    if (!mask) {
        for (std::size_t j = 0; j < v.size(); ++j) out[j] = s * v[j] + gb;
        return;
    }
    const std::size_t mw = mask->dim(1);
    for (std::size_t j = 0; j < v.size(); ++j) {
        const std::size_t y = j / width, x = j % width;
        const double m = (*mask)[(y + row0) * mw + x + col0];
        out[j] = v[j] + m * (s * v[j] + gb - v[j]);
    }
}

}  // namespace

Tensor EditOperator::apply_canonical(const Tensor& x) const {
    const Planes p = planes_of(x, 0);
    check_edit(*this, p.channels);
    if (mask && (mask->dim(0) != p.height || mask->dim(1) != p.width)) {
        throw ShapeError("edit mask does not match the canonical extent");
    }
    Tensor out(x.shape());
    const std::size_t ps = p.height * p.width;
    for (std::size_t q = 0; q < p.count; ++q) {
        const std::size_t c = q % p.channels;
        edit_plane(out.values().subspan(q * ps, ps), x.values().subspan(q * ps, ps), scale[c],
                   bias[c], mask ? &*mask : nullptr, 0, 0, p.width);
    }
    return out;
}

Tensor EditOperator::apply_views(const Tensor& views, const ViewGeometry& geometry) const {
    check_views(views, geometry);
    const Planes p = planes_of(views, 1);
    check_edit(*this, p.channels);
    if (mask &&
        (mask->dim(0) != geometry.canonical_height || mask->dim(1) != geometry.canonical_width)) {
        throw ShapeError("edit mask does not match the canonical extent");
    }
    Tensor out(views.shape());
    const std::size_t ps = p.height * p.width;
    const std::size_t per_view = p.count / geometry.views();
    for (std::size_t k = 0; k < geometry.views(); ++k) {
        const ViewMap& m = geometry.maps[k];
        for (std::size_t q = 0; q < per_view; ++q) {
            const std::size_t c = q % p.channels;
            const std::size_t off = (k * per_view + q) * ps;
            edit_plane(out.values().subspan(off, ps), views.values().subspan(off, ps), scale[c],
                       m.gain * bias[c], mask ? &*mask : nullptr, m.row_offset, m.col_offset,
                       p.width);
        }
    }
    return out;
}

SceneModel fit_scene_model(const Tensor& views, const ViewGeometry& geometry) {
    check_views(views, geometry);
    const std::size_t hc = geometry.canonical_height, wc = geometry.canonical_width;
    const std::size_t h = geometry.view_height, w = geometry.view_width;

    std::vector<double> weight(hc * wc, 0.0);
    for (const ViewMap& m : geometry.maps) {
        for (std::size_t y = 0; y < h; ++y) {
            for (std::size_t x = 0; x < w; ++x) {
                weight[(y + m.row_offset) * wc + x + m.col_offset] += m.gain * m.gain;
            }
        }
    }
    for (std::size_t j = 0; j < weight.size(); ++j) {
        if (weight[j] == 0.0) {
            throw FitError("canonical pixel (" + std::to_string(j / wc) + ", " +
                           std::to_string(j % wc) + ") is not observed by any view");
        }
    }

    Shape shape(views.shape().begin() + 1, views.shape().end());
    shape[shape.size() - 2] = hc;
    shape[shape.size() - 1] = wc;
    Tensor canonical(shape);
    const std::size_t planes = canonical.size() / (hc * wc);
    for (std::size_t k = 0; k < geometry.views(); ++k) {
        const ViewMap& m = geometry.maps[k];
        const auto v = views.block({k});
        for (std::size_t p = 0; p < planes; ++p) {
            double* c = canonical.values().data() + p * hc * wc;
            const double* in = v.data() + p * h * w;
            for (std::size_t y = 0; y < h; ++y) {
                for (std::size_t x = 0; x < w; ++x) {
                    c[(y + m.row_offset) * wc + x + m.col_offset] += m.gain * in[y * w + x];
                }
            }
        }
    }
    for (std::size_t p = 0; p < planes; ++p) {
        double* c = canonical.values().data() + p * hc * wc;
        for (std::size_t j = 0; j < hc * wc; ++j) c[j] /= weight[j];
    }

    SceneModel model;
    const Tensor rendered = render(canonical, geometry);
    double total = 0.0;
    for (std::size_t k = 0; k < geometry.views(); ++k) {
        const auto a = views.block({k});
        const auto b = rendered.block({k});
        const double ss = kp::sum_squared_diff(a, b);
        total += ss;
        model.residual_rms.push_back(std::sqrt(ss / static_cast<double>(a.size())));
        for (std::size_t j = 0; j < a.size(); ++j) {
            model.max_abs_residual = std::max(model.max_abs_residual, std::abs(a[j] - b[j]));
        }
    }
    model.residual_rms_total = std::sqrt(total / static_cast<double>(views.size()));
    model.canonical = std::move(canonical);
    return model;
}

std::shared_ptr<schedule::GaussianOracle> make_edit_predictor(
    std::shared_ptr<const schedule::DiffusionSchedule> schedule, const Tensor& targets,
    double sigma2) {
    return std::make_shared<schedule::GaussianOracle>(std::move(schedule), targets, sigma2);
}

Tensor renoise_and_denoise(const Tensor& latents, const schedule::DiffusionSchedule& schedule,
                           const schedule::NoisePredictor& predictor, const Tensor& noise,
                           int t_edit) {
    require_same_shape(latents, noise, "renoise_and_denoise");
    if (t_edit < 1 || t_edit > schedule.timesteps()) {
        throw ParameterError("t_edit must lie in [1, T], got " + std::to_string(t_edit));
    }
    const Tensor z = schedule::forward_diffuse(schedule, latents, t_edit, noise);
    return schedule::ddim_sample(schedule, z, predictor, {}, t_edit);
}

Tensor initial_edit(const Tensor& views, const schedule::DiffusionSchedule& schedule,
                    const schedule::NoisePredictor& predictor, const Tensor& noise, int t_edit) {
    return renoise_and_denoise(views, schedule, predictor, noise, t_edit);
}

std::vector<double> omega_schedule(int iterations, double start, double end) {
    if (iterations < 0) throw ParameterError("iteration count must be >= 0");
    if (!(start > 0.0 && start <= 1.0 && end > 0.0 && end <= 1.0 && end <= start)) {
        throw ParameterError("omega schedule needs 1 >= start >= end > 0");
    }
    std::vector<double> w(static_cast<std::size_t>(iterations));
    for (int l = 0; l < iterations; ++l) {
        w[l] = iterations == 1 ? start
                               : start + (end - start) * static_cast<double>(l) / (iterations - 1);
    }
    return w;
}

Tensor rectify(const Tensor& denoised, const Tensor& previous, double omega) {
    require_same_shape(denoised, previous, "rectify");
    if (!(omega >= 0.0 && omega <= 1.0)) {
        throw ParameterError("omega must lie in [0, 1], got " + std::to_string(omega));
    }
    // Endpoints are returned as copies so they hold bit for bit.
    if (omega == 1.0) return denoised;
    if (omega == 0.0) return previous;
    Tensor out(denoised.shape());
    kp::lincomb(out.values(), omega, denoised.values(), 1.0 - omega, previous.values());
    return out;
}

void RefinementState::validate() const {
    const int L = static_cast<int>(omegas.size());
    if (iteration < 0 || iteration > L) {
        throw IndexError("iteration " + std::to_string(iteration) + " outside [0, " +
                         std::to_string(L) + "]");
    }
    for (std::size_t l = 0; l < omegas.size(); ++l) {
        if (!(omegas[l] > 0.0 && omegas[l] <= 1.0)) {
            throw ParameterError("omega_" + std::to_string(l + 1) + " outside (0, 1]");
        }
        if (l > 0 && omegas[l] > omegas[l - 1]) {
            throw ParameterError("omega schedule must be non-increasing");
        }
    }
}

RefinementState refine_step(const RefinementState& state, const RefineContext& context,
                            const Tensor& noise) {
    state.validate();
    if (state.iteration >= static_cast<int>(state.omegas.size())) {
        throw IndexError("refinement already finished after " +
                         std::to_string(state.omegas.size()) + " iterations");
    }
    RefinementState next;
    next.iteration = state.iteration + 1;
    next.omegas = state.omegas;
    next.denoised = renoise_and_denoise(state.previous, context.schedule, context.predictor, noise,
                                        context.t_edit);
    next.rectified = rectify(next.denoised, state.previous, state.omegas[state.iteration]);
    next.model = fit_scene_model(next.rectified, context.geometry);
    next.previous = render(next.model->canonical, context.geometry);
    return next;
}

void PipelineConfig::validate() const {
    if (!(gamma >= 0.0 && gamma < 1.0)) throw ParameterError("gamma must lie in [0, 1)");
    if (!(lambda >= 0.0 && lambda < 1.0)) throw ParameterError("lambda must lie in [0, 1)");
    if (!(edit_strength > 0.0 && edit_strength <= 1.0)) {
        throw ParameterError("edit_strength must lie in (0, 1]");
    }
    if (!(edit_sigma2 > 0.0 && std::isfinite(edit_sigma2))) {
        throw ParameterError("edit_sigma2 must be > 0");
    }
    if (refine_iterations < 0) throw ParameterError("refine_iterations must be >= 0");
    omega_schedule(refine_iterations, omega_start, omega_end);
    if (timesteps < 1) throw ParameterError("T must be >= 1");
    if (t_edit() < 1) throw ParameterError("edit_strength * T rounds to 0");
}

int PipelineConfig::t_edit() const {
    return static_cast<int>(std::lround(edit_strength * timesteps));
}

noise::NoiseConfig PipelineConfig::noise_config(const SyntheticScene& scene) const {
    noise::NoiseConfig nc;
    nc.gamma = gamma;
    nc.lambda = lambda;
    nc.views = scene.views();
    nc.windows = scene.windows();
    nc.frames = scene.frames();
    nc.channels = scene.channels();
    nc.height = scene.geometry.view_height;
    nc.width = scene.geometry.view_width;
    nc.seed = seed;
    nc.shared_mode = shared_mode;
    return nc;
}

metrics::MetricsReport evaluate(const Tensor& latents, const Tensor& original_views,
                                const Tensor& clean_target_views, const ViewGeometry& geometry) {
    require_same_shape(latents, original_views, "evaluate");
    require_same_shape(latents, clean_target_views, "evaluate");
    metrics::MetricsReport r;

    Tensor residual(latents.shape());
    kp::lincomb(residual.values(), 1.0, latents.values(), -1.0, original_views.values());
    const metrics::Flicker fl = metrics::view_flicker(residual);
    r.temporal_flicker = fl.pooled;
    r.flicker_intra = fl.intra_window;
    r.flicker_cross = fl.cross_window;

    r.cross_view_inconsistency = geometry.views() >= 2
                                     ? metrics::cross_view_inconsistency(latents, geometry)
                                     : 0.0;
    const double peak = value_range(clean_target_views);
    r.psnr = metrics::psnr(latents, clean_target_views, peak > 0.0 ? peak : 1.0);
    r.ssim = metrics::ssim(latents, clean_target_views, peak > 0.0 ? peak : 1.0);
    r.fit_residual_rms = fit_scene_model(latents, geometry).residual_rms_total;
    r.sample_count = latents.size();
    return r;
}

RunResult run_psf4d(const SyntheticScene& scene, const EditOperator& edit,
                    const PipelineConfig& config, bool keep_latents) {
    scene.validate();
    config.validate();
    const noise::NoiseConfig nc = config.noise_config(scene);
    noise::validate(nc);

    auto sched = std::make_shared<const schedule::DiffusionSchedule>(schedule::make_schedule(
        config.timesteps, config.beta_start, config.beta_end, config.beta_kind,
        config.ddim_steps));

    RunResult result;
    result.original_views = render_views(scene);
    result.targets = edit.apply_views(result.original_views, scene.geometry);
    const Tensor clean_targets = edit.apply_views(render(scene.canonical, scene.geometry),
                                                  scene.geometry);
    const auto predictor = make_edit_predictor(sched, result.targets, config.edit_sigma2);

    // Stage 0 is the initial edit, stage l the l-th refinement.
    const RngState stages = RngState{config.seed, 0, 0}.child(kStageStream);
    auto stage_noise = [&](int stage) {
        return noise::sample_structured(nc, stages.child(static_cast<std::uint64_t>(stage))).tensor;
    };

    const int t_edit = config.t_edit();
    const Tensor edited =
        initial_edit(result.original_views, *sched, *predictor, stage_noise(0), t_edit);

    auto record = [&](const Tensor& latents, int l, double omega) {
        metrics::MetricsReport r =
            evaluate(latents, result.original_views, clean_targets, scene.geometry);
        r.iteration = static_cast<std::size_t>(l);
        r.omega = omega;
        result.trace.push_back(r);
        if (keep_latents) result.latents.push_back(latents);
    };
    record(edited, 0, 1.0);

    RefinementState state;
    state.omegas = omega_schedule(config.refine_iterations, config.omega_start, config.omega_end);
    state.model = fit_scene_model(edited, scene.geometry);
    // From here on only renders of the edited model take part.
    state.previous = render(state.model->canonical, scene.geometry);

    const RefineContext ctx{*sched, *predictor, scene.geometry, t_edit};
    for (int l = 0; l < config.refine_iterations; ++l) {
        state = refine_step(state, ctx, stage_noise(l + 1));
        record(state.rectified, state.iteration, state.omegas[l]);
    }
    result.model = std::move(*state.model);
    return result;
}

}  // namespace psf4d::pipeline
