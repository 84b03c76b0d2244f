#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "psf4d/metrics.hpp"
#include "psf4d/noise.hpp"
#include "psf4d/schedule.hpp"
#include "psf4d/tensor.hpp"
#include "psf4d/view_map.hpp"

namespace psf4d::pipeline {

/// Canonical latent video plus known per-view observation maps. Stands in for
/// the renders of a 4D scene model; correspondences are exact by construction.
struct SyntheticScene {
    Tensor canonical;  ///< [n, w, C, Hc, Wc]
    ViewGeometry geometry;
    std::vector<double> noise_floor;  ///< observation noise std per view
    std::uint64_t seed = 0;

    std::size_t views() const { return geometry.views(); }
    std::size_t windows() const { return canonical.dim(0); }
    std::size_t frames() const { return canonical.dim(1); }
    std::size_t channels() const { return canonical.dim(2); }

    /// [K, n, w, C, H, W]
    Shape view_shape() const;
    void validate() const;
};

struct SceneSpec {
    std::size_t views = 4;
    std::size_t windows = 6;
    std::size_t frames = 8;
    std::size_t channels = 4;
    std::size_t height = 8;  ///< per-view extent
    std::size_t width = 8;
    /// Canonical frame is (height+margin) x (width+margin). 0 gives registered
    /// views that differ only by gain; > 0 spreads the views over the corners.
    std::size_t margin = 0;
    double noise_floor = 0.01;
    std::uint64_t seed = 0;
};

/// Smooth drifting texture plus a moving blob per channel. View k crops the
/// canonical frame at corner k % 4 and has gain 1 + 0.05 (k - (K-1)/2).
SyntheticScene make_default_scene(const SceneSpec& spec = {});

/// Noise-free canonical -> views map, [n, w, C, Hc, Wc] -> [K, n, w, C, H, W].
Tensor render(const Tensor& canonical, const ViewGeometry& geometry);

/// render() plus per-view Gaussian observation noise from the scene seed.
Tensor render_views(const SyntheticScene& scene);

/// Per-channel affine edit in canonical latent space, optionally blended by a
/// canonical-space mask in [0, 1]. Applied to a view with gain g it becomes
/// scale*v + g*bias, so editing a view equals viewing the edited canonical.
struct EditOperator {
    std::vector<double> scale;
    std::vector<double> bias;
    std::optional<Tensor> mask;  ///< [Hc, Wc]

    static EditOperator identity(std::size_t channels);

    /// x: [..., C, Hc, Wc]
    Tensor apply_canonical(const Tensor& x) const;
    /// views: [K, ..., C, H, W]
    Tensor apply_views(const Tensor& views, const ViewGeometry& geometry) const;
};

/// Least-squares consensus of the views in canonical space.
struct SceneModel {
    Tensor canonical;                  ///< [n, w, C, Hc, Wc]
    std::vector<double> residual_rms;  ///< per view, views - render(canonical)
    double residual_rms_total = 0.0;
    double max_abs_residual = 0.0;
};

/// For each canonical element, c = sum_k g_k v_k / sum_k g_k^2 over the views
/// covering it. Throws FitError on a singular map or an unobserved pixel.
SceneModel fit_scene_model(const Tensor& views, const ViewGeometry& geometry);

/// Oracle predictor whose clean-latent distribution is N(targets, sigma2 I);
/// stands in for a scene-tuned editing model.
std::shared_ptr<schedule::GaussianOracle> make_edit_predictor(
    std::shared_ptr<const schedule::DiffusionSchedule> schedule, const Tensor& targets,
    double sigma2);

/// Forward-diffuse `latents` to `t_edit` with the supplied (structured) noise,
/// then DDIM-denoise back to t = 0.
Tensor renoise_and_denoise(const Tensor& latents, const schedule::DiffusionSchedule& schedule,
                           const schedule::NoisePredictor& predictor, const Tensor& noise,
                           int t_edit);

/// Initial edited views from the original renders.
Tensor initial_edit(const Tensor& views, const schedule::DiffusionSchedule& schedule,
                    const schedule::NoisePredictor& predictor, const Tensor& noise, int t_edit);

/// Linear weights from `start` to `end` over `iterations` refinement steps.
std::vector<double> omega_schedule(int iterations, double start = 0.9, double end = 0.6);

/// omega * denoised + (1 - omega) * previous, omega in [0, 1].
Tensor rectify(const Tensor& denoised, const Tensor& previous, double omega);

struct RefinementState {
    int iteration = 0;            ///< l, in [0, L]
    std::vector<double> omegas;   ///< omega_1..omega_L, in (0, 1], non-increasing
    Tensor previous;              ///< renders of the current scene model
    Tensor denoised;              ///< set by refine_step
    Tensor rectified;             ///< set by refine_step
    std::optional<SceneModel> model;

    void validate() const;
};

struct RefineContext {
    const schedule::DiffusionSchedule& schedule;
    const schedule::NoisePredictor& predictor;
    const ViewGeometry& geometry;
    int t_edit;
};

/// Denoise, rectify with omega_{l+1}, fit the consensus model, re-render.
/// The returned state has iteration l+1 and `previous` set to the new renders.
RefinementState refine_step(const RefinementState& state, const RefineContext& context,
                            const Tensor& noise);

struct PipelineConfig {
    double gamma = 0.65;
    double lambda = 0.7;
    noise::SharedMode shared_mode = noise::SharedMode::independent_per_window;
    int timesteps = 1000;
    double beta_start = 1e-4;
    double beta_end = 0.02;
    schedule::BetaKind beta_kind = schedule::BetaKind::linear;
    int ddim_steps = 30;
    double edit_strength = 0.6;  ///< t_edit = round(edit_strength * T)
    double edit_sigma2 = 0.04;
    int refine_iterations = 3;
    double omega_start = 0.9;
    double omega_end = 0.6;
    std::uint64_t seed = 0;

    void validate() const;
    int t_edit() const;
    noise::NoiseConfig noise_config(const SyntheticScene& scene) const;
};

struct RunResult {
    SceneModel model;
    std::vector<metrics::MetricsReport> trace;  ///< L + 1 records
    std::vector<Tensor> latents;  ///< per-record latents when requested
    Tensor original_views;
    Tensor targets;
};

/// Metrics of one set of per-view latents against the original renders and
/// the clean edit target.
metrics::MetricsReport evaluate(const Tensor& latents, const Tensor& original_views,
                                const Tensor& clean_target_views, const ViewGeometry& geometry);

/// Initial edit followed by L refinement steps. Record 0 describes the initial
/// edited views, record l the rectified latents of step l.
RunResult run_psf4d(const SyntheticScene& scene, const EditOperator& edit,
                    const PipelineConfig& config, bool keep_latents = false);

}  // namespace psf4d::pipeline
