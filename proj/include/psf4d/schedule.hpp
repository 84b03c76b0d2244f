#pragma once

#include <any>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "psf4d/tensor.hpp"

namespace psf4d::schedule {

enum class BetaKind { linear, scaled_linear };

std::string to_string(BetaKind kind);
BetaKind beta_kind_from_string(std::string_view name);

/// Variance schedule over timesteps 1..T with alpha_bar(0) = 1, plus the
/// strictly increasing DDIM sub-schedule used for sampling.
class DiffusionSchedule {
  public:
    DiffusionSchedule(int timesteps, double beta_start, double beta_end, BetaKind kind,
                      std::vector<int> ddim_steps);

    int timesteps() const noexcept { return timesteps_; }
    double beta_start() const noexcept { return beta_start_; }
    double beta_end() const noexcept { return beta_end_; }
    BetaKind kind() const noexcept { return kind_; }

    double beta(int t) const;
    double alpha(int t) const { return 1.0 - beta(t); }
    /// Cumulative product of alphas; t in [0, T].
    double alpha_bar(int t) const;

    const std::vector<int>& ddim_steps() const noexcept { return ddim_steps_; }

    /// Descending timesteps for denoising from `t_start` to 0:
    /// {t_start} followed by every DDIM step below it, then 0.
    std::vector<int> sampling_path(int t_start) const;

    /// Ascending timesteps 0, s_1, ..., s_S = T used by inversion.
    std::vector<int> inversion_path() const;

  private:
    int timesteps_;
    double beta_start_;
    double beta_end_;
    BetaKind kind_;
    std::vector<double> betas_;       // index t-1
    std::vector<double> alpha_bars_;  // index t, alpha_bars_[0] = 1
    std::vector<int> ddim_steps_;
};

/// linear: betas evenly spaced in [beta_start, beta_end];
/// scaled_linear: sqrt(beta) evenly spaced, then squared.
/// DDIM steps: floor(k*T/S) for k = 1..S, which always ends at T.
DiffusionSchedule make_schedule(int timesteps = 1000, double beta_start = 1e-4,
                                double beta_end = 0.02, BetaKind kind = BetaKind::linear,
                                int ddim_step_count = 30);

/// Keys: T, kind, beta_start, beta_end, ddim_steps.
std::string schedule_to_json(const DiffusionSchedule& s);
DiffusionSchedule schedule_from_json(std::string_view text);

/// Opaque conditioning record handed through to predictors.
struct Conditioning {
    std::any payload;
};

/// Predicts the noise component of z_t. Implementations must be safe to call
/// concurrently and return a finite tensor of the input's shape.
class NoisePredictor {
  public:
    virtual ~NoisePredictor() = default;
    virtual Tensor predict(const Tensor& z_t, int t, const Conditioning& cond) const = 0;
};

class ZeroPredictor final : public NoisePredictor {
  public:
    Tensor predict(const Tensor& z_t, int t, const Conditioning& cond) const override;
};

/// Always returns the stored tensor, e.g. the exact noise used in forward
/// diffusion.
class FixedPredictor final : public NoisePredictor {
  public:
    explicit FixedPredictor(Tensor eps) : eps_(std::move(eps)) {}
    Tensor predict(const Tensor& z_t, int t, const Conditioning& cond) const override;

  private:
    Tensor eps_;
};

/// Exact posterior-mean noise predictor for z0 ~ N(mu, sigma2 I).
///
/// `mean` is either a one-element tensor (broadcast) or has the latent's shape.
class GaussianOracle final : public NoisePredictor {
  public:
    GaussianOracle(std::shared_ptr<const DiffusionSchedule> schedule, Tensor mean,
                   double sigma2);
    GaussianOracle(std::shared_ptr<const DiffusionSchedule> schedule, double mean,
                   double sigma2);

    const Tensor& mean() const noexcept { return mean_; }
    double sigma2() const noexcept { return sigma2_; }

    Tensor predict(const Tensor& z_t, int t, const Conditioning& cond) const override;

  private:
    std::shared_ptr<const DiffusionSchedule> schedule_;
    Tensor mean_;
    double sigma2_;
};

/// Classifier-free guidance: eps = uncond + scale * (cond - uncond), evaluated
/// as (1 - scale) * uncond + scale * cond so scale 1 returns the conditional
/// prediction exactly.
class GuidedPredictor final : public NoisePredictor {
  public:
    static constexpr double kDefaultScale = 7.5;

    GuidedPredictor(std::shared_ptr<const NoisePredictor> unconditional,
                    std::shared_ptr<const NoisePredictor> conditional,
                    double scale = kDefaultScale);

    double scale() const noexcept { return scale_; }
    Tensor predict(const Tensor& z_t, int t, const Conditioning& cond) const override;

  private:
    std::shared_ptr<const NoisePredictor> unconditional_;
    std::shared_ptr<const NoisePredictor> conditional_;
    double scale_;
};

/// E[eps | z_t] for z0 ~ N(mean, sigma2 I). Throws ParameterError when
/// alpha_bar(t) == 1, where the noise is unidentifiable.
Tensor oracle_predict(const GaussianOracle& oracle, const DiffusionSchedule& s, const Tensor& z_t,
                      int t);

/// z_t = sqrt(ab_t) z0 + sqrt(1 - ab_t) eps. No randomness inside: the caller
/// supplies eps, which is how structured noise enters the process.
Tensor forward_diffuse(const DiffusionSchedule& s, const Tensor& z0, int t, const Tensor& eps);

/// Deterministic DDIM move of z from t_from to t_to using noise estimate
/// `eps`; the clean-latent estimate is re-noised to level t_to. Valid in
/// either direction.
Tensor ddim_transition(const DiffusionSchedule& s, const Tensor& z, int t_from, int t_to,
                       const Tensor& eps);

/// One denoising step, t_from > t_to >= 0, with eps = predictor(z_t, t_from).
Tensor ddim_step(const DiffusionSchedule& s, const Tensor& z_t, int t_from, int t_to,
                 const NoisePredictor& predictor, const Conditioning& cond = {});

/// Denoise along sampling_path(t_start) down to t = 0.
Tensor ddim_sample(const DiffusionSchedule& s, const Tensor& z_start,
                   const NoisePredictor& predictor, const Conditioning& cond = {},
                   int t_start = -1);

inline constexpr int kDefaultInversionSweeps = 5;

/// Run the DDIM recurrence upward from t = 0 to T along inversion_path().
///
/// Each step lo -> hi looks for z_hi with ddim_step(z_hi, hi -> lo) == z_lo,
/// i.e. z_hi = transition(z_lo, lo -> hi, predictor(z_hi, hi)). The first
/// guess evaluates the predictor at z_lo (plain DDIM inversion); `sweeps`
/// fixed-point updates follow. sweeps = 0 is plain DDIM inversion.
Tensor ddim_invert(const DiffusionSchedule& s, const Tensor& z0, const NoisePredictor& predictor,
                   const Conditioning& cond = {}, int sweeps = kDefaultInversionSweeps);

}  // namespace psf4d::schedule
