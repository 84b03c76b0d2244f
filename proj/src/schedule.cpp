#include "psf4d/schedule.hpp"

#include <cmath>
#include <sstream>

#include "json.hpp"
#include "psf4d/error.hpp"
#include "psf4d/kernels.hpp"

namespace psf4d::schedule {

namespace {

void check_predicted(const Tensor& eps, const Tensor& z, int t) {
    if (eps.shape() != z.shape()) {
        throw ContractError("predictor returned shape " + shape_string(eps.shape()) +
                            " for input " + shape_string(z.shape()) + " at t=" +
                            std::to_string(t));
    }
    if (!eps.all_finite()) {
        throw ContractError("predictor returned non-finite values at t=" + std::to_string(t));
    }
}

}  // namespace

std::string to_string(BetaKind kind) {
    return kind == BetaKind::linear ? "linear" : "scaled_linear";
}

BetaKind beta_kind_from_string(std::string_view name) {
    if (name == "linear") return BetaKind::linear;
    if (name == "scaled_linear") return BetaKind::scaled_linear;
    throw ParameterError("unknown beta schedule '" + std::string(name) + "'");
}

DiffusionSchedule::DiffusionSchedule(int timesteps, double beta_start, double beta_end,
                                     BetaKind kind, std::vector<int> ddim_steps)
    : timesteps_(timesteps),
      beta_start_(beta_start),
      beta_end_(beta_end),
      kind_(kind),
      ddim_steps_(std::move(ddim_steps)) {
    if (timesteps_ < 1) throw ParameterError("timesteps must be >= 1");
    if (!(beta_start_ > 0.0 && beta_start_ <= beta_end_ && beta_end_ < 1.0)) {
        std::ostringstream os;
        os << "beta range must satisfy 0 < start <= end < 1, got [" << beta_start_ << ", "
           << beta_end_ << "]";
        throw ParameterError(os.str());
    }
    if (ddim_steps_.empty()) throw ParameterError("empty DDIM sub-schedule");
    for (std::size_t i = 0; i < ddim_steps_.size(); ++i) {
        const int s = ddim_steps_[i];
        if (s < 1 || s > timesteps_ || (i > 0 && s <= ddim_steps_[i - 1])) {
            throw ParameterError("DDIM steps must be strictly increasing within [1, T]");
        }
    }

    betas_.resize(timesteps_);
    const double span = timesteps_ > 1 ? static_cast<double>(timesteps_ - 1) : 1.0;
    if (kind_ == BetaKind::linear) {
        for (int i = 0; i < timesteps_; ++i) {
            betas_[i] = beta_start_ + (beta_end_ - beta_start_) * (i / span);
        }
    } else {
        const double lo = std::sqrt(beta_start_);
        const double hi = std::sqrt(beta_end_);
        for (int i = 0; i < timesteps_; ++i) {
            const double r = lo + (hi - lo) * (i / span);
            betas_[i] = r * r;
        }
    }
    alpha_bars_.resize(timesteps_ + 1);
    alpha_bars_[0] = 1.0;
    for (int t = 1; t <= timesteps_; ++t) {
        alpha_bars_[t] = alpha_bars_[t - 1] * (1.0 - betas_[t - 1]);
    }
}

double DiffusionSchedule::beta(int t) const {
    if (t < 1 || t > timesteps_) {
        throw IndexError("beta: timestep " + std::to_string(t) + " outside [1, T]");
    }
    return betas_[t - 1];
}

double DiffusionSchedule::alpha_bar(int t) const {
    if (t < 0 || t > timesteps_) {
        throw IndexError("alpha_bar: timestep " + std::to_string(t) + " outside [0, T]");
    }
    return alpha_bars_[t];
}

std::vector<int> DiffusionSchedule::sampling_path(int t_start) const {
    if (t_start < 1 || t_start > timesteps_) {
        throw ParameterError("sampling start " + std::to_string(t_start) + " outside [1, T]");
    }
    std::vector<int> path{t_start};
    for (auto it = ddim_steps_.rbegin(); it != ddim_steps_.rend(); ++it) {
        if (*it < t_start) path.push_back(*it);
    }
    path.push_back(0);
    return path;
}

std::vector<int> DiffusionSchedule::inversion_path() const {
    std::vector<int> path{0};
    path.insert(path.end(), ddim_steps_.begin(), ddim_steps_.end());
    return path;
}

DiffusionSchedule make_schedule(int timesteps, double beta_start, double beta_end, BetaKind kind,
                                int ddim_step_count) {
    if (timesteps < 1) throw ParameterError("timesteps must be >= 1");
    if (ddim_step_count < 1 || ddim_step_count > timesteps) {
        throw ParameterError("ddim step count must be in [1, T], got " +
                             std::to_string(ddim_step_count));
    }
    std::vector<int> steps(ddim_step_count);
    for (int k = 1; k <= ddim_step_count; ++k) {
        steps[k - 1] = static_cast<int>(static_cast<long long>(k) * timesteps / ddim_step_count);
    }
    return DiffusionSchedule(timesteps, beta_start, beta_end, kind, std::move(steps));
}

std::string schedule_to_json(const DiffusionSchedule& s) {
    nlohmann::json j;
    j["T"] = s.timesteps();
    j["kind"] = to_string(s.kind());
    j["beta_start"] = s.beta_start();
    j["beta_end"] = s.beta_end();
    j["ddim_steps"] = s.ddim_steps();
    return j.dump();
}

DiffusionSchedule schedule_from_json(std::string_view text) {
    try {
        const auto j = nlohmann::json::parse(text);
        return DiffusionSchedule(j.at("T").get<int>(), j.at("beta_start").get<double>(),
                                 j.at("beta_end").get<double>(),
                                 beta_kind_from_string(j.at("kind").get<std::string>()),
                                 j.at("ddim_steps").get<std::vector<int>>());
    } catch (const nlohmann::json::exception& e) {
        throw ParameterError(std::string("malformed schedule JSON: ") + e.what());
    }
}

Tensor ZeroPredictor::predict(const Tensor& z_t, int, const Conditioning&) const {
    return Tensor(z_t.shape(), 0.0);
}

Tensor FixedPredictor::predict(const Tensor&, int, const Conditioning&) const { return eps_; }

GaussianOracle::GaussianOracle(std::shared_ptr<const DiffusionSchedule> schedule, Tensor mean,
                               double sigma2)
    : schedule_(std::move(schedule)), mean_(std::move(mean)), sigma2_(sigma2) {
    if (!schedule_) throw ParameterError("GaussianOracle needs a schedule");
    if (!(sigma2_ > 0.0) || !std::isfinite(sigma2_)) {
        throw ParameterError("GaussianOracle variance must be positive and finite");
    }
    if (!mean_.all_finite()) throw ParameterError("GaussianOracle mean must be finite");
}

GaussianOracle::GaussianOracle(std::shared_ptr<const DiffusionSchedule> schedule, double mean,
                               double sigma2)
    : GaussianOracle(std::move(schedule), Tensor({1}, mean), sigma2) {}

Tensor GaussianOracle::predict(const Tensor& z_t, int t, const Conditioning&) const {
    return oracle_predict(*this, *schedule_, z_t, t);
}

GuidedPredictor::GuidedPredictor(std::shared_ptr<const NoisePredictor> unconditional,
                                 std::shared_ptr<const NoisePredictor> conditional,
                                 double scale)
    : unconditional_(std::move(unconditional)), conditional_(std::move(conditional)),
      scale_(scale) {
    if (!unconditional_ || !conditional_) {
        throw ParameterError("guidance needs both predictors");
    }
    if (!std::isfinite(scale_)) throw ParameterError("guidance scale must be finite");
}

Tensor GuidedPredictor::predict(const Tensor& z_t, int t, const Conditioning& cond) const {
    Tensor u = unconditional_->predict(z_t, t, cond);
    const Tensor c = conditional_->predict(z_t, t, cond);
    require_same_shape(u, c, "GuidedPredictor");
    kernels::parallel::lincomb(u.values(), 1.0 - scale_, u.values(), scale_, c.values());
    return u;
}

Tensor oracle_predict(const GaussianOracle& oracle, const DiffusionSchedule& s,
                      const Tensor& z_t, int t) {
    const double ab = s.alpha_bar(t);
    if (ab >= 1.0) {
        throw ParameterError("oracle_predict: alpha_bar(" + std::to_string(t) +
                             ") == 1, noise is undefined");
    }
    const Tensor& mu = oracle.mean();
    if (mu.size() != 1 && mu.shape() != z_t.shape()) {
        throw ShapeError("oracle mean shape " + shape_string(mu.shape()) +
                         " does not broadcast to " + shape_string(z_t.shape()));
    }
    Tensor out(z_t.shape());
    kernels::parallel::gaussian_eps(out.values(), z_t.values(), mu.values(), ab, oracle.sigma2());
    return out;
}

Tensor forward_diffuse(const DiffusionSchedule& s, const Tensor& z0, int t, const Tensor& eps) {
    require_same_shape(z0, eps, "forward_diffuse");
    const double ab = s.alpha_bar(t);
    Tensor out(z0.shape());
    kernels::parallel::lincomb(out.values(), std::sqrt(ab), z0.values(), std::sqrt(1.0 - ab),
                               eps.values());
    return out;
}

Tensor ddim_transition(const DiffusionSchedule& s, const Tensor& z, int t_from, int t_to,
                       const Tensor& eps) {
    require_same_shape(z, eps, "ddim_transition");
    const double ab_from = s.alpha_bar(t_from);
    const double ab_to = s.alpha_bar(t_to);
    // z_to = sqrt(ab_to) * (z - sqrt(1-ab_from) eps) / sqrt(ab_from) + sqrt(1-ab_to) eps
    const double signal = std::sqrt(ab_to) / std::sqrt(ab_from);
    const double noise = std::sqrt(1.0 - ab_to) - signal * std::sqrt(1.0 - ab_from);
    Tensor out(z.shape());
    kernels::parallel::lincomb(out.values(), signal, z.values(), noise, eps.values());
    return out;
}

Tensor ddim_step(const DiffusionSchedule& s, const Tensor& z_t, int t_from, int t_to,
                 const NoisePredictor& predictor, const Conditioning& cond) {
    if (!(t_from > t_to && t_to >= 0)) {
        throw ParameterError("ddim_step requires t_from > t_to >= 0, got " +
                             std::to_string(t_from) + " -> " + std::to_string(t_to));
    }
    s.alpha_bar(t_from);
    const Tensor eps = predictor.predict(z_t, t_from, cond);
    check_predicted(eps, z_t, t_from);
    return ddim_transition(s, z_t, t_from, t_to, eps);
}

Tensor ddim_sample(const DiffusionSchedule& s, const Tensor& z_start,
                   const NoisePredictor& predictor, const Conditioning& cond, int t_start) {
    const auto path = s.sampling_path(t_start < 0 ? s.timesteps() : t_start);
    Tensor z = z_start;
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
        z = ddim_step(s, z, path[i], path[i + 1], predictor, cond);
    }
    return z;
}

Tensor ddim_invert(const DiffusionSchedule& s, const Tensor& z0, const NoisePredictor& predictor,
                   const Conditioning& cond, int sweeps) {
    if (sweeps < 0) throw ParameterError("inversion sweeps must be >= 0");
    const auto path = s.inversion_path();
    Tensor z = z0;
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
        const int lo = path[i];
        const int hi = path[i + 1];
        Tensor eps = predictor.predict(z, hi, cond);
        check_predicted(eps, z, hi);
        Tensor z_hi = ddim_transition(s, z, lo, hi, eps);
        for (int k = 0; k < sweeps; ++k) {
            eps = predictor.predict(z_hi, hi, cond);
            check_predicted(eps, z_hi, hi);
            z_hi = ddim_transition(s, z, lo, hi, eps);
        }
        z = std::move(z_hi);
    }
    return z;
}

}  // namespace psf4d::schedule
