#include "psf4d/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "json.hpp"
#include "psf4d/error.hpp"

namespace psf4d::metrics {

namespace {

struct FlickerSums {
    double intra = 0.0;
    double cross = 0.0;
    std::size_t intra_pairs = 0;
    std::size_t cross_pairs = 0;
};

// `seq` holds n*w frames of `frame` elements each, window-major.
void accumulate_flicker(std::span<const double> seq, std::size_t n, std::size_t w,
                        std::size_t frame, FlickerSums& acc) {
    auto frame_at = [&](std::size_t i, std::size_t f) {
        return seq.subspan((i * w + f) * frame, frame);
    };
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t f = 0; f < w; ++f) {
            if (f + 1 < w) {
                acc.intra += kernels::parallel::sum_squared_diff(frame_at(i, f), frame_at(i, f + 1));
                ++acc.intra_pairs;
            }
            if (i + 1 < n) {
                acc.cross += kernels::parallel::sum_squared_diff(frame_at(i, f), frame_at(i + 1, f));
                ++acc.cross_pairs;
            }
        }
    }
}

Flicker finish(const FlickerSums& s, std::size_t frame) {
    const auto fs = static_cast<double>(frame);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    Flicker f;
    f.intra_pairs = s.intra_pairs;
    f.cross_pairs = s.cross_pairs;
    f.intra_window = s.intra_pairs ? s.intra / (static_cast<double>(s.intra_pairs) * fs) : nan;
    f.cross_window = s.cross_pairs ? s.cross / (static_cast<double>(s.cross_pairs) * fs) : nan;
    f.pooled = (s.intra + s.cross) / (static_cast<double>(s.intra_pairs + s.cross_pairs) * fs);
    return f;
}

std::vector<double> gaussian_window(std::size_t size, double sigma) {
    std::vector<double> g(size);
    const double r = static_cast<double>(size - 1) / 2.0;
    double total = 0.0;
    for (std::size_t i = 0; i < size; ++i) {
        const double d = static_cast<double>(i) - r;
        g[i] = std::exp(-d * d / (2.0 * sigma * sigma));
        total += g[i];
    }
    for (double& v : g) v /= total;
    return g;
}

double ssim_image(std::span<const double> a, std::span<const double> b, std::size_t h,
                  std::size_t w, std::size_t win, const std::vector<double>& g, double c1,
                  double c2) {
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t y0 = 0; y0 + win <= h; ++y0) {
        for (std::size_t x0 = 0; x0 + win <= w; ++x0) {
            double ma = 0, mb = 0, maa = 0, mbb = 0, mab = 0;
            for (std::size_t dy = 0; dy < win; ++dy) {
                for (std::size_t dx = 0; dx < win; ++dx) {
                    const double wt = g[dy] * g[dx];
                    const double va = a[(y0 + dy) * w + x0 + dx];
                    const double vb = b[(y0 + dy) * w + x0 + dx];
                    ma += wt * va;
                    mb += wt * vb;
                    maa += wt * va * va;
                    mbb += wt * vb * vb;
                    mab += wt * va * vb;
                }
            }
            const double va = maa - ma * ma;
            const double vb = mbb - mb * mb;
            const double cov = mab - ma * mb;
            total += ((2 * ma * mb + c1) * (2 * cov + c2)) /
                     ((ma * ma + mb * mb + c1) * (va + vb + c2));
            ++count;
        }
    }
    return total / static_cast<double>(count);
}

// Non-finite doubles are written as JSON null.
nlohmann::json finite_or_null(double v) {
    return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

double number_or(const nlohmann::json& j, const char* key, double if_null) {
    const auto& v = j.at(key);
    return v.is_null() ? if_null : v.get<double>();
}

std::string fmt_double(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

}  // namespace

Flicker temporal_flicker_breakdown(const Tensor& latents) {
    if (latents.rank() < 2) throw MetricError("temporal_flicker needs axes [n, w, ...]");
    const std::size_t n = latents.dim(0);
    const std::size_t w = latents.dim(1);
    if (n * w < 2) throw MetricError("temporal_flicker needs at least two frames");
    const std::size_t frame = latents.stride(1);
    FlickerSums sums;
    accumulate_flicker(latents.values(), n, w, frame, sums);
    return finish(sums, frame);
}

double temporal_flicker(const Tensor& latents) { return temporal_flicker_breakdown(latents).pooled; }

Flicker view_flicker(const Tensor& views) {
    if (views.rank() < 3) throw MetricError("view_flicker needs axes [K, n, w, ...]");
    const std::size_t n = views.dim(1);
    const std::size_t w = views.dim(2);
    if (n * w < 2) throw MetricError("temporal_flicker needs at least two frames");
    const std::size_t frame = views.stride(2);
    FlickerSums sums;
    for (std::size_t k = 0; k < views.dim(0); ++k) {
        accumulate_flicker(views.block({k}), n, w, frame, sums);
    }
    return finish(sums, frame);
}

double cross_view_inconsistency(const Tensor& views, const ViewGeometry& geometry) {
    geometry.validate();
    const std::size_t K = geometry.views();
    if (K < 2) throw MetricError("cross_view_inconsistency needs at least two views");
    if (views.rank() < 3 || views.dim(0) != K ||
        views.dim(views.rank() - 2) != geometry.view_height ||
        views.dim(views.rank() - 1) != geometry.view_width) {
        throw ShapeError("views " + shape_string(views.shape()) +
                         " do not match the view geometry");
    }
    const std::size_t hv = geometry.view_height;
    const std::size_t wv = geometry.view_width;
    const std::size_t hc = geometry.canonical_height;
    const std::size_t wc = geometry.canonical_width;
    const std::size_t image = hv * wv;
    const std::size_t slices = views.stride(0) / image;
    const auto coverage = geometry.coverage();

    std::vector<double> mean(hc * wc);
    double total = 0.0;
    std::size_t entries = 0;
    for (std::size_t m = 0; m < slices; ++m) {
        std::fill(mean.begin(), mean.end(), 0.0);
        for (std::size_t k = 0; k < K; ++k) {
            const ViewMap& map = geometry.maps[k];
            const auto img = views.block({k}).subspan(m * image, image);
            for (std::size_t y = 0; y < hv; ++y) {
                for (std::size_t x = 0; x < wv; ++x) {
                    mean[(y + map.row_offset) * wc + x + map.col_offset] += img[y * wv + x] / map.gain;
                }
            }
        }
        for (std::size_t p = 0; p < mean.size(); ++p) {
            if (coverage[p]) mean[p] /= static_cast<double>(coverage[p]);
        }
        for (std::size_t k = 0; k < K; ++k) {
            const ViewMap& map = geometry.maps[k];
            const auto img = views.block({k}).subspan(m * image, image);
            for (std::size_t y = 0; y < hv; ++y) {
                for (std::size_t x = 0; x < wv; ++x) {
                    const std::size_t p = (y + map.row_offset) * wc + x + map.col_offset;
                    if (coverage[p] < 2) continue;
                    const double d = img[y * wv + x] / map.gain - mean[p];
                    total += d * d;
                    ++entries;
                }
            }
        }
    }
    if (entries == 0) throw MetricError("no canonical pixel is observed by two views");
    return total / static_cast<double>(entries);
}

double psnr(const Tensor& a, const Tensor& b, double peak) {
    require_same_shape(a, b, "psnr");
    if (!(peak > 0.0)) throw ParameterError("psnr peak must be positive");
    const double mse =
        kernels::parallel::sum_squared_diff(a.values(), b.values()) / static_cast<double>(a.size());
    if (mse == 0.0) return kInfinitePsnr;
    return 10.0 * std::log10(peak * peak / mse);
}

double ssim(const Tensor& a, const Tensor& b, double peak, const SsimOptions& opt) {
    require_same_shape(a, b, "ssim");
    if (!(peak > 0.0)) throw ParameterError("ssim peak must be positive");
    if (a.rank() < 2) throw ShapeError("ssim needs at least two axes");
    if (opt.window == 0 || !(opt.sigma > 0.0)) throw ParameterError("invalid ssim window");
    const std::size_t h = a.dim(a.rank() - 2);
    const std::size_t w = a.dim(a.rank() - 1);
    std::size_t win = std::min({opt.window, h, w});
    if (win % 2 == 0) --win;
    const auto g = gaussian_window(win, opt.sigma);
    const double c1 = (opt.k1 * peak) * (opt.k1 * peak);
    const double c2 = (opt.k2 * peak) * (opt.k2 * peak);
    const std::size_t image = h * w;
    const std::size_t images = a.size() / image;
    double total = 0.0;
    for (std::size_t i = 0; i < images; ++i) {
        total += ssim_image(a.values().subspan(i * image, image),
                            b.values().subspan(i * image, image), h, w, win, g, c1, c2);
    }
    return total / static_cast<double>(images);
}

double pearson(const kernels::CrossMoments& m) {
    if (m.n < 2) throw MetricError("correlation needs at least two samples");
    const auto n = static_cast<double>(m.n);
    const double cov = m.sxy - m.sx * m.sy / n;
    const double vx = m.sxx - m.sx * m.sx / n;
    const double vy = m.syy - m.sy * m.sy / n;
    if (!(vx > 0.0) || !(vy > 0.0)) throw MetricError("degenerate variance in correlation");
    return cov / std::sqrt(vx * vy);
}

double empirical_correlation(const Tensor& noise, const PairSpec& p) {
    if (noise.rank() < 2) throw ShapeError("empirical_correlation needs axes [K, n, ...]");
    const auto a = noise.block({p.view_a, p.window_a});
    const auto b = noise.block({p.view_b, p.window_b});
    return pearson(kernels::parallel::cross_moments(a, b));
}

CorrelationAccumulator::CorrelationAccumulator(std::size_t views, std::size_t windows)
    : views_(views), windows_(windows), moments_(views * windows * views * windows) {
    if (views == 0 || windows == 0) throw ShapeError("accumulator needs views and windows");
}

void CorrelationAccumulator::add(const Tensor& noise) {
    if (noise.rank() < 2 || noise.dim(0) != views_ || noise.dim(1) != windows_) {
        throw ShapeError("noise tensor " + shape_string(noise.shape()) +
                         " does not match accumulator layout");
    }
    const std::size_t slots = views_ * windows_;
    for (std::size_t s = 0; s < slots; ++s) {
        const auto a = noise.block({s / windows_, s % windows_});
        for (std::size_t r = s; r < slots; ++r) {
            const auto b = noise.block({r / windows_, r % windows_});
            moments_[s * slots + r] += kernels::parallel::cross_moments(a, b);
        }
    }
}

std::size_t CorrelationAccumulator::samples_per_pair() const { return moments_.front().n; }

double CorrelationAccumulator::correlation(const PairSpec& p) const {
    if (p.view_a >= views_ || p.view_b >= views_ || p.window_a >= windows_ ||
        p.window_b >= windows_) {
        throw IndexError("correlation pair out of range");
    }
    std::size_t s = index(p.view_a, p.window_a);
    std::size_t r = index(p.view_b, p.window_b);
    if (r < s) std::swap(s, r);
    return pearson(moments_[s * views_ * windows_ + r]);
}

std::string MetricsReport::to_json() const {
    nlohmann::json j;
    j["iteration"] = iteration;
    j["omega"] = omega;
    j["temporal_flicker"] = temporal_flicker;
    j["flicker_intra"] = finite_or_null(flicker_intra);
    j["flicker_cross"] = finite_or_null(flicker_cross);
    j["cross_view_inconsistency"] = cross_view_inconsistency;
    j["psnr"] = finite_or_null(psnr);
    j["ssim"] = ssim;
    j["fit_residual_rms"] = fit_residual_rms;
    j["sample_count"] = sample_count;
    return j.dump();
}

MetricsReport MetricsReport::from_json(const std::string& line) {
    try {
        const auto j = nlohmann::json::parse(line);
        MetricsReport r;
        r.iteration = j.at("iteration").get<std::size_t>();
        r.omega = j.at("omega").get<double>();
        r.temporal_flicker = j.at("temporal_flicker").get<double>();
        const double nan = std::numeric_limits<double>::quiet_NaN();
        r.flicker_intra = number_or(j, "flicker_intra", nan);
        r.flicker_cross = number_or(j, "flicker_cross", nan);
        r.cross_view_inconsistency = j.at("cross_view_inconsistency").get<double>();
        r.psnr = number_or(j, "psnr", kInfinitePsnr);
        r.ssim = j.at("ssim").get<double>();
        r.fit_residual_rms = j.at("fit_residual_rms").get<double>();
        r.sample_count = j.at("sample_count").get<std::size_t>();
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("malformed metrics record: ") + e.what());
    }
}

std::string MetricsReport::csv_header() {
    return "iteration,omega,temporal_flicker,flicker_intra,flicker_cross,"
           "cross_view_inconsistency,psnr,ssim,fit_residual_rms,sample_count";
}

std::string MetricsReport::to_csv() const {
    std::ostringstream os;
    os << iteration << ',' << fmt_double(omega) << ',' << fmt_double(temporal_flicker) << ','
       << fmt_double(flicker_intra) << ',' << fmt_double(flicker_cross) << ','
       << fmt_double(cross_view_inconsistency) << ',' << fmt_double(psnr) << ','
       << fmt_double(ssim) << ',' << fmt_double(fit_residual_rms) << ',' << sample_count;
    return os.str();
}

}  // namespace psf4d::metrics
