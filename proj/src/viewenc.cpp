#include "psf4d/viewenc.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "psf4d/error.hpp"
#include "psf4d/rng.hpp"
#include "psf4d/tensor_io.hpp"

namespace psf4d::viewenc {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Tensor matrix_to_tensor(const Eigen::MatrixXd& m) {
    Tensor t({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())});
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            t[static_cast<std::size_t>(r * m.cols() + c)] = m(r, c);
        }
    }
    return t;
}

Eigen::MatrixXd tensor_to_matrix(const Tensor& t, Eigen::Index rows, Eigen::Index cols) {
    if (t.shape() != Shape{static_cast<std::size_t>(rows), static_cast<std::size_t>(cols)}) {
        throw ShapeError("encoder parameter file has shape " + shape_string(t.shape()));
    }
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = t[static_cast<std::size_t>(r * cols + c)];
    }
    return m;
}

void fill_uniform(Eigen::Ref<Eigen::MatrixXd> m, double bound, std::uint64_t seed,
                  std::uint64_t stream) {
    std::uint64_t block = 0;
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            m(r, c) = bound * (2.0 * uniform01(seed, stream, block++) - 1.0);
        }
    }
}

}  // namespace

CameraPose CameraPose::identity() {
    CameraPose p;
    for (int i = 0; i < 4; ++i) p.extrinsic[i * 4 + i] = 1.0;
    return p;
}

CameraPose CameraPose::from_rigid(const Eigen::Matrix3d& rotation,
                                  const Eigen::Vector3d& translation) {
    CameraPose p;
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) p.extrinsic[r * 4 + c] = rotation(r, c);
        p.extrinsic[r * 4 + 3] = translation(r);
    }
    p.extrinsic[15] = 1.0;
    return p;
}

CameraPose CameraPose::orbit(double azimuth, double elevation, double radius) {
    const Eigen::Vector3d center(radius * std::cos(elevation) * std::cos(azimuth),
                                 radius * std::cos(elevation) * std::sin(azimuth),
                                 radius * std::sin(elevation));
    const Eigen::Vector3d forward = -center.normalized();
    Eigen::Vector3d up_hint = Eigen::Vector3d::UnitZ();
    if (std::abs(forward.dot(up_hint)) > 1.0 - 1e-9) up_hint = Eigen::Vector3d::UnitY();
    const Eigen::Vector3d right = forward.cross(up_hint).normalized();
    const Eigen::Vector3d up = right.cross(forward);
    Eigen::Matrix3d rot;
    rot.row(0) = right;
    rot.row(1) = up;
    rot.row(2) = -forward;
    return from_rigid(rot, -rot * center);
}

Eigen::Matrix<double, kPoseWidth, 1> CameraPose::as_vector() const {
    return Eigen::Map<const Eigen::Matrix<double, kPoseWidth, 1>>(extrinsic.data());
}

bool CameraPose::has_rigid_bottom_row(double tol) const {
    return std::abs(extrinsic[12]) <= tol && std::abs(extrinsic[13]) <= tol &&
           std::abs(extrinsic[14]) <= tol && std::abs(extrinsic[15] - 1.0) <= tol;
}

std::string to_string(Activation a) { return a == Activation::silu ? "silu" : "identity"; }

Activation activation_from_string(std::string_view name) {
    if (name == "silu") return Activation::silu;
    if (name == "identity") return Activation::identity;
    throw ParameterError("unknown activation '" + std::string(name) + "'");
}

double activate(Activation a, double x) {
    return a == Activation::silu ? x * sigmoid(x) : x;
}

double activate_slope(Activation a, double x) {
    if (a == Activation::identity) return 1.0;
    const double s = sigmoid(x);
    return s * (1.0 + x * (1.0 - s));
}

double max_slope(Activation a) { return a == Activation::silu ? 1.1 : 1.0; }

ViewEncoder ViewEncoder::initialize(int hidden_width, int embed_width, Activation activation,
                                    std::uint64_t seed) {
    ViewEncoder e = zeros(hidden_width, embed_width, activation);
    e.init_seed = seed;
    const double bound1 = 1.0 / std::sqrt(static_cast<double>(kPoseWidth));
    const double bound2 = 1.0 / std::sqrt(static_cast<double>(hidden_width));
    fill_uniform(e.w1, bound1, seed, 1);
    fill_uniform(e.b1, bound1, seed, 2);
    fill_uniform(e.w2, bound2, seed, 3);
    fill_uniform(e.b2, bound2, seed, 4);
    return e;
}

ViewEncoder ViewEncoder::zeros(int hidden_width, int embed_width, Activation activation) {
    if (hidden_width < 1 || embed_width < 1) {
        throw ShapeError("encoder widths must be positive");
    }
    ViewEncoder e;
    e.w1 = Eigen::MatrixXd::Zero(hidden_width, kPoseWidth);
    e.b1 = Eigen::VectorXd::Zero(hidden_width);
    e.w2 = Eigen::MatrixXd::Zero(embed_width, hidden_width);
    e.b2 = Eigen::VectorXd::Zero(embed_width);
    e.activation = activation;
    return e;
}

void ViewEncoder::validate() const {
    if (w1.cols() != kPoseWidth || b1.size() != w1.rows() || w2.cols() != w1.rows() ||
        b2.size() != w2.rows() || w1.rows() == 0 || w2.rows() == 0) {
        throw ShapeError("view encoder layer widths are inconsistent");
    }
    if (!w1.allFinite() || !b1.allFinite() || !w2.allFinite() || !b2.allFinite()) {
        throw ParameterError("view encoder has non-finite parameters");
    }
}

std::size_t ViewEncoder::parameter_count() const {
    return static_cast<std::size_t>(w1.size() + b1.size() + w2.size() + b2.size());
}

ForwardPass forward(const ViewEncoder& encoder, const CameraPose& pose) {
    encoder.validate();
    ForwardPass f;
    f.input = pose.as_vector();
    f.pre_activation = encoder.w1 * f.input + encoder.b1;
    f.hidden = f.pre_activation.unaryExpr(
        [a = encoder.activation](double x) { return activate(a, x); });
    f.output = encoder.w2 * f.hidden + encoder.b2;
    return f;
}

Eigen::VectorXd encode_view(const ViewEncoder& encoder, const CameraPose& pose) {
    return forward(encoder, pose).output;
}

EncoderGradient backward(const ViewEncoder& encoder, const ForwardPass& pass,
                         const Eigen::VectorXd& upstream) {
    if (upstream.size() != encoder.w2.rows()) {
        throw ShapeError("upstream gradient width does not match embedding width");
    }
    EncoderGradient g;
    g.b2 = upstream;
    g.w2 = upstream * pass.hidden.transpose();
    const Eigen::VectorXd slope = pass.pre_activation.unaryExpr(
        [a = encoder.activation](double x) { return activate_slope(a, x); });
    const Eigen::VectorXd d_pre = (encoder.w2.transpose() * upstream).cwiseProduct(slope);
    g.b1 = d_pre;
    g.w1 = d_pre * pass.input.transpose();
    return g;
}

Eigen::VectorXd time_embedding(int t, int width) {
    if (width < 2 || width % 2 != 0) {
        throw ShapeError("time embedding width must be a positive even number, got " +
                         std::to_string(width));
    }
    const int half = width / 2;
    Eigen::VectorXd e(width);
    for (int i = 0; i < half; ++i) {
        const double freq = std::exp(-std::log(10000.0) * i / half);
        e(i) = std::sin(t * freq);
        e(half + i) = std::cos(t * freq);
    }
    return e;
}

Eigen::VectorXd combined_embedding(const ViewEncoder& encoder, const CameraPose& pose, int t,
                                   int width) {
    if (width != encoder.embed_width()) {
        throw ShapeError("time embedding width " + std::to_string(width) +
                         " does not match encoder output width " +
                         std::to_string(encoder.embed_width()));
    }
    return time_embedding(t, width) + encode_view(encoder, pose);
}

double diffusion_loss(const Tensor& predicted, const Tensor& target) {
    require_same_shape(predicted, target, "diffusion_loss");
    double s = 0.0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        const double d = predicted[i] - target[i];
        s += d * d;
    }
    return s / static_cast<double>(predicted.size());
}

Tensor diffusion_loss_gradient(const Tensor& predicted, const Tensor& target) {
    require_same_shape(predicted, target, "diffusion_loss_gradient");
    Tensor g(predicted.shape());
    const double scale = 2.0 / static_cast<double>(predicted.size());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = scale * (predicted[i] - target[i]);
    return g;
}

double training_loss(const ViewEncoder& encoder, const std::vector<TrainingExample>& dataset,
                     EncoderGradient* gradient) {
    if (dataset.empty()) throw ParameterError("training dataset is empty");
    const auto n = static_cast<double>(dataset.size()) * encoder.embed_width();
    double loss = 0.0;
    if (gradient) {
        gradient->w1 = Eigen::MatrixXd::Zero(encoder.w1.rows(), encoder.w1.cols());
        gradient->b1 = Eigen::VectorXd::Zero(encoder.b1.size());
        gradient->w2 = Eigen::MatrixXd::Zero(encoder.w2.rows(), encoder.w2.cols());
        gradient->b2 = Eigen::VectorXd::Zero(encoder.b2.size());
    }
    for (const auto& ex : dataset) {
        if (ex.target.size() != encoder.embed_width()) {
            throw ShapeError("training target width does not match encoder output width");
        }
        const ForwardPass pass = forward(encoder, ex.pose);
        const Eigen::VectorXd diff = pass.output - ex.target;
        loss += diff.squaredNorm();
        if (gradient) {
            const EncoderGradient g = backward(encoder, pass, (2.0 / n) * diff);
            gradient->w1 += g.w1;
            gradient->b1 += g.b1;
            gradient->w2 += g.w2;
            gradient->b2 += g.b2;
        }
    }
    return loss / n;
}

TrainingResult train_encoder_toy(const ViewEncoder& encoder,
                                 const std::vector<TrainingExample>& dataset, int steps,
                                 double learning_rate) {
    if (dataset.empty()) throw ParameterError("training dataset is empty");
    if (steps < 0) throw ParameterError("training steps must be >= 0");
    TrainingResult result{encoder, {}};
    result.losses.reserve(static_cast<std::size_t>(steps) + 1);
    ViewEncoder& e = result.encoder;
    EncoderGradient g;
    for (int step = 0; step <= steps; ++step) {
        const double loss = training_loss(e, dataset, step < steps ? &g : nullptr);
        if (!std::isfinite(loss)) {
            throw DivergenceError(step, "training loss became non-finite at step " +
                                            std::to_string(step));
        }
        result.losses.push_back(loss);
        if (step == steps) break;
        e.w1 -= learning_rate * g.w1;
        e.b1 -= learning_rate * g.b1;
        e.w2 -= learning_rate * g.w2;
        e.b2 -= learning_rate * g.b2;
    }
    return result;
}

void save_encoder(const std::filesystem::path& dir, const ViewEncoder& encoder) {
    encoder.validate();
    std::filesystem::create_directories(dir);
    save_tensor(dir / "layer1_weight.psf4d", matrix_to_tensor(encoder.w1));
    save_tensor(dir / "layer1_bias.psf4d", matrix_to_tensor(encoder.b1));
    save_tensor(dir / "layer2_weight.psf4d", matrix_to_tensor(encoder.w2));
    save_tensor(dir / "layer2_bias.psf4d", matrix_to_tensor(encoder.b2));
    nlohmann::json j;
    j["input_width"] = kPoseWidth;
    j["hidden_width"] = encoder.hidden_width();
    j["embed_width"] = encoder.embed_width();
    j["activation"] = to_string(encoder.activation);
    j["init_seed"] = encoder.init_seed;
    j["files"] = {{"layer1_weight", "layer1_weight.psf4d"},
                  {"layer1_bias", "layer1_bias.psf4d"},
                  {"layer2_weight", "layer2_weight.psf4d"},
                  {"layer2_bias", "layer2_bias.psf4d"}};
    std::ofstream out(dir / "manifest.json");
    if (!out) throw IoError("cannot write encoder manifest in " + dir.string());
    out << j.dump(2) << '\n';
}

ViewEncoder load_encoder(const std::filesystem::path& dir) {
    std::ifstream in(dir / "manifest.json");
    if (!in) throw IoError("cannot read encoder manifest in " + dir.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
        if (j.at("input_width").get<int>() != kPoseWidth) {
            throw ShapeError("encoder manifest input width must be 16");
        }
        const int hidden = j.at("hidden_width").get<int>();
        const int embed = j.at("embed_width").get<int>();
        ViewEncoder e;
        e.activation = activation_from_string(j.at("activation").get<std::string>());
        e.init_seed = j.at("init_seed").get<std::uint64_t>();
        const auto& files = j.at("files");
        e.w1 = tensor_to_matrix(load_tensor(dir / files.at("layer1_weight").get<std::string>()),
                                hidden, kPoseWidth);
        e.b1 = tensor_to_matrix(load_tensor(dir / files.at("layer1_bias").get<std::string>()),
                                hidden, 1);
        e.w2 = tensor_to_matrix(load_tensor(dir / files.at("layer2_weight").get<std::string>()),
                                embed, hidden);
        e.b2 = tensor_to_matrix(load_tensor(dir / files.at("layer2_bias").get<std::string>()),
                                embed, 1);
        e.validate();
        return e;
    } catch (const nlohmann::json::exception& ex) {
        throw IoError(std::string("malformed encoder manifest: ") + ex.what());
    }
}

}  // namespace psf4d::viewenc
