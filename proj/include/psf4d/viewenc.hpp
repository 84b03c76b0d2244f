#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "psf4d/tensor.hpp"

namespace psf4d::viewenc {

inline constexpr int kPoseWidth = 16;

/// Row-major flattened 4x4 world-to-camera matrix.
struct CameraPose {
    std::array<double, kPoseWidth> extrinsic{};

    static CameraPose identity();
    static CameraPose from_rigid(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation);
    /// Camera on a sphere of `radius` at (azimuth, elevation) looking at the origin.
    static CameraPose orbit(double azimuth, double elevation, double radius);

    Eigen::Matrix<double, kPoseWidth, 1> as_vector() const;
    /// Bottom row is (0, 0, 0, 1) within `tol`.
    bool has_rigid_bottom_row(double tol = 1e-9) const;
};

enum class Activation { identity, silu };

std::string to_string(Activation a);
Activation activation_from_string(std::string_view name);

double activate(Activation a, double x);
double activate_slope(Activation a, double x);

/// Upper bound on |activate_slope| over the real line. SiLU peaks at
/// about 1.0998 near x = 2.3994.
double max_slope(Activation a);

/// Two-layer perceptron from the 16 extrinsic values to a D_e-wide embedding:
///   out = W2 act(W1 x + b1) + b2
struct ViewEncoder {
    Eigen::MatrixXd w1;  ///< D_h x 16
    Eigen::VectorXd b1;  ///< D_h
    Eigen::MatrixXd w2;  ///< D_e x D_h
    Eigen::VectorXd b2;  ///< D_e
    Activation activation = Activation::silu;
    std::uint64_t init_seed = 0;

    int hidden_width() const { return static_cast<int>(w1.rows()); }
    int embed_width() const { return static_cast<int>(w2.rows()); }

    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases from a
    /// Philox stream keyed by `seed`.
    static ViewEncoder initialize(int hidden_width = 64, int embed_width = 64,
                                  Activation activation = Activation::silu,
                                  std::uint64_t seed = 0);
    static ViewEncoder zeros(int hidden_width = 64, int embed_width = 64,
                             Activation activation = Activation::silu);

    /// Throws ShapeError on inconsistent widths, ParameterError on non-finite
    /// parameters.
    void validate() const;
    std::size_t parameter_count() const;
};

/// Same layout as ViewEncoder's parameters.
struct EncoderGradient {
    Eigen::MatrixXd w1;
    Eigen::VectorXd b1;
    Eigen::MatrixXd w2;
    Eigen::VectorXd b2;
};

/// Intermediate values kept for the backward pass.
struct ForwardPass {
    Eigen::VectorXd input;
    Eigen::VectorXd pre_activation;
    Eigen::VectorXd hidden;
    Eigen::VectorXd output;
};

ForwardPass forward(const ViewEncoder& encoder, const CameraPose& pose);

Eigen::VectorXd encode_view(const ViewEncoder& encoder, const CameraPose& pose);

/// Parameter gradients of <upstream, output>.
EncoderGradient backward(const ViewEncoder& encoder, const ForwardPass& pass,
                         const Eigen::VectorXd& upstream);

/// Sinusoidal embedding: first half sin(t f_i), second half cos(t f_i) with
/// f_i = 10000^(-i / (width/2)). `width` must be even.
Eigen::VectorXd time_embedding(int t, int width);

/// time_embedding(t, width) + encode_view(encoder, pose).
Eigen::VectorXd combined_embedding(const ViewEncoder& encoder, const CameraPose& pose, int t,
                                   int width);

/// Mean squared error over all elements.
double diffusion_loss(const Tensor& predicted, const Tensor& target);

/// d loss / d predicted = 2 (predicted - target) / N.
Tensor diffusion_loss_gradient(const Tensor& predicted, const Tensor& target);

struct TrainingExample {
    CameraPose pose;
    Eigen::VectorXd target;
};

struct TrainingResult {
    ViewEncoder encoder;
    /// losses[s] is the full-batch loss before step s; the last entry is the
    /// loss after the final step.
    std::vector<double> losses;
};

/// Full-batch gradient descent on mean squared error between encode_view and
/// the targets. Throws DivergenceError carrying the step index on a
/// non-finite loss.
TrainingResult train_encoder_toy(const ViewEncoder& encoder,
                                 const std::vector<TrainingExample>& dataset, int steps,
                                 double learning_rate);

/// Full-batch loss and its gradient.
double training_loss(const ViewEncoder& encoder, const std::vector<TrainingExample>& dataset,
                     EncoderGradient* gradient = nullptr);

/// Writes manifest.json plus one tensor file per parameter into `dir`.
void save_encoder(const std::filesystem::path& dir, const ViewEncoder& encoder);
ViewEncoder load_encoder(const std::filesystem::path& dir);

}  // namespace psf4d::viewenc
