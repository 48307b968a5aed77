#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "ngplus/linalg.hpp"
#include "ngplus/rng.hpp"

namespace ngplus {

enum class Activation { Identity, Relu, Tanh };
enum class Loss { Mse, CrossEntropy };

Activation parse_activation(std::string_view name);
Loss parse_loss(std::string_view name);
const char* to_string(Activation a);
const char* to_string(Loss l);

/// Fully-connected layer y = act(W x + b) with W of shape m x n.
struct FcLayer {
  Mat weight;
  std::optional<Vec> bias;
  Activation activation = Activation::Identity;

  Index out_dim() const { return weight.rows(); }
  Index in_dim() const { return weight.cols(); }
};

using Model = std::vector<FcLayer>;

/// Samples are stored column-wise.
struct Batch {
  Mat inputs;               // features x size
  Mat targets;              // outputs x size, for Loss::Mse
  std::vector<int> labels;  // for Loss::CrossEntropy

  Index size() const { return inputs.cols(); }
};

struct ForwardCache {
  std::vector<Mat> layer_inputs;     // a for each layer, n x batch
  std::vector<Mat> pre_activations;  // z = W a + b, m x batch
};

struct ForwardResult {
  Mat outputs;
  ForwardCache cache;
};

/// Factored per-sample weight gradient: dense gradient = g * a^T.
struct PerSampleFactors {
  Mat g;  // m x kappa
  Mat a;  // n x kappa
  Index sample_index = 0;

  Index kappa() const { return g.cols(); }
  Mat dense() const { return g * a.transpose(); }
};

using LayerFactors = std::vector<PerSampleFactors>;

struct ModelGradient {
  std::vector<Mat> weights;
  std::vector<Vec> biases;  // zero-length when the layer has no bias
  double loss = 0;
};

Vec activate(Activation act, const Vec& z);
Mat activate(Activation act, const Mat& z);
Mat activation_derivative(Activation act, const Mat& z);

ForwardResult forward(const Model& model, const Mat& inputs);
ForwardResult forward(const Model& model, const Batch& batch);

/// Per-sample losses psi_i; MSE is 0.5 * ||f - y||^2, cross-entropy is the
/// fused log-softmax negative log-likelihood.
Vec per_sample_losses(const Mat& outputs, const Batch& batch, Loss loss);
double mean_loss(const Model& model, const Batch& batch, Loss loss);

/// d psi_i / d z for the last layer's output (before the last activation).
Mat output_sensitivity(const Mat& outputs, const Mat& last_pre_activation, Activation last_act,
                       const Batch& batch, Loss loss);

/// Per layer, per sample: factors (g_i, a_i) with g_i a_i^T = d psi_i / d W.
std::vector<LayerFactors> backward_per_sample(const Model& model, const Batch& batch, Loss loss,
                                              const ForwardResult& fwd);
std::vector<LayerFactors> backward_per_sample(const Model& model, const Batch& batch, Loss loss);

/// (1/|B|) sum_i g_i a_i^T.
Mat minibatch_gradient(std::span<const PerSampleFactors> factors);
/// (1/|B|) sum_i g_i 1 (bias gradient for kappa = 1 layers).
Vec minibatch_bias_gradient(std::span<const PerSampleFactors> factors);

/// Mean gradient through the per-sample factors, the same arithmetic the
/// NG+ step uses.
ModelGradient model_gradient(const Model& model, const Batch& batch, Loss loss);
/// Mean gradient as delta * A^T / |B|, for full-dataset diagnostics.
ModelGradient full_gradient(const Model& model, const Batch& batch, Loss loss);

/// Max over all weights and biases of |analytic - central difference|.
double finite_diff_check(const Model& model, const Batch& batch, Loss loss, double h);

/// Layers sized dims[0] -> dims[1] -> ... ; weights ~ N(0, 1/fan_in).
Model make_mlp(std::span<const Index> dims, Activation hidden, Activation output, bool with_bias, Rng& rng);

}  // namespace ngplus
