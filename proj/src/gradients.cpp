#include "ngplus/gradients.hpp"

#include <cmath>
#include <string>

namespace ngplus {

Activation parse_activation(std::string_view name) {
  if (name == "identity" || name == "linear") return Activation::Identity;
  if (name == "relu") return Activation::Relu;
  if (name == "tanh") return Activation::Tanh;
  throw Error(Errc::InvalidArgument, "unknown activation '" + std::string(name) + "'");
}

Loss parse_loss(std::string_view name) {
  if (name == "mse") return Loss::Mse;
  if (name == "cross_entropy" || name == "cross-entropy" || name == "ce") return Loss::CrossEntropy;
  throw Error(Errc::UnsupportedLoss, "unknown loss '" + std::string(name) + "'");
}

const char* to_string(Activation a) {
  switch (a) {
    case Activation::Identity: return "identity";
    case Activation::Relu: return "relu";
    case Activation::Tanh: return "tanh";
  }
  return "?";
}

const char* to_string(Loss l) { return l == Loss::Mse ? "mse" : "cross_entropy"; }

Mat activate(Activation act, const Mat& z) {
  switch (act) {
    case Activation::Identity: return z;
    case Activation::Relu: return z.cwiseMax(0.0);
    case Activation::Tanh: return z.array().tanh().matrix();
  }
  return z;
}

Vec activate(Activation act, const Vec& z) { return activate(act, Mat(z)).col(0); }

Mat activation_derivative(Activation act, const Mat& z) {
  switch (act) {
    case Activation::Identity: return Mat::Ones(z.rows(), z.cols());
    // subgradient 0 at the kink
    case Activation::Relu: return z.unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; });
    case Activation::Tanh: return (1.0 - z.array().tanh().square()).matrix();
  }
  return Mat::Ones(z.rows(), z.cols());
}

ForwardResult forward(const Model& model, const Mat& inputs) {
  ForwardResult out;
  out.cache.layer_inputs.reserve(model.size());
  out.cache.pre_activations.reserve(model.size());
  Mat a = inputs;
  for (std::size_t l = 0; l < model.size(); ++l) {
    const FcLayer& layer = model[l];
    if (layer.in_dim() != a.rows()) {
      throw Error(Errc::DimensionMismatch, "layer " + std::to_string(l) + " expects " +
                                               std::to_string(layer.in_dim()) + " inputs, got " +
                                               std::to_string(a.rows()));
    }
    Mat z = layer.weight * a;
    if (layer.bias) {
      if (layer.bias->size() != layer.out_dim())
        throw Error(Errc::DimensionMismatch, "layer " + std::to_string(l) + " bias length");
      z.colwise() += *layer.bias;
    }
    out.cache.layer_inputs.push_back(std::move(a));
    a = activate(layer.activation, z);
    out.cache.pre_activations.push_back(std::move(z));
  }
  out.outputs = std::move(a);
  return out;
}

ForwardResult forward(const Model& model, const Batch& batch) { return forward(model, batch.inputs); }

namespace {

void check_targets(const Mat& outputs, const Batch& batch, Loss loss) {
  if (loss == Loss::Mse) {
    if (batch.targets.rows() != outputs.rows() || batch.targets.cols() != outputs.cols())
      throw Error(Errc::UnsupportedLoss, "mse loss needs targets shaped like the outputs");
  } else {
    if (static_cast<Index>(batch.labels.size()) != outputs.cols())
      throw Error(Errc::UnsupportedLoss, "cross-entropy loss needs one label per sample");
    for (int y : batch.labels)
      if (y < 0 || y >= outputs.rows())
        throw Error(Errc::InvalidArgument, "label " + std::to_string(y) + " out of range");
  }
}

// Column-wise log-sum-exp with max subtraction.
Vec log_sum_exp(const Mat& f) {
  Vec out(f.cols());
  for (Index i = 0; i < f.cols(); ++i) {
    const double mx = f.col(i).maxCoeff();
    out(i) = mx + std::log((f.col(i).array() - mx).exp().sum());
  }
  return out;
}

}  // namespace

Vec per_sample_losses(const Mat& outputs, const Batch& batch, Loss loss) {
  check_targets(outputs, batch, loss);
  if (loss == Loss::Mse) return 0.5 * (outputs - batch.targets).colwise().squaredNorm().transpose();
  Vec lse = log_sum_exp(outputs);
  for (Index i = 0; i < outputs.cols(); ++i) lse(i) -= outputs(batch.labels[static_cast<std::size_t>(i)], i);
  return lse;
}

double mean_loss(const Model& model, const Batch& batch, Loss loss) {
  if (batch.size() == 0) throw Error(Errc::EmptyBatch, "mean_loss on empty batch");
  return per_sample_losses(forward(model, batch).outputs, batch, loss).mean();
}

Mat output_sensitivity(const Mat& outputs, const Mat& last_pre_activation, Activation last_act,
                       const Batch& batch, Loss loss) {
  check_targets(outputs, batch, loss);
  Mat dout;
  if (loss == Loss::Mse) {
    dout = outputs - batch.targets;
  } else {
    const Vec lse = log_sum_exp(outputs);
    dout = (outputs.rowwise() - lse.transpose()).array().exp().matrix();
    for (Index i = 0; i < outputs.cols(); ++i) dout(batch.labels[static_cast<std::size_t>(i)], i) -= 1.0;
  }
  return dout.cwiseProduct(activation_derivative(last_act, last_pre_activation));
}

std::vector<LayerFactors> backward_per_sample(const Model& model, const Batch& batch, Loss loss,
                                              const ForwardResult& fwd) {
  if (model.empty()) return {};
  if (fwd.cache.layer_inputs.size() != model.size())
    throw Error(Errc::InvalidArgument, "forward cache does not match model");
  const Index bsz = batch.size();
  std::vector<LayerFactors> out(model.size());
  Mat delta = output_sensitivity(fwd.outputs, fwd.cache.pre_activations.back(), model.back().activation,
                                 batch, loss);
  for (std::size_t l = model.size(); l-- > 0;) {
    const Mat& a = fwd.cache.layer_inputs[l];
    LayerFactors& layer = out[l];
    layer.resize(static_cast<std::size_t>(bsz));
    for (Index i = 0; i < bsz; ++i) {
      PerSampleFactors& f = layer[static_cast<std::size_t>(i)];
      f.g = delta.col(i);
      f.a = a.col(i);
      f.sample_index = i;
    }
    if (l > 0) {
      delta = (model[l].weight.transpose() * delta)
                  .cwiseProduct(activation_derivative(model[l - 1].activation, fwd.cache.pre_activations[l - 1]));
    }
  }
  return out;
}

std::vector<LayerFactors> backward_per_sample(const Model& model, const Batch& batch, Loss loss) {
  return backward_per_sample(model, batch, loss, forward(model, batch));
}

Mat minibatch_gradient(std::span<const PerSampleFactors> factors) {
  if (factors.empty()) throw Error(Errc::EmptyBatch, "minibatch_gradient over zero samples");
  const Index m = factors.front().g.rows();
  const Index n = factors.front().a.rows();
  Mat sum = Mat::Zero(m, n);
  for (const auto& f : factors) {
    if (f.g.rows() != m || f.a.rows() != n || f.g.cols() != f.a.cols())
      throw Error(Errc::DimensionMismatch, "inconsistent per-sample factor shapes");
    sum.noalias() += f.g * f.a.transpose();
  }
  return sum / static_cast<double>(factors.size());
}

Vec minibatch_bias_gradient(std::span<const PerSampleFactors> factors) {
  if (factors.empty()) throw Error(Errc::EmptyBatch, "minibatch_bias_gradient over zero samples");
  Vec sum = Vec::Zero(factors.front().g.rows());
  for (const auto& f : factors) sum += f.g.rowwise().sum();
  return sum / static_cast<double>(factors.size());
}

ModelGradient model_gradient(const Model& model, const Batch& batch, Loss loss) {
  if (batch.size() == 0) throw Error(Errc::EmptyBatch, "model_gradient on empty batch");
  const ForwardResult fwd = forward(model, batch);
  const auto factors = backward_per_sample(model, batch, loss, fwd);
  ModelGradient grad;
  grad.loss = per_sample_losses(fwd.outputs, batch, loss).mean();
  for (std::size_t l = 0; l < model.size(); ++l) {
    grad.weights.push_back(minibatch_gradient(factors[l]));
    grad.biases.push_back(model[l].bias ? minibatch_bias_gradient(factors[l]) : Vec());
  }
  return grad;
}

ModelGradient full_gradient(const Model& model, const Batch& batch, Loss loss) {
  if (batch.size() == 0) throw Error(Errc::EmptyBatch, "full_gradient on empty batch");
  const ForwardResult fwd = forward(model, batch);
  ModelGradient grad;
  grad.loss = per_sample_losses(fwd.outputs, batch, loss).mean();
  grad.weights.resize(model.size());
  grad.biases.resize(model.size());
  const double inv = 1.0 / static_cast<double>(batch.size());
  Mat delta = output_sensitivity(fwd.outputs, fwd.cache.pre_activations.back(), model.back().activation, batch, loss);
  for (std::size_t l = model.size(); l-- > 0;) {
    grad.weights[l] = delta * fwd.cache.layer_inputs[l].transpose() * inv;
    grad.biases[l] = model[l].bias ? Vec(delta.rowwise().sum() * inv) : Vec();
    if (l > 0) {
      delta = (model[l].weight.transpose() * delta)
                  .cwiseProduct(activation_derivative(model[l - 1].activation, fwd.cache.pre_activations[l - 1]));
    }
  }
  return grad;
}

double finite_diff_check(const Model& model, const Batch& batch, Loss loss, double h) {
  if (!(h > 0)) throw Error(Errc::InvalidArgument, "finite_diff_check: step must be positive");
  const ModelGradient analytic = model_gradient(model, batch, loss);
  Model probe = model;
  double worst = 0;
  auto central = [&](double& slot) {
    const double saved = slot;
    slot = saved + h;
    const double up = mean_loss(probe, batch, loss);
    slot = saved - h;
    const double down = mean_loss(probe, batch, loss);
    slot = saved;
    return (up - down) / (2 * h);
  };
  for (std::size_t l = 0; l < probe.size(); ++l) {
    Mat& w = probe[l].weight;
    for (Index j = 0; j < w.cols(); ++j)
      for (Index i = 0; i < w.rows(); ++i)
        worst = std::max(worst, std::abs(analytic.weights[l](i, j) - central(w(i, j))));
    if (probe[l].bias) {
      Vec& b = *probe[l].bias;
      for (Index i = 0; i < b.size(); ++i)
        worst = std::max(worst, std::abs(analytic.biases[l](i) - central(b(i))));
    }
  }
  return worst;
}

Model make_mlp(std::span<const Index> dims, Activation hidden, Activation output, bool with_bias, Rng& rng) {
  if (dims.size() < 2) throw Error(Errc::InvalidArgument, "make_mlp needs at least input and output dims");
  Model model;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    FcLayer layer;
    layer.weight = rng.gaussian(dims[l + 1], dims[l]) / std::sqrt(static_cast<double>(dims[l]));
    if (with_bias) layer.bias = Vec::Zero(dims[l + 1]);
    layer.activation = (l + 2 == dims.size()) ? output : hidden;
    model.push_back(std::move(layer));
  }
  return model;
}

}  // namespace ngplus
