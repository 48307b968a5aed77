#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "ngplus/curvature.hpp"
#include "ngplus/direction.hpp"
#include "ngplus/gradients.hpp"
#include "ngplus/schedule.hpp"

namespace ngplus {

struct NgPlusConfig {
  Schedule lr = constant(0.1);
  Schedule damping = Schedule{GeometricSchedule{}};
  int freq = 10;  // 0 never refreshes
  CurvatureMode mode = Subsampled{};
  SolverPath path = DensePath{};
  double weight_decay = 0;     // decoupled
  bool track_spectrum = false; // log h1, h2 of lambda I + M at refreshes
};

struct LayerReport {
  bool refreshed = false;
  double grad_norm = 0;
  double h1 = 0;  // smallest eigenvalue of lambda I + M at the last tracked refresh
  double h2 = 0;  // largest
};

struct StepReport {
  double loss = 0;
  double grad_norm = 0;  // over all weights and biases
  double lr = 0;
  double damping = 0;
  bool refreshed = false;
  std::vector<LayerReport> layers;
};

class Optimizer {
 public:
  virtual ~Optimizer() = default;
  /// One update on `batch`, evaluated at the model's current parameters.
  virtual StepReport step(Model& model, const Batch& batch, Loss loss, std::int64_t iter, double epoch) = 0;
};

/// Per-layer generalized natural gradient with lazy curvature refresh.
/// Biases follow plain SGD.
class NgPlus : public Optimizer {
 public:
  NgPlus(const Model& model, NgPlusConfig config);

  StepReport step(Model& model, const Batch& batch, Loss loss, std::int64_t iter, double epoch) override;
  /// As step(), with curvature built from a separate sample set S_k.
  StepReport step(Model& model, const Batch& batch, Loss loss, std::int64_t iter, double epoch,
                  const Batch* curvature_batch);

  const std::vector<CurvatureState>& states() const { return states_; }
  const NgPlusConfig& config() const { return config_; }

 private:
  NgPlusConfig config_;
  std::vector<CurvatureState> states_;
  std::vector<LayerReport> spectrum_;
};

/// v <- momentum v + g; p <- p - lr v.
template <typename T>
void sgd_momentum_step(T& param, const T& grad, T& velocity, double lr, double momentum) {
  if (velocity.size() == 0) velocity = T::Zero(grad.rows(), grad.cols());
  velocity = momentum * velocity + grad;
  param -= lr * velocity;
}

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
struct AdamMoments {
  T first;
  T second;
  std::int64_t t = 0;
};

/// Bias-corrected Adam: p <- p - lr m_hat / (sqrt(v_hat) + eps).
template <typename T>
void adam_step(T& param, const T& grad, AdamMoments<T>& st, const AdamHyper& h) {
  if (st.first.size() == 0) {
    st.first = T::Zero(grad.rows(), grad.cols());
    st.second = T::Zero(grad.rows(), grad.cols());
  }
  ++st.t;
  st.first = h.beta1 * st.first + (1 - h.beta1) * grad;
  st.second = h.beta2 * st.second + (1 - h.beta2) * grad.cwiseAbs2();
  const double c1 = 1 - std::pow(h.beta1, static_cast<double>(st.t));
  const double c2 = 1 - std::pow(h.beta2, static_cast<double>(st.t));
  param.array() -= h.lr * (st.first.array() / c1) / ((st.second.array() / c2).sqrt() + h.eps);
}

class SgdMomentum : public Optimizer {
 public:
  SgdMomentum(const Model& model, Schedule lr, double momentum, double weight_decay = 0);
  StepReport step(Model& model, const Batch& batch, Loss loss, std::int64_t iter, double epoch) override;

 private:
  Schedule lr_;
  double momentum_;
  double weight_decay_;
  std::vector<Mat> weight_velocity_;
  std::vector<Vec> bias_velocity_;
};

class Adam : public Optimizer {
 public:
  Adam(const Model& model, Schedule lr, AdamHyper hyper);
  StepReport step(Model& model, const Batch& batch, Loss loss, std::int64_t iter, double epoch) override;

 private:
  Schedule lr_;
  AdamHyper hyper_;
  std::vector<AdamMoments<Mat>> weights_;
  std::vector<AdamMoments<Vec>> biases_;
};

struct EnvelopeOptions {
  double beta = 0.7;
  Index burn_in = 100;
  Index fit_until = 1000;
  Index check_at = 10000;
  int checkpoints_per_decade = 10;
};

struct EnvelopeReport {
  std::vector<Index> checkpoints;
  std::vector<double> running_average;
  double c1 = 0;
  double c2 = 0;
  double fitted_exponent = 0;  // slope of log average vs log T over [fit_until, check_at]
  double average_at_check = 0;
  double envelope_at_check = 0;
  bool monotone_after_burn_in = true;  // across checkpoints
  bool within_envelope = true;
};

/// Running averages (1/T) sum_{k<=T} trace_k at log-spaced checkpoints, an
/// envelope C1/T + C2 T^-beta fitted on [burn_in, fit_until] and scaled to
/// dominate every fitted checkpoint, and the check at check_at.
EnvelopeReport convergence_probe(std::span<const double> trace, const EnvelopeOptions& opts);

}  // namespace ngplus
