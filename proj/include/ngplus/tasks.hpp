#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "ngplus/config.hpp"
#include "ngplus/metrics.hpp"
#include "ngplus/optimizer.hpp"

namespace ngplus {

std::unique_ptr<Optimizer> make_optimizer(const OptimizerConfig& cfg, const Model& model, double run_epochs,
                                          std::uint64_t seed);

SyntheticData make_dataset(const DatasetConfig& cfg, std::uint64_t seed);

struct TrainResult {
  double initial_loss = 0;                // full training loss before the first step
  std::vector<double> epoch_train_loss;   // full training loss after each epoch
  std::vector<double> epoch_accuracy;     // train accuracy after each epoch (classification)
  std::optional<double> test_accuracy;
  std::optional<double> test_loss;
  Model model;
};

/// Mini-batch training of an MLP on the configured dataset. Writes one
/// metrics row per iteration when `metrics` is given.
TrainResult run_training(const RunConfig& cfg, MetricsWriter* metrics = nullptr);

struct ConvergenceResult {
  std::vector<double> objective;  // Psi(Theta_k), k = 0..T-1
  std::vector<double> grad_sq;    // ||grad Psi(Theta_k)||^2
  std::optional<EnvelopeReport> envelope;  // logistic
  double lr = 0;
  double lipschitz = 0;           // quadratic: largest eigenvalue of the Hessian
  double min_step_bound = 0;      // quadratic: min over refreshes of 2 h1^2 / (L h2)
  Index increases = 0;            // quadratic: steps with Psi_{k+1} > Psi_k (1e-12 relative slack)
};

/// Logistic: 2-class softmax regression with poly-decay NG+ on mini-batches.
/// Quadratic: full-batch least squares with a constant step.
ConvergenceResult run_convergence(const ConvergenceConfig& cfg, std::uint64_t seed, MetricsWriter* metrics = nullptr);

struct GradcheckResult {
  std::vector<double> aggregate;   // max |analytic - central difference| per trial
  std::vector<double> per_sample;  // same, for the per-sample factors g_i a_i^T
};

GradcheckResult run_gradcheck(const GradcheckConfig& cfg, std::uint64_t seed);

/// Runs the configured task, writing metrics.csv, summary.txt (and diff.csv
/// for gfim-study) under cfg.output_dir. Returns 0 when every check passes
/// and 1 otherwise. Config and IO errors propagate.
int run_task(const RunConfig& cfg);

}  // namespace ngplus
