#include "ngplus/optimizer.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace ngplus {

namespace {

void require_finite(double loss, std::int64_t iter) {
  if (!std::isfinite(loss))
    throw Error(Errc::NonFiniteLoss, "loss " + std::to_string(loss) + " at iteration " + std::to_string(iter));
}

double squared_norm(const ModelGradient& g) {
  double s = 0;
  for (const auto& w : g.weights) s += w.squaredNorm();
  for (const auto& b : g.biases) s += b.squaredNorm();
  return s;
}

}  // namespace

NgPlus::NgPlus(const Model& model, NgPlusConfig config) : config_(std::move(config)) {
  if (config_.freq < 0) throw Error(Errc::InvalidArgument, "freq must be >= 0");
  const double lambda0 = schedule_value(config_.damping, 0.0, 0);
  for (const auto& layer : model) {
    states_.emplace_back(layer.out_dim(), layer.in_dim(), config_.mode, config_.freq, lambda0);
  }
  spectrum_.resize(model.size());
}

StepReport NgPlus::step(Model& model, const Batch& batch, Loss loss, std::int64_t iter, double epoch) {
  return step(model, batch, loss, iter, epoch, nullptr);
}

StepReport NgPlus::step(Model& model, const Batch& batch, Loss loss, std::int64_t iter, double epoch,
                        const Batch* curvature_batch) {
  if (batch.size() == 0) throw Error(Errc::EmptyBatch, "NG+ step on an empty batch");
  if (model.size() != states_.size()) throw Error(Errc::InvalidArgument, "model does not match optimizer state");

  StepReport report;
  report.lr = schedule_value(config_.lr, epoch, iter);
  report.damping = schedule_value(config_.damping, epoch, iter);

  const ForwardResult fwd = forward(model, batch);
  report.loss = per_sample_losses(fwd.outputs, batch, loss).mean();
  require_finite(report.loss, iter);
  const auto factors = backward_per_sample(model, batch, loss, fwd);
  std::vector<LayerFactors> curvature_factors;
  if (curvature_batch != nullptr) curvature_factors = backward_per_sample(model, *curvature_batch, loss);

  std::vector<Mat> directions(model.size());
  std::vector<Vec> bias_grads(model.size());
  double grad_sq = 0;
  report.layers.resize(model.size());
  for (std::size_t l = 0; l < model.size(); ++l) {
    const Mat grad = minibatch_gradient(factors[l]);
    CurvatureState& state = states_[l];
    state.lambda = report.damping;
    const auto& samples = curvature_batch != nullptr ? curvature_factors[l] : factors[l];
    const bool refreshed = maybe_refresh(state, iter, RefreshInputs{samples, &grad});
    if (refreshed && config_.track_spectrum) {
      const Vec w = sym_eig(state.m).values;
      spectrum_[l].h1 = state.lambda + w(w.size() - 1);
      spectrum_[l].h2 = state.lambda + w(0);
    }
    directions[l] = compute_direction(grad, state, config_.path);
    LayerReport& layer_report = report.layers[l];
    layer_report = spectrum_[l];
    layer_report.refreshed = refreshed;
    layer_report.grad_norm = grad.norm();
    report.refreshed = report.refreshed || refreshed;
    grad_sq += grad.squaredNorm();
    if (model[l].bias) {
      bias_grads[l] = minibatch_bias_gradient(factors[l]);
      grad_sq += bias_grads[l].squaredNorm();
    }
  }
  report.grad_norm = std::sqrt(grad_sq);

  for (std::size_t l = 0; l < model.size(); ++l) {
    Mat& w = model[l].weight;
    if (config_.weight_decay > 0) w *= (1.0 - report.lr * config_.weight_decay);
    w += report.lr * directions[l];
    if (model[l].bias) *model[l].bias -= report.lr * bias_grads[l];
  }
  return report;
}

SgdMomentum::SgdMomentum(const Model& model, Schedule lr, double momentum, double weight_decay)
    : lr_(std::move(lr)),
      momentum_(momentum),
      weight_decay_(weight_decay),
      weight_velocity_(model.size()),
      bias_velocity_(model.size()) {}

StepReport SgdMomentum::step(Model& model, const Batch& batch, Loss loss, std::int64_t iter, double epoch) {
  StepReport report;
  report.lr = schedule_value(lr_, epoch, iter);
  const ModelGradient grad = model_gradient(model, batch, loss);
  report.loss = grad.loss;
  require_finite(report.loss, iter);
  report.grad_norm = std::sqrt(squared_norm(grad));
  for (std::size_t l = 0; l < model.size(); ++l) {
    if (weight_decay_ > 0) model[l].weight *= (1.0 - report.lr * weight_decay_);
    sgd_momentum_step(model[l].weight, grad.weights[l], weight_velocity_[l], report.lr, momentum_);
    if (model[l].bias) sgd_momentum_step(*model[l].bias, grad.biases[l], bias_velocity_[l], report.lr, momentum_);
  }
  return report;
}

Adam::Adam(const Model& model, Schedule lr, AdamHyper hyper)
    : lr_(std::move(lr)), hyper_(hyper), weights_(model.size()), biases_(model.size()) {}

StepReport Adam::step(Model& model, const Batch& batch, Loss loss, std::int64_t iter, double epoch) {
  StepReport report;
  AdamHyper h = hyper_;
  h.lr = report.lr = schedule_value(lr_, epoch, iter);
  const ModelGradient grad = model_gradient(model, batch, loss);
  report.loss = grad.loss;
  require_finite(report.loss, iter);
  report.grad_norm = std::sqrt(squared_norm(grad));
  for (std::size_t l = 0; l < model.size(); ++l) {
    adam_step(model[l].weight, grad.weights[l], weights_[l], h);
    if (model[l].bias) adam_step(*model[l].bias, grad.biases[l], biases_[l], h);
  }
  return report;
}

namespace {

std::vector<Index> log_spaced(Index lo, Index hi, int per_decade) {
  std::vector<Index> out;
  if (lo < 1) lo = 1;
  if (hi < lo) return out;
  const double step = 1.0 / per_decade;
  for (double e = std::log10(static_cast<double>(lo));; e += step) {
    Index t = static_cast<Index>(std::llround(std::pow(10.0, e)));
    t = std::min(std::max(t, lo), hi);
    if (out.empty() || t > out.back()) out.push_back(t);
    if (t >= hi) break;
  }
  if (out.back() != hi) out.push_back(hi);
  return out;
}

}  // namespace

EnvelopeReport convergence_probe(std::span<const double> trace, const EnvelopeOptions& opts) {
  const Index total = static_cast<Index>(trace.size());
  if (opts.check_at > total || opts.fit_until > opts.check_at || opts.burn_in > opts.fit_until || opts.burn_in < 1)
    throw Error(Errc::InvalidArgument, "convergence probe: need 1 <= burn_in <= fit_until <= check_at <= trace length");

  std::vector<double> prefix(static_cast<std::size_t>(total) + 1, 0.0);
  for (Index k = 0; k < total; ++k) prefix[static_cast<std::size_t>(k) + 1] = prefix[static_cast<std::size_t>(k)] + trace[static_cast<std::size_t>(k)];
  auto avg = [&](Index t) { return prefix[static_cast<std::size_t>(t)] / static_cast<double>(t); };

  EnvelopeReport rep;
  rep.checkpoints = log_spaced(opts.burn_in, opts.check_at, opts.checkpoints_per_decade);
  for (Index t : rep.checkpoints) rep.running_average.push_back(avg(t));
  for (std::size_t i = 1; i < rep.checkpoints.size(); ++i)
    if (rep.running_average[i] > rep.running_average[i - 1]) rep.monotone_after_burn_in = false;

  // Least squares on the two-term basis, falling back to the better single
  // term when a coefficient comes out negative.
  std::vector<Index> fit_pts;
  for (Index t : rep.checkpoints)
    if (t <= opts.fit_until) fit_pts.push_back(t);
  const Index k = static_cast<Index>(fit_pts.size());
  Mat basis(k, 2);
  Vec target(k);
  for (Index i = 0; i < k; ++i) {
    const double t = static_cast<double>(fit_pts[static_cast<std::size_t>(i)]);
    basis(i, 0) = 1.0 / t;
    basis(i, 1) = std::pow(t, -opts.beta);
    target(i) = avg(fit_pts[static_cast<std::size_t>(i)]);
  }
  Vec coef = basis.colPivHouseholderQr().solve(target);
  if (coef(0) < 0 || coef(1) < 0) {
    Vec best = Vec::Zero(2);
    double best_res = std::numeric_limits<double>::infinity();
    for (int j = 0; j < 2; ++j) {
      const double denom = basis.col(j).squaredNorm();
      const double c = std::max(0.0, basis.col(j).dot(target) / denom);
      const double res = (target - c * basis.col(j)).squaredNorm();
      if (res < best_res) {
        best_res = res;
        best = Vec::Zero(2);
        best(j) = c;
      }
    }
    coef = best;
  }
  const Vec fitted = basis * coef;
  double scale = 1.0;
  for (Index i = 0; i < k; ++i) {
    if (target(i) > 0) scale = std::max(scale, fitted(i) > 0 ? target(i) / fitted(i) : std::numeric_limits<double>::infinity());
  }
  if (!std::isfinite(scale)) {
    // Nothing fitted but positive data: dominate with the T^-beta term alone.
    coef = Vec::Zero(2);
    for (Index i = 0; i < k; ++i) coef(1) = std::max(coef(1), target(i) / basis(i, 1));
    scale = 1.0;
  }
  rep.c1 = scale * coef(0);
  rep.c2 = scale * coef(1);

  const double tc = static_cast<double>(opts.check_at);
  rep.average_at_check = avg(opts.check_at);
  rep.envelope_at_check = rep.c1 / tc + rep.c2 * std::pow(tc, -opts.beta);
  rep.within_envelope = rep.average_at_check <= rep.envelope_at_check;

  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < rep.checkpoints.size(); ++i) {
    if (rep.checkpoints[i] >= opts.fit_until && rep.running_average[i] > 0) {
      xs.push_back(std::log(static_cast<double>(rep.checkpoints[i])));
      ys.push_back(std::log(rep.running_average[i]));
    }
  }
  if (xs.size() >= 2) {
    const double n = static_cast<double>(xs.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      sx += xs[i];
      sy += ys[i];
      sxx += xs[i] * xs[i];
      sxy += xs[i] * ys[i];
    }
    rep.fitted_exponent = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  }
  return rep;
}

}  // namespace ngplus
