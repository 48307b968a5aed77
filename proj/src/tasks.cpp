#include "ngplus/tasks.hpp"

#include <array>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <string>

#include "ngplus/curvature.hpp"
#include "ngplus/online.hpp"
#include "ngplus/rng.hpp"

namespace ngplus {

namespace {

bool is_config_error(Errc c) {
  switch (c) {
    case Errc::ParseError:
    case Errc::UnknownKey:
    case Errc::TypeError:
    case Errc::MissingRequired:
    case Errc::IoError:
    case Errc::InvalidSpec:
    case Errc::RaggedRow:
    case Errc::UnsupportedLoss:
      return true;
    default:
      return false;
  }
}

std::vector<Index> iota_indices(Index n) {
  std::vector<Index> v(static_cast<std::size_t>(n));
  std::iota(v.begin(), v.end(), Index{0});
  return v;
}

// Fisher-Yates on our own engine so the order is identical across standard libraries.
void shuffle(std::vector<Index>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[static_cast<std::size_t>(rng.index(static_cast<Index>(i)))]);
}

double accuracy(const Model& model, const Dataset& data) {
  const Mat out = forward(model, data.features).outputs;
  Index hits = 0;
  for (Index i = 0; i < out.cols(); ++i) {
    Index arg = 0;
    out.col(i).maxCoeff(&arg);
    if (arg == data.labels[static_cast<std::size_t>(i)]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(out.cols());
}

class Stopwatch {
 public:
  explicit Stopwatch(bool enabled) : enabled_(enabled), start_(std::chrono::steady_clock::now()) {}
  std::int64_t ms() const {
    if (!enabled_) return 0;
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  bool enabled_;
  std::chrono::steady_clock::time_point start_;
};

std::string sci(double v) { return format_double(v); }

}  // namespace

std::unique_ptr<Optimizer> make_optimizer(const OptimizerConfig& cfg, const Model& model, double run_epochs,
                                          std::uint64_t seed) {
  if (cfg.name == "ngplus") return std::make_unique<NgPlus>(model, cfg.ngplus(run_epochs, seed));
  if (cfg.name == "sgd") return std::make_unique<SgdMomentum>(model, cfg.lr_sched(run_epochs), cfg.momentum, cfg.weight_decay);
  if (cfg.name == "adam")
    return std::make_unique<Adam>(model, cfg.lr_sched(run_epochs), AdamHyper{cfg.lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps});
  throw Error(Errc::TypeError, "optimizer '" + cfg.name + "'");
}

SyntheticData make_dataset(const DatasetConfig& cfg, std::uint64_t seed) {
  if (cfg.kind == "gaussian-mixture")
    return gen_synthetic(GaussianMixtureSpec{cfg.classes, cfg.dim, cfg.samples, cfg.separation}, seed);
  if (cfg.kind == "linear-regression")
    return gen_synthetic(LinearRegressionSpec{cfg.dim, cfg.outputs, cfg.samples, cfg.noise}, seed);
  if (cfg.kind == "csv") return SyntheticData{load_csv(cfg.path), Mat()};
  throw Error(Errc::TypeError, "dataset kind '" + cfg.kind + "'");
}

TrainResult run_training(const RunConfig& cfg, MetricsWriter* metrics) {
  const auto [train, test] = split_train_test(make_dataset(cfg.dataset, cfg.seed).data);
  if (train.size() == 0) throw Error(Errc::InvalidSpec, "training split is empty");
  const Loss loss = parse_loss(cfg.model.loss);
  if (loss == Loss::CrossEntropy && !train.is_classification())
    throw Error(Errc::UnsupportedLoss, "cross-entropy needs a classification dataset");
  if (loss == Loss::Mse && train.is_classification())
    throw Error(Errc::UnsupportedLoss, "mse needs a regression dataset");
  if (cfg.epochs < 1) throw Error(Errc::InvalidSpec, "epochs must be >= 1");
  if (cfg.optimizer.batch_size < 1) throw Error(Errc::InvalidSpec, "batch_size must be >= 1");

  std::vector<Index> dims{train.dim()};
  dims.insert(dims.end(), cfg.model.hidden.begin(), cfg.model.hidden.end());
  dims.push_back(train.is_classification() ? train.classes : train.targets.rows());
  Rng init(cfg.seed, Stream::Init);
  TrainResult res;
  res.model = make_mlp(dims, parse_activation(cfg.model.activation), Activation::Identity, cfg.model.bias, init);
  Model& model = res.model;

  const double epochs = cfg.epochs;
  auto opt = make_optimizer(cfg.optimizer, model, epochs, cfg.seed);
  auto* ngplus = dynamic_cast<NgPlus*>(opt.get());

  const Batch full = full_batch(train);
  res.initial_loss = mean_loss(model, full, loss);
  const Index n = train.size();
  const Index bsz = std::min(cfg.optimizer.batch_size, n);
  const Index per_epoch = (n + bsz - 1) / bsz;
  Rng shuffler(cfg.seed, Stream::Shuffle);
  Rng curvature_rng(cfg.seed, Stream::Curvature);
  std::vector<Index> order = iota_indices(n);
  const Stopwatch clock(cfg.record_wall_time);

  for (int e = 0; e < cfg.epochs; ++e) {
    shuffle(order, shuffler);
    for (Index b = 0; b < per_epoch; ++b) {
      const std::int64_t iter = static_cast<std::int64_t>(e) * per_epoch + b;
      const double epoch = static_cast<double>(iter) / static_cast<double>(per_epoch);
      const Index lo = b * bsz;
      const Index hi = std::min(n, lo + bsz);
      const Batch batch = make_batch(train, std::span<const Index>(order).subspan(static_cast<std::size_t>(lo), static_cast<std::size_t>(hi - lo)));
      StepReport rep;
      if (ngplus != nullptr && cfg.optimizer.curvature_samples > 0) {
        std::vector<Index> s(static_cast<std::size_t>(cfg.optimizer.curvature_samples));
        for (auto& i : s) i = curvature_rng.index(n);
        const Batch sk = make_batch(train, s);
        rep = ngplus->step(model, batch, loss, iter, epoch, &sk);
      } else {
        rep = opt->step(model, batch, loss, iter, epoch);
      }
      MetricsRow row{iter, epoch, rep.loss, rep.grad_norm, rep.lr, rep.damping, std::nullopt, clock.ms()};
      if (b + 1 == per_epoch) {
        res.epoch_train_loss.push_back(mean_loss(model, full, loss));
        if (train.is_classification()) {
          res.epoch_accuracy.push_back(accuracy(model, train));
          row.accuracy = res.epoch_accuracy.back();
        }
      }
      if (metrics != nullptr) metrics->write(row);
    }
  }
  if (test.size() > 0) {
    res.test_loss = mean_loss(model, full_batch(test), loss);
    if (test.is_classification()) res.test_accuracy = accuracy(model, test);
  }
  return res;
}

ConvergenceResult run_convergence(const ConvergenceConfig& cfg, std::uint64_t seed, MetricsWriter* metrics) {
  if (cfg.iterations < 1 || cfg.samples < 1 || cfg.dim < 1 || cfg.batch < 1)
    throw Error(Errc::InvalidSpec, "convergence sizes must be >= 1");
  ConvergenceResult res;
  const Index T = cfg.iterations;
  Rng init(seed, Stream::Init);
  const bool logistic = cfg.problem == "logistic";
  const double damping = cfg.damping > 0 ? cfg.damping : (logistic ? 0.1 : 10.0);

  if (logistic) {
    const Dataset data = gen_synthetic(GaussianMixtureSpec{2, cfg.dim, cfg.samples, cfg.separation}, seed).data;
    const Batch full = full_batch(data);
    const std::array<Index, 2> dims{cfg.dim, 2};
    Model model = make_mlp(dims, Activation::Identity, Activation::Identity, false, init);
    NgPlusConfig nc;
    nc.lr = Schedule{PolyDecaySchedule{cfg.c, cfg.beta}};
    nc.damping = constant(damping);
    nc.freq = cfg.freq;
    NgPlus opt(model, nc);
    Rng sampler(seed, Stream::Shuffle);
    std::vector<Index> idx(static_cast<std::size_t>(cfg.batch));
    for (Index k = 0; k < T; ++k) {
      const ModelGradient g = full_gradient(model, full, Loss::CrossEntropy);
      res.objective.push_back(g.loss);
      res.grad_sq.push_back(g.weights[0].squaredNorm());
      for (auto& i : idx) i = sampler.index(data.size());
      const double epoch = static_cast<double>(k * cfg.batch) / static_cast<double>(data.size());
      const StepReport rep = opt.step(model, make_batch(data, idx), Loss::CrossEntropy, k, epoch);
      if (metrics != nullptr)
        metrics->write({k, epoch, g.loss, std::sqrt(res.grad_sq.back()), rep.lr, rep.damping, std::nullopt, 0});
    }
    res.lr = cfg.c;
    EnvelopeOptions eo;
    eo.beta = cfg.beta;
    eo.burn_in = cfg.burn_in;
    eo.fit_until = cfg.fit_until;
    eo.check_at = T;
    res.envelope = convergence_probe(res.grad_sq, eo);
    return res;
  }

  // Quadratic: Psi(W) = (1/N) sum 0.5 ||W x_i - y_i||^2, Hessian X X^T / N per output row.
  const Dataset data = gen_synthetic(LinearRegressionSpec{cfg.dim, cfg.outputs, cfg.samples, 0.1}, seed).data;
  const Batch full = full_batch(data);
  const std::array<Index, 2> dims{cfg.dim, cfg.outputs};
  Model model = make_mlp(dims, Activation::Identity, Activation::Identity, false, init);
  const Mat hess = data.features * data.features.transpose() / static_cast<double>(data.size());
  res.lipschitz = sym_eig(hess).values(0);

  NgPlusConfig nc;
  nc.damping = constant(damping);
  nc.freq = cfg.freq;
  nc.track_spectrum = true;
  if (cfg.lr > 0) {
    res.lr = cfg.lr;
  } else {
    // lambda^2 / (L h2(0)): half the sufficient-decrease step with h1 >= lambda.
    const auto factors = backward_per_sample(model, full, Loss::Mse);
    const Mat m0 = build_subsampled(factors[0], choose_side(cfg.outputs, cfg.dim));
    const double h2 = damping + sym_eig(m0).values(0);
    res.lr = damping * damping / (res.lipschitz * h2);
  }
  nc.lr = constant(res.lr);
  NgPlus opt(model, nc);
  res.min_step_bound = std::numeric_limits<double>::infinity();
  for (Index k = 0; k < T; ++k) {
    const StepReport rep = opt.step(model, full, Loss::Mse, k, static_cast<double>(k));
    const double gn = rep.grad_norm;
    res.objective.push_back(rep.loss);
    res.grad_sq.push_back(gn * gn);
    if (rep.refreshed) {
      const LayerReport& layer = rep.layers[0];
      res.min_step_bound = std::min(res.min_step_bound, 2 * layer.h1 * layer.h1 / (res.lipschitz * layer.h2));
    }
    if (metrics != nullptr) metrics->write({k, static_cast<double>(k), rep.loss, gn, rep.lr, rep.damping, std::nullopt, 0});
  }
  res.objective.push_back(mean_loss(model, full, Loss::Mse));
  for (std::size_t k = 0; k + 1 < res.objective.size(); ++k)
    if (res.objective[k + 1] > res.objective[k] + 1e-12 * std::abs(res.objective[k])) ++res.increases;
  return res;
}

GradcheckResult run_gradcheck(const GradcheckConfig& cfg, std::uint64_t seed) {
  if (cfg.trials < 1 || cfg.samples < 1) throw Error(Errc::InvalidSpec, "gradcheck needs trials and samples >= 1");
  const Loss loss = parse_loss(cfg.loss);
  const Activation act = parse_activation(cfg.activation);
  Rng init(seed, Stream::Init);
  Rng data(seed, Stream::Data);
  GradcheckResult res;
  const std::array<Index, 3> dims{cfg.input_dim, cfg.hidden, cfg.outputs};
  for (int t = 0; t < cfg.trials; ++t) {
    const Model model = make_mlp(dims, act, Activation::Identity, true, init);
    Batch batch;
    batch.inputs = data.gaussian(cfg.input_dim, cfg.samples);
    batch.targets = data.gaussian(cfg.outputs, cfg.samples);
    for (Index i = 0; i < cfg.samples; ++i) batch.labels.push_back(static_cast<int>(data.index(cfg.outputs)));
    res.aggregate.push_back(finite_diff_check(model, batch, loss, cfg.step));

    // Each factor pair g_i a_i^T against central differences of psi_i alone.
    const auto factors = backward_per_sample(model, batch, loss);
    double worst = 0;
    for (Index i = 0; i < cfg.samples; ++i) {
      Batch single;
      single.inputs = batch.inputs.col(i);
      single.targets = batch.targets.col(i);
      single.labels = {batch.labels[static_cast<std::size_t>(i)]};
      Model probe = model;
      for (std::size_t l = 0; l < probe.size(); ++l) {
        const Mat dense = factors[l][static_cast<std::size_t>(i)].dense();
        Mat& w = probe[l].weight;
        for (Index c = 0; c < w.cols(); ++c) {
          for (Index r = 0; r < w.rows(); ++r) {
            const double saved = w(r, c);
            w(r, c) = saved + cfg.step;
            const double up = mean_loss(probe, single, loss);
            w(r, c) = saved - cfg.step;
            const double down = mean_loss(probe, single, loss);
            w(r, c) = saved;
            worst = std::max(worst, std::abs(dense(r, c) - (up - down) / (2 * cfg.step)));
          }
        }
      }
    }
    res.per_sample.push_back(worst);
  }
  return res;
}

namespace {

double max_of(const std::vector<double>& v) {
  double m = 0;
  for (double x : v) m = std::max(m, x);
  return m;
}

void train_task(const RunConfig& cfg, MetricsWriter& metrics, Summary& summary) {
  const TrainResult r = run_training(cfg, &metrics);
  summary.add("optimizer", cfg.optimizer.name);
  summary.add("epochs", std::to_string(cfg.epochs));
  summary.add("initial_loss", r.initial_loss);
  summary.add("final_train_loss", r.epoch_train_loss.back());
  if (!r.epoch_accuracy.empty()) summary.add("final_train_accuracy", r.epoch_accuracy.back());
  if (r.test_loss) summary.add("test_loss", *r.test_loss);
  if (r.test_accuracy) summary.add("test_accuracy", *r.test_accuracy);
  summary.check("loss_decreased", r.epoch_train_loss.back() < r.initial_loss,
                sci(r.initial_loss) + " -> " + sci(r.epoch_train_loss.back()));
}

void convergence_task(const RunConfig& cfg, MetricsWriter& metrics, Summary& summary) {
  const ConvergenceConfig& c = cfg.convergence;
  const ConvergenceResult r = run_convergence(c, cfg.seed, &metrics);
  summary.add("problem", c.problem);
  summary.add("iterations", std::to_string(c.iterations));
  summary.add("initial_objective", r.objective.front());
  summary.add("final_objective", r.objective.back());
  if (r.envelope) {
    const EnvelopeReport& e = *r.envelope;
    summary.add("envelope_c1", e.c1);
    summary.add("envelope_c2", e.c2);
    summary.add("average_grad_sq_at_check", e.average_at_check);
    summary.add("envelope_at_check", e.envelope_at_check);
    summary.add("fitted_exponent", e.fitted_exponent);
    summary.check("within_envelope", e.within_envelope,
                  sci(e.average_at_check) + " vs " + sci(e.envelope_at_check));
  } else {
    summary.add("lr", r.lr);
    summary.add("lipschitz", r.lipschitz);
    summary.add("min_step_bound", r.min_step_bound);
    summary.check("step_within_bound", r.lr <= r.min_step_bound, sci(r.lr) + " vs " + sci(r.min_step_bound));
    summary.check("monotone_decrease", r.increases == 0, std::to_string(r.increases) + " increasing steps");
  }
}

void gradcheck_task(const RunConfig& cfg, MetricsWriter& metrics, Summary& summary) {
  const GradcheckConfig& g = cfg.gradcheck;
  const GradcheckResult r = run_gradcheck(g, cfg.seed);
  for (std::size_t t = 0; t < r.aggregate.size(); ++t)
    metrics.write({static_cast<std::int64_t>(t), 0, r.aggregate[t], r.per_sample[t], g.step, 0, std::nullopt, 0});
  summary.add("trials", std::to_string(g.trials));
  summary.add("max_deviation", max_of(r.aggregate));
  summary.add("max_per_sample_deviation", max_of(r.per_sample));
  summary.check("finite_difference", max_of(r.aggregate) <= g.tolerance,
                sci(max_of(r.aggregate)) + " vs " + sci(g.tolerance));
  summary.check("per_sample_factors", max_of(r.per_sample) <= g.tolerance,
                sci(max_of(r.per_sample)) + " vs " + sci(g.tolerance));
}

void study_task(const RunConfig& cfg, MetricsWriter& metrics, Summary& summary) {
  const StudyConfig& s = cfg.study;
  const GfimStudy st = efim_gfim_study(s.samples, s.rows, s.cols, cfg.seed);
  write_matrix_csv(st.diff, std::filesystem::path(cfg.output_dir) / "diff.csv");
  metrics.write({0, 0, st.normalized_frobenius, st.normalized_max_abs, 0, 0, std::nullopt, 0});

  const double n = static_cast<double>(s.cols);
  const double N = static_cast<double>(s.samples);
  const double m = static_cast<double>(s.rows);
  const double diag_sd = std::sqrt(2 * (1 - 1 / n) / N);
  const double expected_frob = std::sqrt(m * (m + 1) * (1 - 1 / n) / N);
  summary.add("samples", std::to_string(s.samples));
  summary.add("rows", std::to_string(s.rows));
  summary.add("cols", std::to_string(s.cols));
  summary.add("raw_max_abs", st.raw_max_abs);
  summary.add("raw_frobenius", st.raw_frobenius);
  summary.add("normalized_max_abs", st.normalized_max_abs);
  summary.add("normalized_frobenius", st.normalized_frobenius);
  summary.add("expected_frobenius", expected_frob);
  summary.check("max_abs_within_6sd", st.normalized_max_abs <= 6 * diag_sd,
                sci(st.normalized_max_abs) + " vs " + sci(6 * diag_sd));
  if (s.rows >= 50) {
    const double ratio = st.normalized_frobenius / expected_frob;
    summary.check("frobenius_matches_expectation", ratio >= 0.9 && ratio <= 1.1, "ratio " + sci(ratio));
  }
  if (s.scaling_seeds > 0) {
    const GfimScaling sc = efim_gfim_scaling(s.samples, s.scaling_factor, s.rows, s.cols, s.scaling_seeds, cfg.seed);
    summary.add("scaling_error_small", sc.error_small);
    summary.add("scaling_error_large", sc.error_large);
    summary.add("scaling_ratio", sc.ratio);
    summary.check("error_decay", sc.ratio <= s.scaling_max_ratio, sci(sc.ratio) + " vs " + sci(s.scaling_max_ratio));
  }
}

void regret_task(const RunConfig& cfg, MetricsWriter& metrics, Summary& summary) {
  const RegretConfig& c = cfg.regret;
  StreamSpec spec{c.input_dim, c.output_dim, c.radius, parse_stream_kind(c.stream), cfg.seed};
  RegretOptions opts;
  if (c.alpha > 0) opts.alpha = c.alpha;
  if (c.eps > 0) opts.eps = c.eps;
  const RegretTrace r = run_regret(spec, c.rounds, opts);

  std::ofstream out(std::filesystem::path(cfg.output_dir) / "regret.csv");
  if (!out) throw Error(Errc::IoError, "cannot write regret.csv");
  out << "t,regret,bound,potential\n";
  for (std::size_t t = 0; t < r.regret.size(); ++t) {
    const auto iter = static_cast<std::int64_t>(t + 1);
    metrics.write({iter, static_cast<double>(iter), r.loss[t], r.grad_norm[t], 1 / r.alpha, r.eps, std::nullopt, 0});
    out << iter << ',' << format_double(r.regret[t]) << ',' << format_double(r.bound[t]) << ','
        << format_double(r.potential[t]) << '\n';
  }
  summary.add("rounds", std::to_string(c.rounds));
  summary.add("alpha", r.alpha);
  summary.add("eps", r.eps);
  summary.add("lipschitz", r.lipschitz);
  summary.add("burn_in", std::to_string(r.burn_in));
  summary.add("final_regret", r.regret.back());
  summary.add("final_bound", r.bound.back());
  summary.add("worst_ratio", r.worst_ratio);
  summary.add("potential_sum", r.audit.lhs);
  summary.add("log_det_ratio", r.audit.rhs);
  summary.add("potential_cap", r.audit.cap);
  summary.check("burn_in_reached", r.burn_in > 0);
  summary.check("regret_bound", r.bound_holds(),
                r.first_violation ? "first violation at t = " + std::to_string(r.first_violation) : "");
  summary.check("elliptical_potential", r.audit.holds(),
                sci(r.audit.lhs) + " <= " + sci(r.audit.rhs) + " <= " + sci(r.audit.cap));
}

}  // namespace

int run_task(const RunConfig& cfg) {
  if (!cfg.task) throw Error(Errc::MissingRequired, "no task given");
  const std::filesystem::path dir(cfg.output_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(Errc::IoError, "cannot create " + dir.string() + ": " + ec.message());

  Summary summary;
  summary.add("task", to_string(*cfg.task));
  summary.add("seed", std::to_string(cfg.seed));
  {
    MetricsWriter metrics(dir / "metrics.csv");
    try {
      switch (*cfg.task) {
        case Task::Train: train_task(cfg, metrics, summary); break;
        case Task::Convergence: convergence_task(cfg, metrics, summary); break;
        case Task::Gradcheck: gradcheck_task(cfg, metrics, summary); break;
        case Task::GfimStudy: study_task(cfg, metrics, summary); break;
        case Task::Regret: regret_task(cfg, metrics, summary); break;
      }
    } catch (const Error& e) {
      if (is_config_error(e.code())) throw;
      summary.check("run", false, std::string(to_string(e.code())) + ": " + e.what());
    }
  }
  summary.write(dir / "summary.txt");
  return summary.all_passed() ? 0 : 1;
}

}  // namespace ngplus
