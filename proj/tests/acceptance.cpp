// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "ngplus/config.hpp"
#include "ngplus/direction.hpp"
#include "ngplus/online.hpp"
#include "ngplus/tasks.hpp"
#include "oracles.hpp"

using namespace ngplus;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

int failures = 0;

void criterion(int id, const char* name, double limit_s, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome out;
  try {
    out = body();
  } catch (const std::exception& e) {
    out = {false, std::string("error: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const bool in_time = secs <= limit_s;
  const bool ok = out.passed && in_time;
  if (!ok) ++failures;
  std::printf("%s %d %s: %s [%.1f s%s]\n", ok ? "PASS" : "FAIL", id, name, out.detail.c_str(), secs,
              in_time ? "" : ", over time limit");
  std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "ngplus_acceptance" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::vector<PerSampleFactors> random_factors(Index m, Index n, Index count, Rng& rng) {
  std::vector<PerSampleFactors> out;
  for (Index i = 0; i < count; ++i) out.push_back({rng.gaussian(m, 1), rng.gaussian(n, 1), i});
  return out;
}

Index uniform_index(Rng& rng, Index lo, Index hi) { return lo + static_cast<Index>(rng.index(static_cast<std::uint64_t>(hi - lo + 1))); }

Outcome smw_equivalence() {
  Rng rng(1001);
  double worst = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const Index m = uniform_index(rng, 1, 64);
    const Index n = uniform_index(rng, 1, 128);
    const Index b = uniform_index(rng, 1, 32);
    const double lambda = std::pow(10.0, -3.0 * rng.uniform());
    const auto f = random_factors(m, n, b, rng);
    const Mat g = minibatch_gradient(f);
    const Side side = choose_side(m, n);
    const Mat dense = dense_direction(g, spd_factor(build_subsampled(f, side), lambda), side);
    const Mat smw = smw_direction(g, f, lambda, side);
    worst = std::max(worst, (smw - dense).norm() / dense.norm());
  }
  return {worst <= 1e-8, fmt("max relative error %.3g over 200 instances", worst)};
}

Outcome block_consistency() {
  Rng rng(1002);
  bool identical = true;
  double worst = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const Index m = uniform_index(rng, 1, 32);
    const Index n = uniform_index(rng, m, 64);
    const Index b = uniform_index(rng, 1, 16);
    const double lambda = std::pow(10.0, -3.0 * rng.uniform());
    const auto f = random_factors(m, n, b, rng);
    const Mat g = minibatch_gradient(f);
    CurvatureState st(m, n, Subsampled{}, 1, lambda);
    maybe_refresh(st, 0, RefreshInputs{f});
    identical = identical && block_diag_direction(g, st, 1) == dense_direction(g, st);

    // diagonal of M straight from the factors: (1/|B|) sum_j g_ji^2 ||a_j||^2
    Vec diag = Vec::Zero(m);
    for (const auto& s : f) diag += s.g.col(0).cwiseAbs2() * s.a.squaredNorm();
    diag /= static_cast<double>(b);
    Mat hand(m, n);
    for (Index i = 0; i < m; ++i) hand.row(i) = -g.row(i) / (lambda + diag(i));
    const Mat scalar = block_diag_direction(g, st, m);
    worst = std::max(worst, (scalar - hand).cwiseAbs().maxCoeff() / hand.cwiseAbs().maxCoeff());
  }
  return {identical && worst <= 1e-12,
          std::string(identical ? "s = 1 bit-identical" : "s = 1 differs from dense") +
              fmt(", scalar formula max relative deviation %.3g", worst)};
}

Outcome sketch_unbiasedness() {
  Rng rng(1003);
  const Mat g = rng.gaussian(50, 50);
  const Mat exact = g * g.transpose();
  auto mean_error = [&](std::uint64_t first, std::uint64_t count) {
    Mat sum = Mat::Zero(50, 50);
    for (std::uint64_t s = first; s < first + count; ++s) sum += sketch_gram(g, SketchConfig{10, s});
    return (sum / static_cast<double>(count) - exact).norm() / exact.norm();
  };
  const double e1 = mean_error(0, 10000);
  const double e4 = mean_error(10000, 40000);
  const double ratio = e4 / e1;
  return {e1 <= 0.02 && ratio <= 0.6,
          fmt("error %.4f at 1e4 seeds", e1) + fmt(", %.4f at 4e4", e4) + fmt(", ratio %.3f", ratio)};
}

Outcome gradient_correctness() {
  GradcheckConfig cfg;
  cfg.trials = 10;
  cfg.step = 1e-5;
  const GradcheckResult gc = run_gradcheck(cfg, 0);
  double fd = 0;
  for (double v : gc.aggregate) fd = std::max(fd, v);

  double factored = 0;
  const std::array<Index, 3> dims{cfg.input_dim, cfg.hidden, cfg.outputs};
  Rng rng(1004);
  for (int t = 0; t < 10; ++t) {
    const Model m = make_mlp(dims, Activation::Tanh, Activation::Identity, true, rng);
    Batch b;
    b.inputs = rng.gaussian(cfg.input_dim, cfg.samples);
    for (Index i = 0; i < cfg.samples; ++i) b.labels.push_back(static_cast<int>(rng.index(cfg.outputs)));
    const auto f = backward_per_sample(m, b, Loss::CrossEntropy);
    for (std::size_t l = 0; l < m.size(); ++l)
      for (Index i = 0; i < cfg.samples; ++i) {
        const Mat ref = oracle::complex_step_gradient(m, b, i, Loss::CrossEntropy, l);
        factored = std::max(factored, (f[l][static_cast<std::size_t>(i)].dense() - ref).cwiseAbs().maxCoeff());
      }
  }
  return {fd <= 1e-5 && factored <= 1e-10,
          fmt("finite differences max %.3g", fd) + fmt(", per-sample factors vs complex step max %.3g", factored)};
}

Outcome gfim_study() {
  const GfimStudy s = efim_gfim_study(2000, 200, 200, 0);
  const GfimScaling sc = efim_gfim_scaling(2000, 4, 200, 200, 10, 0);
  return {s.gfim.rows() == 200 && sc.ratio <= 0.6,
          fmt("N = 2000 Frobenius error %.4f", s.normalized_frobenius) +
              fmt("; 10-seed mean %.4f at N = 2000", sc.error_small) + fmt(", %.4f at N = 8000", sc.error_large) +
              fmt(", ratio %.3f", sc.ratio)};
}

Outcome convergence() {
  ConvergenceConfig quad;
  quad.problem = "quadratic";
  quad.iterations = 2000;
  const ConvergenceResult q = run_convergence(quad, 0);
  ConvergenceConfig logi;
  const ConvergenceResult l = run_convergence(logi, 0);
  const auto& env = *l.envelope;
  const bool ok = q.increases == 0 && env.within_envelope;
  return {ok, "quadratic: " + std::to_string(q.increases) + " increases in " + std::to_string(quad.iterations) +
                  fmt(" steps, Psi %.3g", q.objective.front()) + fmt(" -> %.3g", q.objective.back()) +
                  fmt("; logistic: average %.4g", env.average_at_check) +
                  fmt(" vs envelope %.4g at T = 1e4", env.envelope_at_check)};
}

std::vector<RegretTrace> regret_runs;

Outcome regret_bound() {
  regret_runs.clear();
  double worst = 0;
  bool ok = true;
  for (Index n : {1, 4}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      regret_runs.push_back(run_regret(StreamSpec{n, 2, 1.0, StreamKind::Random, seed}, 10000));
      const auto& tr = regret_runs.back();
      ok = ok && tr.bound_holds();
      worst = std::max(worst, tr.worst_ratio);
    }
  }
  return {ok, std::to_string(regret_runs.size()) + fmt(" runs, worst regret / bound past burn-in %.3f", worst)};
}

Outcome elliptical() {
  if (regret_runs.empty()) return {false, "no regret runs"};
  bool ok = true;
  double slack = std::numeric_limits<double>::infinity();
  for (const auto& tr : regret_runs) {
    ok = ok && tr.audit.holds(1e-8);
    slack = std::min(slack, tr.audit.rhs - tr.audit.lhs);
    // the running potential traced by the regret loop agrees with the audit
    ok = ok && std::abs(tr.potential.back() - tr.audit.lhs) <= 1e-8 * std::max(1.0, tr.audit.lhs);
  }
  return {ok, fmt("all runs hold; smallest log-det slack %.4g", slack)};
}

RunConfig training_config(const std::string& optimizer, std::uint64_t seed) {
  RunConfig cfg;
  cfg.task = Task::Train;
  cfg.seed = seed;
  cfg.epochs = 20;
  cfg.dataset.kind = "gaussian-mixture";
  cfg.dataset.classes = 3;
  cfg.dataset.dim = 10;
  cfg.dataset.samples = 3000;
  cfg.optimizer.name = optimizer;
  cfg.optimizer.lr_schedule = "cosine";
  if (optimizer == "sgd") {
    cfg.optimizer.lr = 0.1;
    cfg.optimizer.momentum = 0.9;
  } else {
    cfg.optimizer.lr = 0.5;
    cfg.optimizer.path = "dense";
    cfg.optimizer.freq = 10;
  }
  return cfg;
}

Outcome training_sanity() {
  int violations = 0, compared = 0;
  double ng_final = 0, sgd_final = 0, ng_mean = 0, sgd_mean = 0;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const TrainResult ng = run_training(training_config("ngplus", seed));
    const TrainResult sgd = run_training(training_config("sgd", seed));
    for (std::size_t e = 1; e < ng.epoch_train_loss.size(); ++e) {
      ++compared;
      if (ng.epoch_train_loss[e] > sgd.epoch_train_loss[e]) ++violations;
      ng_mean += ng.epoch_train_loss[e];
      sgd_mean += sgd.epoch_train_loss[e];
    }
    ng_final += ng.epoch_train_loss.back() / 3;
    sgd_final += sgd.epoch_train_loss.back() / 3;
  }
  ng_mean /= compared;
  sgd_mean /= compared;
  return {violations == 0, std::to_string(violations) + " of " + std::to_string(compared) +
                               " matched epochs with NG+ loss above SGD-momentum" + fmt("; mean loss %.4f", ng_mean) +
                               fmt(" vs %.4f", sgd_mean) + fmt(", final %.4f", ng_final) + fmt(" vs %.4f", sgd_final)};
}

Outcome determinism() {
  std::vector<std::pair<std::string, RunConfig>> runs;
  RunConfig logi;
  logi.task = Task::Convergence;
  runs.emplace_back("convergence-logistic", logi);
  RunConfig quad = logi;
  quad.convergence.problem = "quadratic";
  quad.convergence.iterations = 2000;
  runs.emplace_back("convergence-quadratic", quad);
  RunConfig reg;
  reg.task = Task::Regret;
  runs.emplace_back("regret", reg);
  runs.emplace_back("train-ngplus", training_config("ngplus", 0));
  runs.emplace_back("train-sgd", training_config("sgd", 0));

  std::string mismatched;
  for (auto& [name, cfg] : runs) {
    std::string first;
    for (int rep = 0; rep < 2; ++rep) {
      cfg.output_dir = scratch(name + "_" + std::to_string(rep)).string();
      run_task(cfg);
      const std::string text = slurp(fs::path(cfg.output_dir) / "metrics.csv");
      if (text.empty()) mismatched += " " + name + "(empty)";
      if (rep == 0) first = text;
      else if (text != first) mismatched += " " + name;
    }
  }
  return {mismatched.empty(), mismatched.empty() ? std::to_string(runs.size()) + " tasks byte-identical across repeats"
                                                 : "differs:" + mismatched};
}

}  // namespace

int main() {
  criterion(1, "SMW oracle equivalence", 10, smw_equivalence);
  criterion(2, "block-diagonal consistency", 5, block_consistency);
  criterion(3, "sketch unbiasedness", 60, sketch_unbiasedness);
  criterion(4, "gradient correctness", 30, gradient_correctness);
  criterion(5, "GFIM/EFIM study", 300, gfim_study);
  criterion(6, "convergence surrogate", 120, convergence);
  criterion(7, "regret bound", 120, regret_bound);
  criterion(8, "elliptical potential", 1, elliptical);
  criterion(9, "training sanity vs SGD-momentum", 120, training_sanity);
  criterion(10, "determinism", 600, determinism);
  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
