#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ngplus/dataset.hpp"
#include "ngplus/optimizer.hpp"

namespace ngplus {

enum class Task { Train, GfimStudy, Regret, Gradcheck, Convergence };

Task parse_task(std::string_view name);
const char* to_string(Task t);

struct DatasetConfig {
  std::string kind = "gaussian-mixture";  // gaussian-mixture | linear-regression | csv
  Index classes = 3;
  Index dim = 10;
  Index samples = 3000;
  double separation = 2.0;
  Index outputs = 1;
  double noise = 0.0;
  std::string path;
};

struct ModelConfig {
  std::vector<Index> hidden{16};
  std::string activation = "tanh";
  std::string loss = "cross_entropy";
  bool bias = true;
};

struct OptimizerConfig {
  std::string name = "ngplus";  // ngplus | sgd | adam
  Index batch_size = 32;

  double lr = 0.1;
  std::string lr_schedule = "constant";  // constant | cosine | exponential | poly
  double lr_floor = 0.001;
  double max_epoch = 0;  // 0: use the run's epoch count
  double decay_rate = 5;
  double poly_beta = 0.7;
  double warmup_epochs = 0;
  double warmup_start = 0;

  double damping = 0.16;
  std::string damping_schedule = "geometric";  // constant | geometric
  double damping_ratio = 0.8;
  double damping_period = 10;

  int freq = 10;
  std::string mode = "subsampled";  // subsampled | momentum | minibatch
  double beta = 0.9;
  double gamma = 1.0;
  std::string path = "dense";  // dense | smw | sketched | blockdiag
  Index sketch_q = 16;
  Index blocks = 1;
  double weight_decay = 0;
  Index curvature_samples = 0;  // 0: S_k = B_k
  bool track_spectrum = false;

  double momentum = 0.9;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  Schedule lr_sched(double run_epochs) const;
  Schedule damping_sched() const;
  NgPlusConfig ngplus(double run_epochs, std::uint64_t sketch_seed) const;
};

struct StudyConfig {
  Index samples = 2000;
  Index rows = 200;
  Index cols = 200;
  int scaling_seeds = 0;  // > 0 also runs the N vs factor*N Monte-Carlo check
  Index scaling_factor = 4;
  double scaling_max_ratio = 0.6;
};

struct RegretConfig {
  Index rounds = 10000;
  Index input_dim = 4;
  Index output_dim = 2;
  double radius = 1;
  std::string stream = "random";
  double alpha = 0;  // 0: 1 / (4 R^2)
  double eps = 0;    // 0: 2 / (alpha D^2)
};

struct GradcheckConfig {
  int trials = 10;
  Index input_dim = 4;
  Index hidden = 8;
  Index outputs = 3;
  Index samples = 5;
  std::string activation = "tanh";
  std::string loss = "cross_entropy";
  double step = 1e-5;
  double tolerance = 1e-5;
};

struct ConvergenceConfig {
  std::string problem = "logistic";  // logistic | quadratic
  Index iterations = 10000;
  Index dim = 20;
  Index outputs = 3;  // quadratic only
  Index samples = 2000;
  Index batch = 32;
  double separation = 1.0;
  double c = 2.0;
  double beta = 0.7;
  double damping = 0;  // 0: 0.1 for logistic, 10 for quadratic
  int freq = 10;
  Index burn_in = 100;
  Index fit_until = 1000;
  double lr = 0;  // quadratic only; 0 picks lambda^2 / (L h2) from the first curvature
};

struct RunConfig {
  std::optional<Task> task;
  std::uint64_t seed = 0;
  int epochs = 20;
  std::string output_dir = "out";
  bool record_wall_time = false;

  DatasetConfig dataset;
  ModelConfig model;
  OptimizerConfig optimizer;
  StudyConfig study;
  RegretConfig regret;
  GradcheckConfig gradcheck;
  ConvergenceConfig convergence;
};

/// Line-oriented `key = value` with `[section]` headers and `#` comments.
/// Unknown keys, malformed values and empty values are errors carrying the
/// line number.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::string& path);

}  // namespace ngplus
