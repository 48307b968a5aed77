#include "ngplus/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <initializer_list>
#include <map>
#include <sstream>

namespace ngplus {

Task parse_task(std::string_view name) {
  if (name == "train") return Task::Train;
  if (name == "gfim-study") return Task::GfimStudy;
  if (name == "regret") return Task::Regret;
  if (name == "gradcheck") return Task::Gradcheck;
  if (name == "convergence") return Task::Convergence;
  throw Error(Errc::InvalidArgument, "unknown task '" + std::string(name) + "'");
}

const char* to_string(Task t) {
  switch (t) {
    case Task::Train: return "train";
    case Task::GfimStudy: return "gfim-study";
    case Task::Regret: return "regret";
    case Task::Gradcheck: return "gradcheck";
    case Task::Convergence: return "convergence";
  }
  return "?";
}

Schedule OptimizerConfig::lr_sched(double run_epochs) const {
  const double horizon = max_epoch > 0 ? max_epoch : run_epochs;
  Schedule s;
  if (lr_schedule == "constant") s.kind = ConstantSchedule{lr};
  else if (lr_schedule == "cosine") s.kind = CosineSchedule{lr, lr_floor, horizon};
  else if (lr_schedule == "exponential") s.kind = ExponentialSchedule{lr, decay_rate, horizon};
  else if (lr_schedule == "poly") s.kind = PolyDecaySchedule{lr, poly_beta};
  else throw Error(Errc::TypeError, "lr_schedule '" + lr_schedule + "'");
  s.warmup_epochs = warmup_epochs;
  s.warmup_start = warmup_start;
  return s;
}

Schedule OptimizerConfig::damping_sched() const {
  if (damping_schedule == "constant") return constant(damping);
  if (damping_schedule == "geometric") return Schedule{GeometricSchedule{damping, damping_ratio, damping_period}};
  throw Error(Errc::TypeError, "damping_schedule '" + damping_schedule + "'");
}

NgPlusConfig OptimizerConfig::ngplus(double run_epochs, std::uint64_t sketch_seed) const {
  NgPlusConfig c;
  c.lr = lr_sched(run_epochs);
  c.damping = damping_sched();
  c.freq = freq;
  if (mode == "subsampled") c.mode = Subsampled{};
  else if (mode == "momentum") c.mode = Momentum{beta};
  else c.mode = MiniBatch{beta, gamma};
  if (path == "dense") c.path = DensePath{};
  else if (path == "smw") c.path = SmwPath{};
  else if (path == "sketched") c.path = SketchedLsPath{SketchConfig{sketch_q, sketch_seed, SketchSampling::WithReplacement}};
  else c.path = BlockDiagPath{blocks};
  c.weight_decay = weight_decay;
  c.track_spectrum = track_spectrum;
  return c;
}

namespace {

using Setter = std::function<void(const std::string&, int)>;

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void type_error(const std::string& value, int line, const char* expected) {
  throw Error(Errc::TypeError, "line " + std::to_string(line) + ": '" + value + "' is not " + expected);
}

template <typename Int>
Int parse_int(const std::string& v, int line) {
  Int out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) type_error(v, line, "an integer");
  return out;
}

double parse_double(const std::string& v, int line) {
  double out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) type_error(v, line, "a number");
  return out;
}

template <typename Int>
Setter int_field(Int& f) {
  return [&f](const std::string& v, int line) { f = parse_int<Int>(v, line); };
}

Setter double_field(double& f) {
  return [&f](const std::string& v, int line) { f = parse_double(v, line); };
}

Setter bool_field(bool& f) {
  return [&f](const std::string& v, int line) {
    if (v == "true" || v == "1") f = true;
    else if (v == "false" || v == "0") f = false;
    else type_error(v, line, "a boolean");
  };
}

Setter string_field(std::string& f) {
  return [&f](const std::string& v, int) { f = v; };
}

Setter choice_field(std::string& f, std::initializer_list<const char*> allowed) {
  std::vector<std::string> opts(allowed.begin(), allowed.end());
  return [&f, opts](const std::string& v, int line) {
    if (std::find(opts.begin(), opts.end(), v) == opts.end()) {
      std::string list;
      for (const auto& o : opts) list += (list.empty() ? "" : "|") + o;
      throw Error(Errc::TypeError, "line " + std::to_string(line) + ": '" + v + "' is not one of " + list);
    }
    f = v;
  };
}

Setter index_list_field(std::vector<Index>& f) {
  return [&f](const std::string& v, int line) {
    std::vector<Index> out;
    if (v != "none") {
      std::stringstream ss(v);
      std::string item;
      while (std::getline(ss, item, ',')) {
        const Index x = parse_int<Index>(trim(item), line);
        if (x < 1) type_error(v, line, "a list of positive integers");
        out.push_back(x);
      }
    }
    f = std::move(out);
  };
}

std::map<std::string, Setter> key_table(RunConfig& c) {
  std::map<std::string, Setter> t;
  t["task"] = [&c](const std::string& v, int line) {
    try {
      c.task = parse_task(v);
    } catch (const Error&) {
      type_error(v, line, "a task name");
    }
  };
  t["seed"] = int_field(c.seed);
  t["epochs"] = int_field(c.epochs);
  t["output_dir"] = string_field(c.output_dir);
  t["record_wall_time"] = bool_field(c.record_wall_time);

  auto& d = c.dataset;
  t["dataset.kind"] = choice_field(d.kind, {"gaussian-mixture", "linear-regression", "csv"});
  t["dataset.classes"] = int_field(d.classes);
  t["dataset.dim"] = int_field(d.dim);
  t["dataset.samples"] = int_field(d.samples);
  t["dataset.separation"] = double_field(d.separation);
  t["dataset.outputs"] = int_field(d.outputs);
  t["dataset.noise"] = double_field(d.noise);
  t["dataset.path"] = string_field(d.path);

  auto& m = c.model;
  t["model.hidden"] = index_list_field(m.hidden);
  t["model.activation"] = choice_field(m.activation, {"identity", "relu", "tanh"});
  t["model.loss"] = choice_field(m.loss, {"mse", "cross_entropy"});
  t["model.bias"] = bool_field(m.bias);

  auto& o = c.optimizer;
  t["optimizer.name"] = choice_field(o.name, {"ngplus", "sgd", "adam"});
  t["optimizer.batch_size"] = int_field(o.batch_size);
  t["optimizer.lr"] = double_field(o.lr);
  t["optimizer.lr_schedule"] = choice_field(o.lr_schedule, {"constant", "cosine", "exponential", "poly"});
  t["optimizer.lr_floor"] = double_field(o.lr_floor);
  t["optimizer.max_epoch"] = double_field(o.max_epoch);
  t["optimizer.decay_rate"] = double_field(o.decay_rate);
  t["optimizer.poly_beta"] = double_field(o.poly_beta);
  t["optimizer.warmup_epochs"] = double_field(o.warmup_epochs);
  t["optimizer.warmup_start"] = double_field(o.warmup_start);
  t["optimizer.damping"] = double_field(o.damping);
  t["optimizer.damping_schedule"] = choice_field(o.damping_schedule, {"constant", "geometric"});
  t["optimizer.damping_ratio"] = double_field(o.damping_ratio);
  t["optimizer.damping_period"] = double_field(o.damping_period);
  t["optimizer.freq"] = int_field(o.freq);
  t["optimizer.mode"] = choice_field(o.mode, {"subsampled", "momentum", "minibatch"});
  t["optimizer.beta"] = double_field(o.beta);
  t["optimizer.gamma"] = double_field(o.gamma);
  t["optimizer.path"] = choice_field(o.path, {"dense", "smw", "sketched", "blockdiag"});
  t["optimizer.sketch_q"] = int_field(o.sketch_q);
  t["optimizer.blocks"] = int_field(o.blocks);
  t["optimizer.weight_decay"] = double_field(o.weight_decay);
  t["optimizer.curvature_samples"] = int_field(o.curvature_samples);
  t["optimizer.track_spectrum"] = bool_field(o.track_spectrum);
  t["optimizer.momentum"] = double_field(o.momentum);
  t["optimizer.adam_beta1"] = double_field(o.adam_beta1);
  t["optimizer.adam_beta2"] = double_field(o.adam_beta2);
  t["optimizer.adam_eps"] = double_field(o.adam_eps);

  auto& s = c.study;
  t["study.samples"] = int_field(s.samples);
  t["study.rows"] = int_field(s.rows);
  t["study.cols"] = int_field(s.cols);
  t["study.scaling_seeds"] = int_field(s.scaling_seeds);
  t["study.scaling_factor"] = int_field(s.scaling_factor);
  t["study.scaling_max_ratio"] = double_field(s.scaling_max_ratio);

  auto& r = c.regret;
  t["regret.rounds"] = int_field(r.rounds);
  t["regret.input_dim"] = int_field(r.input_dim);
  t["regret.output_dim"] = int_field(r.output_dim);
  t["regret.radius"] = double_field(r.radius);
  t["regret.stream"] = choice_field(r.stream, {"random", "constant", "alternating"});
  t["regret.alpha"] = double_field(r.alpha);
  t["regret.eps"] = double_field(r.eps);

  auto& g = c.gradcheck;
  t["gradcheck.trials"] = int_field(g.trials);
  t["gradcheck.input_dim"] = int_field(g.input_dim);
  t["gradcheck.hidden"] = int_field(g.hidden);
  t["gradcheck.outputs"] = int_field(g.outputs);
  t["gradcheck.samples"] = int_field(g.samples);
  t["gradcheck.activation"] = choice_field(g.activation, {"identity", "relu", "tanh"});
  t["gradcheck.loss"] = choice_field(g.loss, {"mse", "cross_entropy"});
  t["gradcheck.step"] = double_field(g.step);
  t["gradcheck.tolerance"] = double_field(g.tolerance);

  auto& v = c.convergence;
  t["convergence.problem"] = choice_field(v.problem, {"logistic", "quadratic"});
  t["convergence.iterations"] = int_field(v.iterations);
  t["convergence.dim"] = int_field(v.dim);
  t["convergence.outputs"] = int_field(v.outputs);
  t["convergence.samples"] = int_field(v.samples);
  t["convergence.batch"] = int_field(v.batch);
  t["convergence.separation"] = double_field(v.separation);
  t["convergence.c"] = double_field(v.c);
  t["convergence.beta"] = double_field(v.beta);
  t["convergence.damping"] = double_field(v.damping);
  t["convergence.freq"] = int_field(v.freq);
  t["convergence.burn_in"] = int_field(v.burn_in);
  t["convergence.fit_until"] = int_field(v.fit_until);
  t["convergence.lr"] = double_field(v.lr);
  return t;
}

const char* const kSections[] = {"dataset", "model", "optimizer", "study", "regret", "gradcheck", "convergence"};

}  // namespace

RunConfig parse_config(std::string_view text) {
  RunConfig cfg;
  const auto table = key_table(cfg);
  std::string section;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    const std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;

    std::string line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw Error(Errc::ParseError, "line " + std::to_string(line_no) + ": unterminated section header");
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      if (std::find(std::begin(kSections), std::end(kSections), section) == std::end(kSections))
        throw Error(Errc::UnknownKey, "line " + std::to_string(line_no) + ": unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(Errc::ParseError, "line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    const std::string full = section.empty() ? key : section + "." + key;
    const auto it = table.find(full);
    if (it == table.end())
      throw Error(Errc::UnknownKey, "line " + std::to_string(line_no) + ": unknown key '" + full + "'");
    if (value.empty())
      throw Error(Errc::MissingRequired, "line " + std::to_string(line_no) + ": key '" + full + "' has no value");
    it->second(value, line_no);
  }
  if (cfg.dataset.kind == "csv" && cfg.dataset.path.empty())
    throw Error(Errc::MissingRequired, "line " + std::to_string(line_no) + ": dataset kind csv needs dataset.path");
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace ngplus
