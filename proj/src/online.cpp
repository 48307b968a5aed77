#include "ngplus/online.hpp"

#include <cmath>
#include <string>

#include "ngplus/rng.hpp"

namespace ngplus {

double default_epsilon(double alpha, double diameter) { return 2.0 / (alpha * diameter * diameter); }

OnlineState make_online_state(Index dim, double alpha, double radius, std::optional<double> eps) {
  if (dim < 1 || !(alpha > 0) || !(radius > 0)) throw Error(Errc::InvalidArgument, "online state: bad dim/alpha/radius");
  OnlineState st;
  st.alpha = alpha;
  st.radius = radius;
  st.eps = eps ? *eps : (std::isfinite(radius) ? default_epsilon(alpha, 2 * radius) : 1.0);
  if (!(st.eps > 0)) throw Error(Errc::InvalidArgument, "online state: eps must be positive");
  st.l = st.eps * Mat::Identity(dim, dim);
  return st;
}

Mat online_step(OnlineState& state, const Mat& theta, const Mat& grad) {
  if (grad.rows() != theta.rows() || grad.cols() != theta.cols() || grad.cols() != state.dim())
    throw Error(Errc::DimensionMismatch, "online step: gradient, parameter and accumulator shapes differ");
  state.l += symmetrized(grad.transpose() * grad);
  ++state.t;
  const auto factor = spd_factor(state.l, 0.0);
  Mat y = theta - spd_solve_right(factor, grad) / state.alpha;
  if (!std::isfinite(state.radius)) return y;
  return weighted_project(y, state.l, state.radius);
}

Mat weighted_project(const Mat& y, const Mat& l, double radius) {
  if (l.rows() != y.cols()) throw Error(Errc::DimensionMismatch, "weighted_project: weight does not match columns");
  const double norm = y.norm();
  if (norm <= radius) return y;

  const auto eig = sym_eig(l);
  const Vec& w = eig.values;
  const Mat yhat = y * eig.vectors;
  const Vec col_sq = yhat.colwise().squaredNorm().transpose();
  auto shrunk_norm_sq = [&](double mu) {
    double s = 0;
    for (Index j = 0; j < w.size(); ++j) {
      const double f = w(j) / (w(j) + mu);
      s += col_sq(j) * f * f;
    }
    return s;
  };
  // The multiplier lies in [0, w_max ||Y|| / R].
  double lo = 0;
  double hi = w(0) * norm / radius;
  const double target = radius * radius;
  for (int it = 0; it < 400 && hi - lo > 1e-12 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (shrunk_norm_sq(mid) > target ? lo : hi) = mid;
  }
  Vec f(w.size());
  for (Index j = 0; j < w.size(); ++j) f(j) = w(j) / (w(j) + hi);
  Mat x = yhat * f.asDiagonal() * eig.vectors.transpose();
  const double xn = x.norm();
  if (xn > radius) x *= radius / xn;
  return x;
}

StreamKind parse_stream_kind(const std::string& name) {
  if (name == "random") return StreamKind::Random;
  if (name == "constant") return StreamKind::Constant;
  if (name == "alternating") return StreamKind::Alternating;
  throw Error(Errc::InvalidArgument, "unknown stream kind '" + name + "'");
}

namespace {

Vec in_ball(Rng& rng, Index dim, double radius) {
  Vec v = rng.gaussian(dim);
  const double n = v.norm();
  if (n == 0) return v;
  return v * (radius * std::pow(rng.uniform(), 1.0 / static_cast<double>(dim)) / n);
}

Vec clip_to_ball(const Vec& v, double radius) {
  const double n = v.norm();
  return n > radius ? Vec(v * (radius / n)) : v;
}

}  // namespace

std::vector<Round> generate_stream(const StreamSpec& spec, Index rounds) {
  if (spec.input_dim < 1 || spec.output_dim < 1 || !(spec.radius > 0))
    throw Error(Errc::InvalidSpec, "stream needs positive dims and radius");
  Rng rng(spec.seed, Stream::Online);
  std::vector<Round> out;
  out.reserve(static_cast<std::size_t>(rounds));
  switch (spec.kind) {
    case StreamKind::Random: {
      // Planted target W* with ||W*||_F = R/2, noise 0.1, clipped into the ball.
      Mat planted = rng.gaussian(spec.output_dim, spec.input_dim);
      planted *= 0.5 * spec.radius / planted.norm();
      for (Index t = 0; t < rounds; ++t) {
        Vec x = in_ball(rng, spec.input_dim, 1.0);
        Vec y = clip_to_ball(planted * x + 0.1 * rng.gaussian(spec.output_dim), spec.radius);
        out.push_back({std::move(x), std::move(y)});
      }
      break;
    }
    case StreamKind::Constant: {
      const Vec x = in_ball(rng, spec.input_dim, 1.0);
      const Vec y = in_ball(rng, spec.output_dim, spec.radius);
      for (Index t = 0; t < rounds; ++t) out.push_back({x, y});
      break;
    }
    case StreamKind::Alternating: {
      // Same input, opposite unit-norm targets at full radius.
      Vec x = rng.gaussian(spec.input_dim);
      x /= x.norm();
      Vec y = rng.gaussian(spec.output_dim);
      y *= spec.radius / y.norm();
      for (Index t = 0; t < rounds; ++t) out.push_back({x, (t % 2 == 0) ? y : Vec(-y)});
      break;
    }
  }
  return out;
}

double round_loss(const Mat& theta, const Round& r) { return 0.5 * (theta * r.x - r.y).squaredNorm(); }

Mat round_gradient(const Mat& theta, const Round& r) { return (theta * r.x - r.y) * r.x.transpose(); }

Mat hindsight_optimum(const Mat& xx, const Mat& yx, double radius) {
  const auto eig = sym_eig(xx);
  const Vec& w = eig.values;
  const Mat chat = yx * eig.vectors;
  const double wmax = std::max(w.size() > 0 ? w(0) : 0.0, 0.0);
  const double floor = 1e-12 * std::max(wmax, 1.0);
  auto solve = [&](double mu) {
    Mat th(chat.rows(), chat.cols());
    for (Index j = 0; j < w.size(); ++j) {
      const double d = w(j) + mu;
      th.col(j) = (mu == 0 && w(j) <= floor) ? Vec::Zero(chat.rows()) : Vec(chat.col(j) / d);
    }
    return th;
  };
  Mat th = solve(0.0);
  if (th.norm() <= radius) return th * eig.vectors.transpose();
  double lo = 0;
  double hi = yx.norm() / radius;
  for (int it = 0; it < 400 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (solve(mid).norm() > radius ? lo : hi) = mid;
  }
  th = solve(hi) * eig.vectors.transpose();
  const double n = th.norm();
  if (n > radius) th *= radius / n;
  return th;
}

EllipticalAudit elliptical_potential_audit(std::span<const Mat> grads, double eps) {
  EllipticalAudit a;
  if (grads.empty()) return a;
  const Index n = grads.front().cols();
  Mat l = eps * Mat::Identity(n, n);
  for (const Mat& g : grads) {
    if (g.cols() != n) throw Error(Errc::DimensionMismatch, "elliptical audit: gradient widths differ");
    l += symmetrized(g.transpose() * g);
    const auto f = spd_factor(l, 0.0);
    a.lhs += f.lower.triangularView<Eigen::Lower>().solve(Mat(g.transpose())).squaredNorm();
    a.lipschitz = std::max(a.lipschitz, g.norm());
  }
  a.rhs = log_det(spd_factor(l, 0.0)) - static_cast<double>(n) * std::log(eps);
  const double total = static_cast<double>(grads.size());
  a.cap = static_cast<double>(n) * std::log((total * a.lipschitz * a.lipschitz + eps) / eps);
  return a;
}

RegretTrace run_regret(const StreamSpec& spec, Index rounds, const RegretOptions& opts) {
  if (rounds < 1) throw Error(Errc::InvalidArgument, "run_regret needs at least one round");
  const std::vector<Round> stream = generate_stream(spec, rounds);
  const Index n = spec.input_dim;
  const Index k = spec.output_dim;
  const double radius = spec.radius;
  const double diameter = 2 * radius;

  RegretTrace tr;
  tr.alpha = opts.alpha ? *opts.alpha : 1.0 / (4 * radius * radius);
  tr.eps = opts.eps ? *opts.eps : default_epsilon(tr.alpha, diameter);
  OnlineState state = make_online_state(n, tr.alpha, radius, tr.eps);

  Mat theta = Mat::Zero(k, n);
  Mat xx = Mat::Zero(n, n);
  Mat yx = Mat::Zero(k, n);
  double yy = 0;
  double cumulative = 0;
  double potential = 0;
  std::vector<Mat> grads;
  grads.reserve(static_cast<std::size_t>(rounds));

  for (Index t = 1; t <= rounds; ++t) {
    const Round& r = stream[static_cast<std::size_t>(t - 1)];
    const double loss = round_loss(theta, r);
    const Mat grad = round_gradient(theta, r);
    cumulative += loss;
    tr.lipschitz = std::max(tr.lipschitz, grad.norm());

    theta = online_step(state, theta, grad);
    const auto f = spd_factor(state.l, 0.0);
    potential += f.lower.triangularView<Eigen::Lower>().solve(Mat(grad.transpose())).squaredNorm();
    grads.push_back(grad);

    xx += r.x * r.x.transpose();
    yx += r.y * r.x.transpose();
    yy += 0.5 * r.y.squaredNorm();
    const Mat best = hindsight_optimum(xx, yx, radius);
    const double best_loss = 0.5 * (best * xx * best.transpose()).trace() - (best * yx.transpose()).trace() + yy;

    const double regret = cumulative - best_loss;
    const double arg = tr.alpha * tr.lipschitz * tr.lipschitz * diameter * diameter * static_cast<double>(t);
    const double bound = arg > 0 ? static_cast<double>(n) / tr.alpha * std::log(arg) : -std::numeric_limits<double>::infinity();
    tr.loss.push_back(loss);
    tr.grad_norm.push_back(grad.norm());
    tr.regret.push_back(regret);
    tr.bound.push_back(bound);
    tr.potential.push_back(potential);

    if (tr.burn_in == 0 && bound > 1) tr.burn_in = t;
    if (tr.burn_in > 0) {
      tr.worst_ratio = std::max(tr.worst_ratio, regret / bound);
      if (tr.first_violation == 0 && regret > bound) tr.first_violation = t;
    }
  }
  tr.audit = elliptical_potential_audit(grads, tr.eps);
  return tr;
}

}  // namespace ngplus
