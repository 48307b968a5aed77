#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ngplus/linalg.hpp"

namespace ngplus {

/// Online preconditioned step state. Parameters are k x n, the accumulator
/// L is n x n and starts at eps * I.
struct OnlineState {
  Mat l;
  double eps = 1;
  double alpha = 1;
  double radius = std::numeric_limits<double>::infinity();  // Frobenius ball; infinity = unconstrained
  std::int64_t t = 0;

  Index dim() const { return l.rows(); }
  double diameter() const { return 2 * radius; }
};

/// eps = 2 / (alpha D^2).
double default_epsilon(double alpha, double diameter);

OnlineState make_online_state(Index dim, double alpha, double radius, std::optional<double> eps = std::nullopt);

/// L <- L + G^T G, then Theta <- Proj_L(Theta - (1/alpha) G L^{-1}).
Mat online_step(OnlineState& state, const Mat& theta, const Mat& grad);

/// argmin_{||X||_F <= R} tr((X - Y) L (X - Y)^T).
Mat weighted_project(const Mat& y, const Mat& l, double radius);

/// One round of the quadratic stream: loss 0.5 ||Theta x - y||^2.
struct Round {
  Vec x;
  Vec y;
};

enum class StreamKind { Random, Constant, Alternating };

struct StreamSpec {
  Index input_dim = 4;   // n
  Index output_dim = 2;  // rows of Theta
  double radius = 1;     // ||x|| <= 1, ||y|| <= radius, feasible set ||Theta||_F <= radius
  StreamKind kind = StreamKind::Random;
  std::uint64_t seed = 0;
};

StreamKind parse_stream_kind(const std::string& name);

std::vector<Round> generate_stream(const StreamSpec& spec, Index rounds);

double round_loss(const Mat& theta, const Round& r);
Mat round_gradient(const Mat& theta, const Round& r);

/// Minimizer of 0.5 tr(Theta A Theta^T) - tr(Theta C^T) over the Frobenius
/// ball, from the KKT system Theta (A + mu I) = C.
Mat hindsight_optimum(const Mat& xx, const Mat& yx, double radius);

struct EllipticalAudit {
  double lhs = 0;   // sum_t tr(G_t L_t^{-1} G_t^T)
  double rhs = 0;   // log det L_T - log det L_0
  double cap = 0;   // n log((T L_G^2 + eps) / eps)
  double lipschitz = 0;

  bool holds(double slack = 1e-8) const { return lhs <= rhs + slack && rhs <= cap + slack; }
};

EllipticalAudit elliptical_potential_audit(std::span<const Mat> grads, double eps);

struct RegretOptions {
  std::optional<double> alpha;  // default 1 / (4 R^2)
  std::optional<double> eps;    // default 2 / (alpha D^2)
};

struct RegretTrace {
  std::vector<double> loss;       // psi_t(Theta_t)
  std::vector<double> grad_norm;  // ||G_t||_F
  std::vector<double> regret;     // R_t against the hindsight optimum of rounds 1..t
  std::vector<double> bound;      // (n / alpha) log(alpha L_G^2 D^2 t), running L_G
  std::vector<double> potential;  // sum_{s<=t} ||G_s||^2_{L_s^{-1}}
  double alpha = 0;
  double eps = 0;
  double lipschitz = 0;
  Index burn_in = 0;              // first t (1-based) with bound_t > 1, 0 if none
  Index first_violation = 0;      // first t >= burn_in with regret_t > bound_t, 0 if none
  double worst_ratio = 0;         // max regret_t / bound_t past burn-in
  EllipticalAudit audit;

  bool bound_holds() const { return burn_in > 0 && first_violation == 0; }
};

RegretTrace run_regret(const StreamSpec& spec, Index rounds, const RegretOptions& opts = {});

}  // namespace ngplus
