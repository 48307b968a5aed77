#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <variant>

#include "ngplus/gradients.hpp"
#include "ngplus/linalg.hpp"

namespace ngplus {

/// Left: curvature G G^T (m x m), used when m <= n. Right: G^T G (n x n).
enum class Side { Left, Right };

Side choose_side(Index rows, Index cols);
const char* to_string(Side s);

/// Rebuild from the per-sample gradients of S_k at every refresh.
struct Subsampled {};
/// M <- beta * M + (1 - beta) * fresh, seeded with the first fresh matrix.
struct Momentum {
  double beta = 0.9;
};
/// M <- beta * M + gamma * G G^T from the mini-batch gradient, seeded with lambda0 * I.
struct MiniBatch {
  double beta = 0.9;
  double gamma = 1.0;
};

using CurvatureMode = std::variant<Subsampled, Momentum, MiniBatch>;

void validate(const CurvatureMode& mode);

/// Refresh every `freq` iterations; 0 never refreshes (M keeps its initial value).
struct CurvatureState {
  CurvatureState(Index rows, Index cols, CurvatureMode mode, int freq, double lambda0);

  Side side;
  Index dim;
  Mat m;
  double lambda;
  CurvatureMode mode;
  std::int64_t last_refresh_iter = -1;
  int freq;
  bool seeded = false;  // true once M holds statistics (or its lambda0*I seed)
  Mat low_rank;         // U with M = U U^T, captured on Subsampled refreshes of kappa = 1 layers
  std::uint64_t generation = 0;

  /// Cholesky factor of lambda*I + M, reused until M is refreshed or lambda changes.
  const SpdFactor<double>& damped_factor();

 private:
  std::optional<SpdFactor<double>> factor_;
  std::uint64_t factor_generation_ = 0;
  double factor_lambda_ = 0;
};

/// Left: (1/|S|) sum G_i G_i^T; Right: (1/|S|) sum G_i^T G_i, using the
/// factored form so no m x n per-sample gradient is formed.
Mat build_subsampled(std::span<const PerSampleFactors> factors, Side side);

/// U with U U^T = build_subsampled(factors, side), for kappa = 1 factors:
/// Left columns sqrt(c_i/|S|) g_i with c_i = a_i^T a_i (Right swaps g and a).
Mat low_rank_factor(std::span<const PerSampleFactors> factors, Side side);

Mat update_momentum(const CurvatureState& state, const Mat& fresh, double beta);
Mat update_minibatch(const CurvatureState& state, const Mat& batch_gradient, double beta, double gamma);

struct RefreshInputs {
  std::span<const PerSampleFactors> samples;  // S_k (Subsampled / Momentum)
  const Mat* batch_gradient = nullptr;        // G_k (MiniBatch)
};

/// Applies the k mod freq rule. Returns true when M was recomputed.
bool maybe_refresh(CurvatureState& state, std::int64_t iter, const RefreshInputs& inputs);

struct GfimStudy {
  Mat gfim;        // (1/N) sum G G^T
  Mat efim_block;  // leading m x m block of (1/N) sum vec(G) vec(G)^T
  Mat diff;        // efim_block - gfim / n
  double raw_max_abs = 0;
  double raw_frobenius = 0;
  double normalized_max_abs = 0;
  double normalized_frobenius = 0;
};

/// Draws N standard Gaussian m x n matrices and compares GFIM with the first
/// diagonal block of the EFIM, both raw and with GFIM scaled by 1/n.
GfimStudy efim_gfim_study(Index samples, Index rows, Index cols, std::uint64_t seed);

struct GfimScaling {
  double error_small = 0;  // mean normalized Frobenius error at N
  double error_large = 0;  // at factor * N
  double ratio = 0;
};

/// Monte-Carlo decay of the normalized study error, averaged over `seeds`
/// independent draws at each sample count.
GfimScaling efim_gfim_scaling(Index samples, Index factor, Index rows, Index cols, int seeds, std::uint64_t base_seed);

}  // namespace ngplus
