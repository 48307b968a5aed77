#pragma once

#include <cstdint>
#include <span>
#include <variant>

#include "ngplus/curvature.hpp"
#include "ngplus/gradients.hpp"
#include "ngplus/linalg.hpp"

namespace ngplus {

enum class SketchSampling {
  WithReplacement,      // i.i.d. uniform indices, production mode
  CompletePermutation,  // distinct indices; q = dim samples every index once
};

struct SketchConfig {
  Index q = 1;
  std::uint64_t seed = 0;
  SketchSampling sampling = SketchSampling::WithReplacement;
};

struct DensePath {};
struct SmwPath {};
struct SketchedLsPath {
  SketchConfig sketch;
};
struct BlockDiagPath {
  Index blocks = 1;
};

using SolverPath = std::variant<DensePath, SmwPath, SketchedLsPath, BlockDiagPath>;

const char* path_name(const SolverPath& path);

/// Left: -(lambda I + M)^{-1} G. Right: -G (lambda I + M)^{-1}.
Mat dense_direction(const Mat& grad, const SpdFactor<double>& factor, Side side);
Mat dense_direction(const Mat& grad, CurvatureState& state);

/// -(lambda I + U U^T)^{-1} G through the |B| x |B| Woodbury system.
Mat smw_direction_from_factor(const Mat& grad, const Mat& u, double lambda);
Mat smw_direction(const Mat& grad, std::span<const PerSampleFactors> factors, double lambda,
                  Side side = Side::Left);

/// Row indices and scale sqrt(dim/q) of a uniform row-sampling sketch.
struct RowSketch {
  std::vector<Index> rows;
  double scale = 1;
};
RowSketch draw_row_sketch(Index dim, const SketchConfig& cfg);

/// Sketched ridge problem min ||Omega U X - Omega G||^2 + lambda ||X||^2,
/// returned as the direction -(G - U X*) / lambda.
Mat sketched_ls_direction_from_factor(const Mat& grad, const Mat& u, double lambda, const SketchConfig& cfg);
Mat sketched_ls_direction(const Mat& grad, std::span<const PerSampleFactors> factors, double lambda,
                          const SketchConfig& cfg, Side side = Side::Left);

/// (G Omega)(G Omega)^T with Omega's q columns drawn from sqrt(n/q) e_i.
Mat sketch_gram(const Mat& grad, const SketchConfig& cfg);

/// Preconditions each of `blocks` row groups with its own diagonal block of M.
Mat block_diag_direction(const Mat& grad, const CurvatureState& state, Index blocks);
Mat block_diag_direction(const Mat& grad, const Mat& curvature, double lambda, Side side, Index blocks);

/// -(sqrt(l) I + mean g g^T)^{-1} G (sqrt(l) I + mean a a^T)^{-1}.
Mat kfac_direction(const Mat& grad, std::span<const PerSampleFactors> factors, double lambda);

/// -L^{-1/4} G R^{-1/4}.
Mat shampoo_direction(const Mat& grad, const Mat& left, const Mat& right);

/// Shampoo accumulator: lambda0 I + sum_s G_s G_s^T (or G_s^T G_s).
class ShampooPreconditioner {
 public:
  ShampooPreconditioner(Index rows, Index cols, double lambda0 = 1e-4);
  void accumulate(const Mat& grad);
  Mat direction(const Mat& grad) const;
  const Mat& left() const { return left_; }
  const Mat& right() const { return right_; }

 private:
  Mat left_;
  Mat right_;
};

/// Dispatches to the configured solver path. Smw and SketchedLs use the
/// low-rank factor captured by the last Subsampled refresh.
Mat compute_direction(const Mat& grad, CurvatureState& state, const SolverPath& path);

}  // namespace ngplus
