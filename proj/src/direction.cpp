#include "ngplus/direction.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "ngplus/rng.hpp"

namespace ngplus {

const char* path_name(const SolverPath& path) {
  switch (path.index()) {
    case 0: return "dense";
    case 1: return "smw";
    case 2: return "sketched";
    case 3: return "blockdiag";
  }
  return "?";
}

Mat dense_direction(const Mat& grad, const SpdFactor<double>& factor, Side side) {
  if (side == Side::Left) return -spd_solve(factor, grad);
  return -spd_solve_right(factor, grad);
}

Mat dense_direction(const Mat& grad, CurvatureState& state) {
  const Index dim = state.side == Side::Left ? grad.rows() : grad.cols();
  if (dim != state.dim)
    throw Error(Errc::DimensionMismatch, "gradient does not match the curvature dimension");
  return dense_direction(grad, state.damped_factor(), state.side);
}

Mat smw_direction_from_factor(const Mat& grad, const Mat& u, double lambda) {
  if (!(lambda > 0)) throw Error(Errc::InvalidArgument, "SMW direction needs lambda > 0");
  if (u.cols() == 0) return -grad / lambda;
  if (u.rows() != grad.rows()) throw Error(Errc::DimensionMismatch, "SMW: U rows differ from gradient rows");
  const Mat small = symmetrized(u.transpose() * u);
  const Mat x = spd_solve(spd_factor(small, lambda), u.transpose() * grad);
  return -(grad - u * x) / lambda;
}

namespace {

Mat oriented(const Mat& grad, Side side) { return side == Side::Left ? grad : Mat(grad.transpose()); }

}  // namespace

Mat smw_direction(const Mat& grad, std::span<const PerSampleFactors> factors, double lambda, Side side) {
  const Mat u = low_rank_factor(factors, side);
  return oriented(smw_direction_from_factor(oriented(grad, side), u, lambda), side);
}

RowSketch draw_row_sketch(Index dim, const SketchConfig& cfg) {
  if (cfg.q < 1) throw Error(Errc::InvalidArgument, "sketch size q must be >= 1");
  RowSketch sk;
  sk.scale = std::sqrt(static_cast<double>(dim) / static_cast<double>(cfg.q));
  Rng rng(cfg.seed, Stream::Sketch);
  sk.rows.resize(static_cast<std::size_t>(cfg.q));
  if (cfg.sampling == SketchSampling::WithReplacement) {
    for (auto& r : sk.rows) r = rng.index(dim);
  } else {
    if (cfg.q > dim) throw Error(Errc::SketchTooLarge, "permutation sketch needs q <= " + std::to_string(dim));
    std::vector<Index> perm(static_cast<std::size_t>(dim));
    std::iota(perm.begin(), perm.end(), Index{0});
    for (Index i = 0; i < cfg.q; ++i) {
      const Index j = i + rng.index(dim - i);
      std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
      sk.rows[static_cast<std::size_t>(i)] = perm[static_cast<std::size_t>(i)];
    }
  }
  return sk;
}

Mat sketched_ls_direction_from_factor(const Mat& grad, const Mat& u, double lambda, const SketchConfig& cfg) {
  if (!(lambda > 0)) throw Error(Errc::InvalidArgument, "sketched direction needs lambda > 0");
  const Index m = grad.rows();
  if (cfg.q > m) throw Error(Errc::SketchTooLarge, "q = " + std::to_string(cfg.q) + " exceeds m = " + std::to_string(m));
  if (u.cols() == 0) return -grad / lambda;
  if (u.rows() != m) throw Error(Errc::DimensionMismatch, "sketch: U rows differ from gradient rows");

  const RowSketch sk = draw_row_sketch(m, cfg);
  Mat su(cfg.q, u.cols());
  Mat sg(cfg.q, grad.cols());
  for (Index r = 0; r < cfg.q; ++r) {
    su.row(r) = sk.scale * u.row(sk.rows[static_cast<std::size_t>(r)]);
    sg.row(r) = sk.scale * grad.row(sk.rows[static_cast<std::size_t>(r)]);
  }
  const Mat x = spd_solve(spd_factor(symmetrized(su.transpose() * su), lambda), su.transpose() * sg);
  return -(grad - u * x) / lambda;
}

Mat sketched_ls_direction(const Mat& grad, std::span<const PerSampleFactors> factors, double lambda,
                          const SketchConfig& cfg, Side side) {
  const Mat u = low_rank_factor(factors, side);
  return oriented(sketched_ls_direction_from_factor(oriented(grad, side), u, lambda, cfg), side);
}

Mat sketch_gram(const Mat& grad, const SketchConfig& cfg) {
  const RowSketch sk = draw_row_sketch(grad.cols(), cfg);
  Mat sampled(grad.rows(), cfg.q);
  for (Index c = 0; c < cfg.q; ++c) sampled.col(c) = sk.scale * grad.col(sk.rows[static_cast<std::size_t>(c)]);
  Mat gram = Mat::Zero(grad.rows(), grad.rows());
  gram.selfadjointView<Eigen::Lower>().rankUpdate(sampled);
  return gram.selfadjointView<Eigen::Lower>();
}

Mat block_diag_direction(const Mat& grad, const Mat& curvature, double lambda, Side side, Index blocks) {
  const Mat g = oriented(grad, side);
  const Index dim = g.rows();
  if (curvature.rows() != dim || curvature.cols() != dim)
    throw Error(Errc::DimensionMismatch, "block-diagonal: curvature does not match gradient");
  if (blocks < 1 || dim % blocks != 0)
    throw Error(Errc::NotDivisible, std::to_string(blocks) + " blocks do not divide dimension " + std::to_string(dim));
  const Index p = dim / blocks;
  std::vector<SpdBlock<double>> work(static_cast<std::size_t>(blocks));
  for (Index i = 0; i < blocks; ++i) {
    work[static_cast<std::size_t>(i)].matrix = curvature.block(i * p, i * p, p, p);
    work[static_cast<std::size_t>(i)].rhs = g.middleRows(i * p, p);
  }
  const auto solved = batched_spd_solve<double>(work, lambda);
  Mat d(dim, g.cols());
  for (Index i = 0; i < blocks; ++i) d.middleRows(i * p, p) = -solved[static_cast<std::size_t>(i)];
  return oriented(d, side);
}

Mat block_diag_direction(const Mat& grad, const CurvatureState& state, Index blocks) {
  return block_diag_direction(grad, state.m, state.lambda, state.side, blocks);
}

Mat kfac_direction(const Mat& grad, std::span<const PerSampleFactors> factors, double lambda) {
  if (factors.empty()) throw Error(Errc::EmptyBatch, "KFAC direction from zero samples");
  if (factors.front().kappa() != 1) throw Error(Errc::KappaNotOne, "KFAC baseline needs kappa = 1");
  const Index m = grad.rows();
  const Index n = grad.cols();
  Mat gg = Mat::Zero(m, m);
  Mat aa = Mat::Zero(n, n);
  for (const auto& f : factors) {
    if (f.g.rows() != m || f.a.rows() != n) throw Error(Errc::DimensionMismatch, "KFAC factor shapes");
    gg.noalias() += f.g * f.g.transpose();
    aa.noalias() += f.a * f.a.transpose();
  }
  const double inv = 1.0 / static_cast<double>(factors.size());
  const double root = std::sqrt(lambda);
  const auto left = spd_factor(Mat(symmetrized(gg) * inv), root);
  const auto right = spd_factor(Mat(symmetrized(aa) * inv), root);
  return -spd_solve_right(right, spd_solve(left, grad));
}

namespace {

Mat inverse_quarter_root(const Mat& a, const char* which) {
  const auto eig = sym_eig(a);
  const double scale = std::max(1.0, eig.values.cwiseAbs().maxCoeff());
  if (eig.values.size() > 0 && eig.values(eig.values.size() - 1) < -1e-10 * scale)
    throw Error(Errc::NotPositiveDefinite, std::string("shampoo ") + which + " factor has a negative eigenvalue");
  const Vec w = eig.values.unaryExpr([](double x) { return std::pow(std::max(x, 1e-12), -0.25); });
  return eig.vectors * w.asDiagonal() * eig.vectors.transpose();
}

}  // namespace

Mat shampoo_direction(const Mat& grad, const Mat& left, const Mat& right) {
  if (left.rows() != grad.rows() || right.rows() != grad.cols())
    throw Error(Errc::DimensionMismatch, "shampoo factors do not match gradient");
  return -(inverse_quarter_root(left, "left") * grad * inverse_quarter_root(right, "right"));
}

ShampooPreconditioner::ShampooPreconditioner(Index rows, Index cols, double lambda0)
    : left_(lambda0 * Mat::Identity(rows, rows)), right_(lambda0 * Mat::Identity(cols, cols)) {}

void ShampooPreconditioner::accumulate(const Mat& grad) {
  left_ += symmetrized(grad * grad.transpose());
  right_ += symmetrized(grad.transpose() * grad);
}

Mat ShampooPreconditioner::direction(const Mat& grad) const { return shampoo_direction(grad, left_, right_); }

Mat compute_direction(const Mat& grad, CurvatureState& state, const SolverPath& path) {
  if (std::holds_alternative<DensePath>(path)) return dense_direction(grad, state);
  if (const auto* bd = std::get_if<BlockDiagPath>(&path)) return block_diag_direction(grad, state, bd->blocks);

  if (!std::holds_alternative<Subsampled>(state.mode))
    throw Error(Errc::InvalidArgument, std::string(path_name(path)) + " path needs the subsampled curvature mode");
  if (state.seeded && state.low_rank.size() == 0 && state.m.size() > 0 && !state.m.isZero(0.0))
    throw Error(Errc::KappaNotOne, std::string(path_name(path)) + " path needs kappa = 1 gradients");
  const Mat u = state.low_rank.size() == 0 ? Mat(state.dim, 0) : state.low_rank;
  const Mat g = oriented(grad, state.side);
  if (const auto* sk = std::get_if<SketchedLsPath>(&path)) {
    // fresh sketch per curvature refresh
    SketchConfig cfg = sk->sketch;
    cfg.seed += state.generation * 0x9e3779b97f4a7c15ULL;
    return oriented(sketched_ls_direction_from_factor(g, u, state.lambda, cfg), state.side);
  }
  return oriented(smw_direction_from_factor(g, u, state.lambda), state.side);
}

}  // namespace ngplus
