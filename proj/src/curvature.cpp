#include "ngplus/curvature.hpp"

#include <cmath>
#include <string>

#include "ngplus/rng.hpp"

namespace ngplus {

Side choose_side(Index rows, Index cols) { return rows <= cols ? Side::Left : Side::Right; }

const char* to_string(Side s) { return s == Side::Left ? "left" : "right"; }

void validate(const CurvatureMode& mode) {
  auto check_beta = [](double beta) {
    if (!(beta >= 0.0 && beta <= 1.0)) throw Error(Errc::InvalidArgument, "curvature beta must lie in [0, 1]");
  };
  if (const auto* mo = std::get_if<Momentum>(&mode)) check_beta(mo->beta);
  if (const auto* mb = std::get_if<MiniBatch>(&mode)) {
    check_beta(mb->beta);
    if (!(mb->gamma >= 0.0)) throw Error(Errc::InvalidArgument, "curvature gamma must be nonnegative");
  }
}

CurvatureState::CurvatureState(Index rows, Index cols, CurvatureMode mode_, int freq_, double lambda0)
    : side(choose_side(rows, cols)),
      dim(std::min(rows, cols)),
      m(Mat::Zero(dim, dim)),
      lambda(lambda0),
      mode(mode_),
      freq(freq_) {
  validate(mode);
  if (freq < 0) throw Error(Errc::InvalidArgument, "refresh frequency must be >= 0");
  if (std::holds_alternative<MiniBatch>(mode)) {
    m = lambda0 * Mat::Identity(dim, dim);
    seeded = true;
  }
}

const SpdFactor<double>& CurvatureState::damped_factor() {
  if (!factor_ || factor_generation_ != generation || factor_lambda_ != lambda) {
    factor_ = spd_factor(m, lambda);
    factor_generation_ = generation;
    factor_lambda_ = lambda;
  }
  return *factor_;
}

namespace {

void check_factor_shapes(std::span<const PerSampleFactors> factors) {
  if (factors.empty()) throw Error(Errc::EmptyBatch, "curvature from zero samples");
  const auto& first = factors.front();
  for (const auto& f : factors) {
    if (f.g.rows() != first.g.rows() || f.a.rows() != first.a.rows() || f.g.cols() != f.a.cols())
      throw Error(Errc::DimensionMismatch, "inconsistent per-sample factor shapes");
  }
}

}  // namespace

Mat build_subsampled(std::span<const PerSampleFactors> factors, Side side) {
  check_factor_shapes(factors);
  const Index dim = side == Side::Left ? factors.front().g.rows() : factors.front().a.rows();
  Mat sum = Mat::Zero(dim, dim);
  for (const auto& f : factors) {
    // G A^T A G^T (left) or A G^T G A^T (right)
    const Mat& outer = side == Side::Left ? f.g : f.a;
    const Mat& inner = side == Side::Left ? f.a : f.g;
    const Mat gram = inner.transpose() * inner;
    sum.noalias() += outer * gram * outer.transpose();
  }
  return symmetrized(sum) / static_cast<double>(factors.size());
}

Mat low_rank_factor(std::span<const PerSampleFactors> factors, Side side) {
  check_factor_shapes(factors);
  if (factors.front().kappa() != 1)
    throw Error(Errc::KappaNotOne, "low-rank curvature needs kappa = 1, got " + std::to_string(factors.front().kappa()));
  const Index dim = side == Side::Left ? factors.front().g.rows() : factors.front().a.rows();
  const double inv_count = 1.0 / static_cast<double>(factors.size());
  Mat u(dim, static_cast<Index>(factors.size()));
  for (std::size_t i = 0; i < factors.size(); ++i) {
    const auto& f = factors[i];
    const Mat& outer = side == Side::Left ? f.g : f.a;
    const Mat& inner = side == Side::Left ? f.a : f.g;
    u.col(static_cast<Index>(i)) = std::sqrt(inner.squaredNorm() * inv_count) * outer.col(0);
  }
  return u;
}

Mat update_momentum(const CurvatureState& state, const Mat& fresh, double beta) {
  if (fresh.rows() != state.m.rows() || fresh.cols() != state.m.cols())
    throw Error(Errc::DimensionMismatch, "momentum update: fresh matrix shape differs from state");
  return beta * state.m + (1.0 - beta) * fresh;
}

Mat update_minibatch(const CurvatureState& state, const Mat& batch_gradient, double beta, double gamma) {
  const bool left = state.side == Side::Left;
  const Index dim = left ? batch_gradient.rows() : batch_gradient.cols();
  if (dim != state.m.rows())
    throw Error(Errc::DimensionMismatch, "mini-batch update: gradient does not match curvature dim");
  const Mat gram = left ? Mat(batch_gradient * batch_gradient.transpose())
                        : Mat(batch_gradient.transpose() * batch_gradient);
  return beta * state.m + gamma * symmetrized(gram);
}

bool maybe_refresh(CurvatureState& state, std::int64_t iter, const RefreshInputs& inputs) {
  if (iter < 0) throw Error(Errc::InvalidArgument, "iteration must be nonnegative");
  if (state.freq == 0 || iter % state.freq != 0) return false;

  if (std::holds_alternative<Subsampled>(state.mode)) {
    state.m = build_subsampled(inputs.samples, state.side);
    state.low_rank = inputs.samples.front().kappa() == 1 ? low_rank_factor(inputs.samples, state.side) : Mat();
  } else if (const auto* mo = std::get_if<Momentum>(&state.mode)) {
    Mat fresh = build_subsampled(inputs.samples, state.side);
    state.m = state.seeded ? update_momentum(state, fresh, mo->beta) : std::move(fresh);
  } else {
    const auto& mb = std::get<MiniBatch>(state.mode);
    if (inputs.batch_gradient == nullptr)
      throw Error(Errc::InvalidArgument, "mini-batch curvature mode needs the batch gradient");
    state.m = update_minibatch(state, *inputs.batch_gradient, mb.beta, mb.gamma);
  }
  state.seeded = true;
  state.last_refresh_iter = iter;
  ++state.generation;
  return true;
}

GfimStudy efim_gfim_study(Index samples, Index rows, Index cols, std::uint64_t seed) {
  if (samples < 1 || rows < 1 || cols < 1) throw Error(Errc::InvalidArgument, "efim_gfim_study: sizes must be >= 1");
  Rng rng(seed, Stream::Study);

  // Samples are stacked side by side so the Gram products run as rank-k updates.
  constexpr Index kChunk = 16;
  Mat gfim = Mat::Zero(rows, rows);
  Mat efim = Mat::Zero(rows, rows);
  Mat stacked(rows, kChunk * cols);
  Mat first_cols(rows, kChunk);
  Index done = 0;
  while (done < samples) {
    const Index take = std::min(kChunk, samples - done);
    for (Index s = 0; s < take; ++s) {
      auto block = stacked.middleCols(s * cols, cols);
      for (Index j = 0; j < cols; ++j)
        for (Index i = 0; i < rows; ++i) block(i, j) = rng.normal();
      first_cols.col(s) = block.col(0);
    }
    gfim.selfadjointView<Eigen::Lower>().rankUpdate(stacked.leftCols(take * cols));
    efim.selfadjointView<Eigen::Lower>().rankUpdate(first_cols.leftCols(take));
    done += take;
  }
  GfimStudy out;
  const double inv = 1.0 / static_cast<double>(samples);
  out.gfim = Mat(gfim.selfadjointView<Eigen::Lower>()) * inv;
  out.efim_block = Mat(efim.selfadjointView<Eigen::Lower>()) * inv;

  const Mat raw = out.efim_block - out.gfim;
  out.diff = out.efim_block - out.gfim / static_cast<double>(cols);
  out.raw_max_abs = raw.cwiseAbs().maxCoeff();
  out.raw_frobenius = raw.norm();
  out.normalized_max_abs = out.diff.cwiseAbs().maxCoeff();
  out.normalized_frobenius = out.diff.norm();
  return out;
}

GfimScaling efim_gfim_scaling(Index samples, Index factor, Index rows, Index cols, int seeds, std::uint64_t base_seed) {
  if (seeds < 1 || factor < 1) throw Error(Errc::InvalidArgument, "efim_gfim_scaling: seeds and factor must be >= 1");
  GfimScaling out;
  for (int s = 0; s < seeds; ++s) {
    const auto seed = base_seed + static_cast<std::uint64_t>(s);
    out.error_small += efim_gfim_study(samples, rows, cols, seed).normalized_frobenius;
    out.error_large += efim_gfim_study(samples * factor, rows, cols, seed + 0x9e3779b9ULL).normalized_frobenius;
  }
  out.error_small /= seeds;
  out.error_large /= seeds;
  out.ratio = out.error_large / out.error_small;
  return out;
}

}  // namespace ngplus
