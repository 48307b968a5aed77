#include <cmath>

#include "doctest.h"
#include "ngplus/curvature.hpp"

using namespace ngplus;

namespace {

std::vector<PerSampleFactors> random_factors(Index m, Index n, Index count, Rng& rng, Index kappa = 1) {
  std::vector<PerSampleFactors> out;
  for (Index i = 0; i < count; ++i) out.push_back({rng.gaussian(m, kappa), rng.gaussian(n, kappa), i});
  return out;
}

// (1/|S|) sum G_i G_i^T (left) or G_i^T G_i (right) from dense per-sample matrices.
Mat dense_curvature(const std::vector<PerSampleFactors>& f, Side side) {
  const Index dim = side == Side::Left ? f[0].g.rows() : f[0].a.rows();
  Mat sum = Mat::Zero(dim, dim);
  for (const auto& s : f) {
    const Mat g = s.dense();
    sum += side == Side::Left ? Mat(g * g.transpose()) : Mat(g.transpose() * g);
  }
  return sum / static_cast<double>(f.size());
}

}  // namespace

TEST_CASE("choose_side") {
  CHECK(choose_side(3, 5) == Side::Left);
  CHECK(choose_side(5, 3) == Side::Right);
  CHECK(choose_side(4, 4) == Side::Left);
}

TEST_CASE("build_subsampled") {
  std::vector<PerSampleFactors> id{{Mat::Identity(2, 2), Mat::Identity(2, 2), 0}};
  CHECK(build_subsampled(id, Side::Left).isApprox(Mat::Identity(2, 2)));

  Mat e1 = Mat::Zero(2, 1), e2 = Mat::Zero(2, 1);
  e1(0, 0) = 1;
  e2(1, 0) = 1;
  std::vector<PerSampleFactors> two{{e1, e1, 0}, {e2, e2, 1}};
  CHECK(build_subsampled(two, Side::Left).isApprox(0.5 * Mat::Identity(2, 2)));

  Rng rng(20);
  for (Index kappa : {1, 3}) {
    const auto f = random_factors(4, 6, 8, rng, kappa);
    for (Side side : {Side::Left, Side::Right}) {
      const Mat m = build_subsampled(f, side);
      CHECK((m - dense_curvature(f, side)).cwiseAbs().maxCoeff() < 1e-12);
      CHECK(is_symmetric(m));
      CHECK(sym_eig(m).values.minCoeff() >= -1e-10);
    }
  }
  CHECK_THROWS_AS(build_subsampled({}, Side::Left), Error);
}

TEST_CASE("left/right duality") {
  Rng rng(21);
  const auto f = random_factors(5, 3, 6, rng, 2);
  std::vector<PerSampleFactors> swapped;
  for (const auto& s : f) swapped.push_back({s.a, s.g, s.sample_index});  // G^T = a g^T
  CHECK((build_subsampled(swapped, Side::Left) - build_subsampled(f, Side::Right)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((build_subsampled(swapped, Side::Right) - build_subsampled(f, Side::Left)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("low_rank_factor") {
  Rng rng(22);
  const auto f = random_factors(6, 4, 5, rng);
  for (Side side : {Side::Left, Side::Right}) {
    const Mat u = low_rank_factor(f, side);
    CHECK((u * u.transpose() - build_subsampled(f, side)).cwiseAbs().maxCoeff() < 1e-12);
  }
  const auto k2 = random_factors(6, 4, 5, rng, 2);
  try {
    low_rank_factor(k2, Side::Left);
    FAIL("expected KappaNotOne");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::KappaNotOne);
  }
}

TEST_CASE("update_momentum") {
  CurvatureState st(2, 3, Momentum{0.9}, 1, 0.1);
  st.m = Mat::Identity(2, 2);
  Rng rng(23);
  const Mat fresh = rng.gaussian(2, 2);
  CHECK(update_momentum(st, fresh, 0.0) == fresh);
  CHECK(update_momentum(st, fresh, 1.0) == st.m);
  CHECK(update_momentum(st, Mat::Zero(2, 2), 0.9).isApprox(0.9 * Mat::Identity(2, 2)));
  CHECK_THROWS_AS(update_momentum(st, Mat::Zero(3, 3), 0.5), Error);
}

TEST_CASE("update_minibatch") {
  CurvatureState st(2, 2, MiniBatch{0.9, 0.5}, 1, 0.1);
  CHECK(st.m.isApprox(0.1 * Mat::Identity(2, 2)));
  Mat g(2, 2);
  g << 1, 0, 0, 0;
  Mat expect(2, 2);
  expect << 0.59, 0, 0, 0.09;
  CHECK((update_minibatch(st, g, 0.9, 0.5) - expect).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(update_minibatch(st, g, 1.0, 0.0) == st.m);

  // beta = gamma = 1 accumulates lambda0 I + sum G G^T
  Rng rng(24);
  CurvatureState acc(3, 5, MiniBatch{1.0, 1.0}, 1, 0.2);
  Mat ref = 0.2 * Mat::Identity(3, 3);
  for (int k = 0; k < 6; ++k) {
    const Mat gk = rng.gaussian(3, 5);
    ref += gk * gk.transpose();
    CHECK(maybe_refresh(acc, k, RefreshInputs{{}, &gk}));
  }
  CHECK((acc.m - ref).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("lazy refresh rule") {
  Rng rng(25);
  const auto f = random_factors(3, 4, 4, rng);
  {
    CurvatureState st(3, 4, Subsampled{}, 1, 0.1);
    for (int k = 0; k < 4; ++k) CHECK(maybe_refresh(st, k, RefreshInputs{f}));
  }
  {
    CurvatureState st(3, 4, Subsampled{}, 2, 0.1);
    std::vector<int> hits;
    for (int k = 0; k < 4; ++k)
      if (maybe_refresh(st, k, RefreshInputs{f})) hits.push_back(k);
    CHECK(hits == std::vector<int>{0, 2});
  }
  {
    CurvatureState st(3, 4, Subsampled{}, 500, 0.1);
    CHECK(maybe_refresh(st, 0, RefreshInputs{f}));
    const Mat before = st.m;
    const SpdFactor<double>* cached = &st.damped_factor();
    const Mat lower = cached->lower;
    const auto other = random_factors(3, 4, 4, rng);
    CHECK_FALSE(maybe_refresh(st, 250, RefreshInputs{other}));
    CHECK(st.m == before);
    CHECK(&st.damped_factor() == cached);
    CHECK(st.damped_factor().lower == lower);
  }
  {
    CurvatureState st(3, 4, Subsampled{}, 0, 0.1);
    for (int k = 0; k < 5; ++k) CHECK_FALSE(maybe_refresh(st, k, RefreshInputs{f}));
    CHECK(st.m.isZero(0.0));
  }
  CHECK_THROWS_AS(CurvatureState(3, 4, Subsampled{}, -1, 0.1), Error);
  CHECK_THROWS_AS(CurvatureState(3, 4, Momentum{1.5}, 1, 0.1), Error);
}

TEST_CASE("subsampled with freq 1 equals momentum with beta 0") {
  Rng rng(26);
  CurvatureState sub(4, 6, Subsampled{}, 1, 0.1);
  CurvatureState mom(4, 6, Momentum{0.0}, 1, 0.1);
  for (int k = 0; k < 3; ++k) {
    const auto f = random_factors(4, 6, 5, rng);
    maybe_refresh(sub, k, RefreshInputs{f});
    maybe_refresh(mom, k, RefreshInputs{f});
    CHECK(sub.m == mom.m);
  }
}

TEST_CASE("momentum mode seeds with the first fresh matrix") {
  Rng rng(27);
  CurvatureState st(3, 5, Momentum{0.9}, 1, 0.1);
  const auto f0 = random_factors(3, 5, 4, rng);
  const auto f1 = random_factors(3, 5, 4, rng);
  maybe_refresh(st, 0, RefreshInputs{f0});
  CHECK(st.m == build_subsampled(f0, Side::Left));
  maybe_refresh(st, 1, RefreshInputs{f1});
  const Mat expect = 0.9 * build_subsampled(f0, Side::Left) + 0.1 * build_subsampled(f1, Side::Left);
  CHECK((st.m - expect).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("efim_gfim_study") {
  const GfimStudy s = efim_gfim_study(400, 30, 40, 1);
  CHECK(s.gfim.rows() == 30);
  CHECK(is_symmetric(s.gfim));
  CHECK(is_symmetric(s.efim_block));
  // E[gfim] = n I, E[efim_block] = I
  CHECK(s.gfim.diagonal().mean() == doctest::Approx(40.0).epsilon(0.05));
  CHECK(s.efim_block.diagonal().mean() == doctest::Approx(1.0).epsilon(0.05));
  const double expected = std::sqrt(30.0 * 31.0 * (1 - 1.0 / 40) / 400);
  CHECK(s.normalized_frobenius / expected == doctest::Approx(1.0).epsilon(0.15));

  // same seed, same numbers
  const GfimStudy again = efim_gfim_study(400, 30, 40, 1);
  CHECK(again.diff == s.diff);

  // chunking must not change the result: N not a multiple of the chunk size
  const GfimStudy odd = efim_gfim_study(37, 5, 6, 9);
  Rng rng(9, Stream::Study);
  Mat gf = Mat::Zero(5, 5), ef = Mat::Zero(5, 5);
  for (int i = 0; i < 37; ++i) {
    Mat g(5, 6);
    for (Index j = 0; j < 6; ++j)
      for (Index r = 0; r < 5; ++r) g(r, j) = rng.normal();
    gf += g * g.transpose();
    ef += g.col(0) * g.col(0).transpose();
  }
  CHECK((odd.gfim - gf / 37).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((odd.efim_block - ef / 37).cwiseAbs().maxCoeff() < 1e-12);

  CHECK_THROWS_AS(efim_gfim_study(0, 2, 2, 0), Error);
}

TEST_CASE("efim_gfim_scaling decays like 1/sqrt(N)") {
  const GfimScaling sc = efim_gfim_scaling(200, 4, 20, 20, 10, 3);
  CHECK(sc.ratio == doctest::Approx(0.5).epsilon(0.2));
}
