#include <Eigen/Eigenvalues>
#include <vector>

#include "doctest.h"
#include "ngplus/linalg.hpp"
#include "ngplus/rng.hpp"

using namespace ngplus;

namespace {

Mat random_spd(Index n, Rng& rng, double shift = 0.5) {
  const Mat b = rng.gaussian(n, n);
  return b * b.transpose() / static_cast<double>(n) + shift * Mat::Identity(n, n);
}

}  // namespace

TEST_CASE("spd_factor small cases") {
  const auto f = spd_factor(Mat(Mat::Zero(2, 2)), 1.0);
  CHECK(f.lower.isApprox(Mat::Identity(2, 2)));

  Mat a(2, 2);
  a << 2, 0, 0, 2;
  const auto g = spd_factor(a, 0.0);
  CHECK(g.lower(0, 0) == doctest::Approx(std::sqrt(2.0)));
  CHECK(g.lower(1, 1) == doctest::Approx(std::sqrt(2.0)));
  CHECK(g.lower(1, 0) == 0.0);
}

TEST_CASE("spd_factor reconstructs A + damping I") {
  Rng rng(1);
  const Mat a = random_spd(8, rng);
  const auto f = spd_factor(a, 0.1);
  CHECK((f.reconstruct() - (a + 0.1 * Mat::Identity(8, 8))).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("spd_factor rejects bad input") {
  Mat ns(2, 2);
  ns << 1, 2, 0, 1;
  CHECK_THROWS_AS(spd_factor(ns, 0.0), Error);
  try {
    spd_factor(ns, 0.0);
  } catch (const Error& e) {
    CHECK(e.code() == Errc::NotSymmetric);
  }

  Mat indef(2, 2);
  indef << 1, 0, 0, -1;
  try {
    spd_factor(indef, 0.0);
    FAIL("expected NotPositiveDefinite");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::NotPositiveDefinite);
  }
  CHECK_THROWS_AS(spd_factor(Mat(Mat::Zero(2, 3)), 1.0), Error);
  CHECK_THROWS_AS(spd_factor(Mat(Mat::Identity(2, 2)), -1.0), Error);
}

TEST_CASE("spd_solve") {
  const auto id = spd_factor(Mat(Mat::Identity(3, 3)), 0.0);
  Rng rng(2);
  const Mat b = rng.gaussian(3, 4);
  CHECK(spd_solve(id, b) == b);

  const auto two = spd_factor(Mat(2 * Mat::Identity(2, 2)), 0.0);
  Mat rhs(2, 1);
  rhs << 4, 6;
  const Mat x = spd_solve(two, rhs);
  CHECK(x(0, 0) == doctest::Approx(2.0));
  CHECK(x(1, 0) == doctest::Approx(3.0));

  const Mat a = random_spd(16, rng);
  const Mat bb = rng.gaussian(16, 5);
  const Mat xx = spd_solve(spd_factor(a, 0.0), bb);
  CHECK((a * xx - bb).norm() / bb.norm() < 1e-8);

  const Mat br = rng.gaussian(5, 16);
  const Mat xr = spd_solve_right(spd_factor(a, 0.0), br);
  CHECK((xr * a - br).norm() / br.norm() < 1e-8);

  CHECK_THROWS_AS(spd_solve(id, Mat(Mat::Zero(2, 1))), Error);
}

TEST_CASE("log_det matches Eigen") {
  Rng rng(3);
  const Mat a = random_spd(6, rng);
  const double ref = std::log(a.determinant());
  CHECK(log_det(spd_factor(a, 0.0)) == doctest::Approx(ref).epsilon(1e-12));
}

TEST_CASE("weighted_norm") {
  Rng rng(4);
  const Mat a = rng.gaussian(3, 2);
  CHECK(weighted_norm(a, spd_factor(Mat(Mat::Identity(3, 3)), 0.0)) == doctest::Approx(a.norm()));
  CHECK(weighted_norm(Mat(Mat::Zero(3, 2)), spd_factor(Mat(Mat::Identity(3, 3)), 0.0)) == 0.0);

  Mat b(2, 2);
  b << 4, 0, 0, 1;
  Mat col(2, 1);
  col << 1, 1;
  CHECK(weighted_norm(col, spd_factor(b, 0.0)) == doctest::Approx(std::sqrt(5.0)));
}

TEST_CASE("sym_eig") {
  const auto e1 = sym_eig(Mat(Mat::Identity(3, 3)));
  CHECK(e1.values.isApprox(Vec::Ones(3)));
  CHECK((e1.vectors.transpose() * e1.vectors - Mat::Identity(3, 3)).norm() < 1e-14);

  Mat d(2, 2);
  d << 1, 0, 0, 3;
  const auto e2 = sym_eig(d);
  CHECK(e2.values(0) == doctest::Approx(3.0));
  CHECK(e2.values(1) == doctest::Approx(1.0));
  CHECK(e2.vectors.cwiseAbs().isApprox((Mat(2, 2) << 0, 1, 1, 0).finished()));

  Rng rng(5);
  const Mat b = rng.gaussian(10, 10);
  const Mat s = (b + b.transpose()) / 2;
  const auto e = sym_eig(s);
  const Mat rec = e.vectors * e.values.asDiagonal() * e.vectors.transpose();
  CHECK((rec - s).norm() < 1e-8);
  for (Index i = 1; i < e.values.size(); ++i) CHECK(e.values(i - 1) >= e.values(i));

  // independent oracle
  Eigen::SelfAdjointEigenSolver<Mat> ref(s);
  const Vec ref_desc = ref.eigenvalues().reverse();
  CHECK((e.values - ref_desc).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("sym_power") {
  Mat a = 16 * Mat::Identity(2, 2);
  CHECK(sym_power(a, -0.25).isApprox(0.5 * Mat::Identity(2, 2)));
  Rng rng(6);
  const Mat s = random_spd(5, rng);
  const Mat q = sym_power(s, 0.25);
  CHECK(((q * q * q * q) - s).norm() < 1e-8);
}

TEST_CASE("batched_spd_solve") {
  Rng rng(7);
  const Mat a = random_spd(8, rng);
  const Mat b = rng.gaussian(8, 3);

  std::vector<SpdBlock<double>> same{{a, b}, {a, b}};
  const auto two = batched_spd_solve<double>(same, 0.1);
  CHECK(two[0] == two[1]);

  std::vector<SpdBlock<double>> one{{a, b}};
  const auto single = batched_spd_solve<double>(one, 0.1);
  CHECK(single[0] == spd_solve(spd_factor(a, 0.1), b));

  std::vector<SpdBlock<double>> four;
  for (int i = 0; i < 4; ++i) four.push_back({random_spd(8, rng), rng.gaussian(8, 2)});
  const auto out = batched_spd_solve<double>(four, 0.05);
  for (std::size_t i = 0; i < four.size(); ++i) {
    const Mat seq = spd_solve(spd_factor(four[i].matrix, 0.05), four[i].rhs);
    CHECK((out[i] - seq).cwiseAbs().maxCoeff() <= 1e-12);
  }

  std::vector<SpdBlock<double>> bad{{a, b}, {-a, b}};
  try {
    batched_spd_solve<double>(bad, 0.0);
    FAIL("expected failure");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::NotPositiveDefinite);
    CHECK(std::string(e.what()).find("block 1") != std::string::npos);
  }
}

TEST_CASE("templated on scalar") {
  Eigen::MatrixXf a = Eigen::MatrixXf::Identity(3, 3) * 4.0f;
  const auto f = spd_factor(a, 0.0f);
  CHECK(f.lower(0, 0) == doctest::Approx(2.0f));
  const auto e = sym_eig(a);
  CHECK(e.values(0) == doctest::Approx(4.0f));
}
