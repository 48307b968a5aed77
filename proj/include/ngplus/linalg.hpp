#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "ngplus/error.hpp"

namespace ngplus {

template <typename Scalar>
using MatX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VecX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Mat = MatX<double>;
using Vec = VecX<double>;
using Index = Eigen::Index;

/// Lower Cholesky factor of (A + damping * I).
template <typename Scalar>
struct SpdFactor {
  MatX<Scalar> lower;
  Scalar damping{0};

  Index dim() const { return lower.rows(); }
  MatX<Scalar> reconstruct() const { return lower * lower.transpose(); }
};

struct SymEigOptions {
  double tolerance = 1e-12;  // off-diagonal Frobenius mass relative to ||A||_F
  int max_sweeps = 100;
};

template <typename Scalar>
struct SymEig {
  VecX<Scalar> values;   // descending
  MatX<Scalar> vectors;  // orthonormal columns, vectors.col(i) pairs with values(i)
};

template <typename Scalar>
struct SpdBlock {
  MatX<Scalar> matrix;
  MatX<Scalar> rhs;
};

namespace detail {

template <typename Derived>
void require_square(const Eigen::MatrixBase<Derived>& a, const char* what) {
  if (a.rows() != a.cols()) {
    throw Error(Errc::DimensionMismatch, std::string(what) + ": matrix is " + std::to_string(a.rows()) +
                                             "x" + std::to_string(a.cols()) + ", expected square");
  }
}

}  // namespace detail

/// Largest |A(i,j) - A(j,i)|.
template <typename Derived>
typename Derived::Scalar asymmetry(const Eigen::MatrixBase<Derived>& a) {
  if (a.size() == 0) return 0;
  return (a - a.transpose()).cwiseAbs().maxCoeff();
}

/// Symmetry test with tolerance 1e-12 scaled by max(1, max|A|).
template <typename Derived>
bool is_symmetric(const Eigen::MatrixBase<Derived>& a, double tol = 1e-12) {
  if (a.rows() != a.cols()) return false;
  if (a.size() == 0) return true;
  const double scale = std::max<double>(1.0, a.cwiseAbs().maxCoeff());
  return asymmetry(a) <= tol * scale;
}

template <typename Derived>
void require_symmetric(const Eigen::MatrixBase<Derived>& a, const char* what) {
  detail::require_square(a, what);
  if (!is_symmetric(a)) {
    throw Error(Errc::NotSymmetric,
                std::string(what) + ": max|A - A^T| = " + std::to_string(double(asymmetry(a))));
  }
}

/// Cholesky factor of A + damping*I. A pivot below 1e-14 * max diagonal is
/// reported as NotPositiveDefinite.
template <typename Derived>
SpdFactor<typename Derived::Scalar> spd_factor(const Eigen::MatrixBase<Derived>& a,
                                                typename Derived::Scalar damping) {
  using Scalar = typename Derived::Scalar;
  require_symmetric(a, "spd_factor");
  if (damping < 0) throw Error(Errc::InvalidArgument, "spd_factor: negative damping");

  const Index n = a.rows();
  SpdFactor<Scalar> f;
  f.damping = damping;
  f.lower = MatX<Scalar>::Zero(n, n);
  if (n == 0) return f;

  const Scalar max_diag = (a.diagonal().array() + damping).abs().maxCoeff();
  const Scalar pivot_floor = Scalar(1e-14) * max_diag;
  MatX<Scalar>& l = f.lower;
  for (Index j = 0; j < n; ++j) {
    Scalar pivot = a(j, j) + damping;
    if (j > 0) pivot -= l.row(j).head(j).squaredNorm();
    if (!(pivot > 0) || pivot < pivot_floor) {
      throw Error(Errc::NotPositiveDefinite,
                  "pivot " + std::to_string(double(pivot)) + " at column " + std::to_string(j) +
                      " (floor " + std::to_string(double(pivot_floor)) + ")");
    }
    const Scalar diag = std::sqrt(pivot);
    l(j, j) = diag;
    for (Index i = j + 1; i < n; ++i) {
      Scalar v = a(i, j);
      if (j > 0) v -= l.row(i).head(j).dot(l.row(j).head(j));
      l(i, j) = v / diag;
    }
  }
  return f;
}

/// Solves (A + damping*I) X = B with a factor from spd_factor.
template <typename Scalar, typename Derived>
MatX<Scalar> spd_solve(const SpdFactor<Scalar>& f, const Eigen::MatrixBase<Derived>& b) {
  if (f.dim() != b.rows()) {
    throw Error(Errc::DimensionMismatch, "spd_solve: factor dim " + std::to_string(f.dim()) +
                                             " vs rhs rows " + std::to_string(b.rows()));
  }
  MatX<Scalar> x = b;
  f.lower.template triangularView<Eigen::Lower>().solveInPlace(x);
  f.lower.transpose().template triangularView<Eigen::Upper>().solveInPlace(x);
  return x;
}

/// Right solve X (A + damping*I) = B.
template <typename Scalar, typename Derived>
MatX<Scalar> spd_solve_right(const SpdFactor<Scalar>& f, const Eigen::MatrixBase<Derived>& b) {
  if (f.dim() != b.cols()) {
    throw Error(Errc::DimensionMismatch, "spd_solve_right: factor dim " + std::to_string(f.dim()) +
                                             " vs rhs cols " + std::to_string(b.cols()));
  }
  MatX<Scalar> xt = b.transpose();
  return spd_solve(f, xt).transpose();
}

template <typename Scalar>
Scalar log_det(const SpdFactor<Scalar>& f) {
  return Scalar(2) * f.lower.diagonal().array().log().sum();
}

/// sqrt(tr(A^T (B + damping*I) A)) for the factored B.
template <typename Scalar, typename Derived>
Scalar weighted_norm(const Eigen::MatrixBase<Derived>& a, const SpdFactor<Scalar>& b) {
  if (b.dim() != a.rows()) {
    throw Error(Errc::DimensionMismatch, "weighted_norm: weight dim " + std::to_string(b.dim()) +
                                             " vs rows " + std::to_string(a.rows()));
  }
  return (b.lower.transpose() * a).norm();
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
template <typename Derived>
SymEig<typename Derived::Scalar> sym_eig(const Eigen::MatrixBase<Derived>& input,
                                          const SymEigOptions& opts = {}) {
  using Scalar = typename Derived::Scalar;
  require_symmetric(input, "sym_eig");
  const Index n = input.rows();
  MatX<Scalar> a = (input + input.transpose()) / Scalar(2);
  MatX<Scalar> v = MatX<Scalar>::Identity(n, n);

  const Scalar tol = std::max(Scalar(opts.tolerance), Scalar(8) * std::numeric_limits<Scalar>::epsilon());
  const Scalar target = tol * a.norm();
  auto off_mass = [&] {
    Scalar s = 0;
    for (Index j = 0; j < n; ++j)
      for (Index i = 0; i < n; ++i)
        if (i != j) s += a(i, j) * a(i, j);
    return std::sqrt(s);
  };

  bool converged = false;
  for (int sweep = 0; sweep <= opts.max_sweeps; ++sweep) {
    if (off_mass() <= target) {
      converged = true;
      break;
    }
    if (sweep == opts.max_sweeps) break;
    for (Index p = 0; p < n - 1; ++p) {
      for (Index q = p + 1; q < n; ++q) {
        const Scalar apq = a(p, q);
        if (apq == Scalar(0)) continue;
        const Scalar theta = (a(q, q) - a(p, p)) / (Scalar(2) * apq);
        const Scalar t = (theta >= 0 ? Scalar(1) : Scalar(-1)) /
                         (std::abs(theta) + std::sqrt(theta * theta + Scalar(1)));
        const Scalar c = Scalar(1) / std::sqrt(t * t + Scalar(1));
        const Scalar s = t * c;
        for (Index k = 0; k < n; ++k) {
          const Scalar akp = a(k, p);
          const Scalar akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Index k = 0; k < n; ++k) {
          const Scalar apk = a(p, k);
          const Scalar aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (Index k = 0; k < n; ++k) {
          const Scalar vkp = v(k, p);
          const Scalar vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  if (!converged) {
    throw Error(Errc::NoConvergence, "sym_eig: no convergence after " +
                                         std::to_string(opts.max_sweeps) + " sweeps");
  }

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index i, Index j) { return a(i, i) > a(j, j); });
  SymEig<Scalar> out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (Index k = 0; k < n; ++k) {
    out.values(k) = a(order[k], order[k]);
    out.vectors.col(k) = v.col(order[k]);
  }
  return out;
}

/// A^power for symmetric PSD A, eigenvalues clipped at `floor` first.
template <typename Derived>
MatX<typename Derived::Scalar> sym_power(const Eigen::MatrixBase<Derived>& a,
                                         typename Derived::Scalar power,
                                         typename Derived::Scalar floor = 1e-12) {
  using Scalar = typename Derived::Scalar;
  const auto eig = sym_eig(a);
  VecX<Scalar> w = eig.values.unaryExpr([&](Scalar x) { return std::pow(std::max(x, floor), power); });
  return eig.vectors * w.asDiagonal() * eig.vectors.transpose();
}

/// Factor and solve each (matrix + damping*I) X = rhs block independently.
template <typename Scalar>
std::vector<MatX<Scalar>> batched_spd_solve(std::span<const SpdBlock<Scalar>> blocks, Scalar damping) {
  std::vector<MatX<Scalar>> out;
  out.reserve(blocks.size());
  const Index p = blocks.empty() ? 0 : blocks.front().matrix.rows();
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const auto& blk = blocks[i];
    try {
      if (blk.matrix.rows() != p || blk.matrix.cols() != p) {
        throw Error(Errc::DimensionMismatch, "block dimension differs from " + std::to_string(p));
      }
      out.push_back(spd_solve(spd_factor(blk.matrix, damping), blk.rhs));
    } catch (const Error& e) {
      throw Error(e.code(), "block " + std::to_string(i) + ": " + e.what());
    }
  }
  return out;
}

/// Symmetric part, used after products that are symmetric only up to roundoff.
template <typename Derived>
MatX<typename Derived::Scalar> symmetrized(const Eigen::MatrixBase<Derived>& a) {
  return (a + a.transpose()) / typename Derived::Scalar(2);
}

}  // namespace ngplus
