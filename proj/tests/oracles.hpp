// Independent reference computations shared by the unit and acceptance tests.
#pragma once

#include <complex>
#include <vector>

#include "ngplus/gradients.hpp"
#include "ngplus/online.hpp"

namespace oracle {

using ngplus::Index;
using ngplus::Mat;
using ngplus::Vec;
using Cplx = std::complex<double>;
using CMat = Eigen::Matrix<Cplx, Eigen::Dynamic, Eigen::Dynamic>;
using CVec = Eigen::Matrix<Cplx, Eigen::Dynamic, 1>;

inline Cplx act(ngplus::Activation a, Cplx z) {
  switch (a) {
    case ngplus::Activation::Identity: return z;
    case ngplus::Activation::Relu: return z.real() > 0 ? z : Cplx(0);
    case ngplus::Activation::Tanh: return std::tanh(z);
  }
  return z;
}

/// Loss of one sample with layer `layer` weights perturbed by i*h at (r, c).
inline Cplx sample_loss(const ngplus::Model& model, const Vec& x, const Vec& target, int label, ngplus::Loss loss,
                        std::size_t layer, Index r, Index c, double h) {
  CVec a = x.cast<Cplx>();
  for (std::size_t l = 0; l < model.size(); ++l) {
    CMat w = model[l].weight.cast<Cplx>();
    if (l == layer) w(r, c) += Cplx(0, h);
    CVec z = w * a;
    if (model[l].bias) z += model[l].bias->cast<Cplx>();
    for (Index i = 0; i < z.size(); ++i) z(i) = act(model[l].activation, z(i));
    a = z;
  }
  if (loss == ngplus::Loss::Mse) {
    Cplx s = 0;
    for (Index i = 0; i < a.size(); ++i) s += (a(i) - target(i)) * (a(i) - target(i));
    return 0.5 * s;
  }
  double mx = a(0).real();
  for (Index i = 1; i < a.size(); ++i) mx = std::max(mx, a(i).real());
  Cplx s = 0;
  for (Index i = 0; i < a.size(); ++i) s += std::exp(a(i) - mx);
  return mx + std::log(s) - a(label);
}

/// d psi_i / d W_layer by the complex-step method (no subtractive cancellation).
inline Mat complex_step_gradient(const ngplus::Model& model, const ngplus::Batch& batch, Index sample,
                                 ngplus::Loss loss, std::size_t layer) {
  constexpr double h = 1e-30;
  const Mat& w = model[layer].weight;
  Mat g(w.rows(), w.cols());
  const Vec x = batch.inputs.col(sample);
  const Vec y = batch.targets.size() ? Vec(batch.targets.col(sample)) : Vec();
  const int label = batch.labels.empty() ? 0 : batch.labels[static_cast<std::size_t>(sample)];
  for (Index r = 0; r < w.rows(); ++r)
    for (Index c = 0; c < w.cols(); ++c) g(r, c) = sample_loss(model, x, y, label, loss, layer, r, c, h).imag() / h;
  return g;
}

/// Projected gradient descent for min 0.5 tr(T A T^T) - tr(T C^T) over ||T||_F <= R.
inline Mat pgd_hindsight(const Mat& a, const Mat& c, double radius, int iters = 200000) {
  Eigen::SelfAdjointEigenSolver<Mat> es(a);
  const double lmax = std::max(es.eigenvalues().maxCoeff(), 1e-12);
  const double step = 1.0 / lmax;
  Mat t = Mat::Zero(c.rows(), c.cols());
  for (int k = 0; k < iters; ++k) {
    Mat next = t - step * (t * a - c);
    const double nrm = next.norm();
    if (nrm > radius) next *= radius / nrm;
    const double move = (next - t).norm();
    t = next;
    if (move < 1e-14) break;
  }
  return t;
}

}  // namespace oracle
