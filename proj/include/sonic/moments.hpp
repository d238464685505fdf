#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <utility>

#include "sonic/errors.hpp"
#include "sonic/panel.hpp"

namespace sonic {

// Frequency-corrected second-moment estimators for a masked process.
// sigma_obs and a_obs are the plain moments of the zero-filled sample;
// sigma_hat and a_hat rescale them by the estimated observation
// frequencies. psd_projected records whether sigma_hat was projected onto
// the PSD cone (done by default whenever some frequency is below one).
struct MomentEstimates {
  Vector p_hat;
  Matrix sigma_obs;
  Matrix a_obs;
  Matrix sigma_hat;
  Matrix a_hat;
  bool psd_projected = false;

  Index n() const { return p_hat.size(); }
};

// Observation frequency per node: share of unmasked entries in each column.
inline Vector estimate_frequencies(const Panel& panel) {
  const Index t = panel.t();
  const Index n = panel.n();
  Vector p(n);
  for (Index i = 0; i < n; ++i) {
    Index count = 0;
    for (Index s = 0; s < t; ++s) count += panel.mask(s, i) ? 1 : 0;
    p[i] = static_cast<double>(count) / static_cast<double>(t);
    if (count == 0)
      throw ZeroFrequency("node '" + panel.node_ids[static_cast<std::size_t>(i)] +
                          "' was never observed");
  }
  return p;
}

// Plain moments of the zero-filled sample: the covariance averages all T
// outer products, the lag-1 cross-covariance averages the T-1 adjacent pairs
// with (i, j) entry pairing node i at time t with node j at time t+1.
inline std::pair<Matrix, Matrix> observed_moments(const Panel& panel) {
  const Index t = panel.t();
  const Index n = panel.n();
  if (t < 2) throw InsufficientSamples("observed moments need T >= 2");
  Matrix sigma = Matrix::Zero(n, n);
  sigma.selfadjointView<Eigen::Lower>().rankUpdate(panel.values.transpose(),
                                                   1.0 / static_cast<double>(t));
  sigma.triangularView<Eigen::StrictlyUpper>() = sigma.transpose();
  Matrix a = panel.values.topRows(t - 1).transpose() * panel.values.bottomRows(t - 1) /
             static_cast<double>(t - 1);
  return {std::move(sigma), std::move(a)};
}

namespace detail {
template <class Derived>
void check_frequencies(const Eigen::MatrixBase<Derived>& p_hat) {
  for (Index i = 0; i < p_hat.size(); ++i)
    if (!(p_hat[i] > 0.0))
      throw ZeroFrequency("nonpositive observation frequency at node index " + std::to_string(i));
}
}  // namespace detail

// Diagonal entries are rescaled by 1/p_i, off-diagonal ones by 1/(p_i p_j).
template <class DerivedS, class DerivedP>
Matrix corrected_covariance(const Eigen::MatrixBase<DerivedS>& sigma_obs,
                            const Eigen::MatrixBase<DerivedP>& p_hat) {
  const Index n = sigma_obs.rows();
  if (sigma_obs.cols() != n || p_hat.size() != n)
    throw DimensionMismatch("corrected_covariance: incompatible shapes");
  detail::check_frequencies(p_hat);
  Matrix out(n, n);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < n; ++i)
      out(i, j) = i == j ? sigma_obs(i, i) / p_hat[i] : sigma_obs(i, j) / (p_hat[i] * p_hat[j]);
  return out;
}

// Every entry, diagonal included, is rescaled by 1/(p_i p_j): the masks at
// times t and t+1 are independent even for the same node.
template <class DerivedA, class DerivedP>
Matrix corrected_cross_covariance(const Eigen::MatrixBase<DerivedA>& a_obs,
                                  const Eigen::MatrixBase<DerivedP>& p_hat) {
  const Index n = a_obs.rows();
  if (a_obs.cols() != n || p_hat.size() != n)
    throw DimensionMismatch("corrected_cross_covariance: incompatible shapes");
  detail::check_frequencies(p_hat);
  Matrix out(n, n);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < n; ++i) out(i, j) = a_obs(i, j) / (p_hat[i] * p_hat[j]);
  return out;
}

// Nearest-PSD repair: symmetrize, floor negative eigenvalues at zero,
// reconstruct. Idempotent up to rounding.
template <class Derived>
Matrix psd_project(const Eigen::MatrixBase<Derived>& m) {
  if (m.rows() != m.cols()) throw DimensionMismatch("psd_project needs a square matrix");
  Matrix sym = 0.5 * (m + m.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
  if (es.info() != Eigen::Success) throw NumericalFailure("eigendecomposition did not converge");
  Vector clipped = es.eigenvalues().cwiseMax(0.0);
  Matrix out = es.eigenvectors() * clipped.asDiagonal() * es.eigenvectors().transpose();
  out = 0.5 * (out + out.transpose()).eval();
  return out;
}

// k-th largest singular value, k being 1-based.
template <class Derived>
double kth_singular_value(const Eigen::MatrixBase<Derived>& m, int k) {
  const Index dim = std::min(m.rows(), m.cols());
  if (k < 1 || k > dim) throw InvalidArgument("singular value index out of range");
  Eigen::JacobiSVD<Matrix> svd(m.eval());
  return svd.singularValues()[k - 1];
}

// Assemble the full estimator set for a panel. Projection onto the PSD cone
// is applied exactly when requested and some frequency is below one; with all
// frequencies equal to one the observed covariance is already PSD.
inline MomentEstimates estimate_moments(const Panel& panel, bool psd_projection = true) {
  MomentEstimates m;
  m.p_hat = estimate_frequencies(panel);
  auto [sigma_obs, a_obs] = observed_moments(panel);
  m.sigma_obs = std::move(sigma_obs);
  m.a_obs = std::move(a_obs);
  Matrix corrected = corrected_covariance(m.sigma_obs, m.p_hat);
  corrected = 0.5 * (corrected + corrected.transpose()).eval();
  if (psd_projection && m.p_hat.minCoeff() < 1.0) {
    m.sigma_hat = psd_project(corrected);
    m.psd_projected = true;
  } else {
    m.sigma_hat = std::move(corrected);
    m.psd_projected = false;
  }
  m.a_hat = corrected_cross_covariance(m.a_obs, m.p_hat);
  return m;
}

}  // namespace sonic
