#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <vector>

#include "sonic/errors.hpp"
#include "sonic/panel.hpp"
#include "sonic/rng.hpp"

namespace sonic {

// Planted-model and sampling configuration. p holds one observation
// probability per node; use uniform_p to fill it from a scalar.
struct SimulationConfig {
  int n = 100;
  int k = 5;
  int s = 1;
  double coef = 0.5;
  int t = 100;
  Vector p;
  int trunc_order = 20;
  std::uint64_t seed = 0;

  static SimulationConfig uniform_p(int n, int k, int s, double coef, int t, double p,
                                    int trunc_order, std::uint64_t seed) {
    SimulationConfig cfg;
    cfg.n = n;
    cfg.k = k;
    cfg.s = s;
    cfg.coef = coef;
    cfg.t = t;
    cfg.p = Vector::Constant(n, p);
    cfg.trunc_order = trunc_order;
    cfg.seed = seed;
    return cfg;
  }

  void validate() const {
    if (n < 1) throw InvalidArgument("network size must be positive");
    if (k < 1 || k > n) throw TooManyClusters("K exceeds N");
    if (s < 1) throw InvalidArgument("sparsity must be positive");
    if (static_cast<long>(k) * s > n) throw InfeasibleSparsity("K*s exceeds N");
    if (t < 2) throw InsufficientSamples("sample length must be at least 2");
    if (trunc_order < 0) throw InvalidArgument("truncation order must be nonnegative");
    if (p.size() != n) throw DimensionMismatch("observation probabilities need one entry per node");
    for (Index i = 0; i < p.size(); ++i)
      if (!(p[i] > 0.0) || p[i] > 1.0)
        throw InvalidArgument("observation probabilities must lie in (0, 1]");
    // disjoint columns of magnitude coef over s rows have operator norm coef*sqrt(s)
    if (!(coef * std::sqrt(static_cast<double>(s)) < 1.0))
      throw UnstableOperator("planted operator would not be stable: coef*sqrt(s) >= 1");
  }
};

// Deterministic power-iteration estimate of the operator (spectral) norm.
template <class Derived>
double operator_norm_estimate(const Eigen::MatrixBase<Derived>& m, double tol = 1e-6,
                              int max_iter = 1000) {
  const Index n = m.rows();
  if (n == 0 || m.isZero(0.0)) return 0.0;
  Vector x(n);
  for (Index i = 0; i < n; ++i) x[i] = 1.0 + 1e-3 * static_cast<double>(i % 17);
  x.normalize();
  double previous = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    Vector y = m.transpose() * (m * x).eval();
    const double norm = y.norm();
    if (norm == 0.0) return 0.0;
    x = y / norm;
    const double estimate = std::sqrt(x.dot(m.transpose() * (m * x).eval()));
    if (std::abs(estimate - previous) <= tol * std::max(1.0, estimate)) return estimate;
    previous = estimate;
  }
  return previous;
}

// Planted operator: contiguous clusters of size floor(N/K) or ceil(N/K) (the
// first N mod K clusters take the larger size) and column j of v carrying s
// entries equal to coef at rows j*s, ..., j*s+s-1.
inline GroundTruth build_planted_model(const SimulationConfig& cfg) {
  cfg.validate();
  IntVector labels(cfg.n);
  const int base = cfg.n / cfg.k;
  const int remainder = cfg.n % cfg.k;
  int node = 0;
  for (int j = 0; j < cfg.k; ++j) {
    const int size = base + (j < remainder ? 1 : 0);
    for (int r = 0; r < size; ++r) labels[node++] = j;
  }
  GroundTruth truth;
  truth.clustering = Clustering(std::move(labels), cfg.k);
  truth.v_star = Matrix::Zero(cfg.n, cfg.k);
  for (int j = 0; j < cfg.k; ++j)
    for (int r = 0; r < cfg.s; ++r) truth.v_star(j * cfg.s + r, j) = cfg.coef;
  truth.theta_star = theta_from_factors(truth.clustering, truth.v_star);
  return truth;
}

// Truncated moving-average sample of the VAR process: with innovations
// W_{1-q}, ..., W_T ~ N(0, I) drawn row-major from the seeded sampler,
// row t of the output is sum_{k=0..q} theta^k W_{t-k}.
template <class Derived>
Matrix simulate_var(const Eigen::MatrixBase<Derived>& theta, int t, int trunc_order,
                    std::uint64_t seed) {
  const Index n = theta.rows();
  if (theta.cols() != n) throw DimensionMismatch("autoregression operator must be square");
  if (t < 1) throw InsufficientSamples("sample length must be positive");
  if (trunc_order < 0) throw InvalidArgument("truncation order must be nonnegative");
  if (operator_norm_estimate(theta) >= 1.0)
    throw UnstableOperator("operator norm estimate is not below 1");

  rng::Sampler sampler(seed);
  Matrix w(trunc_order + t, n);
  for (Index r = 0; r < w.rows(); ++r)
    for (Index i = 0; i < n; ++i) w(r, i) = sampler.normal();

  Matrix power = Matrix::Identity(n, n);
  Matrix y = Matrix::Zero(t, n);
  for (int k = 0; k <= trunc_order; ++k) {
    if (k > 0) power = (power * theta).eval();
    y.noalias() += w.middleRows(trunc_order - k, t) * power.transpose();
  }
  return y;
}

// Independent Bernoulli masking: entry (t, i) is kept with probability p_i.
// Draws are consumed in row-major order, one per entry, so altering one
// node's probability never changes another node's mask pattern.
template <class Derived>
Panel apply_mask(const Eigen::MatrixBase<Derived>& y, const Vector& p, std::uint64_t seed,
                 std::vector<std::string> node_ids = {}) {
  const Index t = y.rows();
  const Index n = y.cols();
  if (p.size() != n) throw DimensionMismatch("observation probabilities need one entry per node");
  for (Index i = 0; i < n; ++i)
    if (!(p[i] > 0.0) || p[i] > 1.0) throw InvalidArgument("observation probabilities must lie in (0, 1]");
  rng::Sampler sampler(seed);
  BoolMatrix mask(t, n);
  for (Index r = 0; r < t; ++r)
    for (Index i = 0; i < n; ++i) mask(r, i) = sampler.uniform01() < p[i];
  return Panel(y.eval(), std::move(mask), std::move(node_ids));
}

struct SimulatedPanel {
  GroundTruth truth;
  Panel panel;
};

// Full pipeline: plant, sample, mask. Innovations and masks draw from
// distinct substreams of the master seed.
inline SimulatedPanel simulate_panel(const SimulationConfig& cfg) {
  SimulatedPanel out;
  out.truth = build_planted_model(cfg);
  const Matrix y =
      simulate_var(out.truth.theta_star, cfg.t, cfg.trunc_order, rng::derive_stream(cfg.seed, 0));
  out.panel = apply_mask(y, cfg.p, rng::derive_stream(cfg.seed, 1));
  return out;
}

}  // namespace sonic
