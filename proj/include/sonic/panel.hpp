#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "sonic/errors.hpp"

namespace sonic {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using IntVector = Eigen::VectorXi;
using BoolMatrix = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;
using Index = Eigen::Index;

// Partially observed multivariate time series: a T x N value matrix plus a
// T x N observation mask. Unobserved entries are stored as exact zeros so
// moment sums need no branching; the mask alone decides observation counts.
struct Panel {
  Matrix values;              // T x N, zero where mask is false
  BoolMatrix mask;            // T x N, true = observed
  std::vector<std::string> node_ids;

  Panel() = default;

  Panel(Matrix values_in, BoolMatrix mask_in, std::vector<std::string> ids = {})
      : values(std::move(values_in)), mask(std::move(mask_in)), node_ids(std::move(ids)) {
    if (node_ids.empty()) {
      node_ids.resize(static_cast<std::size_t>(values.cols()));
      for (Index i = 0; i < values.cols(); ++i) node_ids[static_cast<std::size_t>(i)] = "n" + std::to_string(i);
    }
    values = mask.select(values, 0.0);  // enforce the zero-fill invariant
    validate();
  }

  static Panel fully_observed(Matrix values, std::vector<std::string> ids = {}) {
    BoolMatrix m = BoolMatrix::Constant(values.rows(), values.cols(), true);
    return Panel(std::move(values), std::move(m), std::move(ids));
  }

  Index t() const { return values.rows(); }
  Index n() const { return values.cols(); }

  void validate() const {
    if (mask.rows() != values.rows() || mask.cols() != values.cols())
      throw DimensionMismatch("panel mask shape differs from values shape");
    if (values.rows() < 2) throw InsufficientSamples("panel needs T >= 2 rows");
    if (values.cols() < 1) throw InvalidArgument("panel needs N >= 1 nodes");
    if (node_ids.size() != static_cast<std::size_t>(values.cols()))
      throw DimensionMismatch("node_ids length differs from column count");
    std::set<std::string> seen(node_ids.begin(), node_ids.end());
    if (seen.size() != node_ids.size()) throw InvalidArgument("node_ids must be unique");
  }

  // Rows [first, last) as a new panel with the same node ids.
  Panel slice_rows(Index first, Index last) const {
    if (first < 0 || last > t() || last - first < 2)
      throw InsufficientSamples("panel slice needs at least 2 rows");
    return Panel(values.middleRows(first, last - first), mask.middleRows(first, last - first),
                 node_ids);
  }
};

// A K-clustering as a label vector: labels[i] in [0, K) and every label
// occurs at least once, so clusters are disjoint, nonempty and covering.
struct Clustering {
  IntVector labels;
  int k = 0;

  Clustering() = default;
  Clustering(IntVector labels_in, int k_in) : labels(std::move(labels_in)), k(k_in) { validate(); }

  Index n() const { return labels.size(); }

  void validate() const {
    if (k < 1) throw InvalidArgument("clustering needs K >= 1");
    if (labels.size() < k) throw TooManyClusters("K exceeds N");
    std::vector<int> count(static_cast<std::size_t>(k), 0);
    for (Index i = 0; i < labels.size(); ++i) {
      const int l = labels[i];
      if (l < 0 || l >= k) throw InvalidArgument("cluster label out of range");
      ++count[static_cast<std::size_t>(l)];
    }
    for (int l = 0; l < k; ++l)
      if (count[static_cast<std::size_t>(l)] == 0)
        throw EmptyCluster("cluster " + std::to_string(l) + " is empty");
  }

  std::vector<int> sizes() const {
    std::vector<int> count(static_cast<std::size_t>(k), 0);
    for (Index i = 0; i < labels.size(); ++i) ++count[static_cast<std::size_t>(labels[i])];
    return count;
  }

  std::vector<std::vector<int>> groups() const {
    std::vector<std::vector<int>> g(static_cast<std::size_t>(k));
    for (Index i = 0; i < labels.size(); ++i)
      g[static_cast<std::size_t>(labels[i])].push_back(static_cast<int>(i));
    return g;
  }

  bool operator==(const Clustering& other) const {
    return k == other.k && labels.size() == other.labels.size() && (labels.array() == other.labels.array()).all();
  }
};

// Fitted model: operator factorization theta = Z_C * v^T.
struct SonicModel {
  Clustering clustering;
  Matrix v;  // N x K, column j belongs to cluster j
  double lambda = 0.0;
  double risk = 0.0;
  int iterations = 0;
  int restarts_used = 0;
};

// Planted parameters used by simulations for scoring.
struct GroundTruth {
  Clustering clustering;
  Matrix v_star;      // N x K
  Matrix theta_star;  // N x N, equal to Z_C * v_star^T
};

// Normalized index vector of a cluster: |C|^{-1/2} on member coordinates,
// zero elsewhere; unit Euclidean norm.
inline Vector normalized_indicator(const std::vector<int>& members, Index n) {
  if (members.empty()) throw EmptyCluster("cluster indicator needs a nonempty member set");
  Vector z = Vector::Zero(n);
  const double w = 1.0 / std::sqrt(static_cast<double>(members.size()));
  for (int i : members) {
    if (i < 0 || i >= n) throw InvalidArgument("cluster member index out of range");
    z[i] = w;
  }
  return z;
}

// N x K normalized index matrix; columns are orthonormal (Z^T Z = I_K).
inline Matrix indicator_matrix(const Clustering& c) {
  c.validate();
  const Index n = c.n();
  Matrix z = Matrix::Zero(n, c.k);
  const std::vector<int> sizes = c.sizes();
  for (Index i = 0; i < n; ++i) {
    const int l = c.labels[i];
    z(i, l) = 1.0 / std::sqrt(static_cast<double>(sizes[static_cast<std::size_t>(l)]));
  }
  return z;
}

// theta = Z_C * v^T without forming Z_C: row i of theta is column label(i)
// of v scaled by |C_label(i)|^{-1/2}. Rows of same-cluster nodes coincide.
template <class Derived>
Matrix theta_from_factors(const Clustering& c, const Eigen::MatrixBase<Derived>& v) {
  if (v.rows() != c.n() || v.cols() != c.k)
    throw DimensionMismatch("v must be N x K for the given clustering");
  const std::vector<int> sizes = c.sizes();
  std::vector<double> weight(static_cast<std::size_t>(c.k));
  for (int l = 0; l < c.k; ++l)
    weight[static_cast<std::size_t>(l)] = 1.0 / std::sqrt(static_cast<double>(sizes[static_cast<std::size_t>(l)]));
  Matrix theta(c.n(), c.n());
  for (Index i = 0; i < c.n(); ++i) {
    const int l = c.labels[i];
    theta.row(i) = v.col(l).transpose() * weight[static_cast<std::size_t>(l)];
  }
  return theta;
}

}  // namespace sonic
