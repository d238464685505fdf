#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "sonic/errors.hpp"
#include "sonic/estimator.hpp"
#include "sonic/lasso.hpp"
#include "sonic/moments.hpp"
#include "sonic/panel.hpp"
#include "sonic/parallel.hpp"

namespace sonic {

namespace detail {

// Square min-cost assignment via the potentials (Kuhn-Munkres) method.
// Returns assignment[row] = column.
inline std::vector<int> solve_assignment(const Matrix& cost) {
  const int dim = static_cast<int>(cost.rows());
  std::vector<double> u(static_cast<std::size_t>(dim) + 1, 0.0), v(static_cast<std::size_t>(dim) + 1, 0.0);
  std::vector<int> p(static_cast<std::size_t>(dim) + 1, 0), way(static_cast<std::size_t>(dim) + 1, 0);
  for (int i = 1; i <= dim; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(dim) + 1, std::numeric_limits<double>::infinity());
    std::vector<char> used(static_cast<std::size_t>(dim) + 1, 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const int i0 = p[static_cast<std::size_t>(j0)];
      int j1 = -1;
      double delta = std::numeric_limits<double>::infinity();
      for (int j = 1; j <= dim; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= dim; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<std::size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<std::size_t>(j0)];
      p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> assignment(static_cast<std::size_t>(dim), -1);
  for (int j = 1; j <= dim; ++j)
    if (p[static_cast<std::size_t>(j)] > 0) assignment[static_cast<std::size_t>(p[static_cast<std::size_t>(j)]) - 1] = j - 1;
  return assignment;
}

// Max-intersection matching of cluster labels: perm[j] = cluster of b paired
// with cluster j of a.
inline std::vector<int> best_label_matching(const Clustering& a, const Clustering& b) {
  const int k = a.k;
  Matrix intersect = Matrix::Zero(k, k);
  for (Index i = 0; i < a.n(); ++i) intersect(a.labels[i], b.labels[i]) += 1.0;
  return solve_assignment(-intersect);
}

}  // namespace detail

// Minimal number of node reassignments making two K-clusterings equivalent:
// N minus the best label matching's total intersection.
inline int clustering_distance(const Clustering& a, const Clustering& b) {
  if (a.n() != b.n()) throw DimensionMismatch("clusterings must share the node set");
  if (a.k != b.k) throw DimensionMismatch("clustering distance is defined for equal K");
  const std::vector<int> perm = detail::best_label_matching(a, b);
  Index matched = 0;
  for (Index i = 0; i < a.n(); ++i)
    if (perm[static_cast<std::size_t>(a.labels[i])] == b.labels[i]) ++matched;
  return static_cast<int>(a.n() - matched);
}

struct EvalResult {
  double relative_frobenius = 0.0;
  int clustering_distance = 0;
  bool support_exact = false;
  std::vector<int> aligned_permutation;  // model cluster j pairs with truth cluster perm[j]
};

// Score a fitted model against planted truth: relative Frobenius error of the
// implied operator (relabeling-invariant), clustering distance, and exact
// support recovery after aligning columns by the distance-achieving matching.
inline EvalResult align_and_score(const SonicModel& model, const GroundTruth& truth,
                                  double support_tol = 1e-9) {
  if (model.clustering.n() != truth.clustering.n() || model.clustering.k != truth.clustering.k)
    throw DimensionMismatch("model and truth dimensions differ");
  EvalResult out;
  out.aligned_permutation = detail::best_label_matching(model.clustering, truth.clustering);
  Index matched = 0;
  for (Index i = 0; i < model.clustering.n(); ++i)
    if (out.aligned_permutation[static_cast<std::size_t>(model.clustering.labels[i])] ==
        truth.clustering.labels[i])
      ++matched;
  out.clustering_distance = static_cast<int>(model.clustering.n() - matched);

  const Matrix theta_hat = theta_from_factors(model.clustering, model.v);
  const double truth_norm = truth.theta_star.norm();
  const double err = (theta_hat - truth.theta_star).norm();
  out.relative_frobenius = truth_norm > 0.0 ? err / truth_norm : (err > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);

  out.support_exact = true;
  for (int j = 0; j < model.clustering.k && out.support_exact; ++j) {
    const int jt = out.aligned_permutation[static_cast<std::size_t>(j)];
    for (Index i = 0; i < model.v.rows(); ++i) {
      const bool fitted = std::abs(model.v(i, j)) > support_tol;
      const bool planted = std::abs(truth.v_star(i, jt)) > support_tol;
      if (fitted != planted) {
        out.support_exact = false;
        break;
      }
    }
  }
  return out;
}

struct VarBaseline {
  Matrix theta;
  double condition = 0.0;  // spectral condition estimate of the Gram matrix
};

// Unregularized VAR baseline theta = A^T S^{-1}. Deliberately solved without
// any ridge or pseudo-inverse fallback; an exactly singular Gram matrix
// raises SingularGram and ill conditioning is surfaced via the estimate.
template <class DS, class DA>
VarBaseline fit_var_baseline(const Eigen::MatrixBase<DS>& sigma_hat,
                             const Eigen::MatrixBase<DA>& a_hat) {
  const Index n = sigma_hat.rows();
  if (sigma_hat.cols() != n || a_hat.rows() != n || a_hat.cols() != n)
    throw DimensionMismatch("fit_var_baseline: incompatible shapes");
  Eigen::JacobiSVD<Matrix> svd(sigma_hat.eval());
  const double smax = svd.singularValues()[0];
  const double smin = svd.singularValues()[n - 1];
  VarBaseline out;
  out.condition = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
  Eigen::FullPivLU<Matrix> lu(sigma_hat.eval());
  if (!lu.isInvertible())
    throw SingularGram("gram matrix is singular (condition estimate " + std::to_string(out.condition) + ")");
  out.theta = lu.solve(a_hat.eval()).transpose();  // S symmetric: theta^T = S^{-1} A
  return out;
}

// L1-penalized VAR baseline: row i of theta solves an independent LASSO with
// the shared Gram matrix and target column i of A.
template <class DS, class DA>
Matrix fit_sparse_var_baseline(const Eigen::MatrixBase<DS>& sigma_hat,
                               const Eigen::MatrixBase<DA>& a_hat, double lambda,
                               const LassoOptions& opts = {}, int threads = 1) {
  const Index n = sigma_hat.rows();
  if (sigma_hat.cols() != n || a_hat.rows() != n || a_hat.cols() != n)
    throw DimensionMismatch("fit_sparse_var_baseline: incompatible shapes");
  const Matrix gram = sigma_hat.eval();
  const Matrix targets = a_hat.eval();
  Matrix theta(n, n);
  parallel_for(static_cast<int>(n), threads, [&](int i) {
    LassoOptions row_opts = opts;
    row_opts.objective_trace = nullptr;
    row_opts.warm_start.reset();
    try {
      theta.row(i) = solve_lasso_quadratic(gram, targets.col(i), lambda, row_opts).v.transpose();
    } catch (const DegenerateDiagonal& e) {
      throw DegenerateDiagonal("row " + std::to_string(i) + ": " + e.what());
    }
  });
  return theta;
}

// Out-of-sample prediction functional Tr(S) - 2 Tr(theta A) + Tr(theta S theta^T)
// with S and A estimated from the test sample.
template <class DT, class DS, class DA>
double prediction_error(const Eigen::MatrixBase<DT>& theta, const Eigen::MatrixBase<DS>& sigma_test,
                        const Eigen::MatrixBase<DA>& a_test) {
  const Index n = theta.rows();
  if (theta.cols() != n || sigma_test.rows() != n || sigma_test.cols() != n || a_test.rows() != n ||
      a_test.cols() != n)
    throw DimensionMismatch("prediction_error: incompatible shapes");
  return sigma_test.trace() - 2.0 * (theta * a_test).trace() +
         (theta * sigma_test * theta.transpose()).trace();
}

// Chronological split: the first floor(frac*T) rows form the training panel.
inline std::pair<Panel, Panel> train_test_split(const Panel& panel, double frac) {
  if (!(frac > 0.0) || !(frac < 1.0)) throw InvalidArgument("split fraction must lie in (0, 1)");
  const Index t = panel.t();
  const Index cut = static_cast<Index>(std::floor(frac * static_cast<double>(t)));
  if (cut < 2 || t - cut < 2) throw InsufficientSamples("both split parts need at least 2 rows");
  return {panel.slice_rows(0, cut), panel.slice_rows(cut, t)};
}

}  // namespace sonic
