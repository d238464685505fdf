#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <vector>

#include "sonic/errors.hpp"
#include "sonic/panel.hpp"

namespace sonic {

struct LassoOptions {
  double tol = 1e-8;       // max absolute coordinate change per sweep
  int max_sweeps = 10000;
  std::optional<Vector> warm_start;
  std::vector<double>* objective_trace = nullptr;  // per-sweep objective, for tests
};

struct LassoResult {
  Vector v;
  int sweeps = 0;
  bool converged = true;
};

inline double soft_threshold(double x, double t) {
  if (x > t) return x - t;
  if (x < -t) return x + t;
  return 0.0;
}

// Value of 1/2 v^T g v - c^T v + lambda * ||v||_1.
template <class DG, class DC, class DV>
double lasso_objective(const Eigen::MatrixBase<DG>& g, const Eigen::MatrixBase<DC>& c,
                       double lambda, const Eigen::MatrixBase<DV>& v) {
  if (g.rows() != g.cols() || c.size() != g.rows() || v.size() != g.rows())
    throw DimensionMismatch("lasso_objective: incompatible shapes");
  return 0.5 * v.dot(g * v) - c.dot(v) + lambda * v.template lpNorm<1>();
}

// Worst-coordinate violation of the subgradient optimality conditions:
// |grad_i + lambda sign(v_i)| on the support, (|grad_i| - lambda)_+ off it,
// with grad = g v - c.
template <class DG, class DC, class DV>
double kkt_residual(const Eigen::MatrixBase<DG>& g, const Eigen::MatrixBase<DC>& c, double lambda,
                    const Eigen::MatrixBase<DV>& v) {
  if (g.rows() != g.cols() || c.size() != g.rows() || v.size() != g.rows())
    throw DimensionMismatch("kkt_residual: incompatible shapes");
  const Vector grad = g * v - c;
  double worst = 0.0;
  for (Index i = 0; i < v.size(); ++i) {
    const double r = v[i] != 0.0 ? std::abs(grad[i] + lambda * (v[i] > 0.0 ? 1.0 : -1.0))
                                 : std::max(0.0, std::abs(grad[i]) - lambda);
    worst = std::max(worst, r);
  }
  return worst;
}

// Cyclic coordinate descent for min_v 1/2 v^T g v - c^T v + lambda ||v||_1
// with g symmetric PSD. Coordinates are visited in ascending index order so
// results do not depend on threading. A coordinate with a vanishing diagonal
// is frozen at zero when the plain subgradient condition |c_i| <= lambda
// admits it (a PSD matrix with g_ii = 0 has a zero row) and rejected
// otherwise. Convergence is declared when a sweep moves no coordinate by more
// than tol AND the KKT residual certificate passes.
inline LassoResult solve_lasso_quadratic(const Eigen::Ref<const Matrix>& g,
                                         const Eigen::Ref<const Vector>& c, double lambda,
                                         const LassoOptions& opts = {}) {
  const Index n = g.rows();
  if (g.cols() != n || c.size() != n) throw DimensionMismatch("solve_lasso_quadratic: incompatible shapes");
  if (lambda < 0.0) throw InvalidArgument("lambda must be nonnegative");
  if ((g - g.transpose()).cwiseAbs().maxCoeff() > 1e-10)
    throw InvalidArgument("gram matrix must be symmetric within 1e-10");

  std::vector<bool> frozen(static_cast<std::size_t>(n), false);
  for (Index i = 0; i < n; ++i) {
    if (g(i, i) > 1e-12) continue;
    if (std::abs(c[i]) <= lambda) {
      frozen[static_cast<std::size_t>(i)] = true;
    } else {
      throw DegenerateDiagonal("coordinate " + std::to_string(i) +
                               " has vanishing curvature but an active gradient");
    }
  }

  LassoResult res;
  if (opts.warm_start) {
    if (opts.warm_start->size() != n) throw DimensionMismatch("warm start has wrong length");
    res.v = *opts.warm_start;
    for (Index i = 0; i < n; ++i)
      if (frozen[static_cast<std::size_t>(i)]) res.v[i] = 0.0;
  } else {
    res.v = Vector::Zero(n);
  }

  const double cert = 10.0 * opts.tol * (1.0 + (n > 0 ? c.cwiseAbs().maxCoeff() : 0.0));
  Vector q = res.v.isZero(0.0) ? Vector::Zero(n) : Vector(g * res.v);

  res.converged = false;
  int stalled = 0;
  for (int sweep = 1; sweep <= opts.max_sweeps; ++sweep) {
    res.sweeps = sweep;
    double max_change = 0.0;
    for (Index i = 0; i < n; ++i) {
      if (frozen[static_cast<std::size_t>(i)]) continue;
      const double partial = c[i] - (q[i] - g(i, i) * res.v[i]);
      const double next = soft_threshold(partial, lambda) / g(i, i);
      const double delta = next - res.v[i];
      if (delta != 0.0) {
        q += g.col(i) * delta;
        res.v[i] = next;
        max_change = std::max(max_change, std::abs(delta));
      }
    }
    if (opts.objective_trace) opts.objective_trace->push_back(lasso_objective(g, c, lambda, res.v));
    if (sweep % 64 == 0) q = g * res.v;  // refresh accumulated drift in q
    if (max_change < opts.tol) {
      if (kkt_residual(g, c, lambda, res.v) <= cert) {
        res.converged = true;
        break;
      }
      q = g * res.v;
      if (max_change == 0.0 && ++stalled >= 2) break;  // stationary but uncertifiable
    } else {
      stalled = 0;
    }
  }
  return res;
}

}  // namespace sonic
