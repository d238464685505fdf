#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "sonic/errors.hpp"
#include "sonic/lasso.hpp"
#include "sonic/moments.hpp"
#include "sonic/panel.hpp"
#include "sonic/parallel.hpp"
#include "sonic/rng.hpp"

namespace sonic {

struct FitOptions {
  int max_outer = 100;
  // Greedy label moves taken per clustering update; 0 means a full sweep of
  // up to N moves, 1 reproduces the strict one-move-per-iteration procedure.
  int moves_per_update = 0;
  int restarts = 5;
  std::uint64_t seed = 0;
  double min_improvement = 1e-10;
  LassoOptions lasso;
  bool exact_greedy = false;  // score every candidate by a full refit (N <= 30)
  int threads = 1;
};

// Penalized plug-in risk R_lambda(V; C) = 1/2 Tr(V^T S V) - Tr(V^T A Z_C)
// + lambda ||V||_{1,1}. Equals the sum over columns of the per-cluster
// lasso objective with target c_j = A z_j.
template <class DV, class DS, class DA>
double risk(const Eigen::MatrixBase<DV>& v, const Clustering& c, const Eigen::MatrixBase<DS>& sigma_hat,
            const Eigen::MatrixBase<DA>& a_hat, double lambda) {
  if (v.rows() != c.n() || v.cols() != c.k || sigma_hat.rows() != c.n() || a_hat.rows() != c.n())
    throw DimensionMismatch("risk: incompatible shapes");
  const Matrix z = indicator_matrix(c);
  return 0.5 * (v.transpose() * sigma_hat * v).trace() - (v.transpose() * a_hat * z).trace() +
         lambda * v.template lpNorm<1>();
}

// The clustering-dependent part of the risk: Tr(V^T A Z_C).
template <class DV, class DA>
double surrogate_trace(const Eigen::MatrixBase<DV>& v, const Clustering& c,
                       const Eigen::MatrixBase<DA>& a_hat) {
  const Matrix z = indicator_matrix(c);
  return (v.transpose() * a_hat * z).trace();
}

namespace detail {

// Per-cluster LASSO targets: column j is A z_{C_j}.
template <class DA>
Matrix cluster_targets(const Eigen::MatrixBase<DA>& a_hat, const Clustering& c) {
  return a_hat * indicator_matrix(c);
}

inline LassoResult solve_column(const Matrix& gram, const Matrix& targets, double lambda,
                                const LassoOptions& base, const Matrix* warm, int j) {
  LassoOptions opts = base;
  opts.objective_trace = nullptr;
  if (warm) opts.warm_start = warm->col(j);
  try {
    return solve_lasso_quadratic(gram, targets.col(j), lambda, opts);
  } catch (const DegenerateDiagonal& e) {
    throw DegenerateDiagonal("cluster " + std::to_string(j) + ": " + e.what());
  } catch (const InvalidArgument& e) {
    throw InvalidArgument("cluster " + std::to_string(j) + ": " + e.what());
  }
}

}  // namespace detail

// Given the clustering, minimize the risk over V: K independent per-cluster
// LASSO problems sharing the Gram matrix. Columns are independent, so the
// result does not depend on execution order.
template <class DS, class DA>
Matrix update_v(const Clustering& c, const Eigen::MatrixBase<DS>& sigma_hat,
                const Eigen::MatrixBase<DA>& a_hat, double lambda, const FitOptions& opts,
                const Matrix* warm = nullptr) {
  const Matrix gram = sigma_hat.eval();
  const Matrix targets = detail::cluster_targets(a_hat, c);
  Matrix v(c.n(), c.k);
  parallel_for(c.k, opts.threads, [&](int j) {
    v.col(j) = detail::solve_column(gram, targets, lambda, opts.lasso, warm, j).v;
  });
  return v;
}

// One batch of greedy single-label moves at fixed V, each move the best
// strict improvement of the surrogate -Tr(V^T A Z_C) over all (node, label)
// candidates. Moves that would empty a cluster are excluded; ties resolve to
// the smallest (node, label) pair. Incremental bookkeeping: with M = A^T V,
// Tr(V^T A Z_C) = sum_j n_j^{-1/2} sum_{i in C_j} M_{ij}.
template <class DV, class DA>
Clustering greedy_sweep(const Eigen::MatrixBase<DV>& v, const Clustering& c,
                        const Eigen::MatrixBase<DA>& a_hat, const FitOptions& opts) {
  const Index n = c.n();
  const int k = c.k;
  if (v.rows() != n || v.cols() != k || a_hat.rows() != n || a_hat.cols() != n)
    throw DimensionMismatch("greedy_sweep: incompatible shapes");

  const Matrix m = a_hat.transpose() * v;  // M(i, j) = (A^T v_j)_i
  IntVector labels = c.labels;
  std::vector<int> sizes = c.sizes();
  std::vector<double> cluster_sum(static_cast<std::size_t>(k), 0.0);
  for (Index i = 0; i < n; ++i) cluster_sum[static_cast<std::size_t>(labels[i])] += m(i, labels[i]);

  auto contribution = [](double sum, int size) {
    return size > 0 ? sum / std::sqrt(static_cast<double>(size)) : 0.0;
  };
  double trace = 0.0;
  for (int j = 0; j < k; ++j) trace += contribution(cluster_sum[static_cast<std::size_t>(j)], sizes[static_cast<std::size_t>(j)]);

  const int max_moves = opts.moves_per_update > 0 ? opts.moves_per_update : static_cast<int>(n);
  for (int move = 0; move < max_moves; ++move) {
    double best_gain = 0.0;
    Index best_node = -1;
    int best_label = -1;
    for (Index i = 0; i < n; ++i) {
      const int a = labels[i];
      if (sizes[static_cast<std::size_t>(a)] <= 1) continue;  // would empty cluster a
      const double source_delta =
          contribution(cluster_sum[static_cast<std::size_t>(a)] - m(i, a), sizes[static_cast<std::size_t>(a)] - 1) -
          contribution(cluster_sum[static_cast<std::size_t>(a)], sizes[static_cast<std::size_t>(a)]);
      for (int l = 0; l < k; ++l) {
        if (l == a) continue;
        const double gain =
            source_delta +
            contribution(cluster_sum[static_cast<std::size_t>(l)] + m(i, l), sizes[static_cast<std::size_t>(l)] + 1) -
            contribution(cluster_sum[static_cast<std::size_t>(l)], sizes[static_cast<std::size_t>(l)]);
        if (gain > best_gain) {
          best_gain = gain;
          best_node = i;
          best_label = l;
        }
      }
    }
    if (best_node < 0 || best_gain <= opts.min_improvement * (1.0 + std::abs(trace))) break;
    const int a = labels[best_node];
    cluster_sum[static_cast<std::size_t>(a)] -= m(best_node, a);
    cluster_sum[static_cast<std::size_t>(best_label)] += m(best_node, best_label);
    --sizes[static_cast<std::size_t>(a)];
    ++sizes[static_cast<std::size_t>(best_label)];
    labels[best_node] = best_label;
    trace += best_gain;
  }
  return Clustering(std::move(labels), k);
}

namespace detail {

// Random initialization from Algorithm-style uniform labels, adjusted so no
// cluster starts empty: the first k nodes of a random permutation receive the
// k distinct labels, the remaining nodes draw uniformly.
inline IntVector random_labels(Index n, int k, rng::Sampler& sampler) {
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  for (Index i = n - 1; i > 0; --i) {
    const auto j = std::min<Index>(i, static_cast<Index>(sampler.uniform01() * static_cast<double>(i + 1)));
    std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
  }
  IntVector labels(n);
  for (Index r = 0; r < n; ++r) {
    const int node = perm[static_cast<std::size_t>(r)];
    labels[node] = r < k ? static_cast<int>(r)
                         : std::min(k - 1, static_cast<int>(sampler.uniform01() * static_cast<double>(k)));
  }
  return labels;
}

}  // namespace detail

// One alternating run from a single initialization. Alternates the convex V
// update with greedy label moves until the clustering stops changing or the
// iteration cap is reached. risk_trace, when given, records R(V^(t); C^(t))
// after every V update; the sequence is non-increasing.
inline SonicModel fit_single(const MomentEstimates& moments, int k, double lambda,
                             const FitOptions& opts, std::uint64_t seed,
                             const std::optional<IntVector>& initial_labels = std::nullopt,
                             std::vector<double>* risk_trace = nullptr) {
  const Index n = moments.n();
  if (k < 1) throw InvalidArgument("cluster count must be positive");
  if (k > n) throw TooManyClusters("K exceeds N");
  if (lambda < 0.0) throw InvalidArgument("lambda must be nonnegative");

  IntVector labels;
  if (initial_labels) {
    labels = *initial_labels;
  } else {
    rng::Sampler sampler(seed);
    labels = detail::random_labels(n, k, sampler);
  }
  Clustering c(std::move(labels), k);

  FitOptions column_opts = opts;
  column_opts.threads = 1;  // restart-level parallelism owns the workers

  SonicModel model;
  model.lambda = lambda;
  Matrix v = Matrix::Zero(n, k);
  for (int outer = 1; outer <= opts.max_outer; ++outer) {
    v = update_v(c, moments.sigma_hat, moments.a_hat, lambda, column_opts, &v);
    model.iterations = outer;
    if (risk_trace) risk_trace->push_back(risk(v, c, moments.sigma_hat, moments.a_hat, lambda));
    Clustering next = greedy_sweep(v, c, moments.a_hat, opts);
    const bool unchanged = next == c;
    c = std::move(next);
    if (unchanged) break;
  }
  model.risk = risk(v, c, moments.sigma_hat, moments.a_hat, lambda);
  model.clustering = std::move(c);
  model.v = std::move(v);
  model.restarts_used = 1;
  return model;
}

inline SonicModel fit_exact_greedy(const MomentEstimates& moments, int k, double lambda,
                                   const FitOptions& opts);

// Multi-restart alternating fit. Restart r draws its initialization from
// substream r of the master seed; the restart with the smallest terminal
// risk wins, ties resolving to the lowest restart index.
inline SonicModel fit(const MomentEstimates& moments, int k, double lambda,
                      const FitOptions& opts = {}) {
  if (opts.exact_greedy) return fit_exact_greedy(moments, k, lambda, opts);
  if (opts.restarts < 1) throw InvalidArgument("need at least one restart");
  std::vector<SonicModel> runs(static_cast<std::size_t>(opts.restarts));
  FitOptions run_opts = opts;
  run_opts.threads = 1;
  parallel_for(opts.restarts, opts.threads, [&](int r) {
    runs[static_cast<std::size_t>(r)] =
        fit_single(moments, k, lambda, run_opts, rng::derive_stream(opts.seed, static_cast<std::uint64_t>(r)));
  });
  int best = 0;
  for (int r = 1; r < opts.restarts; ++r)
    if (runs[static_cast<std::size_t>(r)].risk < runs[static_cast<std::size_t>(best)].risk) best = r;
  SonicModel model = std::move(runs[static_cast<std::size_t>(best)]);
  model.restarts_used = opts.restarts;
  return model;
}

inline SonicModel fit(const Panel& panel, int k, double lambda, const FitOptions& opts = {},
                      bool psd_projection = true) {
  return fit(estimate_moments(panel, psd_projection), k, lambda, opts);
}

namespace detail {

// Exact greedy state: cached per-column objectives f_j = min_v objective so a
// candidate move re-solves only the two clusters it touches.
struct ExactGreedyRun {
  const MomentEstimates& moments;
  int k;
  double lambda;
  const FitOptions& opts;

  double column_objective(const Clustering& c, int j, const Matrix& warm, Vector* out_v) const {
    const Matrix targets = cluster_targets(moments.a_hat, c);
    LassoOptions lopts = opts.lasso;
    lopts.warm_start = warm.col(j);
    const LassoResult r = solve_lasso_quadratic(moments.sigma_hat, targets.col(j), lambda, lopts);
    if (out_v) *out_v = r.v;
    return lasso_objective(moments.sigma_hat, targets.col(j), lambda, r.v);
  }

  SonicModel run(std::uint64_t seed) const {
    const Index n = moments.n();
    rng::Sampler sampler(seed);
    Clustering c(random_labels(n, k, sampler), k);

    Matrix v = Matrix::Zero(n, k);
    Vector objectives(k);
    for (int j = 0; j < k; ++j) {
      Vector col;
      objectives[j] = column_objective(c, j, v, &col);
      v.col(j) = col;
    }
    double total = objectives.sum();

    SonicModel model;
    model.lambda = lambda;
    for (int outer = 1; outer <= opts.max_outer; ++outer) {
      model.iterations = outer;
      double best_total = total;
      Index best_node = -1;
      int best_label = -1;
      Vector best_va, best_vb;
      double best_fa = 0.0, best_fb = 0.0;
      std::vector<int> sizes = c.sizes();
      for (Index i = 0; i < n; ++i) {
        const int a = c.labels[i];
        if (sizes[static_cast<std::size_t>(a)] <= 1) continue;
        for (int l = 0; l < k; ++l) {
          if (l == a) continue;
          Clustering cand = c;
          cand.labels[i] = l;
          Vector va, vb;
          const double fa = column_objective(cand, a, v, &va);
          const double fb = column_objective(cand, l, v, &vb);
          const double cand_total = total - objectives[a] - objectives[l] + fa + fb;
          if (cand_total < best_total) {
            best_total = cand_total;
            best_node = i;
            best_label = l;
            best_va = va;
            best_vb = vb;
            best_fa = fa;
            best_fb = fb;
          }
        }
      }
      if (best_node < 0 || best_total >= total - opts.min_improvement * (1.0 + std::abs(total))) break;
      const int a = c.labels[best_node];
      c.labels[best_node] = best_label;
      v.col(a) = best_va;
      v.col(best_label) = best_vb;
      objectives[a] = best_fa;
      objectives[best_label] = best_fb;
      total = best_total;
    }
    model.risk = risk(v, c, moments.sigma_hat, moments.a_hat, lambda);
    model.clustering = std::move(c);
    model.v = std::move(v);
    model.restarts_used = 1;
    return model;
  }
};

}  // namespace detail

// Greedy descent on F(C) = min_V R_lambda(V; C): every single-move candidate
// is scored by refitting the affected clusters; stops at a clustering no
// single move can improve. Guarded to small instances since each step scores
// O(N K) candidates by convex solves.
inline SonicModel fit_exact_greedy(const MomentEstimates& moments, int k, double lambda,
                                   const FitOptions& opts) {
  const Index n = moments.n();
  if (n > 30) throw GuardTripped("exact greedy fit is guarded to N <= 30");
  if (k < 1) throw InvalidArgument("cluster count must be positive");
  if (k > n) throw TooManyClusters("K exceeds N");
  if (opts.restarts < 1) throw InvalidArgument("need at least one restart");

  detail::ExactGreedyRun engine{moments, k, lambda, opts};
  std::vector<SonicModel> runs(static_cast<std::size_t>(opts.restarts));
  parallel_for(opts.restarts, opts.threads, [&](int r) {
    runs[static_cast<std::size_t>(r)] = engine.run(rng::derive_stream(opts.seed, static_cast<std::uint64_t>(r)));
  });
  int best = 0;
  for (int r = 1; r < opts.restarts; ++r)
    if (runs[static_cast<std::size_t>(r)].risk < runs[static_cast<std::size_t>(best)].risk) best = r;
  SonicModel model = std::move(runs[static_cast<std::size_t>(best)]);
  model.restarts_used = opts.restarts;
  return model;
}

inline SonicModel fit_exact_greedy(const Panel& panel, int k, double lambda,
                                   const FitOptions& opts = {}, bool psd_projection = true) {
  return fit_exact_greedy(estimate_moments(panel, psd_projection), k, lambda, opts);
}

}  // namespace sonic
