#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sonic/bench.hpp"
#include "sonic/errors.hpp"
#include "sonic/estimator.hpp"
#include "sonic/moments.hpp"
#include "sonic/panel.hpp"
#include "sonic/parallel.hpp"
#include "sonic/rng.hpp"

namespace sonic {

// Data-driven regularization level: the K-th singular value of the corrected
// covariance stands in for the noise scale, and T p_min^2 is the effective
// sample size under missingness. Natural logarithm throughout.
template <class DS, class DP>
double lambda_heuristic(const Eigen::MatrixBase<DS>& sigma_hat, int k, int t,
                        const Eigen::MatrixBase<DP>& p_hat) {
  if (t < 2) throw InsufficientSamples("lambda heuristic needs T >= 2");
  const double p_min = p_hat.minCoeff();
  if (!(p_min > 0.0)) throw ZeroFrequency("lambda heuristic needs positive observation frequencies");
  const double n = static_cast<double>(sigma_hat.rows());
  const double sigma_k = kth_singular_value(sigma_hat, k);
  return sigma_k * std::sqrt(std::log(n) / (static_cast<double>(t) * p_min * p_min));
}

// 1-based inclusive sample interval.
struct Window {
  int first = 0;
  int last = 0;
  int length() const { return last - first + 1; }
};

// Six overlapping windows of length about 3T/4, the j-th starting at offset
// (j-1)T/20, jointly covering [1, T]. Endpoints use floor rounding.
inline std::array<Window, 6> stability_windows(int t) {
  if (t < 8) throw InsufficientSamples("stability windows need T >= 8");
  std::array<Window, 6> out;
  for (int j = 1; j <= 6; ++j) {
    Window w;
    w.first = static_cast<int>((static_cast<long>(j - 1) * t) / 20) + 1;
    w.last = static_cast<int>((static_cast<long>(j + 14) * t) / 20);
    out[static_cast<std::size_t>(j - 1)] = w;
  }
  return out;
}

enum class LambdaPolicy {
  PerWindowHeuristic,  // re-estimate lambda from each window's own moments
  Fixed,
};

struct StabilityOptions {
  int k_min = 2;
  int k_max = 6;
  LambdaPolicy lambda_policy = LambdaPolicy::PerWindowHeuristic;
  double fixed_lambda = 0.0;
  FitOptions fit;
  double recommend_threshold_frac = 0.1;  // max distance <= frac*N to qualify
  int threads = 1;
  bool psd_projection = true;
};

struct StabilityReport {
  std::vector<int> k_values;
  std::array<Window, 6> window_bounds;
  // distances[a][j] = d(C_{I_1}, C_{I_(j+2)}) for k_values[a], j = 0..4
  std::vector<std::array<int, 5>> distances;
  std::vector<std::array<double, 6>> lambdas_used;  // per K, per window
  std::optional<int> recommended_k;
};

// Fit every (K, window) pair and compare each window's clustering against the
// first window's. All fits share the master seed, so two windows with equal
// data produce equal clusterings and the stability signal reflects the data,
// not restart randomness. The recommendation picks the smallest K whose worst
// distance is below the threshold fraction of N; it is a heuristic and the
// raw table is the result.
inline StabilityReport stability_analysis(const Panel& panel, const StabilityOptions& opts) {
  if (opts.k_min < 2) throw InvalidArgument("stability analysis needs k_min >= 2");
  if (opts.k_max < opts.k_min) throw InvalidArgument("k_max must be at least k_min");
  StabilityReport report;
  report.window_bounds = stability_windows(static_cast<int>(panel.t()));
  for (int k = opts.k_min; k <= opts.k_max; ++k) report.k_values.push_back(k);

  std::vector<Panel> window_panels;
  std::vector<MomentEstimates> window_moments;
  window_panels.reserve(6);
  for (int j = 0; j < 6; ++j) {
    const Window& w = report.window_bounds[static_cast<std::size_t>(j)];
    window_panels.push_back(panel.slice_rows(w.first - 1, w.last));
    try {
      window_moments.push_back(estimate_moments(window_panels.back(), opts.psd_projection));
    } catch (const Error& e) {
      throw ZeroFrequency("window " + std::to_string(j + 1) + ": " + e.what());
    }
  }

  const int nk = static_cast<int>(report.k_values.size());
  std::vector<Clustering> fits(static_cast<std::size_t>(nk) * 6);
  std::vector<std::array<double, 6>> lambdas(static_cast<std::size_t>(nk));
  std::vector<std::string> failures(static_cast<std::size_t>(nk) * 6);
  parallel_for(nk * 6, opts.threads, [&](int cell) {
    const int a = cell / 6;
    const int j = cell % 6;
    const int k = report.k_values[static_cast<std::size_t>(a)];
    const MomentEstimates& m = window_moments[static_cast<std::size_t>(j)];
    double lambda = opts.fixed_lambda;
    if (opts.lambda_policy == LambdaPolicy::PerWindowHeuristic)
      lambda = lambda_heuristic(m.sigma_hat, k,
                                static_cast<int>(window_panels[static_cast<std::size_t>(j)].t()), m.p_hat);
    lambdas[static_cast<std::size_t>(a)][static_cast<std::size_t>(j)] = lambda;
    FitOptions fit_opts = opts.fit;
    fit_opts.threads = 1;
    try {
      fits[static_cast<std::size_t>(cell)] = fit(m, k, lambda, fit_opts).clustering;
    } catch (const Error& e) {
      failures[static_cast<std::size_t>(cell)] =
          "K=" + std::to_string(k) + " window=" + std::to_string(j + 1) + ": " + e.what();
    }
  });
  for (const std::string& f : failures)
    if (!f.empty()) throw NumericalFailure("stability fit failed: " + f);

  report.lambdas_used = std::move(lambdas);
  report.distances.resize(static_cast<std::size_t>(nk));
  for (int a = 0; a < nk; ++a) {
    const Clustering& reference = fits[static_cast<std::size_t>(a) * 6];
    for (int j = 1; j < 6; ++j)
      report.distances[static_cast<std::size_t>(a)][static_cast<std::size_t>(j - 1)] =
          clustering_distance(reference, fits[static_cast<std::size_t>(a) * 6 + static_cast<std::size_t>(j)]);
  }

  const double threshold = opts.recommend_threshold_frac * static_cast<double>(panel.n());
  for (int a = 0; a < nk; ++a) {
    int worst = 0;
    for (int j = 0; j < 5; ++j)
      worst = std::max(worst, report.distances[static_cast<std::size_t>(a)][static_cast<std::size_t>(j)]);
    if (worst <= threshold) {
      report.recommended_k = report.k_values[static_cast<std::size_t>(a)];
      break;
    }
  }
  return report;
}

}  // namespace sonic
