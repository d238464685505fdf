#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "sonic/bench.hpp"
#include "sonic/selection.hpp"
#include "sonic/simulate.hpp"

using namespace sonic;

namespace {

Clustering from_labels(std::initializer_list<int> labels, int k) {
  IntVector v(static_cast<Index>(labels.size()));
  Index i = 0;
  for (int l : labels) v[i++] = l;
  return Clustering(v, k);
}

}  // namespace

TEST_CASE("clustering distance") {
  SUBCASE("identical clusterings") {
    const Clustering a = from_labels({0, 0, 1, 1}, 2);
    CHECK(clustering_distance(a, a) == 0);
  }
  SUBCASE("label swap is free") {
    const Clustering a = from_labels({0, 0, 1, 1}, 2);
    const Clustering b = from_labels({1, 1, 0, 0}, 2);
    CHECK(clustering_distance(a, b) == 0);
  }
  SUBCASE("one node moved") {
    const Clustering a = from_labels({0, 0, 1, 1}, 2);   // {1,2}, {3,4}
    const Clustering b = from_labels({0, 0, 0, 1}, 2);   // {1,2,3}, {4}
    CHECK(clustering_distance(a, b) == 1);
  }
  SUBCASE("differing K rejected") {
    const Clustering a = from_labels({0, 0, 1, 1}, 2);
    const Clustering b = from_labels({0, 1, 2, 2}, 3);
    CHECK_THROWS_AS(clustering_distance(a, b), DimensionMismatch);
  }
  SUBCASE("matches brute-force enumeration and is symmetric") {
    std::mt19937 gen(1);
    for (int rep = 0; rep < 200; ++rep) {
      const int n = 4 + static_cast<int>(gen() % 9);
      const int k = 2 + static_cast<int>(gen() % 4);
      if (k > n) continue;
      const Clustering a = oracle::random_clustering(n, k, gen);
      const Clustering b = oracle::random_clustering(n, k, gen);
      const int d = clustering_distance(a, b);
      CHECK(d == oracle::clustering_distance_brute(a, b));
      CHECK(d == clustering_distance(b, a));
      CHECK(d >= 0);
      CHECK(d <= n);
    }
  }
  SUBCASE("zero iff equivalent up to relabeling") {
    std::mt19937 gen(2);
    for (int rep = 0; rep < 50; ++rep) {
      const Clustering a = oracle::random_clustering(8, 3, gen);
      std::vector<int> perm{1, 2, 0};
      IntVector relabeled(8);
      for (int i = 0; i < 8; ++i) relabeled[i] = perm[static_cast<std::size_t>(a.labels[i])];
      CHECK(clustering_distance(a, Clustering(relabeled, 3)) == 0);
      const Clustering b = oracle::random_clustering(8, 3, gen);
      if (clustering_distance(a, b) == 0)
        CHECK(oracle::clustering_distance_brute(a, b) == 0);
    }
  }
}

TEST_CASE("align and score") {
  const GroundTruth truth = build_planted_model(SimulationConfig::uniform_p(8, 2, 1, 0.5, 10, 1.0, 20, 0));
  SUBCASE("perfect model") {
    SonicModel model;
    model.clustering = truth.clustering;
    model.v = truth.v_star;
    const EvalResult eval = align_and_score(model, truth);
    CHECK(eval.relative_frobenius == 0.0);
    CHECK(eval.clustering_distance == 0);
    CHECK(eval.support_exact);
  }
  SUBCASE("zero model") {
    SonicModel model;
    model.clustering = truth.clustering;
    model.v = Matrix::Zero(8, 2);
    const EvalResult eval = align_and_score(model, truth);
    CHECK(eval.relative_frobenius == doctest::Approx(1.0));
    CHECK_FALSE(eval.support_exact);
  }
  SUBCASE("support recovery is judged after column alignment") {
    SonicModel model;
    IntVector flipped(8);
    for (int i = 0; i < 8; ++i) flipped[i] = 1 - truth.clustering.labels[i];
    model.clustering = Clustering(flipped, 2);
    model.v = Matrix::Zero(8, 2);
    model.v.col(0) = truth.v_star.col(1);
    model.v.col(1) = truth.v_star.col(0);
    const EvalResult eval = align_and_score(model, truth);
    CHECK(eval.clustering_distance == 0);
    CHECK(eval.relative_frobenius == doctest::Approx(0.0));
    CHECK(eval.support_exact);
  }
}

TEST_CASE("dense VAR baseline") {
  SUBCASE("identity gram returns the transposed cross moment") {
    std::mt19937 gen(3);
    Matrix a(3, 3);
    std::normal_distribution<double> normal;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) a(i, j) = normal(gen);
    const VarBaseline out = fit_var_baseline(Matrix::Identity(3, 3), a);
    CHECK((out.theta - a.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(out.condition == doctest::Approx(1.0));
  }
  SUBCASE("hand-solved 2x2") {
    Vector d(2);
    d << 1.0, 2.0;
    Matrix a(2, 2);
    a << 2.0, 0.0, 0.0, 6.0;
    const VarBaseline out = fit_var_baseline(Matrix(d.asDiagonal()), a);
    Matrix expected(2, 2);
    expected << 2.0, 0.0, 0.0, 3.0;
    CHECK((out.theta - expected).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("rank-deficient gram raises SingularGram") {
    // a fully observed panel with more nodes than samples has a singular
    // observed covariance
    const Matrix y = Matrix::Random(6, 10);
    const MomentEstimates m = estimate_moments(Panel::fully_observed(y));
    CHECK_THROWS_AS(fit_var_baseline(m.sigma_hat, m.a_hat), SingularGram);
  }
}

TEST_CASE("sparse VAR baseline") {
  std::mt19937 gen(4);
  const Matrix sigma = oracle::random_psd(6, gen, 0.3);
  Matrix a(6, 6);
  std::normal_distribution<double> normal;
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) a(i, j) = normal(gen);
  SUBCASE("huge lambda zeroes the operator") {
    const Matrix theta = fit_sparse_var_baseline(sigma, a, a.cwiseAbs().maxCoeff() * 10.0);
    CHECK(theta.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("zero lambda matches the dense solve") {
    const Matrix theta = fit_sparse_var_baseline(sigma, a, 0.0);
    const VarBaseline dense = fit_var_baseline(sigma, a);
    CHECK((theta - dense.theta).cwiseAbs().maxCoeff() < 1e-6);
  }
  SUBCASE("row solutions minimize their row objectives") {
    const double lambda = 0.2;
    const Matrix theta = fit_sparse_var_baseline(sigma, a, lambda);
    for (int i = 0; i < 6; ++i)
      CHECK(kkt_residual(sigma, Vector(a.col(i)), lambda, Vector(theta.row(i).transpose())) < 1e-6);
  }
}

TEST_CASE("prediction error") {
  SUBCASE("zero operator leaves the covariance trace") {
    std::mt19937 gen(5);
    const Matrix sigma = oracle::random_psd(4, gen);
    Matrix a(4, 4);
    std::normal_distribution<double> normal;
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) a(i, j) = normal(gen);
    CHECK(prediction_error(Matrix::Zero(4, 4), sigma, a) == doctest::Approx(sigma.trace()));
  }
  SUBCASE("identity arithmetic") {
    CHECK(prediction_error(Matrix::Identity(2, 2), Matrix::Identity(2, 2), Matrix::Zero(2, 2)) ==
          doctest::Approx(4.0));
  }
  SUBCASE("matches the mean squared error sum with aligned index ranges") {
    // moments built over exactly the index ranges the MSE sum uses
    const SimulationConfig cfg = SimulationConfig::uniform_p(5, 2, 1, 0.5, 200, 1.0, 20, 8);
    const SimulatedPanel sample = simulate_panel(cfg);
    const Matrix& y = sample.panel.values;
    const Index t = y.rows();
    std::mt19937 gen(6);
    std::normal_distribution<double> normal;
    Matrix theta(5, 5);
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j) theta(i, j) = 0.3 * normal(gen);

    double mse = 0.0;
    for (Index r = 1; r < t; ++r) mse += (y.row(r).transpose() - theta * y.row(r - 1).transpose()).squaredNorm();
    mse /= static_cast<double>(t - 1);

    const Matrix sigma_head = y.topRows(t - 1).transpose() * y.topRows(t - 1) / static_cast<double>(t - 1);
    const Matrix sigma_tail = y.bottomRows(t - 1).transpose() * y.bottomRows(t - 1) / static_cast<double>(t - 1);
    const Matrix a_pairs = y.topRows(t - 1).transpose() * y.bottomRows(t - 1) / static_cast<double>(t - 1);
    const double functional =
        sigma_tail.trace() - 2.0 * (theta * a_pairs).trace() + (theta * sigma_head * theta.transpose()).trace();
    CHECK(functional == doctest::Approx(mse).epsilon(1e-12));
    CHECK(prediction_error(theta, sigma_head, a_pairs) ==
          doctest::Approx(mse - sigma_tail.trace() + sigma_head.trace()).epsilon(1e-12));
  }
  SUBCASE("true operator approaches the innovation trace on long samples") {
    const SimulationConfig cfg = SimulationConfig::uniform_p(6, 2, 1, 0.5, 5000, 1.0, 20, 9);
    const SimulatedPanel sample = simulate_panel(cfg);
    const MomentEstimates m = estimate_moments(sample.panel);
    const double err = prediction_error(sample.truth.theta_star, m.sigma_hat, m.a_hat);
    CHECK(std::abs(err - 6.0) < 0.6);  // Tr(S) = N for identity innovations
  }
}

TEST_CASE("train test split") {
  const Panel panel = Panel::fully_observed(Matrix::Random(10, 2));
  SUBCASE("floor arithmetic") {
    const auto [train, test] = train_test_split(panel, 0.7);
    CHECK(train.t() == 7);
    CHECK(test.t() == 3);
    CHECK((train.values - panel.values.topRows(7)).cwiseAbs().maxCoeff() == 0.0);
    CHECK((test.values - panel.values.bottomRows(3)).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("seventy percent of 82") {
    const Panel longer = Panel::fully_observed(Matrix::Random(82, 2));
    const auto [train, test] = train_test_split(longer, 0.7);
    CHECK(train.t() == 57);
    CHECK(test.t() == 25);
  }
  SUBCASE("degenerate split rejected") {
    const Panel tiny = Panel::fully_observed(Matrix::Random(3, 2));
    CHECK_THROWS_AS(train_test_split(tiny, 0.99), InsufficientSamples);
  }
}

TEST_CASE("benchmark ordering on planted data") {
  int sonic_wins = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const SimulationConfig cfg = SimulationConfig::uniform_p(50, 5, 1, 0.5, 500, 1.0, 20, seed);
    const SimulatedPanel sample = simulate_panel(cfg);
    const auto [train, test] = train_test_split(sample.panel, 0.7);
    const MomentEstimates train_m = estimate_moments(train);
    const MomentEstimates test_m = estimate_moments(test);
    FitOptions opts;
    opts.seed = seed;
    const double lambda = lambda_heuristic(train_m.sigma_hat, 5, static_cast<int>(train.t()), train_m.p_hat);
    const SonicModel model = fit(train_m, 5, lambda, opts);
    const Matrix theta = theta_from_factors(model.clustering, model.v);
    const double err_sonic = prediction_error(theta, test_m.sigma_hat, test_m.a_hat);
    const double err_zero = prediction_error(Matrix::Zero(50, 50), test_m.sigma_hat, test_m.a_hat);
    if (err_sonic < err_zero) ++sonic_wins;
  }
  CHECK(sonic_wins == 10);
}
