#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "sonic/bench.hpp"
#include "sonic/errors.hpp"
#include "sonic/estimator.hpp"
#include "sonic/io.hpp"
#include "sonic/panel.hpp"
#include "sonic/parallel.hpp"
#include "sonic/selection.hpp"
#include "sonic/simulate.hpp"

namespace sonic {

struct Scenario {
  int t = 100;
  double p = 1.0;

  std::string tag() const { return "T" + std::to_string(t) + "_p" + format_double(p); }
};

// Grid sweep over (scenario, K, lambda) cells with planted models, one fresh
// simulation per replication.
struct ExperimentConfig {
  int n = 100;
  int s = 1;
  double coef = 0.5;
  int trunc_order = 20;
  std::vector<int> k_values;
  std::vector<double> lambda_grid;
  std::vector<Scenario> scenarios;
  int replications = 20;
  std::uint64_t seed = 0;
  int restarts = 5;
  int max_outer = 100;
  std::string out_dir = "experiment_out";
  int threads = 1;

  void validate() const {
    if (k_values.empty()) throw InvalidArgument("experiment needs at least one K value");
    if (lambda_grid.empty()) throw InvalidArgument("experiment needs a lambda grid");
    for (double l : lambda_grid)
      if (!(l > 0.0)) throw InvalidArgument("lambda grid values must be positive");
    if (scenarios.empty()) throw InvalidArgument("experiment needs at least one scenario");
    if (replications < 1) throw InvalidArgument("replications must be at least 1");
  }
};

struct RepOutcome {
  double heuristic_lambda = 0.0;
  std::vector<double> rel_error;          // per lambda
  std::vector<int> clustering_distance;   // per lambda
  std::vector<bool> support_exact;        // per lambda
  std::string error;                      // nonempty if the replication failed

  int argmin_lambda_index() const {
    int best = 0;
    for (std::size_t a = 1; a < rel_error.size(); ++a)
      if (rel_error[a] < rel_error[static_cast<std::size_t>(best)]) best = static_cast<int>(a);
    return best;
  }
};

struct KOutcome {
  int k = 0;
  std::vector<RepOutcome> reps;
  std::vector<double> mean_rel_error;    // per lambda, over successful reps
  std::vector<double> stderr_rel_error;  // per lambda
  int best_lambda_index = 0;             // argmin of mean_rel_error
  double mean_clustering_error_at_best = 0.0;
  double mean_heuristic_lambda = 0.0;
};

struct ScenarioOutcome {
  Scenario scenario;
  std::vector<KOutcome> per_k;
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<ScenarioOutcome> scenarios;
};

// Cells run on a worker pool; every (scenario, K, rep) unit derives its own
// seed chain from the master seed and writes only its own slot, so results
// are identical for any thread count. The fit seed is shared across the
// lambda grid within a replication.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  ExperimentResult result;
  result.config = cfg;
  result.scenarios.resize(cfg.scenarios.size());

  struct Unit {
    int scenario_index;
    int k_index;
    int rep;
  };
  std::vector<Unit> units;
  for (int si = 0; si < static_cast<int>(cfg.scenarios.size()); ++si) {
    result.scenarios[static_cast<std::size_t>(si)].scenario = cfg.scenarios[static_cast<std::size_t>(si)];
    result.scenarios[static_cast<std::size_t>(si)].per_k.resize(cfg.k_values.size());
    for (int ki = 0; ki < static_cast<int>(cfg.k_values.size()); ++ki) {
      auto& ko = result.scenarios[static_cast<std::size_t>(si)].per_k[static_cast<std::size_t>(ki)];
      ko.k = cfg.k_values[static_cast<std::size_t>(ki)];
      ko.reps.resize(static_cast<std::size_t>(cfg.replications));
      for (int rep = 0; rep < cfg.replications; ++rep) units.push_back({si, ki, rep});
    }
  }

  parallel_for(static_cast<int>(units.size()), cfg.threads, [&](int u) {
    const Unit unit = units[static_cast<std::size_t>(u)];
    const Scenario scen = cfg.scenarios[static_cast<std::size_t>(unit.scenario_index)];
    const int k = cfg.k_values[static_cast<std::size_t>(unit.k_index)];
    RepOutcome& out = result.scenarios[static_cast<std::size_t>(unit.scenario_index)]
                          .per_k[static_cast<std::size_t>(unit.k_index)]
                          .reps[static_cast<std::size_t>(unit.rep)];
    try {
      const std::uint64_t rep_seed = rng::derive_stream(
          rng::derive_stream(rng::derive_stream(cfg.seed, static_cast<std::uint64_t>(unit.scenario_index)),
                             static_cast<std::uint64_t>(unit.k_index)),
          static_cast<std::uint64_t>(unit.rep));
      SimulationConfig sim = SimulationConfig::uniform_p(cfg.n, k, cfg.s, cfg.coef, scen.t, scen.p,
                                                         cfg.trunc_order, rng::derive_stream(rep_seed, 0));
      const SimulatedPanel sample = simulate_panel(sim);
      const MomentEstimates moments = estimate_moments(sample.panel);
      out.heuristic_lambda = lambda_heuristic(moments.sigma_hat, k, scen.t, moments.p_hat);
      FitOptions fit_opts;
      fit_opts.restarts = cfg.restarts;
      fit_opts.max_outer = cfg.max_outer;
      fit_opts.seed = rng::derive_stream(rep_seed, 1);
      fit_opts.threads = 1;
      out.rel_error.reserve(cfg.lambda_grid.size());
      for (double lambda : cfg.lambda_grid) {
        const SonicModel model = fit(moments, k, lambda, fit_opts);
        const EvalResult eval = align_and_score(model, sample.truth);
        out.rel_error.push_back(eval.relative_frobenius);
        out.clustering_distance.push_back(eval.clustering_distance);
        out.support_exact.push_back(eval.support_exact);
      }
    } catch (const std::exception& e) {
      out.error = e.what();  // record and continue with the other cells
    }
  });

  for (auto& scenario : result.scenarios) {
    for (auto& ko : scenario.per_k) {
      const std::size_t nl = cfg.lambda_grid.size();
      ko.mean_rel_error.assign(nl, 0.0);
      ko.stderr_rel_error.assign(nl, 0.0);
      int good = 0;
      double heuristic_sum = 0.0;
      for (const RepOutcome& rep : ko.reps) {
        if (!rep.error.empty()) continue;
        ++good;
        heuristic_sum += rep.heuristic_lambda;
        for (std::size_t a = 0; a < nl; ++a) ko.mean_rel_error[a] += rep.rel_error[a];
      }
      if (good == 0) continue;
      for (std::size_t a = 0; a < nl; ++a) ko.mean_rel_error[a] /= good;
      ko.mean_heuristic_lambda = heuristic_sum / good;
      if (good > 1) {
        for (const RepOutcome& rep : ko.reps) {
          if (!rep.error.empty()) continue;
          for (std::size_t a = 0; a < nl; ++a) {
            const double d = rep.rel_error[a] - ko.mean_rel_error[a];
            ko.stderr_rel_error[a] += d * d;
          }
        }
        for (std::size_t a = 0; a < nl; ++a)
          ko.stderr_rel_error[a] = std::sqrt(ko.stderr_rel_error[a] / (good - 1) / good);
      }
      ko.best_lambda_index = 0;
      for (std::size_t a = 1; a < nl; ++a)
        if (ko.mean_rel_error[a] < ko.mean_rel_error[static_cast<std::size_t>(ko.best_lambda_index)])
          ko.best_lambda_index = static_cast<int>(a);
      double dist_sum = 0.0;
      for (const RepOutcome& rep : ko.reps) {
        if (!rep.error.empty()) continue;
        dist_sum += rep.clustering_distance[static_cast<std::size_t>(ko.best_lambda_index)];
      }
      ko.mean_clustering_error_at_best = dist_sum / good;
    }
  }
  return result;
}

// One CSV set per scenario: the relative-error grid, the best-lambda curve,
// the clustering-error curve, the lambda comparison, and the raw per-rep
// table.
inline void write_experiment_csvs(const ExperimentResult& result, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const auto& grid = result.config.lambda_grid;
  for (const ScenarioOutcome& scenario : result.scenarios) {
    const std::string tag = scenario.scenario.tag();
    {
      std::ofstream out = detail::open_output(out_dir + "/rel_error_grid_" + tag + ".csv");
      out << "k,lambda,mean_rel_error,stderr\n";
      for (const KOutcome& ko : scenario.per_k)
        for (std::size_t a = 0; a < grid.size(); ++a)
          out << ko.k << ',' << format_double(grid[a]) << ',' << format_double(ko.mean_rel_error[a])
              << ',' << format_double(ko.stderr_rel_error[a]) << '\n';
    }
    {
      std::ofstream out = detail::open_output(out_dir + "/rel_error_best_" + tag + ".csv");
      out << "k,best_lambda,mean_rel_error,stderr\n";
      for (const KOutcome& ko : scenario.per_k) {
        const std::size_t b = static_cast<std::size_t>(ko.best_lambda_index);
        out << ko.k << ',' << format_double(grid[b]) << ',' << format_double(ko.mean_rel_error[b])
            << ',' << format_double(ko.stderr_rel_error[b]) << '\n';
      }
    }
    {
      std::ofstream out = detail::open_output(out_dir + "/clustering_error_" + tag + ".csv");
      out << "k,best_lambda,mean_clustering_error\n";
      for (const KOutcome& ko : scenario.per_k)
        out << ko.k << ',' << format_double(grid[static_cast<std::size_t>(ko.best_lambda_index)]) << ','
            << format_double(ko.mean_clustering_error_at_best) << '\n';
    }
    {
      std::ofstream out = detail::open_output(out_dir + "/lambda_choice_" + tag + ".csv");
      out << "k,argmin_lambda,heuristic_lambda\n";
      for (const KOutcome& ko : scenario.per_k)
        out << ko.k << ',' << format_double(grid[static_cast<std::size_t>(ko.best_lambda_index)]) << ','
            << format_double(ko.mean_heuristic_lambda) << '\n';
    }
    {
      std::ofstream out = detail::open_output(out_dir + "/reps_" + tag + ".csv");
      out << "k,rep,lambda,rel_error,clustering_distance,support_exact,heuristic_lambda,error\n";
      for (const KOutcome& ko : scenario.per_k)
        for (std::size_t r = 0; r < ko.reps.size(); ++r) {
          const RepOutcome& rep = ko.reps[r];
          if (!rep.error.empty()) {
            out << ko.k << ',' << r << ",,,,,," << '"' << rep.error << '"' << '\n';
            continue;
          }
          for (std::size_t a = 0; a < grid.size(); ++a)
            out << ko.k << ',' << r << ',' << format_double(grid[a]) << ','
                << format_double(rep.rel_error[a]) << ',' << rep.clustering_distance[a] << ','
                << (rep.support_exact[a] ? 1 : 0) << ',' << format_double(rep.heuristic_lambda)
                << ",\n";
        }
    }
  }
}

inline std::string experiment_schema() {
  return R"(# experiment config: one "key = value" pair per line, '#' starts a comment.
#
# n = 100              network size N
# s = 1                influencers per cluster (column sparsity)
# coef = 0.5           planted signal magnitude
# trunc_order = 20     moving-average truncation of the sampler
# k = 5,10,15,20,25    cluster counts to sweep (comma separated)
# lambda = 0.05,0.1    regularization grid (comma separated), or
# lambda = loggrid:0.02,1.0,12   log-spaced grid lo,hi,count
# scenario = 100,1.0   sample length T and observation probability p
#                      (repeat the key for several scenarios)
# replications = 20    simulations per (scenario, K) cell
# seed = 42            master seed
# restarts = 5         restarts per fit
# max_outer = 100      outer iteration cap per fit
# out = results        output directory for the CSV tables
)";
}

inline ExperimentConfig parse_experiment_config(const std::string& path) {
  std::ifstream in = detail::open_input(path);
  ExperimentConfig cfg;
  cfg.k_values.clear();
  cfg.lambda_grid.clear();
  cfg.scenarios.clear();
  std::string line;
  int line_no = 0;
  auto fail = [&](const std::string& msg) {
    throw IoError("'" + path + "' line " + std::to_string(line_no) + ": " + msg);
  };
  auto split_list = [](const std::string& text) {
    std::vector<std::string> items;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) items.push_back(item);
    return items;
  };
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail("expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      if (key == "n") cfg.n = std::stoi(value);
      else if (key == "s") cfg.s = std::stoi(value);
      else if (key == "coef") cfg.coef = parse_double(value);
      else if (key == "trunc_order") cfg.trunc_order = std::stoi(value);
      else if (key == "replications") cfg.replications = std::stoi(value);
      else if (key == "seed") cfg.seed = std::stoull(value);
      else if (key == "restarts") cfg.restarts = std::stoi(value);
      else if (key == "max_outer") cfg.max_outer = std::stoi(value);
      else if (key == "out") cfg.out_dir = value;
      else if (key == "k") {
        for (const std::string& item : split_list(value)) cfg.k_values.push_back(std::stoi(trim(item)));
      } else if (key == "lambda") {
        if (value.rfind("loggrid:", 0) == 0) {
          const std::vector<std::string> parts = split_list(value.substr(8));
          if (parts.size() != 3) fail("loggrid needs lo,hi,count");
          const double lo = parse_double(trim(parts[0]));
          const double hi = parse_double(trim(parts[1]));
          const int count = std::stoi(trim(parts[2]));
          if (!(lo > 0.0) || !(hi > lo) || count < 2) fail("invalid loggrid parameters");
          for (int a = 0; a < count; ++a)
            cfg.lambda_grid.push_back(lo * std::pow(hi / lo, static_cast<double>(a) / (count - 1)));
        } else {
          for (const std::string& item : split_list(value)) cfg.lambda_grid.push_back(parse_double(trim(item)));
        }
      } else if (key == "scenario") {
        const std::vector<std::string> parts = split_list(value);
        if (parts.size() != 2) fail("scenario needs 'T,p'");
        Scenario scen;
        scen.t = std::stoi(trim(parts[0]));
        scen.p = parse_double(trim(parts[1]));
        cfg.scenarios.push_back(scen);
      } else {
        fail("unknown key '" + key + "'");
      }
    } catch (const IoError&) {
      throw;
    } catch (const std::exception&) {
      fail("cannot parse value '" + value + "' for key '" + key + "'");
    }
  }
  return cfg;
}

}  // namespace sonic
