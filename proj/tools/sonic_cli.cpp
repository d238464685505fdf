// Command-line front end: simulation, estimation, model selection and
// benchmarking over panel CSV / model JSON files.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "sonic/sonic.hpp"

namespace {

using sonic::Json;

sonic::Vector parse_probabilities(const std::string& text, int n) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) parts.push_back(item);
  if (parts.size() == 1) return sonic::Vector::Constant(n, sonic::parse_double(parts[0]));
  if (static_cast<int>(parts.size()) != n)
    throw sonic::InvalidArgument("--p needs a scalar or exactly N comma-separated values");
  sonic::Vector p(n);
  for (int i = 0; i < n; ++i) p[i] = sonic::parse_double(parts[static_cast<std::size_t>(i)]);
  return p;
}

Json provenance_block(const std::string& command, std::uint64_t seed, Json config) {
  Json p;
  p["command"] = command;
  p["version"] = SONIC_VERSION;
  p["seed"] = seed;
  p["config"] = std::move(config);
  return p;
}

void write_json_file(const Json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw sonic::IoError("cannot open '" + path + "' for writing");
  out << j.dump(2) << '\n';
  if (!out) throw sonic::IoError("failed while writing '" + path + "'");
}

struct SimulateArgs {
  int n = 100, k = 5, s = 1, t = 100, trunc_order = 20;
  double coef = 0.5;
  std::string p = "1.0";
  std::uint64_t seed = 0;
  std::string out, truth_out;
};

int cmd_simulate(const SimulateArgs& args) {
  sonic::SimulationConfig cfg;
  cfg.n = args.n;
  cfg.k = args.k;
  cfg.s = args.s;
  cfg.coef = args.coef;
  cfg.t = args.t;
  cfg.p = parse_probabilities(args.p, args.n);
  cfg.trunc_order = args.trunc_order;
  cfg.seed = args.seed;
  const sonic::SimulatedPanel sample = sonic::simulate_panel(cfg);
  sonic::write_panel_csv(sample.panel, args.out);
  if (!args.truth_out.empty()) sonic::write_truth_json(sample.truth, args.truth_out);
  const double observed =
      static_cast<double>(sample.panel.mask.count()) / static_cast<double>(cfg.t * cfg.n);
  std::cout << "simulated panel: N=" << cfg.n << " T=" << cfg.t
            << " observed_fraction=" << sonic::format_double(observed) << "\n";
  return 0;
}

struct EstimateArgs {
  std::string input, lambda = "auto", out;
  int k = 2, restarts = 5, max_outer = 100, moves_per_update = 0, threads = 0;
  std::uint64_t seed = 0;
  bool no_psd_project = false, zeros_are_missing = false;
};

int cmd_estimate(const EstimateArgs& args) {
  const sonic::Panel panel = sonic::read_panel_csv(args.input, args.zeros_are_missing);
  const sonic::MomentEstimates moments = sonic::estimate_moments(panel, !args.no_psd_project);
  double lambda;
  if (args.lambda == "auto")
    lambda = sonic::lambda_heuristic(moments.sigma_hat, args.k, static_cast<int>(panel.t()),
                                     moments.p_hat);
  else
    lambda = sonic::parse_double(args.lambda);

  sonic::FitOptions opts;
  opts.restarts = args.restarts;
  opts.max_outer = args.max_outer;
  opts.moves_per_update = args.moves_per_update;
  opts.seed = args.seed;
  opts.threads = sonic::resolve_threads(args.threads);
  const sonic::SonicModel model = sonic::fit(moments, args.k, lambda, opts);

  Json config;
  config["input"] = args.input;
  config["k"] = args.k;
  config["lambda"] = args.lambda;
  config["restarts"] = args.restarts;
  config["max_outer"] = args.max_outer;
  config["moves_per_update"] = args.moves_per_update;
  config["psd_project"] = !args.no_psd_project;
  config["zeros_are_missing"] = args.zeros_are_missing;
  sonic::write_model_json(model, panel.node_ids, provenance_block("estimate", args.seed, config),
                          args.out);
  std::cout << "fitted model: K=" << args.k << " lambda=" << sonic::format_double(lambda)
            << " risk=" << sonic::format_double(model.risk) << " iterations=" << model.iterations
            << "\n";
  return 0;
}

struct StabilityArgs {
  std::string input, lambda_policy = "auto", out;
  int k_min = 2, k_max = 6, threads = 0;
  double lambda = 0.0;
  std::uint64_t seed = 0;
};

int cmd_stability(const StabilityArgs& args) {
  const sonic::Panel panel = sonic::read_panel_csv(args.input);
  sonic::StabilityOptions opts;
  opts.k_min = args.k_min;
  opts.k_max = args.k_max;
  if (args.lambda_policy == "auto") {
    opts.lambda_policy = sonic::LambdaPolicy::PerWindowHeuristic;
  } else if (args.lambda_policy == "fixed") {
    opts.lambda_policy = sonic::LambdaPolicy::Fixed;
    opts.fixed_lambda = args.lambda;
  } else {
    throw CLI::ValidationError("--lambda-policy must be 'auto' or 'fixed'");
  }
  opts.fit.seed = args.seed;
  opts.threads = sonic::resolve_threads(args.threads);
  const sonic::StabilityReport report = sonic::stability_analysis(panel, opts);

  std::ofstream out(args.out);
  if (!out) throw sonic::IoError("cannot open '" + args.out + "' for writing");
  out << "k,window_j,distance\n";
  for (std::size_t a = 0; a < report.k_values.size(); ++a)
    for (int j = 0; j < 5; ++j)
      out << report.k_values[a] << ',' << (j + 2) << ',' << report.distances[a][static_cast<std::size_t>(j)]
          << '\n';
  if (report.recommended_k)
    std::cout << "recommended K: " << *report.recommended_k << "\n";
  else
    std::cout << "no K in [" << args.k_min << ", " << args.k_max
              << "] met the stability threshold\n";
  return 0;
}

struct BenchmarkArgs {
  std::string input, lambda = "auto", out;
  double split = 0.7;
  int k = 2, threads = 0;
  std::uint64_t seed = 0;
};

int cmd_benchmark(const BenchmarkArgs& args) {
  const sonic::Panel panel = sonic::read_panel_csv(args.input);
  const auto [train, test] = sonic::train_test_split(panel, args.split);
  const sonic::MomentEstimates train_moments = sonic::estimate_moments(train);
  const sonic::MomentEstimates test_moments = sonic::estimate_moments(test);

  double lambda;
  if (args.lambda == "auto")
    lambda = sonic::lambda_heuristic(train_moments.sigma_hat, args.k,
                                     static_cast<int>(train.t()), train_moments.p_hat);
  else
    lambda = sonic::parse_double(args.lambda);

  sonic::FitOptions opts;
  opts.seed = args.seed;
  opts.threads = sonic::resolve_threads(args.threads);
  const sonic::SonicModel model = sonic::fit(train_moments, args.k, lambda, opts);
  const sonic::Matrix theta_sonic = sonic::theta_from_factors(model.clustering, model.v);

  Json rows = Json::array();
  {
    Json row;
    row["method"] = "sonic";
    row["prediction_error"] =
        sonic::prediction_error(theta_sonic, test_moments.sigma_hat, test_moments.a_hat);
    rows.push_back(std::move(row));
  }
  {
    Json row;
    row["method"] = "var";
    try {
      const sonic::VarBaseline var =
          sonic::fit_var_baseline(train_moments.sigma_hat, train_moments.a_hat);
      row["prediction_error"] =
          sonic::prediction_error(var.theta, test_moments.sigma_hat, test_moments.a_hat);
      row["gram_condition"] = var.condition;
    } catch (const sonic::SingularGram& e) {
      row["error"] = e.what();
    }
    rows.push_back(std::move(row));
  }
  {
    Json row;
    row["method"] = "sparse_var";
    const sonic::Matrix theta = sonic::fit_sparse_var_baseline(
        train_moments.sigma_hat, train_moments.a_hat, lambda, {}, opts.threads);
    row["prediction_error"] =
        sonic::prediction_error(theta, test_moments.sigma_hat, test_moments.a_hat);
    rows.push_back(std::move(row));
  }
  {
    Json row;
    row["method"] = "zero";
    row["prediction_error"] = test_moments.sigma_hat.trace();
    rows.push_back(std::move(row));
  }

  Json config;
  config["input"] = args.input;
  config["split"] = args.split;
  config["k"] = args.k;
  config["lambda"] = args.lambda;
  Json doc;
  doc["lambda"] = lambda;
  doc["train_rows"] = train.t();
  doc["test_rows"] = test.t();
  doc["rows"] = std::move(rows);
  doc["provenance"] = provenance_block("benchmark", args.seed, config);
  write_json_file(doc, args.out);
  std::cout << "benchmark written to " << args.out << "\n";
  return 0;
}

struct ExperimentArgs {
  std::string config;
  int threads = 0;
};

int cmd_experiment(const ExperimentArgs& args) {
  sonic::ExperimentConfig cfg = sonic::parse_experiment_config(args.config);
  cfg.threads = sonic::resolve_threads(args.threads);
  const sonic::ExperimentResult result = sonic::run_experiment(cfg);
  sonic::write_experiment_csvs(result, cfg.out_dir);
  int failures = 0;
  for (const auto& scenario : result.scenarios)
    for (const auto& ko : scenario.per_k)
      for (const auto& rep : ko.reps)
        if (!rep.error.empty()) ++failures;
  std::cout << "experiment tables written to " << cfg.out_dir;
  if (failures > 0) std::cout << " (" << failures << " failed replications recorded)";
  std::cout << "\n";
  return 0;
}

struct EvalArgs {
  std::string model, truth, out;
};

int cmd_eval(const EvalArgs& args) {
  const sonic::SonicModel model = sonic::read_model_json(args.model);
  const sonic::GroundTruth truth = sonic::read_truth_json(args.truth);
  const sonic::EvalResult eval = sonic::align_and_score(model, truth);
  Json j;
  j["relative_frobenius"] = eval.relative_frobenius;
  j["clustering_distance"] = eval.clustering_distance;
  j["support_exact"] = eval.support_exact;
  j["aligned_permutation"] = eval.aligned_permutation;
  if (args.out.empty())
    std::cout << j.dump(2) << "\n";
  else
    write_json_file(j, args.out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SONIC network autoregression toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(SONIC_VERSION));

  SimulateArgs sim;
  CLI::App* simulate = app.add_subcommand("simulate", "generate a planted panel");
  simulate->add_option("--n", sim.n, "network size");
  simulate->add_option("--k", sim.k, "number of clusters");
  simulate->add_option("--s", sim.s, "influencers per cluster");
  simulate->add_option("--coef", sim.coef, "signal magnitude");
  simulate->add_option("--t", sim.t, "sample length");
  simulate->add_option("--p", sim.p, "observation probability (scalar or N comma-separated)");
  simulate->add_option("--trunc-order", sim.trunc_order, "moving-average truncation");
  simulate->add_option("--seed", sim.seed, "master seed");
  simulate->add_option("--out", sim.out, "panel CSV path")->required();
  simulate->add_option("--truth-out", sim.truth_out, "ground-truth JSON path");

  EstimateArgs est;
  CLI::App* estimate = app.add_subcommand("estimate", "fit a model to a panel CSV");
  estimate->add_option("--input", est.input, "panel CSV path")->required();
  estimate->add_option("--k", est.k, "number of clusters")->required();
  estimate->add_option("--lambda", est.lambda, "regularization (number or 'auto')");
  estimate->add_option("--restarts", est.restarts, "number of restarts");
  estimate->add_option("--max-outer", est.max_outer, "outer iteration cap");
  estimate->add_option("--moves-per-update", est.moves_per_update,
                       "greedy moves per clustering update (0 = full sweep)");
  estimate->add_option("--seed", est.seed, "master seed");
  estimate->add_flag("--no-psd-project", est.no_psd_project, "skip the PSD projection of the covariance");
  estimate->add_flag("--zeros-are-missing", est.zeros_are_missing,
                     "treat observed zeros in the CSV as missing entries");
  estimate->add_option("--threads", est.threads, "worker threads (0 = all cores)");
  estimate->add_option("--out", est.out, "model JSON path")->required();

  StabilityArgs stab;
  CLI::App* stability = app.add_subcommand("stability", "clustering stability across windows");
  stability->add_option("--input", stab.input, "panel CSV path")->required();
  stability->add_option("--k-min", stab.k_min, "smallest K");
  stability->add_option("--k-max", stab.k_max, "largest K");
  stability->add_option("--lambda-policy", stab.lambda_policy, "'auto' (per-window heuristic) or 'fixed'");
  stability->add_option("--lambda", stab.lambda, "lambda value for the fixed policy");
  stability->add_option("--seed", stab.seed, "master seed");
  stability->add_option("--threads", stab.threads, "worker threads (0 = all cores)");
  stability->add_option("--out", stab.out, "report CSV path")->required();

  BenchmarkArgs bench;
  CLI::App* benchmark = app.add_subcommand("benchmark", "prediction-error comparison of methods");
  benchmark->add_option("--input", bench.input, "panel CSV path")->required();
  benchmark->add_option("--split", bench.split, "train fraction of the chronological split");
  benchmark->add_option("--k", bench.k, "number of clusters")->required();
  benchmark->add_option("--lambda", bench.lambda, "regularization (number or 'auto')");
  benchmark->add_option("--seed", bench.seed, "master seed");
  benchmark->add_option("--threads", bench.threads, "worker threads (0 = all cores)");
  benchmark->add_option("--out", bench.out, "result JSON path")->required();

  ExperimentArgs exp;
  CLI::App* experiment = app.add_subcommand("experiment", "run a simulation-study grid");
  experiment->add_option("--config", exp.config, "experiment config file");
  experiment->add_option("--threads", exp.threads, "worker threads (0 = all cores)");
  bool print_schema = false;
  experiment->add_flag("--print-schema", print_schema, "print the config schema and exit");

  EvalArgs eval;
  CLI::App* eval_cmd = app.add_subcommand("eval", "score a model JSON against a truth JSON");
  eval_cmd->add_option("--model", eval.model, "model JSON path")->required();
  eval_cmd->add_option("--truth", eval.truth, "truth JSON path")->required();
  eval_cmd->add_option("--out", eval.out, "result JSON path (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (simulate->parsed()) return cmd_simulate(sim);
    if (estimate->parsed()) return cmd_estimate(est);
    if (stability->parsed()) return cmd_stability(stab);
    if (benchmark->parsed()) return cmd_benchmark(bench);
    if (experiment->parsed()) {
      if (print_schema) {
        std::cout << sonic::experiment_schema();
        return 0;
      }
      if (exp.config.empty()) {
        std::cerr << "error: experiment needs --config (or --print-schema)\n";
        return 2;
      }
      return cmd_experiment(exp);
    }
    if (eval_cmd->parsed()) return cmd_eval(eval);
  } catch (const sonic::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const sonic::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
