#pragma once

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "sonic/errors.hpp"
#include "sonic/panel.hpp"
#include "sonic/version.hpp"

namespace sonic {

using Json = nlohmann::ordered_json;

// Shortest representation that parses back to the identical double.
inline std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s) {
  double out = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw IoError("cannot parse number '" + s + "'");
  return out;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(field);
      field.clear();
    } else if (ch != '\r') {
      field += ch;
    }
  }
  fields.push_back(field);
  return fields;
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  return out;
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return in;
}

}  // namespace detail

// Panel CSV: header row of node ids, one row per time point, missing entries
// written as empty fields.
inline void write_panel_csv(const Panel& panel, const std::string& path) {
  std::ofstream out = detail::open_output(path);
  for (std::size_t i = 0; i < panel.node_ids.size(); ++i) {
    if (i > 0) out << ',';
    out << panel.node_ids[i];
  }
  out << '\n';
  for (Index t = 0; t < panel.t(); ++t) {
    for (Index i = 0; i < panel.n(); ++i) {
      if (i > 0) out << ',';
      if (panel.mask(t, i)) out << format_double(panel.values(t, i));
    }
    out << '\n';
  }
  if (!out) throw IoError("failed while writing '" + path + "'");
}

// zeros_are_missing reinterprets observed literal zeros as missing entries,
// for files produced by tools that mark absence with 0.
inline Panel read_panel_csv(const std::string& path, bool zeros_are_missing = false) {
  std::ifstream in = detail::open_input(path);
  std::string line;
  if (!std::getline(in, line)) throw IoError("'" + path + "': empty file");
  const std::vector<std::string> ids = detail::split_csv_line(line);
  const Index n = static_cast<Index>(ids.size());
  std::vector<double> data;
  std::vector<bool> observed;
  Index t = 0;
  while (std::getline(in, line)) {
    if (line.empty() && in.peek() == EOF) break;
    const std::vector<std::string> fields = detail::split_csv_line(line);
    if (static_cast<Index>(fields.size()) != n)
      throw IoError("'" + path + "': row " + std::to_string(t + 2) + " has " +
                    std::to_string(fields.size()) + " fields, expected " + std::to_string(n));
    for (const std::string& f : fields) {
      if (f.empty()) {
        data.push_back(0.0);
        observed.push_back(false);
      } else {
        const double x = parse_double(f);
        const bool missing = zeros_are_missing && x == 0.0;
        data.push_back(missing ? 0.0 : x);
        observed.push_back(!missing);
      }
    }
    ++t;
  }
  Matrix values(t, n);
  BoolMatrix mask(t, n);
  for (Index r = 0; r < t; ++r)
    for (Index i = 0; i < n; ++i) {
      values(r, i) = data[static_cast<std::size_t>(r * n + i)];
      mask(r, i) = observed[static_cast<std::size_t>(r * n + i)];
    }
  try {
    return Panel(std::move(values), std::move(mask), ids);
  } catch (const Error& e) {
    throw IoError("'" + path + "': " + e.what());
  }
}

// V stored as sparse (row, col, value) triplets; columns are s-sparse so the
// dense matrix would be mostly zeros. theta is recoverable from the labels
// and triplets via theta_from_factors.
inline Json model_to_json(const SonicModel& model, const std::vector<std::string>& node_ids,
                          const Json& provenance) {
  Json j;
  j["n"] = model.clustering.n();
  j["k"] = model.clustering.k;
  j["lambda"] = model.lambda;
  j["risk"] = model.risk;
  j["iterations"] = model.iterations;
  j["restarts_used"] = model.restarts_used;
  j["labels"] = std::vector<int>(model.clustering.labels.data(),
                                 model.clustering.labels.data() + model.clustering.labels.size());
  j["node_ids"] = node_ids;
  Json triplets = Json::array();
  for (Index col = 0; col < model.v.cols(); ++col)
    for (Index row = 0; row < model.v.rows(); ++row)
      if (model.v(row, col) != 0.0) triplets.push_back({row, col, model.v(row, col)});
  j["v"] = {{"rows", model.v.rows()}, {"cols", model.v.cols()}, {"triplets", std::move(triplets)}};
  if (!provenance.is_null()) j["provenance"] = provenance;
  return j;
}

inline void write_model_json(const SonicModel& model, const std::vector<std::string>& node_ids,
                             const Json& provenance, const std::string& path) {
  std::ofstream out = detail::open_output(path);
  out << model_to_json(model, node_ids, provenance).dump(2) << '\n';
  if (!out) throw IoError("failed while writing '" + path + "'");
}

inline SonicModel model_from_json(const Json& j) {
  SonicModel model;
  const Index n = j.at("n").get<Index>();
  const int k = j.at("k").get<int>();
  IntVector labels(n);
  const auto& jl = j.at("labels");
  if (static_cast<Index>(jl.size()) != n) throw IoError("model: labels length differs from n");
  for (Index i = 0; i < n; ++i) labels[i] = jl.at(static_cast<std::size_t>(i)).get<int>();
  model.clustering = Clustering(std::move(labels), k);
  model.v = Matrix::Zero(j.at("v").at("rows").get<Index>(), j.at("v").at("cols").get<Index>());
  for (const auto& t : j.at("v").at("triplets"))
    model.v(t.at(0).get<Index>(), t.at(1).get<Index>()) = t.at(2).get<double>();
  model.lambda = j.at("lambda").get<double>();
  model.risk = j.at("risk").get<double>();
  model.iterations = j.at("iterations").get<int>();
  model.restarts_used = j.at("restarts_used").get<int>();
  return model;
}

inline SonicModel read_model_json(const std::string& path) {
  std::ifstream in = detail::open_input(path);
  Json j;
  try {
    in >> j;
    return model_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("'" + path + "': " + e.what());
  }
}

inline Json truth_to_json(const GroundTruth& truth) {
  Json j;
  j["n"] = truth.clustering.n();
  j["k"] = truth.clustering.k;
  j["labels"] = std::vector<int>(truth.clustering.labels.data(),
                                 truth.clustering.labels.data() + truth.clustering.labels.size());
  Json triplets = Json::array();
  for (Index col = 0; col < truth.v_star.cols(); ++col)
    for (Index row = 0; row < truth.v_star.rows(); ++row)
      if (truth.v_star(row, col) != 0.0) triplets.push_back({row, col, truth.v_star(row, col)});
  j["v"] = {{"rows", truth.v_star.rows()}, {"cols", truth.v_star.cols()}, {"triplets", std::move(triplets)}};
  return j;
}

inline void write_truth_json(const GroundTruth& truth, const std::string& path) {
  std::ofstream out = detail::open_output(path);
  out << truth_to_json(truth).dump(2) << '\n';
  if (!out) throw IoError("failed while writing '" + path + "'");
}

inline GroundTruth read_truth_json(const std::string& path) {
  std::ifstream in = detail::open_input(path);
  Json j;
  try {
    in >> j;
    GroundTruth truth;
    const Index n = j.at("n").get<Index>();
    const int k = j.at("k").get<int>();
    IntVector labels(n);
    const auto& jl = j.at("labels");
    if (static_cast<Index>(jl.size()) != n) throw IoError("truth: labels length differs from n");
    for (Index i = 0; i < n; ++i) labels[i] = jl.at(static_cast<std::size_t>(i)).get<int>();
    truth.clustering = Clustering(std::move(labels), k);
    truth.v_star = Matrix::Zero(j.at("v").at("rows").get<Index>(), j.at("v").at("cols").get<Index>());
    for (const auto& t : j.at("v").at("triplets"))
      truth.v_star(t.at(0).get<Index>(), t.at(1).get<Index>()) = t.at(2).get<double>();
    truth.theta_star = theta_from_factors(truth.clustering, truth.v_star);
    return truth;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("'" + path + "': " + e.what());
  }
}

}  // namespace sonic
