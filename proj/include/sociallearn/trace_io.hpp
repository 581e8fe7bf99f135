#pragma once

// Trace persistence.
//
// CSV long format, one row per (iteration, agent, hypothesis):
//
//   # sociallearn-trace config_hash=<hex> seed=<u64> delta=<real> n=<n> H=<H> iterations=<T>
//   iteration,agent,hypothesis,psi,mu_argmax,tie_flag
//   1,0,0,0.52,0,0
//
// Matrices (Lambda and realized likelihood ratios) go to a JSON document with
// the same metadata. The streaming format is JSON lines: an optional first
// record {"meta": {"delta": .., "n": .., "H": ..}} followed by one record per
// iteration {"iteration": i, "psi": [[...], ...]}.

#include <cstdint>
#include <functional>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sociallearn/errors.hpp"
#include "sociallearn/forward.hpp"
#include "sociallearn/graph_io.hpp"

namespace sociallearn {

struct TraceMetadata {
  std::string config_hash;
  std::uint64_t seed = 0;
  double delta = 0.0;
};

namespace detail {

/// Parses `key=value` tokens from a metadata comment line.
inline std::map<std::string, std::string> parse_key_values(const std::string& line) {
  std::map<std::string, std::string> kv;
  std::istringstream ss(line);
  std::string token;
  while (ss >> token) {
    const auto eq = token.find('=');
    if (eq != std::string::npos) kv[token.substr(0, eq)] = token.substr(eq + 1);
  }
  return kv;
}

}  // namespace detail

inline void write_trace_csv(std::ostream& os, const SimulationTrace& trace, const TraceMetadata& meta) {
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  os << "# sociallearn-trace config_hash=" << meta.config_hash << " seed=" << meta.seed
     << " delta=" << meta.delta << " n=" << trace.num_agents << " H=" << trace.num_hypotheses
     << " iterations=" << trace.size() << '\n';
  os << "iteration,agent,hypothesis,psi,mu_argmax,tie_flag\n";
  if (!trace.empty() && trace.public_beliefs.size() != trace.size()) {
    throw std::invalid_argument("write_trace_csv: trace was recorded without public beliefs");
  }
  for (std::size_t t = 0; t < trace.size(); ++t) {
    for (std::size_t k = 0; k < trace.num_agents; ++k) {
      const auto& est = trace.estimates[t][k];
      for (std::size_t h = 0; h < trace.num_hypotheses; ++h) {
        os << t + 1 << ',' << k << ',' << h << ','
           << trace.public_beliefs[t](static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(h)) << ','
           << est.index << ',' << (est.tie ? 1 : 0) << '\n';
      }
    }
  }
}

/// Reads a CSV trace back (public beliefs and argmax estimates).
inline SimulationTrace read_trace_csv(std::istream& is, TraceMetadata* meta = nullptr) {
  SimulationTrace trace;
  std::string line;
  bool have_meta = false;
  bool have_columns = false;
  std::size_t declared = 0;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (line.find("sociallearn-trace") == std::string::npos) continue;
      const auto kv = detail::parse_key_values(line);
      try {
        trace.num_agents = std::stoul(kv.at("n"));
        trace.num_hypotheses = std::stoul(kv.at("H"));
        trace.delta = std::stod(kv.at("delta"));
        trace.seed = std::stoull(kv.at("seed"));
        declared = std::stoul(kv.at("iterations"));
      } catch (const std::exception&) {
        throw DataError("malformed trace metadata line: " + line);
      }
      if (meta) {
        meta->config_hash = kv.count("config_hash") ? kv.at("config_hash") : "";
        meta->seed = trace.seed;
        meta->delta = trace.delta;
      }
      have_meta = true;
      continue;
    }
    if (!have_columns) {
      if (line.rfind("iteration,agent,hypothesis,psi", 0) != 0) throw DataError("unexpected trace CSV header: " + line);
      have_columns = true;
      continue;
    }
    if (!have_meta) throw DataError("trace CSV is missing its metadata line");
    const auto cells = detail::parse_csv_row(line);
    if (cells.size() != 6) throw DataError("trace CSV row must have 6 columns: " + line);
    const auto t = static_cast<std::size_t>(cells[0]);
    const auto k = static_cast<std::size_t>(cells[1]);
    const auto h = static_cast<std::size_t>(cells[2]);
    if (t < 1 || k >= trace.num_agents || h >= trace.num_hypotheses) throw DataError("trace CSV index out of range: " + line);
    while (trace.public_beliefs.size() < t) {
      trace.public_beliefs.push_back(Matrix::Zero(static_cast<Eigen::Index>(trace.num_agents),
                                                  static_cast<Eigen::Index>(trace.num_hypotheses)));
      trace.estimates.emplace_back(trace.num_agents);
    }
    if (trace.public_beliefs.size() != t) throw DataError("trace CSV iterations are not contiguous");
    trace.public_beliefs[t - 1](static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(h)) = cells[3];
    trace.estimates[t - 1][k] = StateEstimate{static_cast<std::size_t>(cells[4]), cells[5] != 0.0};
  }
  if (!have_meta) throw DataError("trace CSV is missing its metadata line");
  if (trace.size() != declared) throw DataError("trace CSV iteration count does not match its metadata");
  return trace;
}

inline nlohmann::json trace_matrices_to_json(const SimulationTrace& trace, const TraceMetadata& meta) {
  nlohmann::json lambdas = nlohmann::json::array();
  nlohmann::json likelihoods = nlohmann::json::array();
  for (const auto& m : trace.lambdas) lambdas.push_back(detail::matrix_to_json(m));
  for (const auto& m : trace.likelihood_ratios) likelihoods.push_back(detail::matrix_to_json(m));
  return {{"config_hash", meta.config_hash}, {"seed", meta.seed},  {"delta", meta.delta},
          {"n", trace.num_agents},           {"H", trace.num_hypotheses}, {"first_iteration", 1},
          {"lambda", std::move(lambdas)},    {"likelihood", std::move(likelihoods)}};
}

struct StreamMetadata {
  std::optional<double> delta;
  std::optional<std::size_t> n;
  std::optional<std::size_t> hypotheses;
};

/// Reads a JSON-lines belief stream, calling `on_record` with each psi matrix
/// in order. Stops early when the callback returns false. Returns the metadata
/// record if the stream carried one.
inline StreamMetadata read_belief_stream(std::istream& is, const std::function<bool(const Matrix&)>& on_record,
                                         const std::function<void(const StreamMetadata&)>& on_meta = {}) {
  StreamMetadata meta;
  std::string line;
  std::size_t line_no = 0;
  std::optional<std::size_t> last_iteration;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError("belief stream line " + std::to_string(line_no) + ": " + e.what());
    }
    if (rec.contains("meta")) {
      const auto& m = rec.at("meta");
      if (m.contains("delta")) meta.delta = m.at("delta").get<double>();
      if (m.contains("n")) meta.n = m.at("n").get<std::size_t>();
      if (m.contains("H")) meta.hypotheses = m.at("H").get<std::size_t>();
      if (on_meta) on_meta(meta);
      continue;
    }
    if (!rec.contains("psi")) throw DataError("belief stream line " + std::to_string(line_no) + " has no 'psi'");
    if (rec.contains("iteration")) {
      const auto it = rec.at("iteration").get<std::size_t>();
      if (last_iteration && it != *last_iteration + 1) {
        throw DataError("belief stream iterations are not contiguous at line " + std::to_string(line_no));
      }
      last_iteration = it;
    }
    if (!on_record(detail::matrix_from_json(rec.at("psi")))) break;
  }
  return meta;
}

inline void write_belief_stream(std::ostream& os, const SimulationTrace& trace, const TraceMetadata& meta = {}) {
  os << nlohmann::json{{"meta",
                        {{"delta", trace.delta},
                         {"n", trace.num_agents},
                         {"H", trace.num_hypotheses},
                         {"config_hash", meta.config_hash},
                         {"seed", meta.seed}}}}
            .dump()
     << '\n';
  for (std::size_t t = 0; t < trace.public_beliefs.size(); ++t) {
    os << nlohmann::json{{"iteration", t + 1}, {"psi", detail::matrix_to_json(trace.public_beliefs[t])}}.dump() << '\n';
  }
}

}  // namespace sociallearn
