#pragma once

// Implementations behind the command-line subcommands. Each command takes a
// plain options struct, writes its files under `out_dir` and returns the list
// of paths written. Errors propagate as exceptions; exit_code() maps them.

#include <cstdint>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sociallearn/errors.hpp"
#include "sociallearn/experiment.hpp"
#include "sociallearn/forward.hpp"
#include "sociallearn/graph.hpp"
#include "sociallearn/graph_io.hpp"
#include "sociallearn/inverse.hpp"
#include "sociallearn/reports.hpp"
#include "sociallearn/trace_io.hpp"

namespace sociallearn {

inline constexpr const char* kOutputDirEnv = "SOCIALLEARN_OUT";

enum ExitCode : int {
  kExitOk = 0,
  kExitOther = 1,
  kExitConfig = 2,
  kExitData = 3,
  kExitNumerical = 4,
  kExitGeneration = 5,
};

/// Maps the exception currently being handled to an exit code.
inline int exit_code(const std::exception_ptr& e) {
  try {
    std::rethrow_exception(e);
  } catch (const ConfigError&) {
    return kExitConfig;
  } catch (const std::invalid_argument&) {
    return kExitConfig;
  } catch (const DataError&) {
    return kExitData;
  } catch (const NumericalError&) {
    return kExitNumerical;
  } catch (const AssumptionViolation&) {
    return kExitNumerical;
  } catch (const GenerationError&) {
    return kExitGeneration;
  } catch (...) {
    return kExitOther;
  }
}

/// Flag, then config document, then $SOCIALLEARN_OUT, then ".".
inline std::filesystem::path output_directory(const std::string& flag, const std::string& from_config = {}) {
  if (!flag.empty()) return flag;
  if (!from_config.empty()) return from_config;
  if (const char* env = std::getenv(kOutputDirEnv); env && *env) return env;
  return ".";
}

/// Command-line overrides applied to a configuration document before parsing,
/// so they are part of the config hash.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trials;
  std::optional<double> delta;
  std::optional<std::size_t> iterations;
  std::optional<std::size_t> batch;
  std::optional<double> step;
  std::optional<double> tol;
  std::optional<std::size_t> max_iter;
  std::optional<std::size_t> threads;
};

inline void apply_overrides(nlohmann::json& doc, const Overrides& o) {
  if (o.seed) doc["seed"] = *o.seed;
  if (o.trials) doc["trials"] = *o.trials;
  if (o.delta) doc["delta"] = *o.delta;
  if (o.iterations) doc["iterations"] = *o.iterations;
  if (o.batch) doc["inverse"]["batch"] = *o.batch;
  if (o.step) doc["inverse"]["step"] = *o.step;
  if (o.tol) doc["inverse"]["tol"] = *o.tol;
  if (o.max_iter) doc["inverse"]["max_iter"] = *o.max_iter;
  if (o.threads) doc["threads"] = *o.threads;
}

inline ExperimentConfig load_config_with_overrides(const std::string& path, const Overrides& o) {
  auto doc = load_config_document(path);
  apply_overrides(doc, o);
  return parse_experiment_config(doc, std::filesystem::path(path).parent_path());
}

namespace detail {

inline std::filesystem::path prepare_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory '" + dir.string() + "': " + ec.message());
  return dir;
}

inline void write_json_file(const std::filesystem::path& path, const nlohmann::json& j) {
  auto os = open_output(path.string());
  os << j.dump(2) << '\n';
}

inline bool has_extension(const std::string& path, const std::string& ext) {
  return path.size() >= ext.size() && path.compare(path.size() - ext.size(), ext.size(), ext) == 0;
}

}  // namespace detail

// ---------------------------------------------------------------- generate-graph

struct GenerateGraphOptions {
  std::size_t n = 10;
  double p = 0.2;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir = ".";
};

inline std::vector<std::filesystem::path> cmd_generate_graph(const GenerateGraphOptions& o, std::ostream& log) {
  const nlohmann::json params{{"command", "generate-graph"}, {"n", o.n}, {"p", o.p}, {"seed", o.seed}};
  const std::string hash = config_hash(params);
  const CombinationMatrix a = generate_erdos_renyi(o.n, o.p, o.seed);
  const PerronVector perron = perron_vector(a);
  const auto dir = detail::prepare_dir(o.out_dir);

  const auto csv = dir / "combination.csv";
  {
    auto os = detail::open_output(csv.string());
    os << "# config_hash=" << hash << " seed=" << o.seed << '\n';
    write_combination_csv(os, a);
  }
  const auto json = dir / "combination.json";
  auto doc = combination_to_json(a);
  doc["config_hash"] = hash;
  doc["seed"] = o.seed;
  detail::write_json_file(json, doc);

  const auto report = dir / "graph_report.json";
  std::vector<std::size_t> degrees;
  for (std::size_t k = 0; k < a.size(); ++k) degrees.push_back(a.in_degree(k));
  std::vector<double> pv(perron.entries.data(), perron.entries.data() + perron.entries.size());
  detail::write_json_file(report, {{"config_hash", hash},
                                   {"seed", o.seed},
                                   {"n", o.n},
                                   {"p", o.p},
                                   {"strongly_connected", is_strongly_connected(a)},
                                   {"in_degree", degrees},
                                   {"central_agent", most_central_agent(a)},
                                   {"perron_vector", pv}});
  log << "generated " << o.n << "-agent graph (p=" << o.p << ", seed=" << o.seed << "), central agent "
      << most_central_agent(a) << '\n';
  return {csv, json, report};
}

// ---------------------------------------------------------------- simulate

struct SimulateOptions {
  std::string config;
  Overrides overrides;
  std::string out_flag;
};

inline nlohmann::json ground_truth_json(const Scenario& s, const std::string& hash, std::uint64_t seed) {
  return {{"config_hash", hash},
          {"seed", seed},
          {"combination", detail::matrix_to_json(s.combination.weights())},
          {"expected_log_ratio", detail::matrix_to_json(s.expected_log_ratio)},
          {"true_states", s.states},
          {"majority", s.majority},
          {"malicious", s.malicious}};
}

/// Simulates trial 0 of the configuration: the same graph and observation
/// stream the experiment command uses for its first trial.
inline std::vector<std::filesystem::path> cmd_simulate(const SimulateOptions& o, std::ostream& log) {
  const ExperimentConfig c = load_config_with_overrides(o.config, o.overrides);
  const std::string hash = c.hash();
  const std::uint64_t trial_seed = derive_seed(c.seed, 0);
  const Scenario s = build_scenario(c, trial_seed);
  RecordOptions record;
  record.observations = false;
  const SimulationTrace trace =
      run_simulation(s.combination, c.models.models, s.states, c.delta, c.iterations, derive_seed(trial_seed, 2), record);

  const auto dir = detail::prepare_dir(output_directory(o.out_flag, c.output_dir));
  const TraceMetadata meta{hash, c.seed, c.delta};
  const auto csv = dir / "trace.csv";
  {
    auto os = detail::open_output(csv.string());
    write_trace_csv(os, trace, meta);
  }
  const auto stream = dir / "beliefs.jsonl";
  {
    auto os = detail::open_output(stream.string());
    write_belief_stream(os, trace, meta);
  }
  const auto matrices = dir / "matrices.json";
  detail::write_json_file(matrices, trace_matrices_to_json(trace, meta));
  const auto truth = dir / "truth.json";
  detail::write_json_file(truth, ground_truth_json(s, hash, c.seed));

  if (trace.empty()) {
    log << "0 iterations simulated\n";
  } else {
    const std::size_t window = std::min(c.accuracy_window, trace.size());
    std::size_t hits = 0;
    for (std::size_t t = trace.size() - window; t < trace.size(); ++t) {
      for (std::size_t k = 0; k < trace.num_agents; ++k) hits += trace.estimates[t][k].index == s.states[k] ? 1 : 0;
    }
    log << "final argmax:";
    for (const auto& e : trace.estimates.back()) log << ' ' << e.index << (e.tie ? "*" : "");
    log << "\nlearning accuracy (last " << window << " iterations): "
        << static_cast<double>(hits) / static_cast<double>(window * trace.num_agents) << '\n';
  }
  return {csv, stream, matrices, truth};
}

// ---------------------------------------------------------------- invert

struct InvertOptions {
  std::string trace;                 // beliefs.jsonl or trace.csv
  std::string truth;                 // optional truth.json from simulate
  std::string config;                // optional; supplies inverse settings
  Overrides overrides;
  std::vector<std::size_t> majority; // optional majority states
  std::string out_flag;
};

inline std::vector<std::filesystem::path> cmd_invert(const InvertOptions& o, std::ostream& log) {
  InverseConfig cfg;
  std::string hash;
  std::uint64_t seed = 0;
  std::string config_out;
  std::optional<double> config_delta;
  if (!o.config.empty()) {
    const ExperimentConfig c = load_config_with_overrides(o.config, o.overrides);
    cfg = c.inverse;
    config_delta = c.delta;
    hash = c.hash();
    seed = c.seed;
    config_out = c.output_dir;
  } else {
    nlohmann::json params{{"command", "invert"}, {"trace", o.trace}};
    apply_overrides(params, o.overrides);
    hash = config_hash(params);
    if (o.overrides.seed) seed = *o.overrides.seed;
  }
  if (o.overrides.batch) cfg.batch = *o.overrides.batch;
  if (o.overrides.step) cfg.step = *o.overrides.step;
  if (o.overrides.tol) cfg.tol = *o.overrides.tol;
  if (o.overrides.max_iter) cfg.max_iter = *o.overrides.max_iter;

  InverseReference reference;
  reference.majority_states = o.majority;
  if (!o.truth.empty()) {
    auto in = detail::open_input(o.truth);
    nlohmann::json t;
    try {
      in >> t;
    } catch (const nlohmann::json::exception& e) {
      throw DataError("cannot parse '" + o.truth + "': " + e.what());
    }
    if (t.contains("combination")) reference.combination = detail::matrix_from_json(t.at("combination"));
    if (t.contains("expected_log_ratio")) {
      reference.expected_log_ratio = detail::matrix_from_json(t.at("expected_log_ratio"));
    }
    if (reference.majority_states.empty() && t.contains("majority")) {
      reference.majority_states.push_back(t.at("majority").get<std::size_t>());
    }
  }

  std::optional<InverseRunner> runner;
  std::size_t records = 0;
  auto start = [&](std::size_t n, std::size_t hyps, std::optional<double> stream_delta) {
    if (o.overrides.delta) {
      cfg.delta = *o.overrides.delta;
    } else if (stream_delta) {
      cfg.delta = *stream_delta;
    } else if (config_delta) {
      cfg.delta = *config_delta;
    }
    try {
      cfg.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    runner.emplace(n, hyps, cfg, reference);
  };

  if (detail::has_extension(o.trace, ".csv")) {
    auto in = detail::open_input(o.trace);
    TraceMetadata meta;
    const SimulationTrace trace = read_trace_csv(in, &meta);
    if (o.config.empty()) seed = meta.seed;
    start(trace.num_agents, trace.num_hypotheses, trace.delta);
    for (const auto& psi : trace.public_beliefs) {
      ++records;
      if (!runner->consume_public_beliefs(psi)) break;
    }
  } else {
    auto in = detail::open_input(o.trace);
    std::optional<double> stream_delta;
    read_belief_stream(
        in,
        [&](const Matrix& psi) {
          if (!runner) start(static_cast<std::size_t>(psi.rows()), static_cast<std::size_t>(psi.cols()), stream_delta);
          ++records;
          return runner->consume_public_beliefs(psi);
        },
        [&](const StreamMetadata& m) { stream_delta = m.delta; });
  }
  if (!runner || records < cfg.warm_up() + 1) {
    throw InsufficientDataError("trace has " + std::to_string(records) + " iterations, at least " +
                                std::to_string(cfg.warm_up() + 1) + " are required (M = " + std::to_string(cfg.batch) +
                                ")");
  }
  InverseResult r = runner->finish();
  if (reference.majority_states.empty()) {
    reference.majority_states = infer_majority_states(r.hypotheses);
    r.hypotheses = estimate_hypothesis_sets(r.informativeness, reference.majority_states);
  }

  const auto dir = detail::prepare_dir(output_directory(o.out_flag, config_out));
  std::vector<std::filesystem::path> written;
  auto write_matrix = [&](const char* name, const Matrix& m, const char* label) {
    const auto path = dir / name;
    auto os = detail::open_output(path.string());
    write_matrix_csv(os, m, label, hash, seed);
    written.push_back(path);
  };
  write_matrix("A_hat.csv", r.combination, "combination-estimate");
  write_matrix("L_hat.csv", r.log_likelihood, "log-likelihood-estimate");
  write_matrix("A_hat_projected.csv", project_left_stochastic(r.combination),
               "combination-estimate-projected (cosmetic: clipped to [0,1], columns renormalized)");
  {
    const auto path = dir / "diagnostics.csv";
    auto os = detail::open_output(path.string());
    write_diagnostics_csv(os, r.diagnostics, hash, seed);
    written.push_back(path);
  }
  auto report = hypothesis_report_json(r.hypotheses, hash, seed);
  report["majority_states"] = reference.majority_states;
  report["consumed"] = r.consumed;
  report["updates"] = r.diagnostics.size();
  report["converged"] = r.converged;
  report["inverse"] = {{"step", cfg.step}, {"batch", cfg.batch}, {"tol", cfg.tol}, {"delta", cfg.delta},
                       {"max_iter", cfg.max_iter}};
  if (reference.combination) report["combination_error"] = (r.combination - *reference.combination).norm();
  if (reference.expected_log_ratio) {
    report["likelihood_error"] = (r.log_likelihood - *reference.expected_log_ratio).norm();
  }
  const auto report_path = dir / "inverse_report.json";
  detail::write_json_file(report_path, report);
  written.push_back(report_path);

  log << "consumed " << r.consumed << " iterations, " << r.diagnostics.size() << " updates"
      << (r.converged ? " (converged)" : "") << "\nflagged agents:";
  bool any = false;
  for (std::size_t k = 0; k < r.hypotheses.malicious.size(); ++k) {
    if (r.hypotheses.malicious[k]) {
      log << ' ' << k;
      any = true;
    }
  }
  log << (any ? "" : " none") << '\n';
  return written;
}

// ---------------------------------------------------------------- bound

struct BoundOptions {
  std::string config;
  Overrides overrides;
  std::vector<std::size_t> batches;  // empty: the config's M
  std::string metrics;               // optional metrics.json from experiment
  std::string out_flag;
};

inline std::vector<std::filesystem::path> cmd_bound(const BoundOptions& o, std::ostream& log) {
  const ExperimentConfig c = load_config_with_overrides(o.config, o.overrides);
  const std::string hash = c.hash();
  const Scenario s = build_scenario(c, derive_seed(c.seed, 0));
  const std::vector<std::size_t> batches = o.batches.empty() ? std::vector<std::size_t>{c.inverse.batch} : o.batches;
  const BoundReport b = compute_bounds(c.models.models, s.truths, batches, c.trace_r_samples, derive_seed(c.seed, 3));

  std::map<std::pair<std::size_t, std::size_t>, double> empirical;
  std::optional<std::size_t> empirical_batch;
  if (!o.metrics.empty()) {
    auto in = detail::open_input(o.metrics);
    nlohmann::json m;
    try {
      in >> m;
    } catch (const nlohmann::json::exception& e) {
      throw DataError("cannot parse '" + o.metrics + "': " + e.what());
    }
    empirical_batch = m.value("batch", std::size_t{0});
    for (const auto& w : m.value("wrong_hypothesis", nlohmann::json::array())) {
      empirical[{w.at("agent").get<std::size_t>(), w.at("hypothesis").get<std::size_t>()}] =
          w.at("frequency").get<double>();
    }
  }

  const auto dir = detail::prepare_dir(output_directory(o.out_flag, c.output_dir));
  nlohmann::json entries = nlohmann::json::array();
  const auto csv_path = dir / "bounds.csv";
  auto csv = detail::open_output(csv_path.string());
  csv << std::setprecision(std::numeric_limits<double>::max_digits10);
  csv << "# bounds config_hash=" << hash << " seed=" << c.seed << " trace_r=" << b.trace_r
      << " residual=" << kBoundResidualOrders << '\n';
  csv << "agent,hypothesis,batch,bound,empirical_frequency\n";
  for (const auto& e : b.entries) {
    nlohmann::json row{{"agent", e.agent}, {"hypothesis", e.wrong}, {"batch", e.batch}, {"bound", e.value}};
    csv << e.agent << ',' << e.wrong << ',' << e.batch << ',' << e.value << ',';
    const auto it = empirical.find({e.agent, e.wrong});
    if (it != empirical.end() && empirical_batch && *empirical_batch == e.batch) {
      row["empirical_frequency"] = it->second;
      csv << it->second;
    }
    csv << '\n';
    entries.push_back(std::move(row));
  }
  const auto json_path = dir / "bounds.json";
  detail::write_json_file(json_path, {{"config_hash", hash},
                                      {"seed", c.seed},
                                      {"trace_r", b.trace_r},
                                      {"residual_orders", kBoundResidualOrders},
                                      {"entries", std::move(entries)},
                                      {"notes", b.notes}});
  log << "Tr(R) = " << b.trace_r << ", " << b.entries.size() << " bound entries";
  if (!b.notes.empty()) log << ", " << b.notes.size() << " skipped (in optimal set)";
  log << '\n';
  return {csv_path, json_path};
}

// ---------------------------------------------------------------- experiment

struct ExperimentOptions {
  std::string config;
  Overrides overrides;
  std::string out_flag;
};

inline std::vector<std::filesystem::path> cmd_experiment(const ExperimentOptions& o, std::ostream& log,
                                                         MetricsReport* report_out = nullptr) {
  const ExperimentConfig c = load_config_with_overrides(o.config, o.overrides);
  MetricsReport r = run_experiment(c);
  const auto dir = detail::prepare_dir(output_directory(o.out_flag, c.output_dir));
  const auto json_path = dir / "metrics.json";
  detail::write_json_file(json_path, metrics_json(r));
  const auto csv_path = dir / "metrics.csv";
  {
    auto os = detail::open_output(csv_path.string());
    write_metrics_csv(os, r);
  }
  const auto& d = r.aggregate.at("detection_accuracy");
  const auto& l = r.aggregate.at("learning_accuracy");
  log << r.succeeded() << "/" << r.per_trial.size() << " trials succeeded\n"
      << "learning accuracy " << l.mean << " +/- " << l.standard_error << '\n'
      << "detection accuracy " << d.mean << " +/- " << d.standard_error << '\n';
  if (report_out) *report_out = std::move(r);
  return {json_path, csv_path};
}

}  // namespace sociallearn
