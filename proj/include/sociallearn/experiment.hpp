#pragma once

// Experiment orchestration: configuration documents, per-trial scenarios,
// the simulate -> invert -> score loop and metric aggregation.
//
// Configuration (single JSON document, paths relative to the document):
//
//   {
//     "graph":   {"n": 10, "p": 0.2, "seed": 3}      // omit seed: resampled per trial
//                | {"matrix": "graph.csv"},
//     "models":  "models.json" | {<inline model specification>},
//     "truths":  {"majority": 0, "malicious": ["central"], "malicious_state": 1}
//                | {"per_agent": [0, 0, 1, ...]},    // omit: taken from the model file
//     "delta": 0.1, "iterations": 5000, "accuracy_window": 100,
//     "inverse": {"step": 0.02, "batch": 200, "tol": 1e-6, "max_iter": 0},
//     "trials": 50, "seed": 7, "threads": 0, "trace_r_samples": 20000,
//     "output_dir": "out"
//   }
//
// Trial t runs on seed derive_seed(seed, t); inside a trial the graph is drawn
// from derive_seed(trial_seed, 1) and the simulation from derive_seed(trial_seed, 2).

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <json.hpp>

#include "sociallearn/errors.hpp"
#include "sociallearn/forward.hpp"
#include "sociallearn/graph.hpp"
#include "sociallearn/graph_io.hpp"
#include "sociallearn/inverse.hpp"
#include "sociallearn/model_io.hpp"
#include "sociallearn/models.hpp"
#include "sociallearn/random.hpp"
#include "sociallearn/reports.hpp"

namespace sociallearn {

struct GraphSpec {
  std::size_t n = 0;
  double p = 0.2;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> matrix_path;
};

/// Either "central" or an explicit agent index.
using AgentRef = std::variant<std::string, std::size_t>;

struct TruthSpec {
  std::vector<std::size_t> per_agent;
  std::optional<std::size_t> majority;
  std::vector<AgentRef> malicious;
  std::size_t malicious_state = 1;
};

struct ExperimentConfig {
  nlohmann::json document;  // effective document, hashed into every output
  GraphSpec graph;
  ModelSpec models;
  TruthSpec truths;
  double delta = 0.1;
  std::size_t iterations = 480;
  std::size_t accuracy_window = 100;
  InverseConfig inverse;
  std::size_t trials = 1;
  std::uint64_t seed = 0;
  std::size_t threads = 0;
  std::size_t trace_r_samples = 20000;
  std::string output_dir;

  std::string hash() const { return config_hash(document); }
  std::size_t num_agents() const noexcept { return models.models.size(); }
};

namespace detail {

template <typename T>
T config_value(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

inline std::string resolve_path(const std::string& path, const std::filesystem::path& base) {
  std::filesystem::path p(path);
  if (p.is_relative() && !base.empty()) p = base / p;
  if (!std::filesystem::exists(p)) throw ConfigError("referenced file '" + p.string() + "' does not exist");
  return p.string();
}

}  // namespace detail

inline ExperimentConfig parse_experiment_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
  if (!j.is_object()) throw ConfigError("experiment configuration must be a JSON object");
  ExperimentConfig c;
  c.document = j;

  if (!j.contains("models")) throw ConfigError("configuration needs 'models'");
  const auto& models = j.at("models");
  c.models = models.is_string() ? load_model_spec(detail::resolve_path(models.get<std::string>(), base_dir))
                                : model_spec_from_json(models);

  if (!j.contains("graph")) throw ConfigError("configuration needs 'graph'");
  const auto& g = j.at("graph");
  if (g.contains("matrix")) {
    c.graph.matrix_path = detail::resolve_path(g.at("matrix").get<std::string>(), base_dir);
  } else {
    c.graph.n = detail::config_value<std::size_t>(g, "n", c.num_agents());
    c.graph.p = detail::config_value<double>(g, "p", 0.2);
    if (g.contains("seed")) c.graph.seed = g.at("seed").get<std::uint64_t>();
    if (c.graph.n != c.num_agents()) throw ConfigError("graph 'n' does not match the number of agent models");
    if (!(c.graph.p >= 0.0 && c.graph.p <= 1.0)) throw ConfigError("graph 'p' must lie in [0, 1]");
  }

  if (j.contains("truths")) {
    const auto& t = j.at("truths");
    const auto& hyps = c.models.hypotheses;
    if (t.contains("per_agent")) {
      for (const auto& v : t.at("per_agent")) c.truths.per_agent.push_back(detail::hypothesis_ref(v, hyps));
      if (c.truths.per_agent.size() != c.num_agents()) throw ConfigError("'per_agent' truths must list every agent");
    } else {
      if (!t.contains("majority")) throw ConfigError("truths need 'per_agent' or 'majority'");
      c.truths.majority = detail::hypothesis_ref(t.at("majority"), hyps);
      c.truths.malicious_state = t.contains("malicious_state") ? detail::hypothesis_ref(t.at("malicious_state"), hyps)
                                                               : (*c.truths.majority == 0 ? 1 : 0);
      for (const auto& m : t.value("malicious", nlohmann::json::array())) {
        if (m.is_string()) {
          if (m.get<std::string>() != "central") throw ConfigError("malicious agent must be an index or \"central\"");
          c.truths.malicious.emplace_back(std::string("central"));
        } else {
          const auto idx = m.get<std::size_t>();
          if (idx >= c.num_agents()) throw ConfigError("malicious agent index out of range");
          c.truths.malicious.emplace_back(idx);
        }
      }
    }
  } else {
    for (const auto& s : c.models.true_states) {
      if (!s) throw ConfigError("no 'truths' section and the model file does not give every agent a true_state");
      c.truths.per_agent.push_back(*s);
    }
  }

  c.delta = detail::config_value<double>(j, "delta", 0.1);
  if (!(c.delta > 0.0 && c.delta < 1.0)) throw ConfigError("'delta' must lie in (0, 1)");
  c.iterations = detail::config_value<std::size_t>(j, "iterations", 480);
  c.accuracy_window = detail::config_value<std::size_t>(j, "accuracy_window", 100);
  if (c.accuracy_window < 1) throw ConfigError("'accuracy_window' must be >= 1");
  if (j.contains("inverse")) {
    const auto& inv = j.at("inverse");
    c.inverse.step = detail::config_value<double>(inv, "step", c.inverse.step);
    c.inverse.batch = detail::config_value<std::size_t>(inv, "batch", c.inverse.batch);
    c.inverse.tol = detail::config_value<double>(inv, "tol", c.inverse.tol);
    c.inverse.max_iter = detail::config_value<std::size_t>(inv, "max_iter", c.inverse.max_iter);
  }
  c.inverse.delta = c.delta;
  try {
    c.inverse.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  c.trials = detail::config_value<std::size_t>(j, "trials", 1);
  if (c.trials < 1) throw ConfigError("'trials' must be >= 1");
  c.seed = detail::config_value<std::uint64_t>(j, "seed", 0);
  c.threads = detail::config_value<std::size_t>(j, "threads", 0);
  c.trace_r_samples = detail::config_value<std::size_t>(j, "trace_r_samples", 20000);
  c.output_dir = detail::config_value<std::string>(j, "output_dir", "");
  return c;
}

inline nlohmann::json load_config_document(const std::string& path) {
  if (!std::filesystem::is_regular_file(path)) throw ConfigError("configuration file '" + path + "' does not exist");
  auto in = detail::open_input(path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("cannot parse configuration '" + path + "': " + e.what());
  }
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  return parse_experiment_config(load_config_document(path), std::filesystem::path(path).parent_path());
}

/// Everything one trial needs, fully resolved.
struct Scenario {
  CombinationMatrix combination;
  std::vector<std::size_t> states;
  std::vector<AgentTruth> truths;
  std::size_t majority = 0;
  std::vector<std::size_t> malicious;  // agents whose optimal set misses the majority state
  Matrix expected_log_ratio;
  double trace_r = 0.0;
};

inline CombinationMatrix scenario_graph(const ExperimentConfig& c, std::uint64_t trial_seed) {
  if (c.graph.matrix_path) {
    auto a = load_combination_matrix(*c.graph.matrix_path);
    if (a.size() != c.num_agents()) throw ConfigError("combination matrix size does not match the agent models");
    return a;
  }
  return generate_erdos_renyi(c.graph.n, c.graph.p, c.graph.seed ? *c.graph.seed : derive_seed(trial_seed, 1));
}

inline std::vector<std::size_t> resolve_states(const ExperimentConfig& c, const CombinationMatrix& a) {
  if (!c.truths.per_agent.empty()) return c.truths.per_agent;
  std::vector<std::size_t> states(c.num_agents(), *c.truths.majority);
  for (const auto& ref : c.truths.malicious) {
    const std::size_t k = std::holds_alternative<std::size_t>(ref) ? std::get<std::size_t>(ref) : most_central_agent(a);
    states[k] = c.truths.malicious_state;
  }
  return states;
}

/// Most frequent entry, lowest index on ties.
inline std::size_t majority_state(const std::vector<std::size_t>& states, std::size_t hyps) {
  std::vector<std::size_t> counts(hyps, 0);
  for (auto s : states) ++counts[s];
  return static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

inline Scenario build_scenario(const ExperimentConfig& c, std::uint64_t trial_seed) {
  Scenario s{scenario_graph(c, trial_seed), {}, {}, 0, {}, {}, 0.0};
  s.states = resolve_states(c, s.combination);
  s.truths = make_truths(c.models.models, s.states);
  s.majority = c.truths.majority ? *c.truths.majority : majority_state(s.states, c.models.hypotheses.size());
  for (std::size_t k = 0; k < s.truths.size(); ++k) {
    if (!s.truths[k].in_optimal_set(s.majority)) s.malicious.push_back(k);
  }
  s.expected_log_ratio = expected_log_ratio(c.models.models, s.truths);
  s.trace_r = estimate_trace_r(c.models.models, s.truths, c.trace_r_samples, derive_seed(trial_seed, 3));
  return s;
}

/// Inclusion of a hypothesis outside an agent's optimal set in one trial.
struct WrongInclusion {
  std::size_t agent = 0;
  std::size_t hypothesis = 0;
  bool included = false;
  double bound = 0.0;
};

struct TrialMetrics {
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  double learning_accuracy = 0.0;
  double detection_accuracy = 0.0;
  double exact_recovery = 0.0;
  double combination_error = 0.0;
  double likelihood_error = 0.0;
  double likelihood_error_sq = 0.0;
  double trace_r = 0.0;
  // Fraction of malicious agents whose final argmax is the majority state;
  // NaN when the trial has none.
  double malicious_follow_majority = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::size_t> malicious_agents;
  std::vector<std::vector<std::size_t>> theta_sets;
  std::vector<bool> flags;
  std::vector<WrongInclusion> wrong;
};

inline TrialMetrics run_trial(const ExperimentConfig& c, std::size_t trial) {
  TrialMetrics m;
  m.trial = trial;
  m.seed = derive_seed(c.seed, trial);
  try {
    const Scenario s = build_scenario(c, m.seed);
    const std::size_t n = c.num_agents();
    InverseRunner runner(n, c.models.hypotheses.size(), c.inverse,
                         InverseReference{s.combination.weights(), s.expected_log_ratio, {s.majority}});
    SocialLearningSimulator sim(s.combination, c.models.models, s.states, c.delta, derive_seed(m.seed, 2));
    const std::size_t window_start = c.iterations > c.accuracy_window ? c.iterations - c.accuracy_window : 0;
    std::size_t hits = 0;
    std::size_t counted = 0;
    std::vector<StateEstimate> final_estimates;
    for (std::size_t t = 0; t < c.iterations; ++t) {
      const IterationRecord& r = sim.step();
      if (!runner.done()) runner.consume_lambda(lambda_from_log_beliefs(r.log_public).entries);
      if (t >= window_start) {
        for (std::size_t k = 0; k < n; ++k) hits += r.estimates[k].index == s.states[k] ? 1 : 0;
        counted += n;
      }
      if (t + 1 == c.iterations) final_estimates = r.estimates;
    }
    const InverseResult inv = runner.finish();

    m.learning_accuracy = counted ? static_cast<double>(hits) / static_cast<double>(counted) : 0.0;
    std::size_t detected = 0;
    bool all_exact = true;
    for (std::size_t k = 0; k < n; ++k) {
      const auto& set = inv.hypotheses.sets[k];
      const bool contains_truth = std::find(set.begin(), set.end(), s.states[k]) != set.end();
      const bool flag_truth = std::find(s.malicious.begin(), s.malicious.end(), k) != s.malicious.end();
      if (contains_truth && inv.hypotheses.malicious[k] == flag_truth) ++detected;
      if (set != s.truths[k].optimal_set) all_exact = false;
      for (std::size_t h = 0; h < c.models.hypotheses.size(); ++h) {
        if (s.truths[k].in_optimal_set(h)) continue;
        const double bound = theorem1_bound(c.models.models[k], s.truths[k], h, c.inverse.batch, s.trace_r).value;
        m.wrong.push_back({k, h, std::find(set.begin(), set.end(), h) != set.end(), bound});
      }
    }
    m.detection_accuracy = static_cast<double>(detected) / static_cast<double>(n);
    m.exact_recovery = all_exact ? 1.0 : 0.0;
    m.combination_error = (inv.combination - s.combination.weights()).norm();
    m.likelihood_error_sq = (inv.log_likelihood - s.expected_log_ratio).squaredNorm();
    m.likelihood_error = std::sqrt(m.likelihood_error_sq);
    m.trace_r = s.trace_r;
    m.malicious_agents = s.malicious;
    if (!s.malicious.empty() && !final_estimates.empty()) {
      std::size_t follow = 0;
      for (auto k : s.malicious) follow += final_estimates[k].index == s.majority ? 1 : 0;
      m.malicious_follow_majority = static_cast<double>(follow) / static_cast<double>(s.malicious.size());
    }
    m.theta_sets = inv.hypotheses.sets;
    m.flags = inv.hypotheses.malicious;
    m.ok = true;
  } catch (const std::exception& e) {
    m.ok = false;
    m.error = e.what();
  }
  return m;
}

/// Runs fn(0) .. fn(count-1) on up to `threads` workers (0 = hardware).
template <typename Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn&& fn) {
  if (threads == 0) threads = std::max<std::size_t>(1, std::thread::hardware_concurrency());
  threads = std::min(threads, count);
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) fn(i);
    });
  }
}

struct Summary {
  double mean = 0.0;
  double standard_error = 0.0;
  double min = 0.0;
  double max = 0.0;
  std::size_t count = 0;
};

/// Mean with standard error (sample standard deviation / sqrt(count)); NaN
/// entries are skipped.
inline Summary summarize(const std::vector<double>& values) {
  Summary s;
  double sum = 0.0;
  s.min = std::numeric_limits<double>::infinity();
  s.max = -std::numeric_limits<double>::infinity();
  for (double v : values) {
    if (std::isnan(v)) continue;
    sum += v;
    s.min = std::min(s.min, v);
    s.max = std::max(s.max, v);
    ++s.count;
  }
  if (s.count == 0) return Summary{std::numeric_limits<double>::quiet_NaN(), 0.0, 0.0, 0.0, 0};
  s.mean = sum / static_cast<double>(s.count);
  if (s.count > 1) {
    double ss = 0.0;
    for (double v : values) {
      if (!std::isnan(v)) ss += (v - s.mean) * (v - s.mean);
    }
    s.standard_error = std::sqrt(ss / static_cast<double>(s.count - 1) / static_cast<double>(s.count));
  }
  return s;
}

struct PairFrequency {
  std::size_t agent = 0;
  std::size_t hypothesis = 0;
  std::size_t eligible = 0;  // trials where the hypothesis is wrong for the agent
  std::size_t included = 0;
  double frequency = 0.0;
  double bound = 0.0;  // mean leading-term bound over eligible trials
};

struct MetricsReport {
  std::string config_hash;
  std::uint64_t root_seed = 0;
  std::size_t batch = 0;
  std::vector<TrialMetrics> per_trial;
  std::map<std::string, Summary> aggregate;
  std::vector<PairFrequency> wrong_hypothesis;

  std::size_t succeeded() const {
    return static_cast<std::size_t>(std::count_if(per_trial.begin(), per_trial.end(), [](const auto& t) { return t.ok; }));
  }
};

inline MetricsReport aggregate_trials(std::vector<TrialMetrics> trials, const std::string& hash, std::uint64_t root_seed,
                                      std::size_t batch) {
  MetricsReport r;
  r.config_hash = hash;
  r.root_seed = root_seed;
  r.batch = batch;
  r.per_trial = std::move(trials);
  const std::vector<std::pair<const char*, double TrialMetrics::*>> fields = {
      {"learning_accuracy", &TrialMetrics::learning_accuracy},
      {"detection_accuracy", &TrialMetrics::detection_accuracy},
      {"exact_recovery", &TrialMetrics::exact_recovery},
      {"combination_error", &TrialMetrics::combination_error},
      {"likelihood_error", &TrialMetrics::likelihood_error},
      {"likelihood_error_sq", &TrialMetrics::likelihood_error_sq},
      {"trace_r", &TrialMetrics::trace_r},
      {"malicious_follow_majority", &TrialMetrics::malicious_follow_majority},
  };
  for (const auto& [name, member] : fields) {
    std::vector<double> values;
    for (const auto& t : r.per_trial) {
      if (t.ok) values.push_back(t.*member);
    }
    r.aggregate[name] = summarize(values);
  }
  std::map<std::pair<std::size_t, std::size_t>, PairFrequency> pairs;
  for (const auto& t : r.per_trial) {
    if (!t.ok) continue;
    for (const auto& w : t.wrong) {
      auto& p = pairs[{w.agent, w.hypothesis}];
      p.agent = w.agent;
      p.hypothesis = w.hypothesis;
      ++p.eligible;
      p.included += w.included ? 1 : 0;
      p.bound += w.bound;
    }
  }
  for (auto& [key, p] : pairs) {
    p.frequency = static_cast<double>(p.included) / static_cast<double>(p.eligible);
    p.bound /= static_cast<double>(p.eligible);
    r.wrong_hypothesis.push_back(p);
  }
  return r;
}

/// Runs every trial (in parallel, independent seeds) and aggregates.
inline MetricsReport run_experiment(const ExperimentConfig& c) {
  std::vector<TrialMetrics> trials(c.trials);
  parallel_for(c.trials, c.threads, [&](std::size_t t) { trials[t] = run_trial(c, t); });
  return aggregate_trials(std::move(trials), c.hash(), c.seed, c.inverse.batch);
}

inline nlohmann::json summary_json(const Summary& s) {
  auto number = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  return {{"mean", number(s.mean)}, {"stderr", number(s.standard_error)}, {"min", number(s.min)},
          {"max", number(s.max)},   {"count", s.count}};
}

inline nlohmann::json metrics_json(const MetricsReport& r) {
  auto number = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  nlohmann::json aggregate = nlohmann::json::object();
  for (const auto& [name, s] : r.aggregate) aggregate[name] = summary_json(s);
  nlohmann::json trials = nlohmann::json::array();
  nlohmann::json failures = nlohmann::json::array();
  for (const auto& t : r.per_trial) {
    if (!t.ok) {
      failures.push_back({{"trial", t.trial}, {"seed", t.seed}, {"error", t.error}});
      continue;
    }
    nlohmann::json flags = nlohmann::json::array();
    for (bool f : t.flags) flags.push_back(f);
    trials.push_back({{"trial", t.trial},
                      {"seed", t.seed},
                      {"learning_accuracy", t.learning_accuracy},
                      {"detection_accuracy", t.detection_accuracy},
                      {"exact_recovery", t.exact_recovery},
                      {"combination_error", t.combination_error},
                      {"likelihood_error", t.likelihood_error},
                      {"trace_r", t.trace_r},
                      {"malicious_follow_majority", number(t.malicious_follow_majority)},
                      {"malicious_agents", t.malicious_agents},
                      {"theta_sets", t.theta_sets},
                      {"malicious_flags", flags}});
  }
  nlohmann::json wrong = nlohmann::json::array();
  for (const auto& p : r.wrong_hypothesis) {
    wrong.push_back({{"agent", p.agent},
                     {"hypothesis", p.hypothesis},
                     {"eligible_trials", p.eligible},
                     {"included", p.included},
                     {"frequency", p.frequency},
                     {"bound", p.bound}});
  }
  return {{"config_hash", r.config_hash},
          {"root_seed", r.root_seed},
          {"trials", r.per_trial.size()},
          {"succeeded", r.succeeded()},
          {"batch", r.batch},
          {"bound_residual_orders", kBoundResidualOrders},
          {"aggregate", std::move(aggregate)},
          {"per_trial", std::move(trials)},
          {"failures", std::move(failures)},
          {"wrong_hypothesis", std::move(wrong)}};
}

inline void write_metrics_csv(std::ostream& os, const MetricsReport& r) {
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  os << "# metrics config_hash=" << r.config_hash << " root_seed=" << r.root_seed << '\n';
  os << "trial,seed,ok,learning_accuracy,detection_accuracy,exact_recovery,combination_error,"
        "likelihood_error,malicious_follow_majority\n";
  for (const auto& t : r.per_trial) {
    os << t.trial << ',' << t.seed << ',' << (t.ok ? 1 : 0) << ',' << t.learning_accuracy << ','
       << t.detection_accuracy << ',' << t.exact_recovery << ',' << t.combination_error << ',' << t.likelihood_error
       << ',';
    if (!std::isnan(t.malicious_follow_majority)) os << t.malicious_follow_majority;
    os << '\n';
  }
}

struct BoundReport {
  double trace_r = 0.0;
  std::vector<ErrorBound> entries;
  std::vector<std::string> notes;
};

/// Leading-term bounds for every (agent, hypothesis, M); hypotheses inside an
/// agent's optimal set are skipped with a note.
inline BoundReport compute_bounds(std::span<const LikelihoodModel> models, std::span<const AgentTruth> truths,
                                  std::span<const std::size_t> batches, std::size_t samples, std::uint64_t seed) {
  BoundReport r;
  r.trace_r = estimate_trace_r(models, truths, samples, seed);
  for (auto m : batches) {
    for (std::size_t k = 0; k < models.size(); ++k) {
      for (std::size_t h = 0; h < models[k].num_hypotheses(); ++h) {
        try {
          r.entries.push_back(theorem1_bound(models[k], truths[k], h, m, r.trace_r));
        } catch (const DomainError&) {
          if (m == batches.front()) {
            r.notes.push_back("agent " + std::to_string(k) + ", hypothesis " + std::to_string(h) +
                              ": in the optimal set, bound undefined (skipped)");
          }
        }
      }
    }
  }
  return r;
}

}  // namespace sociallearn
