#pragma once

// Model specification files (JSON).
//
//   {
//     "hypotheses": ["bus", "car"],                 // optional, default theta0..
//     "agents": [
//       {"family": "categorical", "pmfs": [[0.8, 0.2], [0.2, 0.8]], "true_state": 0},
//       {"family": "gaussian", "means": [0.0, 1.0], "variance": 1.0, "true_state": "car"}
//     ]
//   }
//
// Instead of "agents", a homogeneous network may be written as
//   {"n_agents": 10, "shared": {<agent entry>}}
// in which case every agent receives a copy of the shared entry. "true_state"
// accepts an index or a hypothesis label and may be omitted when the
// experiment configuration assigns truths.

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sociallearn/errors.hpp"
#include "sociallearn/graph_io.hpp"
#include "sociallearn/models.hpp"

namespace sociallearn {

struct ModelSpec {
  HypothesisSpace hypotheses = HypothesisSpace::indexed(2);
  std::vector<LikelihoodModel> models;
  std::vector<std::optional<std::size_t>> true_states;
};

namespace detail {

inline std::size_t hypothesis_ref(const nlohmann::json& v, const HypothesisSpace& hyps) {
  if (v.is_string()) {
    try {
      return hyps.index_of(v.get<std::string>());
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  if (v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0)) {
    const auto idx = v.get<std::size_t>();
    if (idx >= hyps.size()) throw ConfigError("hypothesis index " + std::to_string(idx) + " out of range");
    return idx;
  }
  throw ConfigError("hypothesis reference must be a label or a non-negative index");
}

inline LikelihoodModel model_from_json(const nlohmann::json& e, std::size_t agent) {
  try {
    const auto family = e.at("family").get<std::string>();
    if (family == "categorical") return LikelihoodModel::categorical(agent, matrix_from_json(e.at("pmfs")));
    if (family == "gaussian") {
      const auto means = e.at("means").get<std::vector<double>>();
      return LikelihoodModel::gaussian(agent, Eigen::Map<const Vector>(means.data(), static_cast<Eigen::Index>(means.size())),
                                       e.at("variance").get<double>());
    }
    throw ConfigError("agent " + std::to_string(agent) + ": unknown family '" + family + "'");
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError("agent " + std::to_string(agent) + ": " + ex.what());
  } catch (const DataError& ex) {
    throw ConfigError("agent " + std::to_string(agent) + ": " + ex.what());
  } catch (const std::invalid_argument& ex) {
    throw ConfigError(ex.what());
  }
}

inline nlohmann::json model_to_json(const LikelihoodModel& m) {
  if (m.family() == Family::categorical) {
    return {{"family", "categorical"}, {"pmfs", matrix_to_json(m.categorical_params().pmfs)}};
  }
  const auto& g = m.gaussian_params();
  return {{"family", "gaussian"},
          {"means", std::vector<double>(g.means.data(), g.means.data() + g.means.size())},
          {"variance", g.variance}};
}

}  // namespace detail

inline ModelSpec model_spec_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("model specification must be a JSON object");
  std::vector<nlohmann::json> entries;
  if (j.contains("agents")) {
    for (const auto& e : j.at("agents")) entries.push_back(e);
  } else if (j.contains("shared")) {
    if (!j.contains("n_agents")) throw ConfigError("'shared' model specification needs 'n_agents'");
    const auto n = j.at("n_agents").get<std::size_t>();
    entries.assign(n, j.at("shared"));
  } else {
    throw ConfigError("model specification needs 'agents' or 'shared'");
  }
  if (entries.empty()) throw ConfigError("model specification has no agents");

  ModelSpec spec;
  for (std::size_t k = 0; k < entries.size(); ++k) spec.models.push_back(detail::model_from_json(entries[k], k));
  const std::size_t hyps = spec.models.front().num_hypotheses();
  for (const auto& m : spec.models) {
    if (m.num_hypotheses() != hyps) throw ConfigError("all agents must share the same number of hypotheses");
  }
  try {
    spec.hypotheses = j.contains("hypotheses")
                          ? HypothesisSpace(j.at("hypotheses").get<std::vector<std::string>>())
                          : HypothesisSpace::indexed(hyps);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (spec.hypotheses.size() != hyps) throw ConfigError("'hypotheses' length does not match the models");
  for (const auto& e : entries) {
    spec.true_states.push_back(e.contains("true_state")
                                   ? std::optional<std::size_t>(detail::hypothesis_ref(e.at("true_state"), spec.hypotheses))
                                   : std::nullopt);
  }
  return spec;
}

inline nlohmann::json model_spec_to_json(const ModelSpec& spec) {
  nlohmann::json agents = nlohmann::json::array();
  for (std::size_t k = 0; k < spec.models.size(); ++k) {
    auto e = detail::model_to_json(spec.models[k]);
    if (k < spec.true_states.size() && spec.true_states[k]) e["true_state"] = *spec.true_states[k];
    agents.push_back(std::move(e));
  }
  return {{"hypotheses", spec.hypotheses.labels()}, {"agents", std::move(agents)}};
}

inline ModelSpec load_model_spec(const std::string& path) {
  auto in = detail::open_input(path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("cannot parse model specification '" + path + "': " + e.what());
  }
  return model_spec_from_json(j);
}

}  // namespace sociallearn
