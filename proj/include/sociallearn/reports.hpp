#pragma once

// Writers for inverse-estimator outputs: estimated matrices (CSV/JSON), the
// hypothesis-set report and the diagnostics time series.

#include <cstdint>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "sociallearn/graph_io.hpp"
#include "sociallearn/inverse.hpp"

namespace sociallearn {

/// FNV-1a over the bytes of `text`, rendered as 16 hex digits.
inline std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

/// Hash of a configuration document; nlohmann::json keeps object keys sorted,
/// so the dump is canonical.
inline std::string config_hash(const nlohmann::json& config) { return fnv1a_hex(config.dump()); }

inline void write_matrix_csv(std::ostream& os, const Matrix& m, const std::string& label,
                             const std::string& hash, std::uint64_t seed) {
  os << "# " << label << " rows=" << m.rows() << " cols=" << m.cols() << " config_hash=" << hash
     << " seed=" << seed << '\n';
  detail::write_matrix_rows(os, m);
}

inline nlohmann::json hypothesis_report_json(const HypothesisEstimate& est, const std::string& hash,
                                             std::uint64_t seed) {
  nlohmann::json agents = nlohmann::json::array();
  for (std::size_t k = 0; k < est.sets.size(); ++k) {
    agents.push_back({{"agent", k},
                      {"theta_set", est.sets[k]},
                      {"malicious_flag", static_cast<bool>(est.malicious[k])},
                      {"positive_counts", est.positive_counts[k]}});
  }
  return {{"config_hash", hash}, {"seed", seed}, {"agents", std::move(agents)}};
}

inline void write_diagnostics_csv(std::ostream& os, const InverseDiagnostics& diag, const std::string& hash,
                                  std::uint64_t seed) {
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  os << "# inverse-diagnostics config_hash=" << hash << " seed=" << seed << '\n';
  const bool with_a = !diag.combination_error.empty();
  const bool with_l = !diag.likelihood_error.empty();
  os << "iteration,step_change";
  if (with_a) os << ",combination_error";
  if (with_l) os << ",likelihood_error";
  os << '\n';
  for (std::size_t u = 0; u < diag.size(); ++u) {
    os << diag.iteration[u] << ',' << diag.step_change[u];
    if (with_a) os << ',' << diag.combination_error[u];
    if (with_l) os << ',' << diag.likelihood_error[u];
    os << '\n';
  }
}

}  // namespace sociallearn
