#pragma once

#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sociallearn/errors.hpp"
#include "sociallearn/graph.hpp"

namespace sociallearn {

namespace detail {

inline std::vector<double> parse_csv_row(const std::string& line) {
  std::vector<double> row;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      std::size_t used = 0;
      row.push_back(std::stod(cell, &used));
      if (cell.find_first_not_of(" \t\r", used) != std::string::npos) throw std::invalid_argument(cell);
    } catch (const std::exception&) {
      throw DataError("malformed numeric CSV cell '" + cell + "'");
    }
  }
  return row;
}

inline void write_matrix_rows(std::ostream& os, const Matrix& m) {
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) os << ',';
      os << m(r, c);
    }
    os << '\n';
  }
}

inline nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Matrix matrix_from_json(const nlohmann::json& rows) {
  if (!rows.is_array()) throw DataError("matrix JSON must be an array of rows");
  const auto n_rows = static_cast<Eigen::Index>(rows.size());
  const auto n_cols = n_rows == 0 ? Eigen::Index{0} : static_cast<Eigen::Index>(rows[0].size());
  Matrix m(n_rows, n_cols);
  for (Eigen::Index r = 0; r < n_rows; ++r) {
    const auto& row = rows[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != n_cols) {
      throw DataError("matrix JSON rows have inconsistent lengths");
    }
    for (Eigen::Index c = 0; c < n_cols; ++c) {
      const auto& v = row[static_cast<std::size_t>(c)];
      if (!v.is_number()) throw DataError("matrix JSON entry is not a number");
      m(r, c) = v.get<double>();
    }
  }
  return m;
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "' for reading");
  return in;
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  return out;
}

}  // namespace detail

/// CSV layout: a `# combination-matrix n=<n>` header line followed by n
/// row-major lines of n comma-separated weights.
inline void write_combination_csv(std::ostream& os, const CombinationMatrix& a) {
  os << "# combination-matrix n=" << a.size() << '\n';
  detail::write_matrix_rows(os, a.weights());
}

inline CombinationMatrix read_combination_csv(std::istream& is) {
  std::string line;
  std::size_t n = 0;
  bool have_header = false;
  std::vector<std::vector<double>> rows;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto pos = line.find("combination-matrix n=");
      if (pos != std::string::npos) {
        try {
          n = std::stoul(line.substr(pos + 21));
        } catch (const std::exception&) {
          throw DataError("malformed combination-matrix header: " + line);
        }
        have_header = true;
      }
      continue;
    }
    rows.push_back(detail::parse_csv_row(line));
  }
  if (!have_header) throw DataError("missing '# combination-matrix n=<n>' header");
  if (rows.size() != n) throw DataError("combination-matrix CSV row count does not match header");
  Matrix w(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t r = 0; r < n; ++r) {
    if (rows[r].size() != n) throw DataError("combination-matrix CSV row has wrong length");
    for (std::size_t c = 0; c < n; ++c) {
      w(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
  }
  try {
    return CombinationMatrix::from_weights(std::move(w));
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("invalid combination matrix: ") + e.what());
  }
}

inline nlohmann::json combination_to_json(const CombinationMatrix& a) {
  return nlohmann::json{{"n", a.size()}, {"weights", detail::matrix_to_json(a.weights())}};
}

inline CombinationMatrix combination_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("n") || !j.contains("weights")) {
    throw DataError("combination-matrix JSON needs 'n' and 'weights'");
  }
  Matrix w = detail::matrix_from_json(j.at("weights"));
  const auto n = j.at("n").get<std::size_t>();
  if (static_cast<std::size_t>(w.rows()) != n || static_cast<std::size_t>(w.cols()) != n) {
    throw DataError("combination-matrix JSON 'weights' is not n x n");
  }
  try {
    return CombinationMatrix::from_weights(std::move(w));
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("invalid combination matrix: ") + e.what());
  }
}

/// Loads a matrix file, choosing the format by extension (.json, else CSV).
inline CombinationMatrix load_combination_matrix(const std::string& path) {
  auto in = detail::open_input(path);
  if (path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0) {
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw DataError("cannot parse '" + path + "': " + e.what());
    }
    return combination_from_json(j);
  }
  return read_combination_csv(in);
}

}  // namespace sociallearn
