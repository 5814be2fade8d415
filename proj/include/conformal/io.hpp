#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "conformal/data.hpp"
#include "conformal/errors.hpp"
#include "conformal/fd.hpp"
#include "conformal/models.hpp"
#include "conformal/multi.hpp"

namespace conformal {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Tabular ingestion (CSV with a header row)
// ---------------------------------------------------------------------------

// Columns named in response_cols become y, an optional 0/1 "test" column
// routes rows to the test block, everything else is a feature.
struct TabularInput {
  TabularDataset train;
  Matrix x0;  // test feature rows
  Matrix y0;  // responses of the test rows (same order as x0)
  std::vector<std::string> feature_names;
  std::vector<std::string> response_names;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.push_back("");
  return cells;
}

inline double parse_cell(const std::string& cell, std::size_t row, const std::string& col) {
  const std::string t = trim(cell);
  double value = 0.0;
  const auto* begin = t.data();
  const auto* end = t.data() + t.size();
  const auto res = std::from_chars(begin, end, value);
  require(res.ec == std::errc() && res.ptr == end, errc::parse_error,
          "row " + std::to_string(row) + ", column '" + col + "': cannot parse '" + t + "'");
  return value;
}

}  // namespace detail

inline TabularInput ingest_tabular(const std::string& path, const std::string& response_cols) {
  std::ifstream in(path);
  require(in.good(), errc::parse_error, "cannot open '" + path + "'");

  std::string line;
  require(static_cast<bool>(std::getline(in, line)), errc::parse_error,
          "'" + path + "' is empty");
  const auto header = detail::split_csv_line(line);

  std::vector<std::string> wanted;
  {
    std::stringstream ss(response_cols);
    std::string name;
    while (std::getline(ss, name, ',')) {
      name = detail::trim(name);
      if (!name.empty()) wanted.push_back(name);
    }
  }
  require(!wanted.empty(), errc::missing_column, "no response columns named");

  const auto col_of = [&](const std::string& name) -> std::optional<std::size_t> {
    for (std::size_t c = 0; c < header.size(); ++c)
      if (header[c] == name) return c;
    return std::nullopt;
  };

  std::vector<std::size_t> resp_cols;
  for (const auto& name : wanted) {
    const auto c = col_of(name);
    require(c.has_value(), errc::missing_column, "response column '" + name + "' not in header");
    resp_cols.push_back(*c);
  }
  const auto test_col = col_of("test");

  std::vector<std::size_t> feat_cols;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (test_col && c == *test_col) continue;
    if (std::find(resp_cols.begin(), resp_cols.end(), c) != resp_cols.end()) continue;
    feat_cols.push_back(c);
  }

  std::vector<std::vector<double>> train_x, train_y, test_x, test_y;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    ++row;
    const auto cells = detail::split_csv_line(line);
    require(cells.size() == header.size(), errc::parse_error,
            "row " + std::to_string(row) + ": " + std::to_string(cells.size()) +
                " cells, header has " + std::to_string(header.size()));
    bool is_test = false;
    if (test_col)
      is_test = detail::parse_cell(cells[*test_col], row, header[*test_col]) != 0.0;
    std::vector<double> xr, yr;
    xr.reserve(feat_cols.size());
    yr.reserve(resp_cols.size());
    for (std::size_t c : feat_cols) xr.push_back(detail::parse_cell(cells[c], row, header[c]));
    for (std::size_t c : resp_cols) yr.push_back(detail::parse_cell(cells[c], row, header[c]));
    (is_test ? test_x : train_x).push_back(std::move(xr));
    (is_test ? test_y : train_y).push_back(std::move(yr));
  }

  const auto to_matrix = [](const std::vector<std::vector<double>>& rows, std::size_t cols) {
    Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(cols));
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t j = 0; j < cols; ++j)
        m(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
    return m;
  };

  TabularInput out;
  out.train = validate_tabular(to_matrix(train_x, feat_cols.size()),
                               to_matrix(train_y, resp_cols.size()));
  out.x0 = to_matrix(test_x, feat_cols.size());
  out.y0 = to_matrix(test_y, resp_cols.size());
  for (std::size_t c : feat_cols) out.feature_names.push_back(header[c]);
  out.response_names = wanted;
  return out;
}

// ---------------------------------------------------------------------------
// Functional ingestion (JSON document)
// ---------------------------------------------------------------------------

// Document layout (schema "conformal-fd/1"):
//   grids : q arrays of strictly increasing abscissae
//   y     : n x q x len(grid_j) training curves
//   x     : n x p x len(grid_0) covariate curves            (optional)
//   x0    : n0 x p x len(grid_0) test covariate entries     (optional)
//   y0    : n0 x q x len(grid_j) true test curves           (optional)
struct FunctionalInput {
  FunctionalDataset y;
  std::optional<FunctionalDataset> x;
  std::vector<CurveSet> x0;
  std::vector<CurveSet> y0;
};

namespace detail {

inline Vector json_to_vector(const json& arr, const std::string& path) {
  require(arr.is_array(), errc::schema_error, path + " must be an array");
  Vector v(static_cast<Index>(arr.size()));
  for (std::size_t i = 0; i < arr.size(); ++i) {
    require(arr[i].is_number(), errc::schema_error,
            path + "[" + std::to_string(i) + "] must be a number");
    v[static_cast<Index>(i)] = arr[i].get<double>();
  }
  return v;
}

inline std::vector<CurveSet> json_to_curve_sets(const json& arr, std::size_t comps,
                                                const std::string& path) {
  require(arr.is_array(), errc::schema_error, path + " must be an array");
  std::vector<CurveSet> out;
  out.reserve(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const auto& entry = arr[i];
    const std::string epath = path + "[" + std::to_string(i) + "]";
    require(entry.is_array(), errc::schema_error, epath + " must be an array");
    require(entry.size() == comps, errc::schema_error,
            epath + " has " + std::to_string(entry.size()) + " components, expected " +
                std::to_string(comps));
    CurveSet cs(comps);
    for (std::size_t j = 0; j < comps; ++j)
      cs[j] = json_to_vector(entry[j], epath + "[" + std::to_string(j) + "]");
    out.push_back(std::move(cs));
  }
  return out;
}

}  // namespace detail

inline FunctionalInput ingest_functional(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), errc::parse_error, "cannot open '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw error(errc::schema_error, "'" + path + "' is not valid JSON: " + e.what());
  }
  require(doc.is_object(), errc::schema_error, "$ must be an object");
  require(doc.contains("grids"), errc::schema_error, "$.grids is missing");
  require(doc.contains("y"), errc::schema_error, "$.y is missing");

  const auto& jgrids = doc["grids"];
  require(jgrids.is_array() && !jgrids.empty(), errc::schema_error,
          "$.grids must be a nonempty array");
  std::vector<Vector> grids;
  for (std::size_t j = 0; j < jgrids.size(); ++j)
    grids.push_back(detail::json_to_vector(jgrids[j], "$.grids[" + std::to_string(j) + "]"));

  FunctionalInput out;
  auto curves = detail::json_to_curve_sets(doc["y"], grids.size(), "$.y");
  out.y = validate_functional(std::move(curves), grids);

  if (doc.contains("x")) {
    const auto& jx = doc["x"];
    require(jx.is_array() && !jx.empty(), errc::schema_error, "$.x must be a nonempty array");
    require(jx[0].is_array(), errc::schema_error, "$.x[0] must be an array");
    const std::size_t p = jx[0].size();
    require(p >= 1, errc::schema_error, "$.x entries need at least one component");
    auto xcurves = detail::json_to_curve_sets(jx, p, "$.x");
    std::vector<Vector> xgrids(p, grids[0]);
    out.x = validate_functional(std::move(xcurves), std::move(xgrids));
    require(out.x->n() == out.y.n(), errc::dimension_mismatch,
            "$.x has " + std::to_string(out.x->n()) + " observations, $.y has " +
                std::to_string(out.y.n()));
  }
  if (doc.contains("x0")) {
    const auto& jx0 = doc["x0"];
    require(jx0.is_array(), errc::schema_error, "$.x0 must be an array");
    const std::size_t p = out.x ? out.x->q() : (jx0.empty() || !jx0[0].is_array()
                                                    ? 0
                                                    : jx0[0].size());
    out.x0 = detail::json_to_curve_sets(jx0, p, "$.x0");
    for (std::size_t i = 0; i < out.x0.size(); ++i)
      for (std::size_t f = 0; f < out.x0[i].size(); ++f)
        require(out.x0[i][f].size() == grids[0].size(), errc::grid_mismatch,
                "$.x0[" + std::to_string(i) + "][" + std::to_string(f) +
                    "] length differs from the response grid");
  }
  if (doc.contains("y0")) {
    out.y0 = detail::json_to_curve_sets(doc["y0"], out.y.q(), "$.y0");
    for (std::size_t i = 0; i < out.y0.size(); ++i)
      for (std::size_t j = 0; j < out.y0[i].size(); ++j)
        require(out.y0[i][j].size() == out.y.grids[j].size(), errc::grid_mismatch,
                "$.y0[" + std::to_string(i) + "][" + std::to_string(j) +
                    "] length differs from its grid");
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON emission helpers
// ---------------------------------------------------------------------------

// JSON has no infinities; unbounded region ends are emitted as strings.
inline json jnum(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return nullptr;
  return v > 0 ? json("inf") : json("-inf");
}

inline double jnum_back(const json& v) {
  if (v.is_number()) return v.get<double>();
  if (v.is_null()) return std::numeric_limits<double>::quiet_NaN();
  const auto s = v.get<std::string>();
  return s == "inf" ? std::numeric_limits<double>::infinity()
                    : -std::numeric_limits<double>::infinity();
}

inline json to_json(const Vector& v) {
  json arr = json::array();
  for (Index i = 0; i < v.size(); ++i) arr.push_back(jnum(v[i]));
  return arr;
}

inline json to_json(const Matrix& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) rows.push_back(to_json(Vector(m.row(i).transpose())));
  return rows;
}

inline json to_json(const CurveSet& cs) {
  json arr = json::array();
  for (const auto& c : cs) arr.push_back(to_json(c));
  return arr;
}

inline json to_json(const std::vector<CurveSet>& sets) {
  json arr = json::array();
  for (const auto& cs : sets) arr.push_back(to_json(cs));
  return arr;
}

}  // namespace conformal
