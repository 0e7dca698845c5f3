#include "io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "lipattn/error.hpp"

namespace lipattn::cli {

namespace {

using nlohmann::json;

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void dump(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path);
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double to_double(const std::string& field, const std::string& where) {
  double v = 0.0;
  const char* first = field.data();
  const char* last = first + field.size();
  if (!field.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) throw std::invalid_argument("not a number '" + field + "' in " + where);
  return v;
}

std::vector<std::vector<double>> read_rows(const std::string& path) {
  std::vector<std::vector<double>> rows;
  std::istringstream in(slurp(path));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::vector<double> row;
    std::size_t start = 0;
    for (;;) {
      const auto comma = line.find(',', start);
      const std::string field = trim(std::string_view(line).substr(start, comma - start));
      row.push_back(to_double(field, path + ":" + std::to_string(line_no)));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw DimensionError(path + ":" + std::to_string(line_no) + ": expected " +
                           std::to_string(rows.front().size()) + " columns, got " + std::to_string(row.size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DimensionError(path + ": no rows");
  return rows;
}

std::string format(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

Matrix matrix_from_json(const json& j, const std::string& name) {
  if (!j.is_array() || j.empty() || !j.front().is_array()) {
    throw std::invalid_argument("'" + name + "' must be a non-empty array of rows");
  }
  const std::size_t cols = j.front().size();
  Matrix m(j.size(), cols);
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_array() || j[r].size() != cols) throw DimensionError("'" + name + "' has ragged rows");
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

Vector vector_from_json(const json& j, const std::string& name) {
  if (!j.is_array()) throw std::invalid_argument("'" + name + "' must be an array");
  return j.get<Vector>();
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    rows.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return rows;
}

AttentionParams head_from_json(const json& j) {
  for (const auto& [key, _] : j.items()) {
    if (key != "Q" && key != "K" && key != "V" && key != "b_Q" && key != "b_K" && key != "b_V") {
      throw std::invalid_argument("unknown parameter key '" + key + "'");
    }
  }
  for (const char* key : {"Q", "K", "V"}) {
    if (!j.contains(key)) throw std::invalid_argument(std::string("missing parameter '") + key + "'");
  }
  const int bias_keys = static_cast<int>(j.contains("b_Q")) + static_cast<int>(j.contains("b_K")) +
                        static_cast<int>(j.contains("b_V"));
  if (bias_keys != 0 && bias_keys != 3) throw std::invalid_argument("give all of b_Q, b_K, b_V or none");
  std::optional<Biases> biases;
  if (bias_keys == 3) {
    biases = Biases{vector_from_json(j["b_Q"], "b_Q"), vector_from_json(j["b_K"], "b_K"),
                    vector_from_json(j["b_V"], "b_V")};
  }
  return AttentionParams(matrix_from_json(j["Q"], "Q"), matrix_from_json(j["K"], "K"),
                         matrix_from_json(j["V"], "V"), std::move(biases));
}

json head_to_json(const AttentionParams& p) {
  json j{{"Q", matrix_to_json(p.query())}, {"K", matrix_to_json(p.key())}, {"V", matrix_to_json(p.value())}};
  if (p.biases()) {
    j["b_Q"] = p.biases()->query;
    j["b_K"] = p.biases()->key;
    j["b_V"] = p.biases()->value;
  }
  return j;
}

}  // namespace

TokenSequence read_tokens_csv(const std::string& path) {
  const auto rows = read_rows(path);
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) m(r, c) = rows[r][c];
  }
  return TokenSequence(std::move(m));
}

void write_tokens_csv(const std::string& path, const TokenSequence& x) {
  std::string out;
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t c = 0; c < x.dim(); ++c) {
      if (c) out += ',';
      out += format(x[i][c]);
    }
    out += '\n';
  }
  dump(path, out);
}

SimplexWeights read_weights(const std::string& path) {
  const auto rows = read_rows(path);
  std::vector<double> raw;
  if (rows.size() == 1) {
    raw = rows.front();
  } else {
    if (rows.front().size() != 1) throw DimensionError(path + ": weights must be one column or one row");
    for (const auto& r : rows) raw.push_back(r.front());
  }
  return SimplexWeights::normalized(std::move(raw));
}

void write_weights(const std::string& path, const SimplexWeights& w) {
  std::string out;
  for (double v : w.values()) out += format(v) + '\n';
  dump(path, out);
}

ModelFile read_params(const std::string& path) {
  json j;
  try {
    j = json::parse(slurp(path));
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(path + ": " + e.what());
  }
  if (!j.is_object()) throw std::invalid_argument(path + ": expected a JSON object");
  ModelFile mf;
  try {
    if (j.contains("heads")) {
      for (const auto& [key, _] : j.items()) {
        if (key != "heads" && key != "W") throw std::invalid_argument("unknown key '" + key + "'");
      }
      if (!j.contains("W")) throw std::invalid_argument("multi-head parameters need 'W'");
      std::vector<AttentionParams> heads;
      for (const auto& h : j["heads"]) heads.push_back(head_from_json(h));
      std::vector<Matrix> projections;
      for (const auto& w : j["W"]) projections.push_back(matrix_from_json(w, "W"));
      mf.multi = MultiHeadParams(std::move(heads), std::move(projections));
    } else {
      mf.single = head_from_json(j);
    }
  } catch (const json::exception& e) {
    throw std::invalid_argument(path + ": " + e.what());
  }
  return mf;
}

void write_params(const std::string& path, const AttentionParams& p) { dump(path, head_to_json(p).dump(2) + "\n"); }

void write_params(const std::string& path, const MultiHeadParams& mp) {
  json heads = json::array();
  json w = json::array();
  for (std::size_t h = 0; h < mp.head_count(); ++h) {
    heads.push_back(head_to_json(mp.head(h)));
    w.push_back(matrix_to_json(mp.projection(h)));
  }
  dump(path, json{{"heads", heads}, {"W", w}}.dump(2) + "\n");
}

}  // namespace lipattn::cli
