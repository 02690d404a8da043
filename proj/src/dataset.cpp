#include "stabreg/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "stabreg/error.hpp"
#include "stabreg/random.hpp"

namespace stabreg {

namespace {

std::vector<std::string> default_names(Index d) {
  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(d));
  for (Index j = 0; j < d; ++j) names.push_back("X" + std::to_string(j + 1));
  return names;
}

double parse_cell(const std::string& text, std::size_t row,
                  const std::string& column) {
  std::string trimmed = text;
  const auto first = trimmed.find_first_not_of(" \t");
  const auto last = trimmed.find_last_not_of(" \t\r");
  trimmed = first == std::string::npos
                ? std::string()
                : trimmed.substr(first, last - first + 1);
  double value = 0.0;
  const char* begin = trimmed.data();
  const char* end = begin + trimmed.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (trimmed.empty() || ec != std::errc() || ptr != end ||
      !std::isfinite(value)) {
    throw InputError("cannot parse '" + text + "' as a finite number at row " +
                     std::to_string(row) + ", column '" + column + "'");
  }
  return value;
}

}  // namespace

MultiEnvDataset::MultiEnvDataset(Eigen::MatrixXd X, Eigen::VectorXd y,
                                 const std::vector<std::string>& env,
                                 std::vector<std::string> column_names)
    : X_(std::move(X)), y_(std::move(y)), names_(std::move(column_names)) {
  if (static_cast<Index>(env.size()) != y_.size()) {
    throw ValidationError("environment label count " +
                          std::to_string(env.size()) +
                          " does not match response length " +
                          std::to_string(y_.size()));
  }
  std::unordered_map<std::string, int> code_of;
  codes_.reserve(env.size());
  for (const auto& label : env) {
    auto [it, inserted] =
        code_of.emplace(label, static_cast<int>(envs_.labels.size()));
    if (inserted) envs_.labels.push_back(label);
    codes_.push_back(it->second);
  }
  finalize();
}

MultiEnvDataset MultiEnvDataset::from_codes(
    Eigen::MatrixXd X, Eigen::VectorXd y, const std::vector<int>& env_codes,
    const std::vector<std::string>& labels,
    std::vector<std::string> column_names) {
  MultiEnvDataset ds;
  ds.X_ = std::move(X);
  ds.y_ = std::move(y);
  ds.names_ = std::move(column_names);
  if (static_cast<Index>(env_codes.size()) != ds.y_.size()) {
    throw ValidationError("environment code count does not match response");
  }
  std::vector<int> remap(labels.size(), -1);
  std::vector<char> used(labels.size(), 0);
  for (int c : env_codes) {
    if (c < 0 || static_cast<std::size_t>(c) >= labels.size()) {
      throw ValidationError("environment code out of range");
    }
    used[static_cast<std::size_t>(c)] = 1;
  }
  for (std::size_t k = 0; k < labels.size(); ++k) {
    if (used[k]) {
      remap[k] = static_cast<int>(ds.envs_.labels.size());
      ds.envs_.labels.push_back(labels[k]);
    }
  }
  ds.codes_.reserve(env_codes.size());
  for (int c : env_codes) ds.codes_.push_back(remap[static_cast<std::size_t>(c)]);
  ds.finalize();
  return ds;
}

void MultiEnvDataset::finalize() {
  if (X_.rows() != y_.size()) {
    throw ValidationError("predictor rows " + std::to_string(X_.rows()) +
                          " do not match response length " +
                          std::to_string(y_.size()));
  }
  if (names_.empty()) names_ = default_names(X_.cols());
  if (static_cast<Index>(names_.size()) != X_.cols()) {
    throw ValidationError("column name count does not match predictor count");
  }
  if (!X_.allFinite() || !y_.allFinite()) {
    throw ValidationError("dataset contains non-finite values");
  }
  envs_.row_sets.assign(envs_.labels.size(), {});
  for (Index i = 0; i < static_cast<Index>(codes_.size()); ++i) {
    envs_.row_sets[static_cast<std::size_t>(codes_[static_cast<std::size_t>(i)])]
        .push_back(i);
  }
  envs_.sizes.clear();
  for (std::size_t k = 0; k < envs_.labels.size(); ++k) {
    const Index size = static_cast<Index>(envs_.row_sets[k].size());
    if (size < 2) {
      throw ValidationError("environment '" + envs_.labels[k] + "' has " +
                            std::to_string(size) +
                            " observation(s); at least 2 are required");
    }
    envs_.sizes.push_back(size);
  }
}

MultiEnvDataset MultiEnvDataset::select_rows(std::span<const Index> rows) const {
  Eigen::MatrixXd X(static_cast<Index>(rows.size()), X_.cols());
  Eigen::VectorXd y(static_cast<Index>(rows.size()));
  std::vector<int> codes;
  codes.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const Index i = rows[r];
    X.row(static_cast<Index>(r)) = X_.row(i);
    y(static_cast<Index>(r)) = y_(i);
    codes.push_back(codes_[static_cast<std::size_t>(i)]);
  }
  return from_codes(std::move(X), std::move(y), codes, envs_.labels, names_);
}

MultiEnvDataset MultiEnvDataset::with_data(Eigen::MatrixXd X,
                                           Eigen::VectorXd y) const {
  if (X.rows() != n() || y.size() != n()) {
    throw ValidationError("replacement data must keep the row count");
  }
  return from_codes(std::move(X), std::move(y), codes_, envs_.labels,
                    X.cols() == d() ? names_ : std::vector<std::string>{});
}

EnvIndex split_by_env(const MultiEnvDataset& ds) { return ds.envs(); }

std::vector<std::string> split_csv_record(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  bool in_quotes = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      in_quotes = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c != '\r') {
      field.push_back(c);
    }
  }
  if (in_quotes) throw InputError("unterminated quoted CSV field");
  fields.push_back(std::move(field));
  return fields;
}

std::string quote_csv_field(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

MultiEnvDataset load_csv(const std::filesystem::path& path,
                         const std::string& response_col,
                         const std::string& env_col,
                         const std::optional<std::vector<std::string>>&
                             predictor_cols) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) {
    throw InputError("'" + path.string() + "' is empty; a header is required");
  }
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) {
    line.erase(0, 3);
  }
  const auto header = split_csv_record(line);
  auto find_col = [&](const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      throw InputError("column '" + name + "' not found in '" + path.string() +
                       "'");
    }
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t y_col = find_col(response_col);
  const std::size_t e_col = find_col(env_col);
  std::vector<std::size_t> x_cols;
  std::vector<std::string> names;
  if (predictor_cols) {
    for (const auto& name : *predictor_cols) {
      x_cols.push_back(find_col(name));
      names.push_back(name);
    }
  } else {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (c == y_col || c == e_col) continue;
      x_cols.push_back(c);
      names.push_back(header[c]);
    }
  }

  std::vector<double> x_values;
  std::vector<double> y_values;
  std::vector<std::string> env;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_record(line);
    if (fields.size() != header.size()) {
      throw InputError("row " + std::to_string(row) + " has " +
                       std::to_string(fields.size()) + " fields, expected " +
                       std::to_string(header.size()));
    }
    y_values.push_back(parse_cell(fields[y_col], row, response_col));
    env.push_back(fields[e_col]);
    for (std::size_t k = 0; k < x_cols.size(); ++k) {
      x_values.push_back(parse_cell(fields[x_cols[k]], row, names[k]));
    }
  }
  const Index n = static_cast<Index>(y_values.size());
  const Index d = static_cast<Index>(x_cols.size());
  Eigen::MatrixXd X(n, d);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < d; ++j) {
      X(i, j) = x_values[static_cast<std::size_t>(i * d + j)];
    }
  }
  Eigen::VectorXd y = Eigen::Map<Eigen::VectorXd>(y_values.data(), n);
  return MultiEnvDataset(std::move(X), std::move(y), env, std::move(names));
}

void write_csv(const MultiEnvDataset& ds, const std::filesystem::path& path,
               const std::string& response_col, const std::string& env_col) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out << quote_csv_field(env_col) << ',' << quote_csv_field(response_col);
  for (const auto& name : ds.column_names()) out << ',' << quote_csv_field(name);
  out << '\n';
  for (Index i = 0; i < ds.n(); ++i) {
    out << quote_csv_field(
               ds.env_labels()[static_cast<std::size_t>(
                   ds.env_codes()[static_cast<std::size_t>(i)])])
        << ',' << format_double(ds.y()(i));
    for (Index j = 0; j < ds.d(); ++j) out << ',' << format_double(ds.X()(i, j));
    out << '\n';
  }
}

MultiEnvDataset bootstrap_within_env(const MultiEnvDataset& ds,
                                     std::uint64_t seed) {
  Rng rng = make_rng(seed);
  std::vector<Index> rows;
  rows.reserve(static_cast<std::size_t>(ds.n()));
  for (const auto& set : ds.envs().row_sets) {
    std::uniform_int_distribution<std::size_t> pick(0, set.size() - 1);
    for (std::size_t k = 0; k < set.size(); ++k) rows.push_back(set[pick(rng)]);
  }
  return ds.select_rows(rows);
}

MultiEnvDataset subsample_half(const MultiEnvDataset& ds, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  std::vector<Index> rows;
  for (std::size_t k = 0; k < ds.envs().row_sets.size(); ++k) {
    auto set = ds.envs().row_sets[k];
    if (set.size() < 4) {
      throw ValidationError("environment '" + ds.env_labels()[k] + "' has " +
                            std::to_string(set.size()) +
                            " rows; half-subsampling needs at least 4");
    }
    const std::size_t half = set.size() / 2;
    // Partial Fisher-Yates: the first `half` slots become a uniform draw.
    for (std::size_t i = 0; i < half; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, set.size() - 1);
      std::swap(set[i], set[pick(rng)]);
    }
    std::sort(set.begin(), set.begin() + static_cast<std::ptrdiff_t>(half));
    rows.insert(rows.end(), set.begin(),
                set.begin() + static_cast<std::ptrdiff_t>(half));
  }
  return ds.select_rows(rows);
}

}  // namespace stabreg
