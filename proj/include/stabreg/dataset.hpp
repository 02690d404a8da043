#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace stabreg {

using Index = Eigen::Index;

// Sorted, duplicate-free list of predictor column indices.
using Subset = std::vector<int>;

// Partition of the rows by environment. Labels are ordered by first
// appearance in the data.
struct EnvIndex {
  std::vector<std::string> labels;
  std::vector<std::vector<Index>> row_sets;
  std::vector<Index> sizes;
};

// Observations (X, y) tagged with an environment label per row. Immutable
// after construction; every constructor validates:
//   - X rows == y length == number of labels,
//   - each environment has at least two rows,
//   - X and y are finite.
class MultiEnvDataset {
 public:
  MultiEnvDataset(Eigen::MatrixXd X, Eigen::VectorXd y,
                  const std::vector<std::string>& env,
                  std::vector<std::string> column_names = {});

  // env_codes[i] indexes into labels. Labels without rows are dropped.
  static MultiEnvDataset from_codes(Eigen::MatrixXd X, Eigen::VectorXd y,
                                    const std::vector<int>& env_codes,
                                    const std::vector<std::string>& labels,
                                    std::vector<std::string> column_names = {});

  const Eigen::MatrixXd& X() const { return X_; }
  const Eigen::VectorXd& y() const { return y_; }
  Index n() const { return y_.size(); }
  Index d() const { return X_.cols(); }
  int n_envs() const { return static_cast<int>(envs_.labels.size()); }

  // Environment code (index into env_labels()) of each row.
  const std::vector<int>& env_codes() const { return codes_; }
  const std::vector<std::string>& env_labels() const { return envs_.labels; }
  const EnvIndex& envs() const { return envs_; }
  const std::vector<std::string>& column_names() const { return names_; }

  // Rows in the given order (repeats allowed). Environment labels keep their
  // relative order; labels that end up empty are dropped.
  MultiEnvDataset select_rows(std::span<const Index> rows) const;

  // Same rows and labels with a replaced response / predictor matrix.
  MultiEnvDataset with_data(Eigen::MatrixXd X, Eigen::VectorXd y) const;

 private:
  MultiEnvDataset() = default;
  void finalize();

  Eigen::MatrixXd X_;
  Eigen::VectorXd y_;
  std::vector<int> codes_;
  EnvIndex envs_;
  std::vector<std::string> names_;
};

EnvIndex split_by_env(const MultiEnvDataset& ds);

// Reads a header-first CSV. Predictors default to every column other than the
// response and environment columns, in file order.
MultiEnvDataset load_csv(const std::filesystem::path& path,
                         const std::string& response_col,
                         const std::string& env_col,
                         const std::optional<std::vector<std::string>>&
                             predictor_cols = std::nullopt);

// Writes `env,<response>,<predictors...>` with round-trip precision.
void write_csv(const MultiEnvDataset& ds, const std::filesystem::path& path,
               const std::string& response_col = "y",
               const std::string& env_col = "env");

// n_e draws with replacement inside every environment.
MultiEnvDataset bootstrap_within_env(const MultiEnvDataset& ds,
                                     std::uint64_t seed);

// floor(n_e / 2) draws without replacement inside every environment. Each
// environment needs at least four rows.
MultiEnvDataset subsample_half(const MultiEnvDataset& ds, std::uint64_t seed);

// RFC-4180 field splitting for a single record (no embedded newlines).
std::vector<std::string> split_csv_record(const std::string& line);
std::string quote_csv_field(const std::string& field);
std::string format_double(double v);

}  // namespace stabreg
