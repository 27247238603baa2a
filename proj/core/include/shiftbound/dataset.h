#ifndef SHIFTBOUND_DATASET_H_
#define SHIFTBOUND_DATASET_H_

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace shiftbound {

enum class ColumnKind { kDiscrete, kContinuous };

struct ColumnSpec {
  std::string name;
  ColumnKind kind = ColumnKind::kDiscrete;
  // Number of levels for discrete columns; values lie in [0, cardinality).
  int cardinality = 2;

  static ColumnSpec Discrete(std::string name, int cardinality = 2) {
    return {std::move(name), ColumnKind::kDiscrete, cardinality};
  }
  static ColumnSpec Continuous(std::string name) {
    return {std::move(name), ColumnKind::kContinuous, 0};
  }
};

// Immutable N x C table of samples drawn from the observed distribution.
// Discrete columns hold integer codes in [0, cardinality).
class Dataset {
 public:
  // Validates the invariants (N >= 1, finite values, integer discrete codes in
  // range) and throws `Error` on violation.
  Dataset(std::vector<ColumnSpec> columns, Eigen::MatrixXd values);

  std::size_t rows() const { return static_cast<std::size_t>(values_.rows()); }
  std::size_t cols() const { return columns_.size(); }

  const std::vector<ColumnSpec>& columns() const { return columns_; }
  const ColumnSpec& column(std::size_t index) const { return columns_[index]; }
  const Eigen::MatrixXd& values() const { return values_; }

  // Throws UnknownColumn.
  std::size_t ColumnIndex(std::string_view name) const;
  bool HasColumn(std::string_view name) const;

  Eigen::VectorXd Column(std::string_view name) const;
  double at(std::size_t row, std::size_t col) const { return values_(row, col); }

  // Rows in the given order; indices may repeat (bootstrap resamples).
  Dataset SelectRows(std::span<const std::size_t> indices) const;

  std::vector<std::string> DiscreteColumnNames() const;

 private:
  std::vector<ColumnSpec> columns_;
  Eigen::MatrixXd values_;
};

// Reads a comma-separated file with a header row. Every schema column must
// appear in the header; extra header columns are an UnknownColumn error.
// Row order is preserved.
Dataset LoadDataset(const std::filesystem::path& path,
                    const std::vector<ColumnSpec>& schema);

// Writes `ds` as CSV with a header row. Discrete values are written as
// integers, continuous ones with 17 significant digits.
void WriteDataset(const Dataset& ds, const std::filesystem::path& path);

}  // namespace shiftbound

#endif  // SHIFTBOUND_DATASET_H_
