#ifndef SHIFTBOUND_STRATA_H_
#define SHIFTBOUND_STRATA_H_

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "shiftbound/dataset.h"

namespace shiftbound {

struct Stratum {
  std::vector<int> profile;  // key-column values, in key order
  std::size_t count = 0;
  std::vector<std::size_t> rows;
};

// Partition of the sample by the joint value of discrete key columns.
// Strata are sorted lexicographically by profile.
class StratumTable {
 public:
  StratumTable(std::vector<std::string> key_columns, std::vector<Stratum> strata,
               std::vector<std::size_t> row_stratum);

  const std::vector<std::string>& key_columns() const { return key_columns_; }
  const std::vector<Stratum>& strata() const { return strata_; }
  const Stratum& stratum(std::size_t s) const { return strata_[s]; }
  std::size_t size() const { return strata_.size(); }
  std::size_t total() const { return row_stratum_.size(); }
  std::size_t StratumOfRow(std::size_t row) const { return row_stratum_[row]; }
  const std::vector<std::size_t>& row_stratum() const { return row_stratum_; }

  // Position of a key column, or nullopt.
  std::optional<std::size_t> KeyPosition(const std::string& column) const;
  std::optional<std::size_t> Find(const std::vector<int>& profile) const;

  // w_s = n_s / N.
  Eigen::VectorXd Weights() const;
  // Within-stratum mean of a per-sample quantity.
  Eigen::VectorXd Means(const Eigen::VectorXd& per_sample) const;
  // Within-stratum sum of a per-sample quantity.
  Eigen::VectorXd Sums(const Eigen::VectorXd& per_sample) const;
  // Broadcasts a per-stratum vector back to samples.
  Eigen::VectorXd Expand(const Eigen::VectorXd& per_stratum) const;

 private:
  std::vector<std::string> key_columns_;
  std::vector<Stratum> strata_;
  std::vector<std::size_t> row_stratum_;
};

// Throws ContinuousColumnInKey, UnknownColumn, EmptyStratumKey.
StratumTable BuildStrata(const Dataset& ds, const std::vector<std::string>& columns);

}  // namespace shiftbound

#endif  // SHIFTBOUND_STRATA_H_
