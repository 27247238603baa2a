#include "shiftbound/strata.h"

#include <algorithm>
#include <map>

#include "shiftbound/error.h"

namespace shiftbound {

StratumTable::StratumTable(std::vector<std::string> key_columns, std::vector<Stratum> strata,
                           std::vector<std::size_t> row_stratum)
    : key_columns_(std::move(key_columns)),
      strata_(std::move(strata)),
      row_stratum_(std::move(row_stratum)) {}

std::optional<std::size_t> StratumTable::KeyPosition(const std::string& column) const {
  auto it = std::find(key_columns_.begin(), key_columns_.end(), column);
  if (it == key_columns_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - key_columns_.begin());
}

std::optional<std::size_t> StratumTable::Find(const std::vector<int>& profile) const {
  auto it = std::lower_bound(strata_.begin(), strata_.end(), profile,
                             [](const Stratum& s, const std::vector<int>& p) {
                               return s.profile < p;
                             });
  if (it == strata_.end() || it->profile != profile) return std::nullopt;
  return static_cast<std::size_t>(it - strata_.begin());
}

Eigen::VectorXd StratumTable::Weights() const {
  Eigen::VectorXd w(static_cast<Eigen::Index>(strata_.size()));
  const double n = static_cast<double>(total());
  for (std::size_t s = 0; s < strata_.size(); ++s) {
    w[static_cast<Eigen::Index>(s)] = static_cast<double>(strata_[s].count) / n;
  }
  return w;
}

Eigen::VectorXd StratumTable::Sums(const Eigen::VectorXd& per_sample) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(strata_.size()));
  for (std::size_t i = 0; i < row_stratum_.size(); ++i) {
    out[static_cast<Eigen::Index>(row_stratum_[i])] += per_sample[static_cast<Eigen::Index>(i)];
  }
  return out;
}

Eigen::VectorXd StratumTable::Means(const Eigen::VectorXd& per_sample) const {
  Eigen::VectorXd out = Sums(per_sample);
  for (std::size_t s = 0; s < strata_.size(); ++s) {
    out[static_cast<Eigen::Index>(s)] /= static_cast<double>(strata_[s].count);
  }
  return out;
}

Eigen::VectorXd StratumTable::Expand(const Eigen::VectorXd& per_stratum) const {
  Eigen::VectorXd out(static_cast<Eigen::Index>(row_stratum_.size()));
  for (std::size_t i = 0; i < row_stratum_.size(); ++i) {
    out[static_cast<Eigen::Index>(i)] = per_stratum[static_cast<Eigen::Index>(row_stratum_[i])];
  }
  return out;
}

StratumTable BuildStrata(const Dataset& ds, const std::vector<std::string>& columns) {
  if (columns.empty()) throw Error(ErrorCode::kEmptyStratumKey, "stratum key has no columns");
  std::vector<std::size_t> idx;
  for (const auto& name : columns) {
    std::size_t c = ds.ColumnIndex(name);
    if (ds.column(c).kind != ColumnKind::kDiscrete) {
      throw Error(ErrorCode::kContinuousColumnInKey, name);
    }
    idx.push_back(c);
  }

  std::map<std::vector<int>, std::vector<std::size_t>> groups;
  std::vector<int> profile(idx.size());
  for (std::size_t r = 0; r < ds.rows(); ++r) {
    for (std::size_t k = 0; k < idx.size(); ++k) profile[k] = static_cast<int>(ds.at(r, idx[k]));
    groups[profile].push_back(r);
  }

  std::vector<Stratum> strata;
  std::vector<std::size_t> row_stratum(ds.rows());
  strata.reserve(groups.size());
  for (auto& [prof, rows] : groups) {
    for (std::size_t r : rows) row_stratum[r] = strata.size();
    strata.push_back(Stratum{prof, rows.size(), std::move(rows)});
  }
  return StratumTable(columns, std::move(strata), std::move(row_stratum));
}

}  // namespace shiftbound
