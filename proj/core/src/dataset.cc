#include "shiftbound/dataset.h"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "shiftbound/error.h"

namespace shiftbound {
namespace {

std::string_view Trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string_view> SplitCommas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(Trim(line.substr(start)));
      break;
    }
    out.push_back(Trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return out;
}

void CheckValue(const ColumnSpec& spec, double v, std::size_t row) {
  if (!std::isfinite(v)) {
    throw Error(ErrorCode::kMissingValue,
                "non-finite value at row " + std::to_string(row) + ", column " + spec.name);
  }
  if (spec.kind == ColumnKind::kDiscrete) {
    if (v != std::floor(v) || v < 0 || v >= spec.cardinality) {
      throw Error(ErrorCode::kNonIntegerDiscrete,
                  "row " + std::to_string(row) + ", column " + spec.name + ": value " +
                      std::to_string(v) + " is not an integer in [0, " +
                      std::to_string(spec.cardinality) + ")");
    }
  }
}

}  // namespace

Dataset::Dataset(std::vector<ColumnSpec> columns, Eigen::MatrixXd values)
    : columns_(std::move(columns)), values_(std::move(values)) {
  if (values_.rows() < 1) {
    throw Error(ErrorCode::kDatasetError, "dataset must contain at least one row");
  }
  if (static_cast<std::size_t>(values_.cols()) != columns_.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "value matrix width does not match schema");
  }
  for (std::size_t c = 0; c < columns_.size(); ++c) {
    if (columns_[c].kind == ColumnKind::kDiscrete && columns_[c].cardinality < 1) {
      throw Error(ErrorCode::kDatasetError, "discrete column " + columns_[c].name +
                                                " needs a positive cardinality");
    }
    for (Eigen::Index r = 0; r < values_.rows(); ++r) {
      CheckValue(columns_[c], values_(r, static_cast<Eigen::Index>(c)),
                 static_cast<std::size_t>(r));
    }
  }
}

std::size_t Dataset::ColumnIndex(std::string_view name) const {
  for (std::size_t c = 0; c < columns_.size(); ++c) {
    if (columns_[c].name == name) return c;
  }
  throw Error(ErrorCode::kUnknownColumn, std::string(name));
}

bool Dataset::HasColumn(std::string_view name) const {
  for (const auto& c : columns_) {
    if (c.name == name) return true;
  }
  return false;
}

Eigen::VectorXd Dataset::Column(std::string_view name) const {
  return values_.col(static_cast<Eigen::Index>(ColumnIndex(name)));
}

Dataset Dataset::SelectRows(std::span<const std::size_t> indices) const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(indices.size()), values_.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = values_.row(static_cast<Eigen::Index>(indices[i]));
  }
  return Dataset(columns_, std::move(out));
}

std::vector<std::string> Dataset::DiscreteColumnNames() const {
  std::vector<std::string> out;
  for (const auto& c : columns_) {
    if (c.kind == ColumnKind::kDiscrete) out.push_back(c.name);
  }
  return out;
}

Dataset LoadDataset(const std::filesystem::path& path,
                    const std::vector<ColumnSpec>& schema) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());

  std::string line;
  if (!std::getline(in, line)) {
    throw Error(ErrorCode::kDatasetError, path.string() + " is empty");
  }
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);
  auto header = SplitCommas(line);

  std::unordered_map<std::string, std::size_t> schema_pos;
  for (std::size_t c = 0; c < schema.size(); ++c) schema_pos[schema[c].name] = c;
  // header position -> schema position
  std::vector<std::size_t> mapping(header.size());
  std::vector<bool> seen(schema.size(), false);
  for (std::size_t h = 0; h < header.size(); ++h) {
    auto it = schema_pos.find(std::string(header[h]));
    if (it == schema_pos.end()) {
      throw Error(ErrorCode::kUnknownColumn,
                  "header column '" + std::string(header[h]) + "' is not in the schema");
    }
    mapping[h] = it->second;
    seen[it->second] = true;
  }
  for (std::size_t c = 0; c < schema.size(); ++c) {
    if (!seen[c]) {
      throw Error(ErrorCode::kUnknownColumn,
                  "schema column '" + schema[c].name + "' missing from header");
    }
  }

  std::vector<double> flat;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (Trim(line).empty()) continue;
    auto cells = SplitCommas(line);
    if (cells.size() != header.size()) {
      throw Error(ErrorCode::kMissingValue, "row " + std::to_string(row) + " has " +
                                                std::to_string(cells.size()) + " cells, expected " +
                                                std::to_string(header.size()));
    }
    std::vector<double> parsed(schema.size());
    for (std::size_t h = 0; h < cells.size(); ++h) {
      const auto& spec = schema[mapping[h]];
      if (cells[h].empty()) {
        throw Error(ErrorCode::kMissingValue,
                    "row " + std::to_string(row) + ", column " + spec.name);
      }
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(cells[h].data(), cells[h].data() + cells[h].size(), v);
      if (ec != std::errc() || ptr != cells[h].data() + cells[h].size()) {
        ErrorCode code = spec.kind == ColumnKind::kDiscrete ? ErrorCode::kNonIntegerDiscrete
                                                            : ErrorCode::kParseError;
        throw Error(code, "row " + std::to_string(row) + ", column " + spec.name + ": '" +
                              std::string(cells[h]) + "'");
      }
      CheckValue(spec, v, row);
      parsed[mapping[h]] = v;
    }
    flat.insert(flat.end(), parsed.begin(), parsed.end());
    ++row;
  }
  if (row == 0) throw Error(ErrorCode::kDatasetError, path.string() + " has no data rows");

  Eigen::MatrixXd values(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(schema.size()));
  for (std::size_t r = 0; r < row; ++r) {
    for (std::size_t c = 0; c < schema.size(); ++c) {
      values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          flat[r * schema.size() + c];
    }
  }
  return Dataset(schema, std::move(values));
}

void WriteDataset(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  for (std::size_t c = 0; c < ds.cols(); ++c) {
    out << (c ? "," : "") << ds.column(c).name;
  }
  out << '\n';
  char buf[64];
  for (std::size_t r = 0; r < ds.rows(); ++r) {
    for (std::size_t c = 0; c < ds.cols(); ++c) {
      double v = ds.at(r, c);
      if (ds.column(c).kind == ColumnKind::kDiscrete) {
        std::snprintf(buf, sizeof(buf), "%d", static_cast<int>(v));
      } else {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
      }
      out << (c ? "," : "") << buf;
    }
    out << '\n';
  }
}

}  // namespace shiftbound
