#ifndef SHIFTBOUND_EXPERIMENT_H_
#define SHIFTBOUND_EXPERIMENT_H_

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "shiftbound/config.h"
#include "shiftbound/inference.h"

namespace shiftbound {

// One solved endpoint. DRO and naive rows carry no variance (sigma2 = 0 and
// a degenerate CI at the value).
struct ResultRow {
  std::string experiment;
  std::string method;  // ours | dro_observable | dro_omniscient | naive
  std::string side;    // lower | upper
  std::size_t replicate = 0;
  double value = 0.0;
  double sigma2 = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  std::string status;
  double restart_spread = 0.0;
  double constraint_violation = 0.0;
  std::optional<double> rho;  // DRO rows
  std::vector<double> duals;
  std::vector<double> alpha;
  std::string message;
};

struct MethodSummary {
  std::string method;
  std::size_t ok = 0;  // replicates with both sides solved
  EndpointSummary lower;
  EndpointSummary upper;
};

struct ExperimentSummary {
  std::string experiment;
  std::string estimand;
  std::optional<double> truth;
  double naive = 0.0;  // plug-in on the full observed sample
  std::size_t n = 0;
  std::size_t replicates = 0;
  std::size_t infeasible = 0;  // replicates where ours had no feasible point
  std::vector<MethodSummary> methods;
  std::optional<double> rho_observable;  // mean over replicates
  std::optional<double> rho_omniscient;
  std::vector<std::string> warnings;

  bool AllInfeasible() const { return replicates > 0 && infeasible == replicates; }
  const MethodSummary* Method(const std::string& name) const;
};

struct ResultBundle {
  std::vector<ResultRow> rows;
  std::vector<ExperimentSummary> experiments;

  bool AnyAllInfeasible() const;
};

// f of the unweighted observed sample.
double NaiveEstimate(const ProblemSpec& spec);

// B bootstrap resamples (seed + b), each solved on both sides by every
// requested method. Solver failures are recorded per row; infeasible
// replicates of our method are counted and produce no rows.
ResultBundle RunExperiment(const ExperimentConfig& config);
ResultBundle RunGrid(const std::vector<ExperimentConfig>& configs);

void WriteResultsCsv(const ResultBundle& bundle, const std::filesystem::path& path);
void WriteResultsJson(const ResultBundle& bundle, const std::filesystem::path& path);
ResultBundle ReadResultsJson(const std::filesystem::path& path);

}  // namespace shiftbound

#endif  // SHIFTBOUND_EXPERIMENT_H_
