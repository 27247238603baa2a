#ifndef SHIFTBOUND_CONFIG_H_
#define SHIFTBOUND_CONFIG_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "shiftbound/dataset.h"
#include "shiftbound/problem.h"
#include "shiftbound/solve.h"
#include "shiftbound/synthetic.h"

namespace shiftbound {

struct DatasetConfig {
  std::string type = "synthetic";  // synthetic | csv
  std::string dgp = "binary-selection";  // binary-selection | regression-substitute
  std::size_t n = 20000;            // population draws before selection
  std::uint64_t seed = 1;
  std::optional<std::array<double, 3>> x1_probs;
  std::string path;                 // csv only
  std::vector<ColumnSpec> schema;   // csv only
};

struct SelectionConfig {
  bool use_floor = true;
  std::optional<double> p_r1;  // required for csv when use_floor
};

struct EstimandConfig {
  std::string kind = "conditional_mean";  // mean | conditional_mean | m_coefficient | ate
  std::string h = "Y";
  std::string condition = "A==1";
  std::string family = "linear";  // linear | logistic
  std::string outcome;
  std::vector<std::string> design;
  bool intercept = true;
  std::size_t coord = 1;
  std::string y, a;
  std::vector<std::string> x;
};

struct MomentConfig {
  std::string expr;
  std::optional<double> target;  // csv only
};

struct CovarianceConfig {
  std::string u, v;
  int sign = +1;
};

struct ConstraintsConfig {
  // none | unrestricted-base | partial-race-income | full-race-income |
  // race-income-outcome | stratum-pinning
  std::string set = "full-race-income";
  std::string race = "X2";
  std::string income = "Y2";
  std::string outcome = "Y";
  std::vector<MomentConfig> moments;  // added after the named set
  std::vector<CovarianceConfig> covariance;
  std::vector<double> targets;  // csv: one per moment of the named set, in order
};

struct RatioModelConfig {
  std::string kind = "unrestricted";  // unrestricted | separable | targeted | basis
  std::vector<std::string> key{"X1", "X2"};
  std::vector<std::string> group_a{"A"};
  std::vector<std::string> group_b{"X1", "X2"};
  std::vector<std::string> basis;
};

struct BootstrapConfig {
  std::size_t replicates = 5;
  std::uint64_t seed = 0;
};

struct DroConfig {
  std::string mode = "both";  // both | observable | omniscient | off
};

struct ExperimentConfig {
  std::string name = "experiment";
  DatasetConfig dataset;
  SelectionConfig selection;
  EstimandConfig estimand;
  ConstraintsConfig constraints;
  RatioModelConfig ratio_model;
  SolveOptions solver;
  BootstrapConfig bootstrap;
  DroConfig dro;
  std::string output_dir = "results";
};

// Strict parse: unknown keys, wrong types and invalid enum values raise
// ConfigSchemaError. A top-level "grid" array holds per-experiment override
// objects merged onto the base document; without it the grid is the base.
std::vector<ExperimentConfig> ParseConfigGrid(std::string_view json_text);
std::vector<ExperimentConfig> LoadConfigGrid(const std::filesystem::path& path);
// Exactly one experiment (the base, or the single grid entry).
ExperimentConfig LoadConfig(const std::filesystem::path& path);

SyntheticDGP MakeDgp(const DatasetConfig& config);

// The named constraint set with its expressions, targets left at zero.
// stratum-pinning needs the DGP support and is resolved in ResolveProblem.
std::vector<MomentConstraint> NamedConstraintSet(const ConstraintsConfig& config);

struct ResolvedProblem {
  ProblemSpec spec;
  std::optional<SyntheticDGP> dgp;  // synthetic mode
  std::optional<double> truth;      // exact or Monte Carlo value of f(P)
};

// Builds the dataset (simulated or loaded), the constraints with their
// targets (exact from the DGP in synthetic mode, explicit for csv), the
// estimand, ratio model and floor.
ResolvedProblem ResolveProblem(const ExperimentConfig& config);

// Solver-independent pieces, reused for bootstrap replicates.
Estimand MakeEstimand(const EstimandConfig& config);
RatioModelSpec MakeRatioModel(const RatioModelConfig& config, const Dataset& ds);

}  // namespace shiftbound

#endif  // SHIFTBOUND_CONFIG_H_
