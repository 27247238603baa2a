#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "shiftbound/config.h"
#include "shiftbound/dro.h"
#include "shiftbound/error.h"
#include "shiftbound/experiment.h"
#include "shiftbound/plot.h"
#include "shiftbound/solve.h"
#include "shiftbound/synthetic.h"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace shiftbound;

namespace {

json Num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json EstimateJson(const BoundEstimate& e) {
  return {{"value", Num(e.value)},
          {"sigma2", Num(e.sigma2)},
          {"ci_lo", Num(e.ci_lo)},
          {"ci_hi", Num(e.ci_hi)},
          {"status", BoundStatusName(e.diagnostics.status)},
          {"solver", e.diagnostics.solver},
          {"restart_spread", Num(e.diagnostics.restart_spread)},
          {"constraint_violation", Num(e.diagnostics.constraint_violation)},
          {"warnings", e.diagnostics.warnings}};
}

void ApplySeed(ExperimentConfig& c, std::optional<std::uint64_t> seed) {
  if (!seed) return;
  c.dataset.seed = *seed;
  c.bootstrap.seed = *seed;
  c.solver.al.seed = *seed;
}

int Simulate(const std::string& config_path, const std::string& out_dir,
             std::optional<std::uint64_t> seed, std::optional<std::size_t> n) {
  ExperimentConfig c = LoadConfig(config_path);
  ApplySeed(c, seed);
  if (n) c.dataset.n = *n;
  if (c.dataset.type != "synthetic") {
    throw Error(ErrorCode::kConfigSchemaError, "simulate needs a synthetic dataset block");
  }
  SimulatedData sim = shiftbound::Simulate(MakeDgp(c.dataset), c.dataset.n, c.dataset.seed);
  fs::create_directories(out_dir);
  WriteDataset(sim.full, fs::path(out_dir) / "full.csv");
  WriteDataset(sim.observed, fs::path(out_dir) / "observed.csv");
  std::cout << "wrote " << sim.full.rows() << " population rows and " << sim.observed.rows()
            << " observed rows to " << out_dir << "\n";
  return 0;
}

int Bound(const std::string& config_path, std::optional<std::uint64_t> seed) {
  ExperimentConfig c = LoadConfig(config_path);
  ApplySeed(c, seed);
  ResolvedProblem rp = ResolveProblem(c);
  BoundEstimate lo = SolveBound(rp.spec.WithSide(Side::kLower), c.solver);
  BoundEstimate up = SolveBound(rp.spec.WithSide(Side::kUpper), c.solver);
  json out{{"experiment", c.name},
           {"estimand", rp.spec.estimand.Describe()},
           {"n", rp.spec.dataset.rows()},
           {"naive", Num(NaiveEstimate(rp.spec))},
           {"truth", rp.truth ? Num(*rp.truth) : json(nullptr)},
           {"lower", EstimateJson(lo)},
           {"upper", EstimateJson(up)}};
  if (lo.ok() && up.ok()) {
    IdentificationInterval iv = MakeIdentificationInterval(lo, up, c.solver.ci_level);
    out["outer_ci"] = {Num(iv.outer.lo), Num(iv.outer.hi)};
  }
  std::cout << out.dump(2) << "\n";
  return lo.ok() && up.ok() ? 0 : 2;
}

int Dro(const std::string& config_path, const std::string& mode,
        std::optional<std::uint64_t> seed) {
  ExperimentConfig c = LoadConfig(config_path);
  ApplySeed(c, seed);
  ResolvedProblem rp = ResolveProblem(c);
  double rho = 0.0;
  if (mode == "observable") {
    rho = RhoObservable(rp.spec, c.solver.al).rho;
  } else {
    if (!rp.dgp) {
      throw Error(ErrorCode::kConfigSchemaError, "omniscient radius needs a synthetic dataset");
    }
    rho = RhoOmniscient(*rp.dgp, Prepare(rp.spec).strata);
  }
  DroInterval iv = DroBounds(rp.spec, rho);
  json out{{"experiment", c.name},
           {"mode", mode},
           {"rho", Num(rho)},
           {"lower", Num(iv.lower)},
           {"upper", Num(iv.upper)}};
  std::cout << out.dump(2) << "\n";
  return 0;
}

int Experiment(const std::string& config_path, std::optional<std::size_t> replicates,
               std::uint64_t seed, std::optional<std::string> out_dir) {
  auto grid = LoadConfigGrid(config_path);
  for (auto& c : grid) {
    ApplySeed(c, seed);
    if (replicates) c.bootstrap.replicates = *replicates;
  }
  const fs::path dir = out_dir ? fs::path(*out_dir) : fs::path(grid.front().output_dir);
  ResultBundle bundle = RunGrid(grid);
  fs::create_directories(dir);
  WriteResultsCsv(bundle, dir / "results.csv");
  WriteResultsJson(bundle, dir / "results.json");
  for (const auto& e : bundle.experiments) {
    std::cout << e.experiment;
    for (const auto& m : e.methods) {
      if (m.ok == 0) continue;
      char buf[96];
      std::snprintf(buf, sizeof buf, "  %s [%.4f, %.4f]", m.method.c_str(), m.lower.mean,
                    m.upper.mean);
      std::cout << buf;
    }
    std::cout << "\n";
    for (const auto& w : e.warnings) std::cerr << "warning: " << e.experiment << ": " << w << "\n";
  }
  if (bundle.AnyAllInfeasible()) {
    std::cerr << "error: " << ErrorCodeName(ErrorCode::kAllReplicatesInfeasible)
              << ": an experiment had no feasible replicate\n";
    return 3;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Partial-identification bounds under selection bias"};
  app.require_subcommand(1);

  std::string config, out_dir, results, mode;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> n, replicates;
  std::optional<std::string> exp_out;
  std::uint64_t exp_seed = 0;

  auto* sim = app.add_subcommand("simulate", "Write population and observed samples as CSV");
  sim->add_option("--config", config, "Experiment config")->required()->check(CLI::ExistingFile);
  sim->add_option("--out", out_dir, "Output directory")->required();
  sim->add_option("--seed", seed, "Dataset seed");
  sim->add_option("--n", n, "Population draws");

  auto* bound = app.add_subcommand("bound", "Lower and upper bound on the full sample");
  bound->add_option("--config", config, "Experiment config")->required()->check(CLI::ExistingFile);
  bound->add_option("--seed", seed, "Dataset and solver seed");

  auto* exp = app.add_subcommand("experiment", "Bootstrap experiment grid");
  exp->add_option("--config", config, "Experiment config or grid")
      ->required()
      ->check(CLI::ExistingFile);
  exp->add_option("--replicates", replicates, "Bootstrap replicates B");
  exp->add_option("--seed", exp_seed, "Seed for data, resampling and restarts")->required();
  exp->add_option("--out", exp_out, "Output directory");

  auto* dro = app.add_subcommand("dro", "Chi-square DRO interval");
  dro->add_option("--config", config, "Experiment config")->required()->check(CLI::ExistingFile);
  dro->add_option("--mode", mode, "Radius choice")
      ->required()
      ->check(CLI::IsMember({"observable", "omniscient"}));
  dro->add_option("--seed", seed, "Dataset and solver seed");

  auto* plot = app.add_subcommand("plot", "Render results.json as SVG");
  plot->add_option("--results", results, "results.json")->required()->check(CLI::ExistingFile);
  plot->add_option("--out", out_dir, "SVG path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sim) return Simulate(config, out_dir, seed, n);
    if (*bound) return Bound(config, seed);
    if (*exp) return Experiment(config, replicates, exp_seed, exp_out);
    if (*dro) return Dro(config, mode, seed);
    if (*plot) {
      EmitPlot(ReadResultsJson(results), out_dir);
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
