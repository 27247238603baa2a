#include "shiftbound/experiment.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "shiftbound/dro.h"
#include "shiftbound/error.h"
#include "shiftbound/solve.h"

namespace shiftbound {

using Eigen::VectorXd;
using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kSpreadWarning = 1e-2;

std::vector<double> ToStd(const VectorXd& v) { return {v.data(), v.data() + v.size()}; }

void AddWarning(std::vector<std::string>& warnings, const std::string& w) {
  if (std::find(warnings.begin(), warnings.end(), w) == warnings.end()) warnings.push_back(w);
}

ResultRow FromEstimate(const std::string& experiment, std::size_t b, const BoundEstimate& e) {
  ResultRow r;
  r.experiment = experiment;
  r.method = "ours";
  r.side = std::string(SideName(e.side));
  r.replicate = b;
  r.value = e.value;
  r.sigma2 = e.diagnostics.variance_available ? e.sigma2 : kNaN;
  r.ci_lo = e.ci_lo;
  r.ci_hi = e.ci_hi;
  r.status = std::string(BoundStatusName(e.diagnostics.status));
  r.restart_spread = e.diagnostics.restart_spread;
  r.constraint_violation = e.diagnostics.constraint_violation;
  r.duals = ToStd(e.duals);
  r.alpha = ToStd(e.alpha_star);
  r.message = e.diagnostics.message;
  return r;
}

ResultRow PointRow(const std::string& experiment, const std::string& method, Side side,
                   std::size_t b, double value) {
  ResultRow r;
  r.experiment = experiment;
  r.method = method;
  r.side = std::string(SideName(side));
  r.replicate = b;
  r.value = value;
  r.ci_lo = value;
  r.ci_hi = value;
  r.status = "optimal";
  return r;
}

ResultRow FailedRow(const std::string& experiment, const std::string& method, Side side,
                    std::size_t b, const std::string& message) {
  ResultRow r = PointRow(experiment, method, side, b, kNaN);
  r.status = "failed";
  r.message = message;
  return r;
}

struct ReplicateOutput {
  std::vector<ResultRow> rows;
  bool infeasible = false;
  std::optional<double> rho_observable;
  std::optional<double> rho_omniscient;
  std::vector<std::string> warnings;
};

struct Methods {
  bool observable = false;
  bool omniscient = false;
};

void AddDroRows(ReplicateOutput& out, const std::string& name, const std::string& method,
                std::size_t b, const ProblemSpec& spec, double rho) {
  try {
    DroInterval iv = DroBounds(spec, rho);
    out.rows.push_back(PointRow(name, method, Side::kLower, b, iv.lower));
    out.rows.push_back(PointRow(name, method, Side::kUpper, b, iv.upper));
    out.rows[out.rows.size() - 2].rho = rho;
    out.rows.back().rho = rho;
  } catch (const Error& e) {
    out.rows.push_back(FailedRow(name, method, Side::kLower, b, e.what()));
    out.rows.push_back(FailedRow(name, method, Side::kUpper, b, e.what()));
  }
}

ReplicateOutput RunReplicate(const ExperimentConfig& config, const ResolvedProblem& rp,
                             Methods methods, std::size_t b) {
  const std::string& name = config.name;
  ReplicateOutput out;
  const Dataset& full = rp.spec.dataset;
  const auto idx = BootstrapIndices(full.rows(), config.bootstrap.seed + b);
  const ProblemSpec spec = rp.spec.WithDataset(full.SelectRows(idx));

  BoundEstimate lo = SolveBound(spec.WithSide(Side::kLower), config.solver);
  BoundEstimate up = SolveBound(spec.WithSide(Side::kUpper), config.solver);
  const bool infeasible = lo.diagnostics.status == BoundStatus::kInfeasible ||
                          up.diagnostics.status == BoundStatus::kInfeasible;
  if (infeasible) {
    out.infeasible = true;
  } else {
    for (const BoundEstimate* e : {&lo, &up}) {
      out.rows.push_back(FromEstimate(name, b, *e));
      for (const auto& w : e->diagnostics.warnings) AddWarning(out.warnings, w);
      if (e->ok() && e->diagnostics.restart_spread > kSpreadWarning) {
        AddWarning(out.warnings, "restart spread above 1e-2 on the " +
                                     std::string(SideName(e->side)) + " side");
      }
    }
  }

  if (methods.observable && !infeasible) {
    std::vector<VectorXd> starts;
    if (lo.ok() && !UsesLp(spec, config.solver)) starts.push_back(lo.alpha_star);
    if (up.ok() && !UsesLp(spec, config.solver)) starts.push_back(up.alpha_star);
    try {
      RhoEstimate rho = RhoObservable(spec, config.solver.al, starts);
      out.rho_observable = rho.rho;
      AddDroRows(out, name, "dro_observable", b, spec, rho.rho);
    } catch (const Error& e) {
      out.rows.push_back(FailedRow(name, "dro_observable", Side::kLower, b, e.what()));
      out.rows.push_back(FailedRow(name, "dro_observable", Side::kUpper, b, e.what()));
    }
  }
  if (methods.omniscient) {
    try {
      const double rho = RhoOmniscient(*rp.dgp, Prepare(spec).strata);
      out.rho_omniscient = rho;
      AddDroRows(out, name, "dro_omniscient", b, spec, rho);
    } catch (const Error& e) {
      out.rows.push_back(FailedRow(name, "dro_omniscient", Side::kLower, b, e.what()));
      out.rows.push_back(FailedRow(name, "dro_omniscient", Side::kUpper, b, e.what()));
    }
  }
  try {
    const double v = NaiveEstimate(spec);
    out.rows.push_back(PointRow(name, "naive", Side::kLower, b, v));
    out.rows.push_back(PointRow(name, "naive", Side::kUpper, b, v));
  } catch (const Error& e) {
    out.rows.push_back(FailedRow(name, "naive", Side::kLower, b, e.what()));
    out.rows.push_back(FailedRow(name, "naive", Side::kUpper, b, e.what()));
  }
  return out;
}

MethodSummary SummarizeMethod(const std::string& method, const std::vector<ResultRow>& rows,
                              std::size_t replicates) {
  MethodSummary s;
  s.method = method;
  std::vector<double> lows, ups;
  for (std::size_t b = 0; b < replicates; ++b) {
    const ResultRow *lo = nullptr, *up = nullptr;
    for (const auto& r : rows) {
      if (r.method != method || r.replicate != b || r.status != "optimal") continue;
      (r.side == "lower" ? lo : up) = &r;
    }
    if (lo && up) {
      lows.push_back(lo->value);
      ups.push_back(up->value);
    }
  }
  s.ok = lows.size();
  s.lower = Summarize(lows);
  s.upper = Summarize(ups);
  return s;
}

std::optional<double> MeanOf(const std::vector<double>& v) {
  if (v.empty()) return std::nullopt;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

std::string FormatDouble(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string CsvField(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

json Num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double NumOr(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return kNaN;
  return it->get<double>();
}

json OptNum(const std::optional<double>& v) { return v ? Num(*v) : json(nullptr); }

std::optional<double> ReadOpt(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<double>();
}

json ToJson(const EndpointSummary& s) {
  return {{"mean", Num(s.mean)}, {"std", Num(s.std)}, {"p_lo", Num(s.p_lo)}, {"p_hi", Num(s.p_hi)}};
}

EndpointSummary EndpointFromJson(const json& j) {
  return {NumOr(j, "mean"), NumOr(j, "std"), NumOr(j, "p_lo"), NumOr(j, "p_hi")};
}

std::vector<double> NumList(const json& j) {
  std::vector<double> out;
  for (const auto& x : j) out.push_back(x.is_null() ? kNaN : x.get<double>());
  return out;
}

json NumArray(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(Num(x));
  return a;
}

}  // namespace

const MethodSummary* ExperimentSummary::Method(const std::string& name) const {
  for (const auto& m : methods) {
    if (m.method == name) return &m;
  }
  return nullptr;
}

bool ResultBundle::AnyAllInfeasible() const {
  for (const auto& e : experiments) {
    if (e.AllInfeasible()) return true;
  }
  return false;
}

double NaiveEstimate(const ProblemSpec& spec) {
  const ProblemSpec lower = spec.WithSide(Side::kLower);
  PreparedProblem prep = Prepare(lower);
  auto objective = MakeEstimandObjective(lower, prep, SolverSettings{})();
  return objective->Evaluate(VectorXd::Ones(static_cast<Eigen::Index>(prep.strata.size()))).value;
}

ResultBundle RunExperiment(const ExperimentConfig& config) {
  const ResolvedProblem rp = ResolveProblem(config);
  const auto& est = rp.spec.estimand;
  const bool dro_ok =
      est.kind == Estimand::Kind::kMean || est.kind == Estimand::Kind::kConditionalMean;
  const std::string& mode = config.dro.mode;

  ExperimentSummary summary;
  summary.experiment = config.name;
  summary.estimand = est.Describe();
  summary.truth = rp.truth;
  summary.naive = NaiveEstimate(rp.spec);
  summary.n = rp.spec.dataset.rows();
  summary.replicates = config.bootstrap.replicates;

  Methods methods;
  methods.observable = dro_ok && (mode == "both" || mode == "observable");
  methods.omniscient = dro_ok && rp.dgp && (mode == "both" || mode == "omniscient");
  if (!dro_ok && mode != "off") {
    summary.warnings.push_back("DRO baselines skipped: estimand is not a (conditional) mean");
  }
  if (dro_ok && !rp.dgp && (mode == "both" || mode == "omniscient")) {
    summary.warnings.push_back("DRO omniscient skipped: no data-generating process");
  }

  std::vector<std::future<ReplicateOutput>> futures;
  for (std::size_t b = 0; b < config.bootstrap.replicates; ++b) {
    futures.push_back(std::async(std::launch::async, [&config, &rp, methods, b] {
      return RunReplicate(config, rp, methods, b);
    }));
  }
  ResultBundle bundle;
  std::vector<double> rho_obs, rho_omni;
  for (auto& f : futures) {
    ReplicateOutput r = f.get();
    for (auto& row : r.rows) bundle.rows.push_back(std::move(row));
    if (r.infeasible) ++summary.infeasible;
    if (r.rho_observable) rho_obs.push_back(*r.rho_observable);
    if (r.rho_omniscient) rho_omni.push_back(*r.rho_omniscient);
    for (const auto& w : r.warnings) AddWarning(summary.warnings, w);
  }
  summary.rho_observable = MeanOf(rho_obs);
  summary.rho_omniscient = MeanOf(rho_omni);
  if (summary.infeasible > 0) {
    summary.warnings.push_back(std::to_string(summary.infeasible) + " of " +
                               std::to_string(summary.replicates) +
                               " replicates had no feasible reweighting");
  }

  std::vector<std::string> names{"ours"};
  if (methods.observable) names.push_back("dro_observable");
  if (methods.omniscient) names.push_back("dro_omniscient");
  names.push_back("naive");
  for (const auto& m : names) {
    summary.methods.push_back(SummarizeMethod(m, bundle.rows, summary.replicates));
  }
  bundle.experiments.push_back(std::move(summary));
  return bundle;
}

ResultBundle RunGrid(const std::vector<ExperimentConfig>& configs) {
  std::vector<std::future<ResultBundle>> futures;
  for (const auto& c : configs) {
    futures.push_back(std::async(std::launch::async, [&c] { return RunExperiment(c); }));
  }
  ResultBundle out;
  for (auto& f : futures) {
    ResultBundle b = f.get();
    for (auto& r : b.rows) out.rows.push_back(std::move(r));
    for (auto& e : b.experiments) out.experiments.push_back(std::move(e));
  }
  return out;
}

void WriteResultsCsv(const ResultBundle& bundle, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out << "experiment,method,side,replicate,value,sigma2,ci_lo,ci_hi,status,restart_spread,"
         "constraint_violation\n";
  for (const auto& r : bundle.rows) {
    out << CsvField(r.experiment) << ',' << r.method << ',' << r.side << ',' << r.replicate << ','
        << FormatDouble(r.value) << ',' << FormatDouble(r.sigma2) << ',' << FormatDouble(r.ci_lo)
        << ',' << FormatDouble(r.ci_hi) << ',' << r.status << ','
        << FormatDouble(r.restart_spread) << ',' << FormatDouble(r.constraint_violation) << '\n';
  }
  if (!out) throw Error(ErrorCode::kIoError, "failed writing " + path.string());
}

void WriteResultsJson(const ResultBundle& bundle, const std::filesystem::path& path) {
  json doc;
  json exps = json::array();
  for (const auto& e : bundle.experiments) {
    json methods = json::array();
    for (const auto& m : e.methods) {
      methods.push_back({{"method", m.method},
                         {"ok", m.ok},
                         {"lower", ToJson(m.lower)},
                         {"upper", ToJson(m.upper)}});
    }
    exps.push_back({{"experiment", e.experiment},
                    {"estimand", e.estimand},
                    {"truth", OptNum(e.truth)},
                    {"naive", Num(e.naive)},
                    {"n", e.n},
                    {"replicates", e.replicates},
                    {"infeasible", e.infeasible},
                    {"methods", methods},
                    {"rho_observable", OptNum(e.rho_observable)},
                    {"rho_omniscient", OptNum(e.rho_omniscient)},
                    {"warnings", e.warnings}});
  }
  json rows = json::array();
  for (const auto& r : bundle.rows) {
    rows.push_back({{"experiment", r.experiment},
                    {"method", r.method},
                    {"side", r.side},
                    {"replicate", r.replicate},
                    {"value", Num(r.value)},
                    {"sigma2", Num(r.sigma2)},
                    {"ci_lo", Num(r.ci_lo)},
                    {"ci_hi", Num(r.ci_hi)},
                    {"status", r.status},
                    {"restart_spread", Num(r.restart_spread)},
                    {"constraint_violation", Num(r.constraint_violation)},
                    {"rho", OptNum(r.rho)},
                    {"duals", NumArray(r.duals)},
                    {"alpha", NumArray(r.alpha)},
                    {"message", r.message}});
  }
  doc["experiments"] = std::move(exps);
  doc["rows"] = std::move(rows);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out << doc.dump(2) << '\n';
  if (!out) throw Error(ErrorCode::kIoError, "failed writing " + path.string());
}

ResultBundle ReadResultsJson(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  ResultBundle bundle;
  try {
    const json doc = json::parse(in);
    for (const auto& e : doc.at("experiments")) {
      ExperimentSummary s;
      s.experiment = e.at("experiment").get<std::string>();
      s.estimand = e.value("estimand", "");
      s.truth = ReadOpt(e, "truth");
      s.naive = NumOr(e, "naive");
      s.n = e.value("n", std::size_t{0});
      s.replicates = e.value("replicates", std::size_t{0});
      s.infeasible = e.value("infeasible", std::size_t{0});
      for (const auto& m : e.at("methods")) {
        MethodSummary ms;
        ms.method = m.at("method").get<std::string>();
        ms.ok = m.value("ok", std::size_t{0});
        ms.lower = EndpointFromJson(m.at("lower"));
        ms.upper = EndpointFromJson(m.at("upper"));
        s.methods.push_back(ms);
      }
      s.rho_observable = ReadOpt(e, "rho_observable");
      s.rho_omniscient = ReadOpt(e, "rho_omniscient");
      s.warnings = e.value("warnings", std::vector<std::string>{});
      bundle.experiments.push_back(std::move(s));
    }
    for (const auto& r : doc.at("rows")) {
      ResultRow row;
      row.experiment = r.at("experiment").get<std::string>();
      row.method = r.at("method").get<std::string>();
      row.side = r.at("side").get<std::string>();
      row.replicate = r.at("replicate").get<std::size_t>();
      row.value = NumOr(r, "value");
      row.sigma2 = NumOr(r, "sigma2");
      row.ci_lo = NumOr(r, "ci_lo");
      row.ci_hi = NumOr(r, "ci_hi");
      row.status = r.at("status").get<std::string>();
      row.restart_spread = NumOr(r, "restart_spread");
      row.constraint_violation = NumOr(r, "constraint_violation");
      row.rho = ReadOpt(r, "rho");
      if (r.contains("duals")) row.duals = NumList(r["duals"]);
      if (r.contains("alpha")) row.alpha = NumList(r["alpha"]);
      row.message = r.value("message", "");
      bundle.rows.push_back(std::move(row));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kIoError, "malformed results file " + path.string() + ": " + e.what());
  }
  return bundle;
}

}  // namespace shiftbound
