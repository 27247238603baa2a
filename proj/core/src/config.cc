#include "shiftbound/config.h"

#include <algorithm>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include <json.hpp>

#include "shiftbound/error.h"

namespace shiftbound {

using nlohmann::json;

namespace {

[[noreturn]] void SchemaError(const std::string& where, const std::string& msg) {
  throw Error(ErrorCode::kConfigSchemaError, where + ": " + msg);
}

void CheckObject(const json& j, const std::string& where) {
  if (!j.is_object()) SchemaError(where, "expected an object");
}

void CheckKeys(const json& j, const std::string& where, std::initializer_list<std::string_view> allowed) {
  CheckObject(j, where);
  for (const auto& [key, _] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      SchemaError(where, "unknown key \"" + key + "\"");
    }
  }
}

template <typename T>
void Get(const json& j, const char* key, T& out, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception& e) {
    SchemaError(where + "." + key, e.what());
  }
}

template <typename T>
void GetOptional(const json& j, const char* key, std::optional<T>& out, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return;
  T v{};
  Get(j, key, v, where);
  out = v;
}

void OneOf(const std::string& value, std::initializer_list<std::string_view> allowed,
           const std::string& where) {
  if (std::find(allowed.begin(), allowed.end(), value) == allowed.end()) {
    SchemaError(where, "invalid value \"" + value + "\"");
  }
}

DatasetConfig ParseDataset(const json& j) {
  const std::string w = "dataset";
  CheckKeys(j, w, {"type", "dgp", "n", "seed", "x1_probs", "path", "schema"});
  DatasetConfig c;
  Get(j, "type", c.type, w);
  OneOf(c.type, {"synthetic", "csv"}, w + ".type");
  Get(j, "dgp", c.dgp, w);
  OneOf(c.dgp, {"binary-selection", "regression-substitute"}, w + ".dgp");
  Get(j, "n", c.n, w);
  Get(j, "seed", c.seed, w);
  GetOptional(j, "x1_probs", c.x1_probs, w);
  Get(j, "path", c.path, w);
  if (auto it = j.find("schema"); it != j.end()) {
    if (!it->is_array()) SchemaError(w + ".schema", "expected an array");
    for (const auto& col : *it) {
      const std::string cw = w + ".schema[]";
      CheckKeys(col, cw, {"name", "kind", "cardinality"});
      std::string name, kind = "discrete";
      int card = 2;
      Get(col, "name", name, cw);
      Get(col, "kind", kind, cw);
      Get(col, "cardinality", card, cw);
      OneOf(kind, {"discrete", "continuous"}, cw + ".kind");
      if (name.empty()) SchemaError(cw, "column name missing");
      c.schema.push_back(kind == "discrete" ? ColumnSpec::Discrete(name, card)
                                            : ColumnSpec::Continuous(name));
    }
  }
  if (c.type == "csv" && (c.path.empty() || c.schema.empty())) {
    SchemaError(w, "csv datasets need a path and a schema");
  }
  if (c.type == "synthetic" && c.n == 0) SchemaError(w + ".n", "must be positive");
  if (c.x1_probs) {
    const auto& p = *c.x1_probs;
    if (std::abs(p[0] + p[1] + p[2] - 1.0) > 1e-9 || *std::min_element(p.begin(), p.end()) <= 0) {
      SchemaError(w + ".x1_probs", "must be three positive probabilities summing to 1");
    }
  }
  return c;
}

SelectionConfig ParseSelection(const json& j) {
  const std::string w = "selection";
  CheckKeys(j, w, {"use_floor", "p_r1"});
  SelectionConfig c;
  Get(j, "use_floor", c.use_floor, w);
  GetOptional(j, "p_r1", c.p_r1, w);
  return c;
}

EstimandConfig ParseEstimand(const json& j) {
  const std::string w = "estimand";
  CheckKeys(j, w, {"kind", "h", "condition", "family", "outcome", "design", "intercept", "coord",
                   "y", "a", "x"});
  EstimandConfig c;
  Get(j, "kind", c.kind, w);
  OneOf(c.kind, {"mean", "conditional_mean", "m_coefficient", "ate"}, w + ".kind");
  Get(j, "h", c.h, w);
  Get(j, "condition", c.condition, w);
  Get(j, "family", c.family, w);
  OneOf(c.family, {"linear", "logistic"}, w + ".family");
  Get(j, "outcome", c.outcome, w);
  Get(j, "design", c.design, w);
  Get(j, "intercept", c.intercept, w);
  Get(j, "coord", c.coord, w);
  Get(j, "y", c.y, w);
  Get(j, "a", c.a, w);
  Get(j, "x", c.x, w);
  return c;
}

ConstraintsConfig ParseConstraints(const json& j) {
  const std::string w = "constraints";
  CheckKeys(j, w, {"set", "race", "income", "outcome", "moments", "covariance", "targets"});
  ConstraintsConfig c;
  Get(j, "set", c.set, w);
  OneOf(c.set, {"none", "unrestricted-base", "partial-race-income", "full-race-income",
                "race-income-outcome", "stratum-pinning"},
        w + ".set");
  Get(j, "race", c.race, w);
  Get(j, "income", c.income, w);
  Get(j, "outcome", c.outcome, w);
  Get(j, "targets", c.targets, w);
  if (auto it = j.find("moments"); it != j.end()) {
    if (!it->is_array()) SchemaError(w + ".moments", "expected an array");
    for (const auto& m : *it) {
      const std::string mw = w + ".moments[]";
      CheckKeys(m, mw, {"expr", "target"});
      MomentConfig mc;
      Get(m, "expr", mc.expr, mw);
      GetOptional(m, "target", mc.target, mw);
      if (mc.expr.empty()) SchemaError(mw, "expr missing");
      c.moments.push_back(mc);
    }
  }
  if (auto it = j.find("covariance"); it != j.end()) {
    if (!it->is_array()) SchemaError(w + ".covariance", "expected an array");
    for (const auto& m : *it) {
      const std::string mw = w + ".covariance[]";
      CheckKeys(m, mw, {"u", "v", "sign"});
      CovarianceConfig cc;
      Get(m, "u", cc.u, mw);
      Get(m, "v", cc.v, mw);
      Get(m, "sign", cc.sign, mw);
      if (cc.sign != 1 && cc.sign != -1) SchemaError(mw + ".sign", "must be +1 or -1");
      c.covariance.push_back(cc);
    }
  }
  return c;
}

RatioModelConfig ParseRatioModel(const json& j) {
  const std::string w = "ratio_model";
  CheckKeys(j, w, {"kind", "key", "group_a", "group_b", "basis"});
  RatioModelConfig c;
  Get(j, "kind", c.kind, w);
  OneOf(c.kind, {"unrestricted", "separable", "targeted", "basis"}, w + ".kind");
  Get(j, "key", c.key, w);
  Get(j, "group_a", c.group_a, w);
  Get(j, "group_b", c.group_b, w);
  Get(j, "basis", c.basis, w);
  return c;
}

SolveOptions ParseSolver(const json& j) {
  const std::string w = "solver";
  CheckKeys(j, w, {"path", "step_size", "max_outer_iters", "max_inner_iters", "inner_tol",
                   "grad_tol", "penalty_mu", "mu_growth", "mu_max", "restarts", "seed",
                   "constraint_tol", "init_perturbation", "t_min", "ci_level",
                   "mbound_sample_split"});
  SolveOptions o;
  std::string path = "auto";
  Get(j, "path", path, w);
  OneOf(path, {"auto", "lp", "al"}, w + ".path");
  o.path = path == "lp" ? SolvePath::kLp : path == "al" ? SolvePath::kAugmentedLagrangian
                                                          : SolvePath::kAuto;
  auto& s = o.al;
  Get(j, "step_size", s.step_size, w);
  Get(j, "max_outer_iters", s.max_outer_iters, w);
  Get(j, "max_inner_iters", s.max_inner_iters, w);
  Get(j, "inner_tol", s.inner_tol, w);
  Get(j, "grad_tol", s.grad_tol, w);
  Get(j, "penalty_mu", s.penalty_mu, w);
  Get(j, "mu_growth", s.mu_growth, w);
  Get(j, "mu_max", s.mu_max, w);
  Get(j, "restarts", s.restarts, w);
  Get(j, "seed", s.seed, w);
  Get(j, "constraint_tol", s.constraint_tol, w);
  Get(j, "init_perturbation", s.init_perturbation, w);
  Get(j, "t_min", o.convex.t_min, w);
  Get(j, "ci_level", o.ci_level, w);
  Get(j, "mbound_sample_split", o.mbound_sample_split, w);
  o.convex.ci_level = o.ci_level;
  try {
    s.Validate();
  } catch (const Error& e) {
    SchemaError(w, e.what());
  }
  if (!(o.ci_level > 0.0 && o.ci_level < 1.0)) SchemaError(w + ".ci_level", "must be in (0,1)");
  return o;
}

ExperimentConfig ParseOne(const json& j) {
  CheckKeys(j, "config", {"name", "dataset", "selection", "estimand", "constraints",
                          "ratio_model", "solver", "bootstrap", "dro", "output_dir"});
  ExperimentConfig c;
  Get(j, "name", c.name, "config");
  Get(j, "output_dir", c.output_dir, "config");
  if (j.contains("dataset")) c.dataset = ParseDataset(j["dataset"]);
  if (j.contains("selection")) c.selection = ParseSelection(j["selection"]);
  if (j.contains("estimand")) c.estimand = ParseEstimand(j["estimand"]);
  if (j.contains("constraints")) c.constraints = ParseConstraints(j["constraints"]);
  if (j.contains("ratio_model")) c.ratio_model = ParseRatioModel(j["ratio_model"]);
  if (j.contains("solver")) c.solver = ParseSolver(j["solver"]);
  if (j.contains("bootstrap")) {
    const json& b = j["bootstrap"];
    CheckKeys(b, "bootstrap", {"replicates", "seed"});
    Get(b, "replicates", c.bootstrap.replicates, "bootstrap");
    Get(b, "seed", c.bootstrap.seed, "bootstrap");
    if (c.bootstrap.replicates == 0) SchemaError("bootstrap.replicates", "must be >= 1");
  }
  if (j.contains("dro")) {
    CheckKeys(j["dro"], "dro", {"mode"});
    Get(j["dro"], "mode", c.dro.mode, "dro");
    OneOf(c.dro.mode, {"both", "observable", "omniscient", "off"}, "dro.mode");
  }

  const bool synthetic = c.dataset.type == "synthetic";
  const auto& cons = c.constraints;
  for (const auto& m : cons.moments) {
    if (synthetic && m.target) {
      SchemaError("constraints.moments", "synthetic mode takes targets from the oracle");
    }
    if (!synthetic && !m.target) SchemaError("constraints.moments", "csv mode needs a target");
  }
  if (synthetic && !cons.targets.empty()) {
    SchemaError("constraints.targets", "synthetic mode takes targets from the oracle");
  }
  if (!synthetic && cons.set == "stratum-pinning") {
    SchemaError("constraints.set", "stratum-pinning needs a synthetic process");
  }
  if (!synthetic && c.selection.use_floor && !c.selection.p_r1) {
    SchemaError("selection.p_r1", "csv mode with a floor needs Pr(R=1)");
  }
  return c;
}

json ParseJson(std::string_view text) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kConfigSchemaError, std::string("invalid JSON: ") + e.what());
  }
}

Expr Product(std::initializer_list<Expr> parts) {
  Expr out = Expr::One();
  for (const auto& p : parts) out = out * p;
  return out;
}

}  // namespace

std::vector<ExperimentConfig> ParseConfigGrid(std::string_view json_text) {
  json doc = ParseJson(json_text);
  CheckObject(doc, "config");
  std::vector<ExperimentConfig> out;
  if (auto it = doc.find("grid"); it != doc.end()) {
    json grid = *it;
    doc.erase("grid");
    if (!grid.is_array() || grid.empty()) SchemaError("grid", "expected a non-empty array");
    for (const auto& patch : grid) {
      CheckObject(patch, "grid[]");
      if (patch.contains("grid")) SchemaError("grid[]", "nested grids are not allowed");
      json merged = doc;
      merged.merge_patch(patch);
      out.push_back(ParseOne(merged));
    }
  } else {
    out.push_back(ParseOne(doc));
  }
  return out;
}

std::vector<ExperimentConfig> LoadConfigGrid(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ParseConfigGrid(ss.str());
}

ExperimentConfig LoadConfig(const std::filesystem::path& path) {
  auto grid = LoadConfigGrid(path);
  if (grid.size() != 1) {
    throw Error(ErrorCode::kConfigSchemaError, "expected a single experiment, found a grid of " +
                                                   std::to_string(grid.size()));
  }
  return grid.front();
}

SyntheticDGP MakeDgp(const DatasetConfig& config) {
  SyntheticDGP dgp = config.dgp == "regression-substitute" ? SyntheticDGP::RegressionSubstitute()
                                                            : SyntheticDGP::BinarySelection();
  if (config.x1_probs) dgp.x1_probs = *config.x1_probs;
  return dgp;
}

std::vector<MomentConstraint> NamedConstraintSet(const ConstraintsConfig& config) {
  const Expr r = Expr::Col(config.race), nr = Expr::Not(config.race);
  const Expr i = Expr::Col(config.income), ni = Expr::Not(config.income);
  const Expr o = Expr::Col(config.outcome);
  auto eq = [](Expr e) { return MomentConstraint::Equality(std::move(e), 0.0); };
  std::vector<MomentConstraint> base{eq(Product({i, r})), eq(Product({r, ni})),
                                     eq(Product({nr, i})), eq(Product({nr, ni}))};
  const std::string& s = config.set;
  if (s == "none" || s == "stratum-pinning") return {};
  if (s == "partial-race-income") return {base[1], base[3]};
  if (s == "race-income-outcome") {
    base.push_back(eq(Product({o, r})));
    base.push_back(eq(Product({o, nr})));
  }
  return base;
}

Estimand MakeEstimand(const EstimandConfig& c) {
  if (c.kind == "mean") return Estimand::Mean(ParseExpr(c.h));
  if (c.kind == "conditional_mean") {
    return Estimand::ConditionalMean(ParseExpr(c.h), ParseExpr(c.condition));
  }
  if (c.kind == "m_coefficient") {
    std::vector<Expr> design;
    for (const auto& d : c.design) design.push_back(ParseExpr(d));
    return Estimand::MCoefficient(c.family == "logistic" ? MFamily::kLogistic : MFamily::kLinear,
                                  c.outcome, std::move(design), c.intercept, c.coord);
  }
  return Estimand::DiscreteATE(c.y, c.a, c.x);
}

RatioModelSpec MakeRatioModel(const RatioModelConfig& c, const Dataset& ds) {
  if (c.kind == "targeted") return RatioModelSpec::Targeted(c.key);
  if (c.kind == "separable") return RatioModelSpec::Separable(c.group_a, c.group_b);
  if (c.kind == "basis") {
    std::vector<Expr> basis;
    for (const auto& b : c.basis) basis.push_back(ParseExpr(b));
    return RatioModelSpec::LinearBasis(std::move(basis));
  }
  return RatioModelSpec::Tabular(ds.DiscreteColumnNames());
}

ResolvedProblem ResolveProblem(const ExperimentConfig& config) {
  std::optional<SyntheticDGP> dgp;
  std::optional<Dataset> ds;
  if (config.dataset.type == "synthetic") {
    dgp = MakeDgp(config.dataset);
    ds = Simulate(*dgp, config.dataset.n, config.dataset.seed).observed;
  } else {
    try {
      ds = LoadDataset(config.dataset.path, config.dataset.schema);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kIoError) throw Error(ErrorCode::kDatasetError, e.what());
      throw;
    }
  }

  const auto& cc = config.constraints;
  std::vector<MomentConstraint> cons = NamedConstraintSet(cc);
  if (dgp) {
    for (auto& c : cons) c.target = ExactMoment(*dgp, c.expr);
    if (cc.set == "stratum-pinning") {
      const auto cols = dgp->DiscreteColumns();
      for (const auto& pt : EnumerateSupport(*dgp)) {
        Expr e = Expr::One();
        for (std::size_t k = 0; k < cols.size(); ++k) e = e * Expr::Eq(cols[k], pt.values[k]);
        cons.push_back(MomentConstraint::Equality(std::move(e), pt.p));
      }
    }
  } else {
    if (cc.targets.size() != cons.size()) {
      throw Error(ErrorCode::kConfigSchemaError,
                  "constraints.targets: the " + cc.set + " set needs " +
                      std::to_string(cons.size()) + " targets");
    }
    for (std::size_t k = 0; k < cons.size(); ++k) cons[k].target = cc.targets[k];
  }
  for (const auto& m : cc.moments) {
    Expr e = ParseExpr(m.expr);
    const double target = dgp ? ExactMoment(*dgp, e) : *m.target;
    cons.push_back(MomentConstraint::Equality(std::move(e), target));
  }
  for (const auto& cv : cc.covariance) {
    cons.push_back(MomentConstraint::CovarianceSign(cv.u, cv.v, cv.sign));
  }

  double floor = 0.0;
  if (config.selection.use_floor) {
    floor = SelectionFloor(dgp ? SelectionRate(*dgp) : *config.selection.p_r1);
  }
  Estimand est = MakeEstimand(config.estimand);
  RatioModelSpec model = MakeRatioModel(config.ratio_model, *ds);
  ResolvedProblem out{ProblemSpec(std::move(*ds), std::move(cons), est, std::move(model),
                                  Side::kLower, floor),
                      dgp, std::nullopt};
  out.spec.Validate();
  if (dgp) {
    try {
      out.truth = TrueValueExact(*dgp, est);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kContinuousSupport) throw;
      out.truth = TrueValueMonteCarlo(*dgp, est, 1000000, 20211).value;
    }
  }
  return out;
}

}  // namespace shiftbound
