#include "shiftbound/synthetic.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "shiftbound/bilevel.h"
#include "shiftbound/dro.h"
#include "shiftbound/error.h"
#include "shiftbound/inference.h"
#include "shiftbound/m_estimation.h"

namespace shiftbound {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

double Expit(double z) { return 1.0 / (1.0 + std::exp(-z)); }

bool IsSubstitute(const SyntheticDGP& dgp) {
  return dgp.kind == SyntheticDGP::Kind::kRegressionSubstitute;
}

struct Covariates {
  int x1 = 0;
  int x2 = 0;
};

double PrA(const SyntheticDGP& dgp, Covariates c) {
  if (IsSubstitute(dgp)) return Expit(-0.1 + 0.4 * c.x1 - 0.8 * c.x2);
  return Expit(c.x2 - c.x1);
}

double PrY(Covariates c, int a) { return Expit(2.0 * a - c.x1 + c.x2); }

double MeanYContinuous(Covariates c, int a) {
  return 0.5 + kSubstituteLinearA * a - 0.6 * (c.x1 == 1) - 1.1 * (c.x1 == 2) + 0.8 * c.x2;
}

double PrYb(Covariates c, int a) {
  return Expit(-0.4 + kSubstituteLogisticA * a + 0.7 * (c.x1 == 1) + 1.2 * (c.x1 == 2) -
               0.5 * c.x2);
}

double PrY2(const SyntheticDGP& dgp, Covariates c, int a) {
  if (IsSubstitute(dgp)) return Expit(-0.3 + 0.3 * c.x1 - 0.5 * a + 0.4 * c.x2);
  return Expit(0.5 * (c.x1 + c.x2) - a);
}

double PrR(const SyntheticDGP& dgp, Covariates c) {
  if (IsSubstitute(dgp)) return Expit(-0.3 + 0.9 * c.x1 - 1.2 * c.x2);
  return Expit(c.x1 - c.x2);
}

double Bern(double p, int v) { return v == 1 ? p : 1.0 - p; }

void RequireDiscrete(const SyntheticDGP& dgp, const std::vector<std::string>& cols) {
  const auto disc = dgp.DiscreteColumns();
  for (const auto& c : cols) {
    if (std::find(disc.begin(), disc.end(), c) == disc.end()) {
      throw Error(ErrorCode::kContinuousSupport,
                  c + " is not a discrete column of the " + dgp.Name() + " process");
    }
  }
}

// Support points as a dataset (one row per point) with their P masses.
Dataset SupportDataset(const SyntheticDGP& dgp, const std::vector<SupportPoint>& pts) {
  std::vector<ColumnSpec> schema;
  for (const auto& c : dgp.ObservedSchema()) {
    if (c.kind == ColumnKind::kDiscrete) schema.push_back(c);
  }
  MatrixXd values(static_cast<Index>(pts.size()), static_cast<Index>(schema.size()));
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = 0; j < schema.size(); ++j) {
      values(static_cast<Index>(i), static_cast<Index>(j)) = pts[i].values[j];
    }
  }
  return Dataset(std::move(schema), std::move(values));
}

}  // namespace

SyntheticDGP SyntheticDGP::BinarySelection() { return SyntheticDGP{}; }

SyntheticDGP SyntheticDGP::RegressionSubstitute() {
  SyntheticDGP d;
  d.kind = Kind::kRegressionSubstitute;
  d.x1_probs = {0.45, 0.35, 0.20};
  d.p_x2 = 0.45;
  return d;
}

std::string SyntheticDGP::Name() const {
  return IsSubstitute(*this) ? "regression-substitute" : "binary-selection";
}

std::vector<ColumnSpec> SyntheticDGP::ObservedSchema() const {
  if (IsSubstitute(*this)) {
    return {ColumnSpec::Continuous("Y"), ColumnSpec::Discrete("Yb"), ColumnSpec::Discrete("Y2"),
            ColumnSpec::Discrete("A"),   ColumnSpec::Discrete("X1", 3), ColumnSpec::Discrete("X2")};
  }
  return {ColumnSpec::Discrete("Y"), ColumnSpec::Discrete("Y2"), ColumnSpec::Discrete("A"),
          ColumnSpec::Discrete("X1", 3), ColumnSpec::Discrete("X2")};
}

std::vector<ColumnSpec> SyntheticDGP::FullSchema() const {
  auto s = ObservedSchema();
  s.push_back(ColumnSpec::Discrete("R"));
  return s;
}

std::vector<std::string> SyntheticDGP::DiscreteColumns() const {
  std::vector<std::string> out;
  for (const auto& c : ObservedSchema()) {
    if (c.kind == ColumnKind::kDiscrete) out.push_back(c.name);
  }
  return out;
}

SimulatedData Simulate(const SyntheticDGP& dgp, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw Error(ErrorCode::kOutOfRange, "N must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  auto draw = [&](double p) { return unif(rng) < p ? 1 : 0; };
  const bool sub = IsSubstitute(dgp);
  const auto schema = dgp.FullSchema();
  MatrixXd full(static_cast<Index>(n), static_cast<Index>(schema.size()));
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < n; ++i) {
    const double u = unif(rng);
    Covariates c;
    c.x1 = u < dgp.x1_probs[0] ? 0 : (u < dgp.x1_probs[0] + dgp.x1_probs[1] ? 1 : 2);
    c.x2 = draw(dgp.p_x2);
    const int a = draw(PrA(dgp, c));
    const auto row = static_cast<Index>(i);
    if (sub) {
      const double y = MeanYContinuous(c, a) + noise(rng);
      const int yb = draw(PrYb(c, a));
      const int y2 = draw(PrY2(dgp, c, a));
      const int r = draw(PrR(dgp, c));
      full.row(row) << y, yb, y2, a, c.x1, c.x2, r;
    } else {
      const int y = draw(PrY(c, a));
      const int y2 = draw(PrY2(dgp, c, a));
      const int r = draw(PrR(dgp, c));
      full.row(row) << y, y2, a, c.x1, c.x2, r;
    }
    if (full(row, full.cols() - 1) == 1.0) kept.push_back(i);
  }
  if (kept.empty()) throw Error(ErrorCode::kDatasetError, "no simulated row was selected");
  MatrixXd obs(static_cast<Index>(kept.size()), full.cols() - 1);
  for (std::size_t k = 0; k < kept.size(); ++k) {
    obs.row(static_cast<Index>(k)) = full.row(static_cast<Index>(kept[k])).head(full.cols() - 1);
  }
  return {Dataset(schema, std::move(full)), Dataset(dgp.ObservedSchema(), std::move(obs))};
}

std::vector<SupportPoint> EnumerateSupport(const SyntheticDGP& dgp) {
  std::vector<SupportPoint> out;
  const bool sub = IsSubstitute(dgp);
  for (int x1 = 0; x1 < 3; ++x1) {
    for (int x2 = 0; x2 < 2; ++x2) {
      const Covariates c{x1, x2};
      const double px = dgp.x1_probs[static_cast<std::size_t>(x1)] * Bern(dgp.p_x2, x2);
      for (int a = 0; a < 2; ++a) {
        const double pa = px * Bern(PrA(dgp, c), a);
        for (int y = 0; y < 2; ++y) {
          const double py = pa * Bern(sub ? PrYb(c, a) : PrY(c, a), y);
          for (int y2 = 0; y2 < 2; ++y2) {
            SupportPoint pt;
            pt.p = py * Bern(PrY2(dgp, c, a), y2);
            pt.selection = PrR(dgp, c);
            pt.values = {y, y2, a, x1, x2};
            out.push_back(std::move(pt));
          }
        }
      }
    }
  }
  return out;
}

double SelectionRate(const SyntheticDGP& dgp) {
  double out = 0.0;
  for (const auto& pt : EnumerateSupport(dgp)) out += pt.p * pt.selection;
  return out;
}

double ExactMoment(const SyntheticDGP& dgp, const Expr& g) {
  RequireDiscrete(dgp, g.Columns());
  const auto pts = EnumerateSupport(dgp);
  Dataset ds = SupportDataset(dgp, pts);
  VectorXd gv = EvalExpr(g, ds);
  double out = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) out += pts[i].p * gv[static_cast<Index>(i)];
  return out;
}

double TrueValueExact(const SyntheticDGP& dgp, const Estimand& est) {
  RequireDiscrete(dgp, est.Columns());
  const auto pts = EnumerateSupport(dgp);
  Dataset ds = SupportDataset(dgp, pts);
  VectorXd p(static_cast<Index>(pts.size()));
  for (std::size_t i = 0; i < pts.size(); ++i) p[static_cast<Index>(i)] = pts[i].p;
  switch (est.kind) {
    case Estimand::Kind::kMean: return p.dot(EvalExpr(est.h, ds));
    case Estimand::Kind::kConditionalMean: {
      VectorXd cond = EvalExpr(est.condition, ds);
      return p.dot(cond.cwiseProduct(EvalExpr(est.h, ds))) / p.dot(cond);
    }
    case Estimand::Kind::kMCoefficient: {
      FittedM fit = FitM(est.family, est.DesignMatrix(ds), ds.Column(est.outcome), p, 1.0);
      return fit.beta[static_cast<Index>(est.coord_index)];
    }
    case Estimand::Kind::kDiscreteATE: {
      StratumTable strata = BuildStrata(ds, ds.DiscreteColumnNames());
      VectorXd theta(static_cast<Index>(strata.size()));
      for (std::size_t s = 0; s < strata.size(); ++s) {
        double mass = 0.0;
        for (auto r : strata.stratum(s).rows) mass += p[static_cast<Index>(r)];
        theta[static_cast<Index>(s)] = mass * static_cast<double>(ds.rows()) /
                                       static_cast<double>(strata.stratum(s).count);
      }
      return AteValue(theta, ds, strata, est).value;
    }
  }
  throw Error(ErrorCode::kUnsupportedEstimand, est.Describe());
}

McEstimate TrueValueMonteCarlo(const SyntheticDGP& dgp, const Estimand& est, std::size_t n,
                               std::uint64_t seed) {
  const Dataset full = Simulate(dgp, n, seed).full;
  const double nn = static_cast<double>(full.rows());
  switch (est.kind) {
    case Estimand::Kind::kMean: {
      VectorXd h = EvalExpr(est.h, full);
      return {h.mean(), std::sqrt(SampleVariance(h) / nn)};
    }
    case Estimand::Kind::kConditionalMean: {
      VectorXd cond = EvalExpr(est.condition, full);
      VectorXd h = EvalExpr(est.h, full);
      const double pc = cond.mean();
      if (!(pc > 0.0)) throw Error(ErrorCode::kEmptyConditionSet, est.condition.ToString());
      const double v = cond.dot(h) / cond.sum();
      VectorXd infl = cond.cwiseProduct((h.array() - v).matrix()) / pc;
      return {v, std::sqrt(SampleVariance(infl) / nn)};
    }
    case Estimand::Kind::kMCoefficient: {
      MatrixXd x = est.DesignMatrix(full);
      VectorXd y = full.Column(est.outcome);
      VectorXd w = VectorXd::Ones(x.rows());
      FittedM fit = FitM(est.family, x, y, w);
      MatrixXd cov = SandwichCov(fit, w, PerSampleGradient(est.family, x, y, fit.beta));
      const auto k = static_cast<Index>(est.coord_index);
      return {fit.beta[k], std::sqrt(cov(k, k) / nn)};
    }
    case Estimand::Kind::kDiscreteATE: {
      StratumTable strata = BuildStrata(full, full.DiscreteColumnNames());
      VectorXd ones = VectorXd::Ones(static_cast<Index>(strata.size()));
      return {AteValue(ones, full, strata, est).value, 0.0};
    }
  }
  throw Error(ErrorCode::kUnsupportedEstimand, est.Describe());
}

VectorXd StratumProbabilities(const SyntheticDGP& dgp, const StratumTable& strata) {
  RequireDiscrete(dgp, strata.key_columns());
  const auto disc = dgp.DiscreteColumns();
  std::vector<std::size_t> pos;
  for (const auto& k : strata.key_columns()) {
    pos.push_back(static_cast<std::size_t>(std::find(disc.begin(), disc.end(), k) - disc.begin()));
  }
  VectorXd out = VectorXd::Zero(static_cast<Index>(strata.size()));
  for (const auto& pt : EnumerateSupport(dgp)) {
    std::vector<int> prof;
    for (auto p : pos) prof.push_back(pt.values[p]);
    if (auto s = strata.Find(prof)) out[static_cast<Index>(*s)] += pt.p;
  }
  return out;
}

double RhoOmniscient(const SyntheticDGP& dgp, const StratumTable& strata) {
  VectorXd p = StratumProbabilities(dgp, strata);
  for (Index s = 0; s < p.size(); ++s) {
    if (p[s] <= 0.0) {
      throw Error(ErrorCode::kSupportViolation, "an observed stratum has no mass under P");
    }
  }
  if (p.sum() < 1.0 - 1e-9) {
    throw Error(ErrorCode::kSupportViolation,
                "P puts mass on strata absent from the sample; the divergence is unbounded");
  }
  return Chi2Divergence(p, strata.Weights());
}

}  // namespace shiftbound
