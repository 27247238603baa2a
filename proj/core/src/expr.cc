#include "shiftbound/expr.h"

#include <algorithm>
#include <cctype>
#include <charconv>

#include "shiftbound/error.h"

namespace shiftbound {
namespace {

bool IsIdentChar(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.';
}

Term ParseTerm(std::string_view t, std::string_view whole) {
  auto fail = [&](const std::string& why) -> Term {
    throw Error(ErrorCode::kParseError, "'" + std::string(whole) + "': " + why);
  };
  if (t.size() >= 2 && t.front() == '(' && t.back() == ')') t = t.substr(1, t.size() - 2);
  if (t.empty()) return fail("empty term");
  if (t.rfind("1-", 0) == 0) {
    std::string_view name = t.substr(2);
    if (name.empty() || !std::all_of(name.begin(), name.end(), IsIdentChar)) {
      return fail("bad complement term");
    }
    return Term{Term::Kind::kComplement, std::string(name), 0};
  }
  if (auto pos = t.find("=="); pos != std::string_view::npos) {
    std::string_view name = t.substr(0, pos);
    std::string_view lvl = t.substr(pos + 2);
    int level = 0;
    auto [ptr, ec] = std::from_chars(lvl.data(), lvl.data() + lvl.size(), level);
    if (name.empty() || ec != std::errc() || ptr != lvl.data() + lvl.size()) {
      return fail("bad indicator term");
    }
    return Term{Term::Kind::kIndicator, std::string(name), level};
  }
  if (!std::all_of(t.begin(), t.end(), IsIdentChar)) return fail("bad column name");
  return Term{Term::Kind::kColumn, std::string(t), 0};
}

double TermValue(const Term& term, double v) {
  switch (term.kind) {
    case Term::Kind::kColumn: return v;
    case Term::Kind::kComplement: return 1.0 - v;
    case Term::Kind::kIndicator: return v == term.level ? 1.0 : 0.0;
  }
  return 0.0;
}

}  // namespace

Expr Expr::operator*(const Expr& other) const {
  Expr out = *this;
  out.terms.insert(out.terms.end(), other.terms.begin(), other.terms.end());
  return out;
}

std::vector<std::string> Expr::Columns() const {
  std::vector<std::string> out;
  for (const auto& t : terms) {
    if (std::find(out.begin(), out.end(), t.column) == out.end()) out.push_back(t.column);
  }
  return out;
}

std::string Expr::ToString() const {
  if (terms.empty()) return "1";
  std::string out;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (i) out += "*";
    const auto& t = terms[i];
    switch (t.kind) {
      case Term::Kind::kColumn: out += t.column; break;
      case Term::Kind::kComplement: out += "(1-" + t.column + ")"; break;
      case Term::Kind::kIndicator: out += t.column + "==" + std::to_string(t.level); break;
    }
  }
  return out;
}

Expr ParseExpr(std::string_view text) {
  std::string compact;
  for (char c : text) {
    if (!std::isspace(static_cast<unsigned char>(c))) compact.push_back(c);
  }
  if (compact.empty()) throw Error(ErrorCode::kParseError, "empty expression");
  Expr out;
  std::string_view rest = compact;
  while (!rest.empty()) {
    std::size_t pos = rest.find('*');
    std::string_view term = rest.substr(0, pos);
    if (term != "1") out.terms.push_back(ParseTerm(term, text));
    if (pos == std::string_view::npos) break;
    rest.remove_prefix(pos + 1);
    if (rest.empty()) throw Error(ErrorCode::kParseError, "trailing '*' in " + compact);
  }
  return out;
}

Eigen::VectorXd EvalExpr(const Expr& expr, const Dataset& ds) {
  Eigen::VectorXd out = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(ds.rows()));
  for (const auto& term : expr.terms) {
    const auto col = static_cast<Eigen::Index>(ds.ColumnIndex(term.column));
    for (Eigen::Index i = 0; i < out.size(); ++i) {
      out[i] *= TermValue(term, ds.values()(i, col));
    }
  }
  return out;
}

double EvalExprRow(const Expr& expr, const Dataset& ds, std::size_t row) {
  double v = 1.0;
  for (const auto& term : expr.terms) {
    v *= TermValue(term, ds.at(row, ds.ColumnIndex(term.column)));
  }
  return v;
}

}  // namespace shiftbound
