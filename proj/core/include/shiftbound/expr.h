#ifndef SHIFTBOUND_EXPR_H_
#define SHIFTBOUND_EXPR_H_

#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "shiftbound/dataset.h"

namespace shiftbound {

struct Term {
  enum class Kind {
    kColumn,      // c
    kComplement,  // (1 - c), c binary
    kIndicator,   // c == level
  };
  Kind kind = Kind::kColumn;
  std::string column;
  int level = 0;

  friend bool operator==(const Term&, const Term&) = default;
};

// A product of column terms. The empty product is the constant 1.
struct Expr {
  std::vector<Term> terms;

  static Expr One() { return {}; }
  static Expr Col(std::string c) { return {{Term{Term::Kind::kColumn, std::move(c), 0}}}; }
  static Expr Not(std::string c) { return {{Term{Term::Kind::kComplement, std::move(c), 0}}}; }
  static Expr Eq(std::string c, int level) {
    return {{Term{Term::Kind::kIndicator, std::move(c), level}}};
  }

  Expr operator*(const Expr& other) const;
  bool IsConstant() const { return terms.empty(); }
  std::vector<std::string> Columns() const;
  std::string ToString() const;

  friend bool operator==(const Expr&, const Expr&) = default;
};

// Parses "Y2*X2", "X2*(1-Y2)", "1-X2", "X1==2", "1". Whitespace is ignored.
// Throws ParseError.
Expr ParseExpr(std::string_view text);

// Element i is the product of the terms evaluated at row i.
// Throws UnknownColumn.
Eigen::VectorXd EvalExpr(const Expr& expr, const Dataset& ds);

// Value of the expression at a single row.
double EvalExprRow(const Expr& expr, const Dataset& ds, std::size_t row);

}  // namespace shiftbound

#endif  // SHIFTBOUND_EXPR_H_
