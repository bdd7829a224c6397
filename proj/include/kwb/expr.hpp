#pragma once

// Expression DSL for component functions of the chart coordinates x1..xn.
//
// Grammar (whitespace is insignificant):
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := '-' unary | power
//   power   := atom ('^' exponent)?
//   exponent:= ['-'] INTEGER | '(' ['-'] INTEGER ')' | exponent '^' exponent
//   atom    := NUMBER | 'pi' | 'x' INDEX | FUNC '(' expr ')' | '(' expr ')'
//   FUNC    := 'sin' | 'cos' | 'exp' | 'ln' | 'sqrt'
//
// Precedence from tightest: power, unary minus, * and /, + and -. Power binds
// to the right and takes integer exponents only. See docs/expression-grammar.md.

#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kwb/jet.hpp"

namespace kwb {

enum class ExprOp { Constant, Variable, Add, Sub, Mul, Div, Pow, Neg, Sin, Cos, Exp, Ln, Sqrt };

struct ExprNode {
  ExprOp op;
  double value = 0.0;  // Constant
  int index = 0;       // Variable: zero-based coordinate; Pow: exponent
  std::shared_ptr<const ExprNode> lhs;
  std::shared_ptr<const ExprNode> rhs;
};

/// Immutable handle to an expression DAG. Copying shares the tree.
class Expr {
 public:
  Expr() : Expr(constant(0.0)) {}
  explicit Expr(std::shared_ptr<const ExprNode> node) : node_(std::move(node)) {}

  static Expr constant(double v);
  /// Zero-based coordinate index; prints as x{index+1}.
  static Expr variable(int index);

  const ExprNode& node() const noexcept { return *node_; }
  const std::shared_ptr<const ExprNode>& ptr() const noexcept { return node_; }

  bool is_constant() const noexcept { return node_->op == ExprOp::Constant; }
  bool is_constant(double v) const noexcept { return is_constant() && node_->value == v; }

  /// Largest variable index used plus one; 0 for constants.
  int arity() const;
  /// Zero-based variables referenced, ascending.
  std::vector<int> free_variables() const;

  std::string str() const;

 private:
  std::shared_ptr<const ExprNode> node_;
};

// Builders. These fold constants and drop additive/multiplicative identities.
Expr operator+(const Expr& a, const Expr& b);
Expr operator-(const Expr& a, const Expr& b);
Expr operator*(const Expr& a, const Expr& b);
Expr operator/(const Expr& a, const Expr& b);
Expr operator-(const Expr& a);
Expr pow(const Expr& a, int exponent);
Expr sin(const Expr& a);
Expr cos(const Expr& a);
Expr exp(const Expr& a);
Expr ln(const Expr& a);
Expr sqrt(const Expr& a);

/// Parses `text` over coordinates x1..x{dimension}.
Expr parse_expr(std::string_view text, int dimension);

/// Evaluates over plain numbers or jets. env.size() must cover every variable.
template <class T>
T eval_expr(const Expr& e, std::span<const T> env);

extern template double eval_expr<double>(const Expr&, std::span<const double>);
extern template Jet eval_expr<Jet>(const Expr&, std::span<const Jet>);

/// Linearised form of an expression DAG: shared subtrees are evaluated once.
class CompiledExpr {
 public:
  CompiledExpr() = default;
  explicit CompiledExpr(const Expr& e);

  template <class T>
  T operator()(std::span<const T> env) const;

  const Expr& source() const noexcept { return source_; }

 private:
  struct Instr {
    ExprOp op;
    double value;
    int index;
    int lhs;
    int rhs;
    const ExprNode* node;
  };
  Expr source_;
  std::vector<Instr> tape_;
};

extern template double CompiledExpr::operator()<double>(std::span<const double>) const;
extern template Jet CompiledExpr::operator()<Jet>(std::span<const Jet>) const;

}  // namespace kwb
