#include "kwb/expr.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <set>
#include <unordered_map>

#include "kwb/errors.hpp"

namespace kwb {

namespace {

using NodePtr = std::shared_ptr<const ExprNode>;

Expr make(ExprOp op, NodePtr lhs, NodePtr rhs = nullptr, int index = 0) {
  auto n = std::make_shared<ExprNode>();
  n->op = op;
  n->lhs = std::move(lhs);
  n->rhs = std::move(rhs);
  n->index = index;
  return Expr(std::move(n));
}

std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

const char* function_name(ExprOp op) {
  switch (op) {
    case ExprOp::Sin: return "sin";
    case ExprOp::Cos: return "cos";
    case ExprOp::Exp: return "exp";
    case ExprOp::Ln: return "ln";
    case ExprOp::Sqrt: return "sqrt";
    default: return nullptr;
  }
}

int precedence(const ExprNode& n) {
  switch (n.op) {
    case ExprOp::Add:
    case ExprOp::Sub: return 1;
    case ExprOp::Mul:
    case ExprOp::Div: return 2;
    case ExprOp::Neg: return 3;
    case ExprOp::Pow: return 4;
    case ExprOp::Constant: return n.value < 0.0 || std::signbit(n.value) ? 0 : 5;
    default: return 5;
  }
}

void print(const ExprNode& n, std::string& out);

void print_child(const ExprNode& child, int min_prec, std::string& out) {
  if (precedence(child) < min_prec || precedence(child) == 0) {
    out += '(';
    print(child, out);
    out += ')';
  } else {
    print(child, out);
  }
}

void print(const ExprNode& n, std::string& out) {
  switch (n.op) {
    case ExprOp::Constant: out += format_number(n.value); return;
    case ExprOp::Variable: out += "x" + std::to_string(n.index + 1); return;
    case ExprOp::Add:
    case ExprOp::Sub:
      print_child(*n.lhs, 1, out);
      out += n.op == ExprOp::Add ? " + " : " - ";
      print_child(*n.rhs, 2, out);
      return;
    case ExprOp::Mul:
    case ExprOp::Div:
      print_child(*n.lhs, 2, out);
      out += n.op == ExprOp::Mul ? "*" : "/";
      print_child(*n.rhs, 3, out);
      return;
    case ExprOp::Neg:
      out += '-';
      print_child(*n.lhs, 3, out);
      return;
    case ExprOp::Pow:
      print_child(*n.lhs, 5, out);
      out += '^';
      if (n.index < 0)
        out += "(" + std::to_string(n.index) + ")";
      else
        out += std::to_string(n.index);
      return;
    default:
      out += function_name(n.op);
      out += '(';
      print(*n.lhs, out);
      out += ')';
      return;
  }
}

class Parser {
 public:
  Parser(std::string_view text, int dimension) : text_(text), dim_(dimension) {}

  Expr parse() {
    skip();
    if (pos_ >= text_.size()) throw ParseError("empty expression", pos_);
    Expr e = expr();
    skip();
    if (pos_ < text_.size()) throw ParseError("unexpected '" + std::string(1, text_[pos_]) + "'", pos_);
    return e;
  }

 private:
  void skip() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }
  bool accept(char c) {
    skip();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  void expect(char c) {
    if (!accept(c)) {
      if (pos_ >= text_.size()) throw ParseError(std::string("expected '") + c + "' before end of input", pos_);
      throw ParseError(std::string("expected '") + c + "'", pos_);
    }
  }

  Expr expr() {
    Expr lhs = term();
    for (;;) {
      if (accept('+'))
        lhs = make(ExprOp::Add, lhs.ptr(), term().ptr());
      else if (accept('-'))
        lhs = make(ExprOp::Sub, lhs.ptr(), term().ptr());
      else
        return lhs;
    }
  }

  Expr term() {
    Expr lhs = unary();
    for (;;) {
      if (accept('*'))
        lhs = make(ExprOp::Mul, lhs.ptr(), unary().ptr());
      else if (accept('/'))
        lhs = make(ExprOp::Div, lhs.ptr(), unary().ptr());
      else
        return lhs;
    }
  }

  Expr unary() {
    if (accept('-')) return make(ExprOp::Neg, unary().ptr());
    return power();
  }

  Expr power() {
    Expr base = atom();
    skip();
    if (!accept('^')) return base;
    const long long e = exponent();
    if (e < -64 || e > 64) throw ParseError("exponent out of range", pos_);
    return make(ExprOp::Pow, base.ptr(), nullptr, static_cast<int>(e));
  }

  long long integer_literal() {
    skip();
    bool neg = false;
    if (pos_ < text_.size() && text_[pos_] == '-') {
      neg = true;
      ++pos_;
      skip();
    }
    const std::size_t start = pos_;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    if (start == pos_) throw ParseError("expected integer exponent", start);
    if (pos_ < text_.size() && (text_[pos_] == '.' || text_[pos_] == 'e' || text_[pos_] == 'E'))
      throw ParseError("exponent must be an integer", pos_);
    long long v = 0;
    std::from_chars(text_.data() + start, text_.data() + pos_, v);
    return neg ? -v : v;
  }

  long long exponent() {
    long long base;
    if (accept('(')) {
      base = integer_literal();
      expect(')');
    } else {
      base = integer_literal();
    }
    skip();
    if (!accept('^')) return base;
    const long long rest = exponent();
    if (rest < 0) throw ParseError("negative exponent of an integer exponent", pos_);
    long long v = 1;
    for (long long k = 0; k < rest; ++k) {
      v *= base;
      if (v > 64 || v < -64) throw ParseError("exponent out of range", pos_);
    }
    return v;
  }

  Expr atom() {
    skip();
    if (pos_ >= text_.size()) throw ParseError("unexpected end of input", pos_);
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      Expr e = expr();
      expect(')');
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c))) return identifier();
    throw ParseError("unexpected '" + std::string(1, c) + "'", pos_);
  }

  Expr number() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.')) ++pos_;
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      std::size_t p = pos_ + 1;
      if (p < text_.size() && (text_[p] == '+' || text_[p] == '-')) ++p;
      if (p < text_.size() && std::isdigit(static_cast<unsigned char>(text_[p]))) {
        pos_ = p;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      }
    }
    double v = 0.0;
    auto res = std::from_chars(text_.data() + start, text_.data() + pos_, v);
    if (res.ec != std::errc() || res.ptr != text_.data() + pos_) throw ParseError("malformed number", start);
    return Expr::constant(v);
  }

  Expr identifier() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && std::isalnum(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    const std::string_view name = text_.substr(start, pos_ - start);
    if (name == "pi") return Expr::constant(std::numbers::pi);
    if (name.size() >= 2 && name[0] == 'x' &&
        std::all_of(name.begin() + 1, name.end(), [](char ch) { return std::isdigit(static_cast<unsigned char>(ch)); })) {
      int idx = 0;
      std::from_chars(name.data() + 1, name.data() + name.size(), idx);
      if (idx < 1 || idx > dim_)
        throw ParseError("variable " + std::string(name) + " out of range for dimension " + std::to_string(dim_), start);
      return Expr::variable(idx - 1);
    }
    static const std::pair<std::string_view, ExprOp> functions[] = {
        {"sin", ExprOp::Sin}, {"cos", ExprOp::Cos}, {"exp", ExprOp::Exp}, {"ln", ExprOp::Ln}, {"sqrt", ExprOp::Sqrt}};
    for (const auto& [fname, op] : functions) {
      if (name == fname) {
        expect('(');
        Expr arg = expr();
        expect(')');
        return make(op, arg.ptr());
      }
    }
    throw ParseError("unknown identifier '" + std::string(name) + "'", start);
  }

  std::string_view text_;
  int dim_;
  std::size_t pos_ = 0;
};

void collect_vars(const ExprNode& n, std::set<int>& out) {
  if (n.op == ExprOp::Variable) out.insert(n.index);
  if (n.lhs) collect_vars(*n.lhs, out);
  if (n.rhs) collect_vars(*n.rhs, out);
}

std::string describe(const ExprNode* n) {
  std::string s;
  print(*n, s);
  if (s.size() > 120) s = s.substr(0, 117) + "...";
  return s;
}

template <class T>
T apply(ExprOp op, const T& a, const T* b, int index, const ExprNode* node) {
  using std::cos;
  using std::exp;
  using std::sin;
  switch (op) {
    case ExprOp::Add: return a + *b;
    case ExprOp::Sub: return a - *b;
    case ExprOp::Mul: return a * *b;
    case ExprOp::Div:
      if (value_of(*b) == 0.0) throw DomainError("division by zero in '" + describe(node) + "'");
      return a / *b;
    case ExprOp::Neg: return -a;
    case ExprOp::Pow:
      if (index < 0 && value_of(a) == 0.0) throw DomainError("division by zero in '" + describe(node) + "'");
      if constexpr (std::is_same_v<T, double>) {
        return std::pow(a, index);
      } else {
        return pow(a, index);
      }
    case ExprOp::Sin: return sin(a);
    case ExprOp::Cos: return cos(a);
    case ExprOp::Exp: return exp(a);
    case ExprOp::Ln:
      if (!(value_of(a) > 0.0)) throw DomainError("ln of nonpositive value in '" + describe(node) + "'");
      if constexpr (std::is_same_v<T, double>) {
        return std::log(a);
      } else {
        return log(a);
      }
    case ExprOp::Sqrt:
      if (!(value_of(a) > 0.0)) throw DomainError("sqrt of nonpositive value in '" + describe(node) + "'");
      if constexpr (std::is_same_v<T, double>) {
        return std::sqrt(a);
      } else {
        return sqrt(a);
      }
    default: throw Error("internal: bad operator");
  }
}

}  // namespace

Expr Expr::constant(double v) {
  auto n = std::make_shared<ExprNode>();
  n->op = ExprOp::Constant;
  n->value = v;
  return Expr(std::move(n));
}

Expr Expr::variable(int index) {
  if (index < 0) throw Error("negative variable index");
  auto n = std::make_shared<ExprNode>();
  n->op = ExprOp::Variable;
  n->index = index;
  return Expr(std::move(n));
}

int Expr::arity() const {
  const auto vars = free_variables();
  return vars.empty() ? 0 : vars.back() + 1;
}

std::vector<int> Expr::free_variables() const {
  std::set<int> s;
  collect_vars(*node_, s);
  return {s.begin(), s.end()};
}

std::string Expr::str() const {
  std::string s;
  print(*node_, s);
  return s;
}

Expr operator+(const Expr& a, const Expr& b) {
  if (a.is_constant() && b.is_constant()) return Expr::constant(a.node().value + b.node().value);
  if (a.is_constant(0.0)) return b;
  if (b.is_constant(0.0)) return a;
  return make(ExprOp::Add, a.ptr(), b.ptr());
}

Expr operator-(const Expr& a, const Expr& b) {
  if (a.is_constant() && b.is_constant()) return Expr::constant(a.node().value - b.node().value);
  if (b.is_constant(0.0)) return a;
  if (a.is_constant(0.0)) return -b;
  return make(ExprOp::Sub, a.ptr(), b.ptr());
}

Expr operator*(const Expr& a, const Expr& b) {
  if (a.is_constant() && b.is_constant()) return Expr::constant(a.node().value * b.node().value);
  if (a.is_constant(0.0) || b.is_constant(0.0)) return Expr::constant(0.0);
  if (a.is_constant(1.0)) return b;
  if (b.is_constant(1.0)) return a;
  return make(ExprOp::Mul, a.ptr(), b.ptr());
}

Expr operator/(const Expr& a, const Expr& b) {
  if (b.is_constant(0.0)) throw DomainError("symbolic division by zero");
  if (a.is_constant() && b.is_constant()) return Expr::constant(a.node().value / b.node().value);
  if (a.is_constant(0.0)) return Expr::constant(0.0);
  if (b.is_constant(1.0)) return a;
  return make(ExprOp::Div, a.ptr(), b.ptr());
}

Expr operator-(const Expr& a) {
  if (a.is_constant()) return Expr::constant(-a.node().value);
  return make(ExprOp::Neg, a.ptr());
}

Expr pow(const Expr& a, int exponent) {
  if (exponent == 0) return Expr::constant(1.0);
  if (exponent == 1) return a;
  if (a.is_constant()) return Expr::constant(std::pow(a.node().value, exponent));
  return make(ExprOp::Pow, a.ptr(), nullptr, exponent);
}

Expr sin(const Expr& a) { return a.is_constant() ? Expr::constant(std::sin(a.node().value)) : make(ExprOp::Sin, a.ptr()); }
Expr cos(const Expr& a) { return a.is_constant() ? Expr::constant(std::cos(a.node().value)) : make(ExprOp::Cos, a.ptr()); }
Expr exp(const Expr& a) { return a.is_constant() ? Expr::constant(std::exp(a.node().value)) : make(ExprOp::Exp, a.ptr()); }

Expr ln(const Expr& a) {
  if (a.is_constant() && a.node().value > 0.0) return Expr::constant(std::log(a.node().value));
  return make(ExprOp::Ln, a.ptr());
}

Expr sqrt(const Expr& a) {
  if (a.is_constant() && a.node().value > 0.0) return Expr::constant(std::sqrt(a.node().value));
  return make(ExprOp::Sqrt, a.ptr());
}

Expr parse_expr(std::string_view text, int dimension) {
  if (dimension < 1) throw Error("parse_expr: dimension must be >= 1");
  return Parser(text, dimension).parse();
}

CompiledExpr::CompiledExpr(const Expr& e) : source_(e) {
  std::unordered_map<const ExprNode*, int> slot;
  // Iterative post-order so deep trees cannot overflow the stack.
  std::vector<std::pair<const ExprNode*, bool>> stack{{&e.node(), false}};
  while (!stack.empty()) {
    auto [n, expanded] = stack.back();
    stack.pop_back();
    if (slot.count(n)) continue;
    if (!expanded) {
      stack.push_back({n, true});
      if (n->rhs) stack.push_back({n->rhs.get(), false});
      if (n->lhs) stack.push_back({n->lhs.get(), false});
      continue;
    }
    Instr ins{n->op, n->value, n->index, n->lhs ? slot.at(n->lhs.get()) : -1, n->rhs ? slot.at(n->rhs.get()) : -1, n};
    slot[n] = static_cast<int>(tape_.size());
    tape_.push_back(ins);
  }
}

template <class T>
T CompiledExpr::operator()(std::span<const T> env) const {
  if (tape_.empty()) throw Error("evaluating an empty compiled expression");
  std::vector<T> regs;
  regs.reserve(tape_.size());
  for (const auto& ins : tape_) {
    switch (ins.op) {
      case ExprOp::Constant:
        if constexpr (std::is_same_v<T, double>) {
          regs.push_back(ins.value);
        } else {
          if (env.empty()) throw Error("jet evaluation needs at least one variable");
          regs.push_back(constant_like(env[0], ins.value));
        }
        break;
      case ExprOp::Variable:
        if (ins.index >= static_cast<int>(env.size()))
          throw Error("variable x" + std::to_string(ins.index + 1) + " not bound (environment has " +
                      std::to_string(env.size()) + ")");
        regs.push_back(env[static_cast<std::size_t>(ins.index)]);
        break;
      default: {
        const T* rhs = ins.rhs >= 0 ? &regs[static_cast<std::size_t>(ins.rhs)] : nullptr;
        T r = apply<T>(ins.op, regs[static_cast<std::size_t>(ins.lhs)], rhs, ins.index, ins.node);
        if (!std::isfinite(value_of(r))) throw DomainError("non-finite value in '" + describe(ins.node) + "'");
        regs.push_back(std::move(r));
      }
    }
  }
  return regs.back();
}

template double CompiledExpr::operator()<double>(std::span<const double>) const;
template Jet CompiledExpr::operator()<Jet>(std::span<const Jet>) const;

template <class T>
T eval_expr(const Expr& e, std::span<const T> env) {
  return CompiledExpr(e)(env);
}

template double eval_expr<double>(const Expr&, std::span<const double>);
template Jet eval_expr<Jet>(const Expr&, std::span<const Jet>);

}  // namespace kwb
