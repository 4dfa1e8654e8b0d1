#pragma once

// Expression language for scalar functions f: R^n -> R over variables
// y1..yn.
//
//   expr     := term (('+' | '-') term)*
//   term     := unary (('*' | '/') unary)*
//   unary    := ('+' | '-') unary | power
//   power    := primary ('^' exponent)*          (left-associative)
//   exponent := ('+' | '-') exponent | primary   (must be variable-free)
//   primary  := number | 'pi' | 'e' | 'y'<k> | func '(' expr ')' | '(' expr ')'
//   func     := exp | log | sqrt | sin | cos | tanh | logistic | erf | atan
//
// Exponents are folded to constants at parse time. Integer exponents become
// repeated multiplication; any other exponent requires a positive base.

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "gconc/dual.hpp"
#include "gconc/errors.hpp"

namespace gconc {

enum class Op : std::uint8_t {
  Const,
  Var,
  Add,
  Sub,
  Mul,
  Div,
  Neg,
  PowInt,
  PowReal,
  Exp,
  Log,
  Sqrt,
  Sin,
  Cos,
  Tanh,
  Logistic,
  Erf,
  Atan,
};

inline constexpr bool is_unary_function(Op op) { return op >= Op::Exp; }

inline constexpr std::string_view function_name(Op op) {
  switch (op) {
    case Op::Exp: return "exp";
    case Op::Log: return "log";
    case Op::Sqrt: return "sqrt";
    case Op::Sin: return "sin";
    case Op::Cos: return "cos";
    case Op::Tanh: return "tanh";
    case Op::Logistic: return "logistic";
    case Op::Erf: return "erf";
    case Op::Atan: return "atan";
    default: return "";
  }
}

inline std::optional<Op> function_from_name(std::string_view name) {
  for (Op op : {Op::Exp, Op::Log, Op::Sqrt, Op::Sin, Op::Cos, Op::Tanh,
                Op::Logistic, Op::Erf, Op::Atan}) {
    if (function_name(op) == name) return op;
  }
  return std::nullopt;
}

struct Node {
  Op op = Op::Const;
  std::int32_t lhs = -1;  // child index (unary operand or left operand)
  std::int32_t rhs = -1;
  double value = 0.0;     // constant, or real exponent for PowReal
  std::int64_t index = 0; // 0-based variable index, or exponent for PowInt
};

// Immutable expression in post-order: children precede their parents and the
// root is the last node.
class ExpressionTree {
 public:
  ExpressionTree(std::vector<Node> nodes, int dimension, std::string source)
      : nodes_(std::move(nodes)), dimension_(dimension), source_(std::move(source)) {}

  int dimension() const noexcept { return dimension_; }
  const std::string& source_text() const noexcept { return source_; }
  std::span<const Node> nodes() const noexcept { return nodes_; }
  std::size_t root() const noexcept { return nodes_.size() - 1; }

  // Fully parenthesized text that parses back to an equivalent tree.
  std::string to_string() const { return subexpression(root()); }

  std::string subexpression(std::size_t index) const {
    std::string out;
    print(index, out);
    return out;
  }

 private:
  static std::string format_number(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    std::string s(buf);
    if (x < 0.0 || std::signbit(x)) return "(" + s + ")";
    return s;
  }

  void print(std::size_t i, std::string& out) const {
    const Node& n = nodes_[i];
    switch (n.op) {
      case Op::Const: out += format_number(n.value); return;
      case Op::Var: out += "y" + std::to_string(n.index + 1); return;
      case Op::Neg:
        out += "(-";
        print(n.lhs, out);
        out += ")";
        return;
      case Op::Add:
      case Op::Sub:
      case Op::Mul:
      case Op::Div: {
        static constexpr char symbols[] = {'+', '-', '*', '/'};
        out += "(";
        print(n.lhs, out);
        out += ' ';
        out += symbols[static_cast<int>(n.op) - static_cast<int>(Op::Add)];
        out += ' ';
        print(n.rhs, out);
        out += ")";
        return;
      }
      case Op::PowInt:
        out += "(";
        print(n.lhs, out);
        out += ")^(" + std::to_string(n.index) + ")";
        return;
      case Op::PowReal:
        out += "(";
        print(n.lhs, out);
        out += ")^(" + format_number(n.value) + ")";
        return;
      default:
        out += function_name(n.op);
        out += "(";
        print(n.lhs, out);
        out += ")";
        return;
    }
  }

  std::vector<Node> nodes_;
  int dimension_;
  std::string source_;
};

namespace detail {

class Parser {
 public:
  Parser(std::string_view text, int dimension) : text_(text), dimension_(dimension) {}

  ExpressionTree parse() {
    skip_space();
    if (pos_ >= text_.size()) fail_syntax("empty expression");
    const std::int32_t root = parse_expr();
    skip_space();
    if (pos_ != text_.size()) fail_syntax("unexpected trailing input");
    std::vector<Node> ordered;
    ordered.reserve(arena_.size());
    linearize(root, ordered);
    return ExpressionTree(std::move(ordered), dimension_, std::string(text_));
  }

 private:
  static constexpr int kMaxDepth = 256;

  [[noreturn]] void fail_syntax(const std::string& what) const {
    throw ParseError(ParseErrorKind::Syntax, pos_, "syntax error: " + what);
  }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) fail_syntax(std::string("expected '") + c + "'");
  }

  std::int32_t add(Node n) {
    arena_.push_back(n);
    return static_cast<std::int32_t>(arena_.size() - 1);
  }
  std::int32_t binary(Op op, std::int32_t a, std::int32_t b) {
    return add(Node{op, a, b, 0.0, 0});
  }

  struct DepthGuard {
    explicit DepthGuard(Parser& p) : parser(p) {
      if (++parser.depth_ > kMaxDepth) parser.fail_syntax("nesting too deep");
    }
    ~DepthGuard() { --parser.depth_; }
    Parser& parser;
  };

  std::int32_t parse_expr() {
    DepthGuard guard(*this);
    std::int32_t lhs = parse_term();
    for (;;) {
      if (accept('+')) {
        lhs = binary(Op::Add, lhs, parse_term());
      } else if (accept('-')) {
        lhs = binary(Op::Sub, lhs, parse_term());
      } else {
        return lhs;
      }
    }
  }

  std::int32_t parse_term() {
    std::int32_t lhs = parse_unary();
    for (;;) {
      if (accept('*')) {
        lhs = binary(Op::Mul, lhs, parse_unary());
      } else if (accept('/')) {
        lhs = binary(Op::Div, lhs, parse_unary());
      } else {
        return lhs;
      }
    }
  }

  std::int32_t parse_unary() {
    DepthGuard guard(*this);
    if (accept('-')) return add(Node{Op::Neg, parse_unary(), -1, 0.0, 0});
    if (accept('+')) return parse_unary();
    return parse_power();
  }

  std::int32_t parse_power() {
    std::int32_t base = parse_primary();
    for (;;) {
      skip_space();
      const std::size_t at = pos_;
      if (!accept('^')) return base;
      const std::int32_t exponent = parse_exponent();
      const std::optional<double> p = fold(exponent);
      if (!p) {
        throw ParseError(ParseErrorKind::Syntax, at,
                         "syntax error: exponent must be a constant expression");
      }
      if (!std::isfinite(*p)) {
        throw ParseError(ParseErrorKind::Syntax, at, "syntax error: exponent is not finite");
      }
      if (*p == std::nearbyint(*p) && std::fabs(*p) <= 1e6) {
        base = add(Node{Op::PowInt, base, -1, 0.0, static_cast<std::int64_t>(*p)});
      } else {
        base = add(Node{Op::PowReal, base, -1, *p, 0});
      }
    }
  }

  std::int32_t parse_exponent() {
    DepthGuard guard(*this);
    if (accept('-')) return add(Node{Op::Neg, parse_exponent(), -1, 0.0, 0});
    if (accept('+')) return parse_exponent();
    return parse_primary();
  }

  std::int32_t parse_primary() {
    DepthGuard guard(*this);
    skip_space();
    if (pos_ >= text_.size()) fail_syntax("unexpected end of input");
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      const std::int32_t inner = parse_expr();
      expect(')');
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_identifier();
    fail_syntax(std::string("unexpected character '") + c + "'");
  }

  std::int32_t parse_number() {
    const std::size_t start = pos_;
    auto digits = [&] {
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    };
    digits();
    if (pos_ < text_.size() && text_[pos_] == '.') {
      ++pos_;
      digits();
    }
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      std::size_t look = pos_ + 1;
      if (look < text_.size() && (text_[look] == '+' || text_[look] == '-')) ++look;
      if (look < text_.size() && std::isdigit(static_cast<unsigned char>(text_[look]))) {
        pos_ = look;
        digits();
      }
    }
    double value = 0.0;
    const char* first = text_.data() + start;
    const char* last = text_.data() + pos_;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last || !std::isfinite(value)) {
      pos_ = start;
      fail_syntax("malformed number");
    }
    return add(Node{Op::Const, -1, -1, value, 0});
  }

  std::int32_t parse_identifier() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
      ++pos_;
    }
    const std::string_view name = text_.substr(start, pos_ - start);

    if (auto fn = function_from_name(name)) {
      expect('(');
      const std::int32_t arg = parse_expr();
      expect(')');
      return add(Node{*fn, arg, -1, 0.0, 0});
    }
    if (name == "pi") return add(Node{Op::Const, -1, -1, std::numbers::pi, 0});
    if (name == "e") return add(Node{Op::Const, -1, -1, std::numbers::e, 0});
    if (name.size() >= 2 && name[0] == 'y') {
      bool all_digits = true;
      for (char ch : name.substr(1)) all_digits = all_digits && std::isdigit(static_cast<unsigned char>(ch));
      if (all_digits) {
        long long k = 0;
        auto [ptr, ec] = std::from_chars(name.data() + 1, name.data() + name.size(), k);
        if (ec != std::errc{} || k < 1 || k > dimension_) {
          throw ParseError(ParseErrorKind::VariableOutOfRange, start,
                           "variable '" + std::string(name) + "' out of range 1.." +
                               std::to_string(dimension_));
        }
        return add(Node{Op::Var, -1, -1, 0.0, k - 1});
      }
    }
    throw ParseError(ParseErrorKind::UnknownIdentifier, start,
                     "unknown identifier '" + std::string(name) + "'");
  }

  // Evaluates a variable-free subtree; nullopt if it references a variable.
  std::optional<double> fold(std::int32_t i) const {
    const Node& n = arena_[i];
    switch (n.op) {
      case Op::Const: return n.value;
      case Op::Var: return std::nullopt;
      case Op::Neg: {
        auto a = fold(n.lhs);
        return a ? std::optional<double>(-*a) : std::nullopt;
      }
      case Op::Add:
      case Op::Sub:
      case Op::Mul:
      case Op::Div: {
        auto a = fold(n.lhs);
        auto b = fold(n.rhs);
        if (!a || !b) return std::nullopt;
        if (n.op == Op::Add) return *a + *b;
        if (n.op == Op::Sub) return *a - *b;
        if (n.op == Op::Mul) return *a * *b;
        return *a / *b;
      }
      default: return std::nullopt;
    }
  }

  std::int32_t linearize(std::int32_t i, std::vector<Node>& out) const {
    Node n = arena_[i];
    if (n.lhs >= 0) n.lhs = linearize(n.lhs, out);
    if (n.rhs >= 0) n.rhs = linearize(n.rhs, out);
    out.push_back(n);
    return static_cast<std::int32_t>(out.size() - 1);
  }

  std::string_view text_;
  int dimension_;
  std::size_t pos_ = 0;
  int depth_ = 0;
  std::vector<Node> arena_;
};

}  // namespace detail

// Parses `text` as a function of y1..y<dimension>.
inline ExpressionTree parse_expression(std::string_view text, int dimension) {
  if (dimension < 1) throw Error("dimension must be positive");
  return detail::Parser(text, dimension).parse();
}

// ---- evaluation -----------------------------------------------------------

// Lifts a real constant into scalar type T.
template <typename T>
T lift(double c) {
  if constexpr (std::is_same_v<T, double>) {
    return c;
  } else if constexpr (is_dual_v<T>) {
    return T(lift<typename T::value_type>(c));
  } else {
    return T::constant(c);
  }
}

namespace detail {

template <typename T>
T int_power(T base, std::int64_t k) {
  if (k == 0) return lift<T>(1.0);
  const bool invert = k < 0;
  std::uint64_t e = invert ? static_cast<std::uint64_t>(-k) : static_cast<std::uint64_t>(k);
  std::optional<T> result;
  while (e > 0) {
    if (e & 1U) result = result ? T(*result * base) : base;
    e >>= 1U;
    if (e > 0) base = sq(base);
  }
  if (invert) return T(1.0 / *result);
  return *result;
}

template <typename T>
void check_domain(const ExpressionTree& tree, std::size_t i, std::span<const T> slots) {
  if constexpr (is_numeric_scalar_v<T>) {
    const Node& n = tree.nodes()[i];
    auto fail = [&](const char* what) { throw DomainError(what, tree.subexpression(i)); };
    switch (n.op) {
      case Op::Div:
        if (primal(slots[n.rhs]) == 0.0) fail("division by zero");
        break;
      case Op::Log:
        if (!(primal(slots[n.lhs]) > 0.0)) fail("log of non-positive argument");
        break;
      case Op::Sqrt:
        if (!(primal(slots[n.lhs]) >= 0.0)) fail("sqrt of negative argument");
        break;
      case Op::PowInt:
        if (n.index < 0 && primal(slots[n.lhs]) == 0.0) fail("division by zero");
        break;
      case Op::PowReal: {
        const double b = primal(slots[n.lhs]);
        if (b < 0.0) fail("real exponent of negative base");
        if (b == 0.0 && n.value < 0.0) fail("division by zero");
        break;
      }
      default: break;
    }
  }
}

}  // namespace detail

// Evaluates the tree over scalar type T (double, Dual, nested Dual, or an
// abstract domain). Numeric scalars are checked for domain violations.
template <typename T>
T evaluate_as(const ExpressionTree& tree, std::span<const T> point) {
  using std::atan;
  using std::cos;
  using std::erf;
  using std::exp;
  using std::log;
  using std::pow;
  using std::sin;
  using std::sqrt;
  using std::tanh;

  if (point.size() != static_cast<std::size_t>(tree.dimension())) {
    throw Error("point has length " + std::to_string(point.size()) + ", expected " +
                std::to_string(tree.dimension()));
  }
  const auto nodes = tree.nodes();
  thread_local std::vector<T> slots;
  slots.resize(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const Node& n = nodes[i];
    detail::check_domain<T>(tree, i, slots);
    switch (n.op) {
      case Op::Const: slots[i] = lift<T>(n.value); break;
      case Op::Var: slots[i] = point[n.index]; break;
      case Op::Add: slots[i] = slots[n.lhs] + slots[n.rhs]; break;
      case Op::Sub: slots[i] = slots[n.lhs] - slots[n.rhs]; break;
      case Op::Mul: slots[i] = slots[n.lhs] * slots[n.rhs]; break;
      case Op::Div: slots[i] = slots[n.lhs] / slots[n.rhs]; break;
      case Op::Neg: slots[i] = -slots[n.lhs]; break;
      case Op::PowInt: slots[i] = detail::int_power(slots[n.lhs], n.index); break;
      case Op::PowReal: slots[i] = pow(slots[n.lhs], n.value); break;
      case Op::Exp: slots[i] = exp(slots[n.lhs]); break;
      case Op::Log: slots[i] = log(slots[n.lhs]); break;
      case Op::Sqrt: slots[i] = sqrt(slots[n.lhs]); break;
      case Op::Sin: slots[i] = sin(slots[n.lhs]); break;
      case Op::Cos: slots[i] = cos(slots[n.lhs]); break;
      case Op::Tanh: slots[i] = tanh(slots[n.lhs]); break;
      case Op::Logistic: slots[i] = logistic(slots[n.lhs]); break;
      case Op::Erf: slots[i] = erf(slots[n.lhs]); break;
      case Op::Atan: slots[i] = atan(slots[n.lhs]); break;
    }
    if constexpr (is_numeric_scalar_v<T>) {
      if (!std::isfinite(primal(slots[i]))) {
        throw DomainError("non-finite value", tree.subexpression(i));
      }
    }
  }
  return slots.back();
}

// Value of f at `point`; throws DomainError on a domain violation.
inline double evaluate(const ExpressionTree& tree, std::span<const double> point) {
  return evaluate_as<double>(tree, point);
}

}  // namespace gconc
