#include "homwave/expression.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <vector>

#include "homwave/error.hpp"

namespace homwave {

struct Expression::Node {
  enum class Kind { number, var1, var2, add, sub, mul, div, pow, neg, call } kind;
  double value = 0.0;
  double (*fn)(double) = nullptr;
  std::shared_ptr<const Node> lhs, rhs;
};

namespace {

using NodePtr = std::shared_ptr<const Expression::Node>;
using Kind = Expression::Node::Kind;

NodePtr make(Kind k, NodePtr a = nullptr, NodePtr b = nullptr) {
  auto n = std::make_shared<Expression::Node>();
  n->kind = k;
  n->lhs = std::move(a);
  n->rhs = std::move(b);
  return n;
}

struct Function {
  const char* name;
  double (*fn)(double);
};

const Function kFunctions[] = {
    {"sin", [](double x) { return std::sin(x); }},   {"cos", [](double x) { return std::cos(x); }},
    {"tan", [](double x) { return std::tan(x); }},   {"exp", [](double x) { return std::exp(x); }},
    {"log", [](double x) { return std::log(x); }},   {"sqrt", [](double x) { return std::sqrt(x); }},
    {"abs", [](double x) { return std::fabs(x); }},  {"tanh", [](double x) { return std::tanh(x); }},
    {"sinh", [](double x) { return std::sinh(x); }}, {"cosh", [](double x) { return std::cosh(x); }},
};

class Parser {
 public:
  explicit Parser(const std::string& s) : s_(s) {}

  NodePtr parse(bool& uses_y2) {
    NodePtr n = sum();
    skip();
    if (pos_ != s_.size()) fail("unexpected character");
    uses_y2 = uses_y2_;
    return n;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw InvalidArgument("expression '" + s_ + "': " + what + " at column " + std::to_string(pos_ + 1));
  }

  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  NodePtr sum() {
    NodePtr n = product();
    for (;;) {
      if (accept('+'))
        n = make(Kind::add, n, product());
      else if (accept('-'))
        n = make(Kind::sub, n, product());
      else
        return n;
    }
  }

  NodePtr product() {
    NodePtr n = unary();
    for (;;) {
      if (accept('*'))
        n = make(Kind::mul, n, unary());
      else if (accept('/'))
        n = make(Kind::div, n, unary());
      else
        return n;
    }
  }

  // Unary minus binds looser than ^, so -y^2 is -(y^2).
  NodePtr unary() {
    if (accept('-')) return make(Kind::neg, unary());
    if (accept('+')) return unary();
    return power();
  }

  NodePtr power() {
    NodePtr base = primary();
    if (accept('^')) return make(Kind::pow, base, unary());
    return base;
  }

  NodePtr primary() {
    skip();
    if (pos_ >= s_.size()) fail("unexpected end");
    const char c = s_[pos_];
    if (c == '(') {
      ++pos_;
      NodePtr n = sum();
      if (!accept(')')) fail("missing ')'");
      return n;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      const char* begin = s_.c_str() + pos_;
      char* end = nullptr;
      const double v = std::strtod(begin, &end);
      if (end == begin) fail("bad number");
      pos_ += static_cast<std::size_t>(end - begin);
      auto n = std::make_shared<Expression::Node>();
      n->kind = Kind::number;
      n->value = v;
      return n;
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      const std::size_t start = pos_;
      while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
      const std::string name = s_.substr(start, pos_ - start);
      if (name == "y" || name == "y1") return make(Kind::var1);
      if (name == "y2") {
        uses_y2_ = true;
        return make(Kind::var2);
      }
      if (name == "pi" || name == "e") {
        auto n = std::make_shared<Expression::Node>();
        n->kind = Kind::number;
        n->value = name == "pi" ? std::numbers::pi : std::numbers::e;
        return n;
      }
      for (const auto& f : kFunctions) {
        if (name == f.name) {
          if (!accept('(')) fail("expected '(' after " + name);
          NodePtr arg = sum();
          if (!accept(')')) fail("missing ')'");
          auto n = std::make_shared<Expression::Node>();
          n->kind = Kind::call;
          n->fn = f.fn;
          n->lhs = std::move(arg);
          return n;
        }
      }
      pos_ = start;
      fail("unknown identifier '" + name + "'");
    }
    fail("unexpected character");
  }

  const std::string& s_;
  std::size_t pos_ = 0;
  bool uses_y2_ = false;
};

double eval(const Expression::Node& n, double y1, double y2) {
  switch (n.kind) {
    case Kind::number: return n.value;
    case Kind::var1: return y1;
    case Kind::var2: return y2;
    case Kind::add: return eval(*n.lhs, y1, y2) + eval(*n.rhs, y1, y2);
    case Kind::sub: return eval(*n.lhs, y1, y2) - eval(*n.rhs, y1, y2);
    case Kind::mul: return eval(*n.lhs, y1, y2) * eval(*n.rhs, y1, y2);
    case Kind::div: return eval(*n.lhs, y1, y2) / eval(*n.rhs, y1, y2);
    case Kind::pow: return std::pow(eval(*n.lhs, y1, y2), eval(*n.rhs, y1, y2));
    case Kind::neg: return -eval(*n.lhs, y1, y2);
    case Kind::call: return n.fn(eval(*n.lhs, y1, y2));
  }
  return 0.0;
}

}  // namespace

Expression Expression::parse(const std::string& text) {
  Expression e;
  e.text_ = text;
  Parser p(e.text_);
  e.root_ = p.parse(e.uses_y2_);
  return e;
}

double Expression::operator()(double y1, double y2) const {
  if (!root_) throw InvalidArgument("empty expression");
  return eval(*root_, y1, y2);
}

}  // namespace homwave
