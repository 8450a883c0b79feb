#include "osco/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <stdexcept>

#include "osco/ini.hpp"

namespace osco {

namespace {

using NodePtr = std::shared_ptr<const Expr::Node>;

NodePtr make(Expr::Op op, std::vector<NodePtr> args = {}, double value = 0.0, std::string name = {}) {
  auto n = std::make_shared<Expr::Node>();
  n->op = op;
  n->args = std::move(args);
  n->value = value;
  n->name = std::move(name);
  return n;
}

// expr   := term (('+'|'-') term)*
// term   := unary (('*'|'/') unary)*
// unary  := '-' unary | atom
// atom   := number | name | name '(' expr (',' expr)* ')' | '(' expr ')'
class Parser {
 public:
  explicit Parser(const std::string& s) : s_(s) {}

  NodePtr parse() {
    NodePtr e = expr();
    skip();
    if (i_ != s_.size()) fail("unexpected '" + std::string(1, s_[i_]) + "'");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError(msg + " in '" + s_ + "'", 1, static_cast<int>(i_) + 1);
  }

  void skip() {
    while (i_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[i_]))) ++i_;
  }

  bool accept(char c) {
    skip();
    if (i_ < s_.size() && s_[i_] == c) {
      ++i_;
      return true;
    }
    return false;
  }

  NodePtr expr() {
    NodePtr lhs = term();
    while (true) {
      if (accept('+')) lhs = make(Expr::Op::Add, {lhs, term()});
      else if (accept('-')) lhs = make(Expr::Op::Sub, {lhs, term()});
      else return lhs;
    }
  }

  NodePtr term() {
    NodePtr lhs = unary();
    while (true) {
      if (accept('*')) lhs = make(Expr::Op::Mul, {lhs, unary()});
      else if (accept('/')) lhs = make(Expr::Op::Div, {lhs, unary()});
      else return lhs;
    }
  }

  NodePtr unary() {
    if (accept('-')) return make(Expr::Op::Neg, {unary()});
    if (accept('+')) return unary();
    return atom();
  }

  NodePtr atom() {
    skip();
    if (i_ >= s_.size()) fail("unexpected end of expression");
    const char c = s_[i_];
    if (c == '(') {
      ++i_;
      NodePtr e = expr();
      if (!accept(')')) fail("expected ')'");
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      const char* begin = s_.c_str() + i_;
      char* end = nullptr;
      double v = std::strtod(begin, &end);
      if (end == begin) fail("bad number");
      i_ += static_cast<size_t>(end - begin);
      return make(Expr::Op::Const, {}, v);
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      size_t start = i_;
      while (i_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[i_])) || s_[i_] == '_')) ++i_;
      std::string name = s_.substr(start, i_ - start);
      if (!accept('(')) return make(Expr::Op::Var, {}, 0.0, name);
      std::vector<NodePtr> args{expr()};
      while (accept(',')) args.push_back(expr());
      if (!accept(')')) fail("expected ')' after arguments of " + name);
      return call(name, std::move(args));
    }
    fail("unexpected '" + std::string(1, c) + "'");
  }

  NodePtr call(const std::string& name, std::vector<NodePtr> args) {
    auto unary_fn = [&](Expr::Op op) {
      if (args.size() != 1) fail(name + " takes one argument");
      return make(op, std::move(args));
    };
    if (name == "exp") return unary_fn(Expr::Op::Exp);
    if (name == "cos") return unary_fn(Expr::Op::Cos);
    if (name == "sin") return unary_fn(Expr::Op::Sin);
    if (name == "sigmoid") return unary_fn(Expr::Op::Sigmoid);
    if (name == "xor") {
      if (args.size() < 2) fail("xor takes at least two arguments");
      return make(Expr::Op::Xor, std::move(args));
    }
    fail("unknown function '" + name + "'");
  }

  const std::string& s_;
  size_t i_ = 0;
};

void collect(const Expr::Node* n, std::set<std::string>& out) {
  if (n->op == Expr::Op::Var) out.insert(n->name);
  for (const auto& a : n->args) collect(a.get(), out);
}

inline double bit(double v) { return v != 0.0 ? 1.0 : 0.0; }

double apply(Expr::Op op, const double* a, int arity) {
  switch (op) {
    case Expr::Op::Neg: return -a[0];
    case Expr::Op::Add: return a[0] + a[1];
    case Expr::Op::Sub: return a[0] - a[1];
    case Expr::Op::Mul: return a[0] * a[1];
    case Expr::Op::Div: return a[0] / a[1];
    case Expr::Op::Exp: return std::exp(a[0]);
    case Expr::Op::Cos: return std::cos(a[0]);
    case Expr::Op::Sin: return std::sin(a[0]);
    case Expr::Op::Sigmoid: return 1.0 / (1.0 + std::exp(-a[0]));
    case Expr::Op::Xor: {
      double acc = bit(a[0]);
      for (int k = 1; k < arity; ++k) acc = (acc != bit(a[k])) ? 1.0 : 0.0;
      return acc;
    }
    default: throw std::logic_error("apply: not an operator");
  }
}

double eval_node(const Expr::Node* n, const std::map<std::string, double>& env) {
  switch (n->op) {
    case Expr::Op::Const: return n->value;
    case Expr::Op::Var: {
      auto it = env.find(n->name);
      if (it == env.end()) throw std::out_of_range("unbound name '" + n->name + "'");
      return it->second;
    }
    default: {
      double buf[16];
      const int arity = static_cast<int>(n->args.size());
      if (arity > 16) throw std::out_of_range("too many arguments");
      for (int k = 0; k < arity; ++k) buf[k] = eval_node(n->args[k].get(), env);
      return apply(n->op, buf, arity);
    }
  }
}

}  // namespace

Expr Expr::parse(const std::string& text) {
  Expr e;
  e.text_ = text;
  e.root_ = Parser(text).parse();
  return e;
}

std::set<std::string> Expr::variables() const {
  std::set<std::string> out;
  if (root_) collect(root_.get(), out);
  return out;
}

double Expr::eval(const std::map<std::string, double>& env) const {
  if (!root_) throw std::logic_error("empty expression");
  return eval_node(root_.get(), env);
}

CompiledExpr::CompiledExpr(const Expr& e, const std::map<std::string, int>& slots) {
  if (!e.root()) throw std::logic_error("empty expression");
  int depth = 0;
  auto emit = [&](auto&& self, const Expr::Node* n) -> void {
    for (const auto& a : n->args) self(self, a.get());
    Instr ins{n->op, n->value, -1, static_cast<int>(n->args.size())};
    if (n->op == Expr::Op::Var) {
      auto it = slots.find(n->name);
      if (it == slots.end()) throw std::out_of_range("unbound name '" + n->name + "'");
      ins.slot = it->second;
    }
    depth += 1 - ins.arity;
    if (depth > max_depth_) max_depth_ = depth;
    code_.push_back(ins);
  };
  emit(emit, e.root());
  if (max_depth_ > 64) throw std::out_of_range("expression too deep");
}

double CompiledExpr::eval(const double* slots) const {
  double stack[64];
  int top = 0;
  for (const Instr& ins : code_) {
    switch (ins.op) {
      case Expr::Op::Const: stack[top++] = ins.value; break;
      case Expr::Op::Var: stack[top++] = slots[ins.slot]; break;
      default: {
        top -= ins.arity;
        stack[top] = apply(ins.op, stack + top, ins.arity);
        ++top;
      }
    }
  }
  return stack[0];
}

}  // namespace osco
