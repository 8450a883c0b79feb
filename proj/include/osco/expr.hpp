#pragma once

#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

namespace osco {

/// Closed arithmetic language for structural functions:
/// numbers, names, + - * /, unary minus, parentheses and the calls
/// exp(a), cos(a), sin(a), sigmoid(a), xor(a, b, ...).
class Expr {
 public:
  enum class Op { Const, Var, Neg, Add, Sub, Mul, Div, Exp, Cos, Sin, Sigmoid, Xor };

  struct Node {
    Op op = Op::Const;
    double value = 0.0;
    std::string name;
    std::vector<std::shared_ptr<const Node>> args;
  };

  Expr() = default;

  /// Throws ParseError with a column on malformed input.
  static Expr parse(const std::string& text);

  const std::string& text() const { return text_; }
  std::set<std::string> variables() const;

  /// Tree-walking evaluation; unknown names throw std::out_of_range.
  double eval(const std::map<std::string, double>& env) const;

  const Node* root() const { return root_.get(); }

 private:
  std::string text_;
  std::shared_ptr<const Node> root_;
};

/// Expr flattened to a postfix program over numbered slots.
class CompiledExpr {
 public:
  CompiledExpr() = default;
  CompiledExpr(const Expr& e, const std::map<std::string, int>& slots);

  double eval(const double* slots) const;

 private:
  struct Instr {
    Expr::Op op;
    double value;
    int slot;
    int arity;
  };
  std::vector<Instr> code_;
  int max_depth_ = 0;
};

}  // namespace osco
