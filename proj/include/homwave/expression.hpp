#pragma once

#include <memory>
#include <string>

namespace homwave {

/// Closed-form scalar expression in the cell variables y1, y2 (`y` is y1).
///
/// Grammar: + - * / ^, unary minus, parentheses, numbers, constants `pi`, `e`,
/// functions sin cos tan exp log sqrt abs tanh sinh cosh.
class Expression {
 public:
  Expression() = default;
  /// Throws InvalidArgument with the column of the first offending character.
  static Expression parse(const std::string& text);

  double operator()(double y1, double y2 = 0.0) const;
  const std::string& text() const { return text_; }
  bool uses_y2() const { return uses_y2_; }
  bool empty() const { return root_ == nullptr; }

  struct Node;

 private:
  std::string text_;
  std::shared_ptr<const Node> root_;
  bool uses_y2_ = false;
};

}  // namespace homwave
