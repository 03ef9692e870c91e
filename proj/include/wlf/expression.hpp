#pragma once

// Small arithmetic language for user-supplied Lagrangians and weights.
//
//   expr   := term (('+' | '-') term)*
//   term   := unary (('*' | '/') unary)*
//   unary  := ('-' | '+') unary | power
//   power  := atom ('^' unary)?          right-associative, binds tighter than unary minus
//   atom   := number | symbol | name '(' expr (',' expr)* ')' | '(' expr ')'
//
// Symbols are x0..xn and v0..vn (n + 1 = dim) plus the constant pi.

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "wlf/errors.hpp"
#include "wlf/jet.hpp"

namespace wlf {

class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t offset)
        : Error(what + " at offset " + std::to_string(offset)), offset_(offset) {}
    std::size_t offset() const { return offset_; }

private:
    std::size_t offset_;
};

enum class Func { exp, log, sqrt, sin, cos, sinh, cosh, atan, atan2, pow };

struct ExprNode {
    enum class Kind { number, base, fiber, neg, add, sub, mul, div, pow, call };
    Kind kind = Kind::number;
    double number = 0.0;
    int index = 0;  // coordinate index for base/fiber
    Func func = Func::exp;
    std::vector<std::shared_ptr<const ExprNode>> args;
};

bool same_tree(const ExprNode& a, const ExprNode& b);

class ModelExpression {
public:
    ModelExpression() = default;
    ModelExpression(std::string source, std::shared_ptr<const ExprNode> root, int dim)
        : source_(std::move(source)), root_(std::move(root)), dim_(dim) {}

    const std::string& source() const { return source_; }
    const ExprNode& root() const { return *root_; }
    int dim() const { return dim_; }

    double evaluate(std::span<const double> x, std::span<const double> v) const;
    Jet evaluate(std::span<const Jet> x, std::span<const Jet> v) const;

    /// Fully parenthesized form; parses back to the same tree.
    std::string to_string() const;

private:
    std::string source_;
    std::shared_ptr<const ExprNode> root_;
    int dim_ = 0;
};

ModelExpression parse_expression(const std::string& source, int dim);

}  // namespace wlf
