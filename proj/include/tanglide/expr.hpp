#pragma once

// Textual model expressions.
//
// Grammar (lowest to highest precedence):
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := ('-' | '+') unary | power
//   power   := primary ('^' primary)?         exponent: nonnegative integer literal
//   primary := number | name | name '(' args ')' | '(' expr ')'
// Functions: sin cos exp log sqrt, and pow(base, n) with a literal integer n >= 0.

#include <cmath>
#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tanglide/error.hpp"
#include "tanglide/jet.hpp"

namespace tanglide {

class SymbolTable {
public:
    SymbolTable() = default;
    SymbolTable(std::vector<std::string> states, std::vector<std::pair<std::string, double>> params);

    std::size_t state_count() const noexcept { return states_.size(); }
    std::size_t param_count() const noexcept { return param_names_.size(); }

    const std::vector<std::string>& states() const noexcept { return states_; }
    const std::vector<std::string>& param_names() const noexcept { return param_names_; }
    std::span<const double> param_values() const noexcept { return param_values_; }

    std::optional<std::size_t> state_index(std::string_view name) const;
    std::optional<std::size_t> param_index(std::string_view name) const;

    double param(std::string_view name) const;
    /// Copy with one parameter value replaced. Unknown names throw.
    SymbolTable with_param(std::string_view name, double value) const;

private:
    std::vector<std::string> states_;
    std::vector<std::string> param_names_;
    std::vector<double> param_values_;
};

enum class NodeKind { constant, variable, parameter, negate, add, sub, mul, div, power, call };
enum class Function { sin, cos, exp, log, sqrt };

struct ExprNode {
    NodeKind kind = NodeKind::constant;
    double value = 0.0;       // constant
    std::size_t index = 0;    // variable / parameter slot
    unsigned exponent = 0;    // power
    Function fn = Function::sin;
    std::string name;         // variable / parameter
    std::size_t offset = 0;   // byte offset in the source text
    std::shared_ptr<const ExprNode> lhs;
    std::shared_ptr<const ExprNode> rhs;
};

class Expr {
public:
    Expr() = default;
    explicit Expr(std::shared_ptr<const ExprNode> root) : root_(std::move(root)) {}

    static Expr parse(std::string_view src, const SymbolTable& symbols);

    const ExprNode& root() const { return *root_; }
    bool empty() const noexcept { return root_ == nullptr; }

    std::string to_string() const;
    /// Names of variables and parameters, in order of first appearance.
    std::vector<std::string> free_names() const;

private:
    std::shared_ptr<const ExprNode> root_;
};

namespace detail {

template <typename S>
S eval_node(const ExprNode& n, std::span<const S> x, std::span<const double> p) {
    using std::cos;
    using std::exp;
    using std::log;
    using std::sin;
    using std::sqrt;
    switch (n.kind) {
        case NodeKind::constant:
            return lift<S>(n.value);
        case NodeKind::variable:
            return x[n.index];
        case NodeKind::parameter:
            return lift<S>(p[n.index]);
        case NodeKind::negate:
            return -eval_node<S>(*n.lhs, x, p);
        case NodeKind::add:
            return eval_node<S>(*n.lhs, x, p) + eval_node<S>(*n.rhs, x, p);
        case NodeKind::sub:
            return eval_node<S>(*n.lhs, x, p) - eval_node<S>(*n.rhs, x, p);
        case NodeKind::mul:
            return eval_node<S>(*n.lhs, x, p) * eval_node<S>(*n.rhs, x, p);
        case NodeKind::div: {
            S num = eval_node<S>(*n.lhs, x, p);
            S den = eval_node<S>(*n.rhs, x, p);
            if (primal(den) == 0.0) throw DomainError("division by zero", n.offset);
            return num / den;
        }
        case NodeKind::power:
            return integer_power(eval_node<S>(*n.lhs, x, p), n.exponent);
        case NodeKind::call: {
            S a = eval_node<S>(*n.lhs, x, p);
            switch (n.fn) {
                case Function::sin:
                    return sin(a);
                case Function::cos:
                    return cos(a);
                case Function::exp:
                    return exp(a);
                case Function::log:
                    if (!(primal(a) > 0.0)) throw DomainError("log of a nonpositive value", n.offset);
                    return log(a);
                case Function::sqrt:
                    if (primal(a) < 0.0) throw DomainError("sqrt of a negative value", n.offset);
                    if constexpr (is_jet_v<S>) {
                        if (primal(a) == 0.0 && a.order() > 0)
                            throw DomainError("sqrt is not differentiable at zero", n.offset);
                    }
                    return sqrt(a);
            }
        }
    }
    throw Error("corrupt expression node");
}

}  // namespace detail

/// Evaluates `e` with state values `x` (any scalar ring) and plain parameter values `p`.
template <typename S>
S evaluate(const Expr& e, std::span<const S> x, std::span<const double> p) {
    return detail::eval_node<S>(e.root(), x, p);
}

}  // namespace tanglide
