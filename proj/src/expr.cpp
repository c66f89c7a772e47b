#include "tanglide/expr.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <system_error>
#include <unordered_set>

namespace tanglide {

SymbolTable::SymbolTable(std::vector<std::string> states, std::vector<std::pair<std::string, double>> params)
    : states_(std::move(states)) {
    std::unordered_set<std::string> seen;
    for (const auto& s : states_)
        if (!seen.insert(s).second) throw Error("duplicate symbol '" + s + "'");
    for (auto& [name, value] : params) {
        if (!seen.insert(name).second) throw Error("duplicate symbol '" + name + "'");
        if (!std::isfinite(value)) throw Error("parameter '" + name + "' is not finite");
        param_names_.push_back(name);
        param_values_.push_back(value);
    }
}

std::optional<std::size_t> SymbolTable::state_index(std::string_view name) const {
    auto it = std::find(states_.begin(), states_.end(), name);
    if (it == states_.end()) return std::nullopt;
    return static_cast<std::size_t>(it - states_.begin());
}

std::optional<std::size_t> SymbolTable::param_index(std::string_view name) const {
    auto it = std::find(param_names_.begin(), param_names_.end(), name);
    if (it == param_names_.end()) return std::nullopt;
    return static_cast<std::size_t>(it - param_names_.begin());
}

double SymbolTable::param(std::string_view name) const {
    auto i = param_index(name);
    if (!i) throw Error("unknown parameter '" + std::string(name) + "'");
    return param_values_[*i];
}

SymbolTable SymbolTable::with_param(std::string_view name, double value) const {
    auto i = param_index(name);
    if (!i) throw Error("unknown parameter '" + std::string(name) + "'");
    if (!std::isfinite(value)) throw Error("parameter '" + std::string(name) + "' is not finite");
    SymbolTable copy = *this;
    copy.param_values_[*i] = value;
    return copy;
}

namespace {

using NodePtr = std::shared_ptr<const ExprNode>;

constexpr std::array<std::pair<std::string_view, Function>, 5> kFunctions{{
    {"sin", Function::sin},
    {"cos", Function::cos},
    {"exp", Function::exp},
    {"log", Function::log},
    {"sqrt", Function::sqrt},
}};

std::string_view function_name(Function f) {
    for (const auto& [name, fn] : kFunctions)
        if (fn == f) return name;
    return "?";
}

NodePtr make_binary(NodeKind kind, NodePtr lhs, NodePtr rhs, std::size_t offset) {
    auto n = std::make_shared<ExprNode>();
    n->kind = kind;
    n->lhs = std::move(lhs);
    n->rhs = std::move(rhs);
    n->offset = offset;
    return n;
}

class Parser {
public:
    Parser(std::string_view src, const SymbolTable& symbols) : src_(src), symbols_(symbols) {}

    NodePtr parse() {
        skip_ws();
        if (pos_ == src_.size()) throw SyntaxError("empty expression", pos_);
        NodePtr e = expr();
        skip_ws();
        if (pos_ != src_.size()) throw SyntaxError("unexpected '" + std::string(1, src_[pos_]) + "'", pos_);
        return e;
    }

private:
    void skip_ws() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }

    bool accept(char c) {
        skip_ws();
        if (pos_ < src_.size() && src_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c) {
        skip_ws();
        if (pos_ >= src_.size()) throw SyntaxError(std::string("expected '") + c + "' but input ended", pos_);
        if (src_[pos_] != c) throw SyntaxError(std::string("expected '") + c + "'", pos_);
        ++pos_;
    }

    NodePtr expr() {
        NodePtr lhs = term();
        for (;;) {
            skip_ws();
            std::size_t at = pos_;
            if (accept('+'))
                lhs = make_binary(NodeKind::add, lhs, term(), at);
            else if (accept('-'))
                lhs = make_binary(NodeKind::sub, lhs, term(), at);
            else
                return lhs;
        }
    }

    NodePtr term() {
        NodePtr lhs = unary();
        for (;;) {
            skip_ws();
            std::size_t at = pos_;
            if (accept('*'))
                lhs = make_binary(NodeKind::mul, lhs, unary(), at);
            else if (accept('/'))
                lhs = make_binary(NodeKind::div, lhs, unary(), at);
            else
                return lhs;
        }
    }

    NodePtr unary() {
        skip_ws();
        std::size_t at = pos_;
        if (accept('-')) {
            auto n = std::make_shared<ExprNode>();
            n->kind = NodeKind::negate;
            n->lhs = unary();
            n->offset = at;
            return n;
        }
        if (accept('+')) return unary();
        return power();
    }

    NodePtr power() {
        NodePtr base = primary();
        skip_ws();
        std::size_t at = pos_;
        if (!accept('^')) return base;
        skip_ws();
        std::size_t exp_at = pos_;
        NodePtr e = primary();
        auto n = std::make_shared<ExprNode>();
        n->kind = NodeKind::power;
        n->lhs = std::move(base);
        n->exponent = integer_exponent(*e, exp_at);
        n->offset = at;
        return n;
    }

    static unsigned integer_exponent(const ExprNode& e, std::size_t at) {
        if (e.kind != NodeKind::constant || e.value != std::floor(e.value) || e.value > 1e6)
            throw SyntaxError("exponent must be a nonnegative integer literal", at);
        return static_cast<unsigned>(e.value);
    }

    NodePtr primary() {
        skip_ws();
        if (pos_ >= src_.size()) throw SyntaxError("unexpected end of input", pos_);
        const char c = src_[pos_];
        if (c == '(') {
            ++pos_;
            NodePtr e = expr();
            expect(')');
            return e;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return name();
        throw SyntaxError("unexpected '" + std::string(1, c) + "'", pos_);
    }

    NodePtr number() {
        const std::size_t at = pos_;
        double value = 0.0;
        auto [ptr, ec] = std::from_chars(src_.data() + pos_, src_.data() + src_.size(), value);
        if (ec != std::errc() || !std::isfinite(value)) throw SyntaxError("malformed number", at);
        pos_ = static_cast<std::size_t>(ptr - src_.data());
        auto n = std::make_shared<ExprNode>();
        n->kind = NodeKind::constant;
        n->value = value;
        n->offset = at;
        return n;
    }

    NodePtr name() {
        const std::size_t at = pos_;
        while (pos_ < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
            ++pos_;
        const std::string_view id = src_.substr(at, pos_ - at);
        skip_ws();
        if (pos_ < src_.size() && src_[pos_] == '(') return call(id, at);

        auto n = std::make_shared<ExprNode>();
        n->name = std::string(id);
        n->offset = at;
        if (auto i = symbols_.state_index(id)) {
            n->kind = NodeKind::variable;
            n->index = *i;
        } else if (auto j = symbols_.param_index(id)) {
            n->kind = NodeKind::parameter;
            n->index = *j;
        } else {
            throw UnknownIdentifierError(std::string(id), at);
        }
        return n;
    }

    NodePtr call(std::string_view id, std::size_t at) {
        expect('(');
        if (id == "pow") {
            NodePtr base = expr();
            expect(',');
            skip_ws();
            std::size_t exp_at = pos_;
            NodePtr e = expr();
            expect(')');
            auto n = std::make_shared<ExprNode>();
            n->kind = NodeKind::power;
            n->lhs = std::move(base);
            n->exponent = integer_exponent(*e, exp_at);
            n->offset = at;
            return n;
        }
        auto it = std::find_if(kFunctions.begin(), kFunctions.end(), [&](const auto& f) { return f.first == id; });
        if (it == kFunctions.end()) throw UnknownIdentifierError(std::string(id), at);
        NodePtr arg = expr();
        expect(')');
        auto n = std::make_shared<ExprNode>();
        n->kind = NodeKind::call;
        n->fn = it->second;
        n->lhs = std::move(arg);
        n->offset = at;
        return n;
    }

    std::string_view src_;
    const SymbolTable& symbols_;
    std::size_t pos_ = 0;
};

// 1: additive, 2: multiplicative, 3: unary minus, 4: power, 5: atom
int precedence(const ExprNode& n) {
    switch (n.kind) {
        case NodeKind::add:
        case NodeKind::sub:
            return 1;
        case NodeKind::mul:
        case NodeKind::div:
            return 2;
        case NodeKind::negate:
            return 3;
        case NodeKind::power:
            return 4;
        case NodeKind::constant:
            return n.value < 0.0 || std::signbit(n.value) ? 3 : 5;
        default:
            return 5;
    }
}

void format_number(double v, std::string& out) {
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    (void)ec;
    out.append(buf.data(), ptr);
}

void print(const ExprNode& n, std::string& out);

void print_child(const ExprNode& child, bool parens, std::string& out) {
    if (parens) out += '(';
    print(child, out);
    if (parens) out += ')';
}

void print(const ExprNode& n, std::string& out) {
    const int prec = precedence(n);
    switch (n.kind) {
        case NodeKind::constant:
            if (std::signbit(n.value)) {
                out += '-';
                format_number(-n.value, out);
            } else {
                format_number(n.value, out);
            }
            return;
        case NodeKind::variable:
        case NodeKind::parameter:
            out += n.name;
            return;
        case NodeKind::negate:
            out += '-';
            print_child(*n.lhs, precedence(*n.lhs) < prec, out);
            return;
        case NodeKind::add:
        case NodeKind::sub:
        case NodeKind::mul:
        case NodeKind::div: {
            static constexpr std::string_view ops[] = {" + ", " - ", "*", "/"};
            const auto op = ops[static_cast<int>(n.kind) - static_cast<int>(NodeKind::add)];
            print_child(*n.lhs, precedence(*n.lhs) < prec, out);
            out += op;
            print_child(*n.rhs, precedence(*n.rhs) <= prec, out);
            return;
        }
        case NodeKind::power:
            print_child(*n.lhs, precedence(*n.lhs) < 5, out);
            out += '^';
            out += std::to_string(n.exponent);
            return;
        case NodeKind::call:
            out += function_name(n.fn);
            out += '(';
            print(*n.lhs, out);
            out += ')';
            return;
    }
}

void collect_names(const ExprNode& n, std::vector<std::string>& names) {
    if (n.kind == NodeKind::variable || n.kind == NodeKind::parameter) {
        if (std::find(names.begin(), names.end(), n.name) == names.end()) names.push_back(n.name);
        return;
    }
    if (n.lhs) collect_names(*n.lhs, names);
    if (n.rhs) collect_names(*n.rhs, names);
}

}  // namespace

Expr Expr::parse(std::string_view src, const SymbolTable& symbols) { return Expr(Parser(src, symbols).parse()); }

std::string Expr::to_string() const {
    std::string out;
    if (root_) print(*root_, out);
    return out;
}

std::vector<std::string> Expr::free_names() const {
    std::vector<std::string> names;
    if (root_) collect_names(*root_, names);
    return names;
}

}  // namespace tanglide
