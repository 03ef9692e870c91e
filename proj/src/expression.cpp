#include "wlf/expression.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <numbers>

namespace wlf {

namespace {

using NodePtr = std::shared_ptr<const ExprNode>;

const std::map<std::string, std::pair<Func, int>>& function_table() {
    static const std::map<std::string, std::pair<Func, int>> table = {
        {"exp", {Func::exp, 1}},   {"log", {Func::log, 1}},     {"sqrt", {Func::sqrt, 1}},
        {"sin", {Func::sin, 1}},   {"cos", {Func::cos, 1}},     {"sinh", {Func::sinh, 1}},
        {"cosh", {Func::cosh, 1}}, {"atan", {Func::atan, 1}},   {"atan2", {Func::atan2, 2}},
        {"pow", {Func::pow, 2}},
    };
    return table;
}

const char* function_name(Func f) {
    for (const auto& [name, entry] : function_table())
        if (entry.first == f) return name.c_str();
    return "?";
}

NodePtr make_node(ExprNode::Kind kind, std::vector<NodePtr> args = {}) {
    auto n = std::make_shared<ExprNode>();
    n->kind = kind;
    n->args = std::move(args);
    return n;
}

class Parser {
public:
    Parser(const std::string& src, int dim) : src_(src), dim_(dim) {}

    NodePtr parse() {
        skip_ws();
        if (pos_ >= src_.size()) throw ParseError("empty expression", 0);
        NodePtr e = expr();
        skip_ws();
        if (pos_ < src_.size()) throw ParseError(std::string("unexpected '") + src_[pos_] + "'", pos_);
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

    // Parses the operand of the operator found at op_offset.
    template <class F>
    NodePtr operand(std::size_t op_offset, F&& f) {
        skip_ws();
        if (pos_ >= src_.size() || !starts_operand(src_[pos_]))
            throw ParseError(std::string("operator '") + src_[op_offset] + "' is missing its operand", op_offset);
        return f();
    }

    static bool starts_operand(char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '(' || c == '-' || c == '+' ||
               c == '_';
    }

    NodePtr expr() {
        NodePtr lhs = term();
        for (;;) {
            skip_ws();
            if (pos_ >= src_.size()) return lhs;
            const char c = src_[pos_];
            if (c != '+' && c != '-') return lhs;
            const std::size_t at = pos_++;
            NodePtr rhs = operand(at, [&] { return term(); });
            lhs = make_node(c == '+' ? ExprNode::Kind::add : ExprNode::Kind::sub, {lhs, rhs});
        }
    }

    NodePtr term() {
        NodePtr lhs = unary();
        for (;;) {
            skip_ws();
            if (pos_ >= src_.size()) return lhs;
            const char c = src_[pos_];
            if (c != '*' && c != '/') return lhs;
            const std::size_t at = pos_++;
            NodePtr rhs = operand(at, [&] { return unary(); });
            lhs = make_node(c == '*' ? ExprNode::Kind::mul : ExprNode::Kind::div, {lhs, rhs});
        }
    }

    NodePtr unary() {
        skip_ws();
        if (pos_ < src_.size() && (src_[pos_] == '-' || src_[pos_] == '+')) {
            const char c = src_[pos_];
            const std::size_t at = pos_++;
            NodePtr inner = operand(at, [&] { return unary(); });
            return c == '-' ? make_node(ExprNode::Kind::neg, {inner}) : inner;
        }
        return power();
    }

    NodePtr power() {
        NodePtr base = atom();
        skip_ws();
        if (pos_ < src_.size() && src_[pos_] == '^') {
            const std::size_t at = pos_++;
            NodePtr ex = operand(at, [&] { return unary(); });
            return make_node(ExprNode::Kind::pow, {base, ex});
        }
        return base;
    }

    NodePtr atom() {
        skip_ws();
        if (pos_ >= src_.size()) throw ParseError("unexpected end of input", pos_);
        const char c = src_[pos_];
        if (c == '(') {
            const std::size_t open = pos_++;
            NodePtr e = operand(open, [&] { return expr(); });
            if (!accept(')')) throw ParseError("unbalanced '('", open);
            return e;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
        throw ParseError(std::string("unexpected '") + c + "'", pos_);
    }

    NodePtr number() {
        const std::size_t start = pos_;
        const char* begin = src_.c_str() + pos_;
        char* end = nullptr;
        const double value = std::strtod(begin, &end);
        if (end == begin) throw ParseError("malformed number", start);
        if (!std::isfinite(value)) throw ParseError("number out of range", start);
        pos_ += static_cast<std::size_t>(end - begin);
        auto n = std::make_shared<ExprNode>();
        n->kind = ExprNode::Kind::number;
        n->number = value;
        return n;
    }

    NodePtr identifier() {
        const std::size_t start = pos_;
        while (pos_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
            ++pos_;
        const std::string name = src_.substr(start, pos_ - start);

        skip_ws();
        if (pos_ < src_.size() && src_[pos_] == '(') {
            auto it = function_table().find(name);
            if (it == function_table().end()) throw ParseError("unknown function '" + name + "'", start);
            const std::size_t open = pos_++;
            std::vector<NodePtr> args;
            args.push_back(operand(open, [&] { return expr(); }));
            while (accept(',')) args.push_back(operand(pos_ - 1, [&] { return expr(); }));
            if (!accept(')')) throw ParseError("expected ')' to close call of '" + name + "'", open);
            if (static_cast<int>(args.size()) != it->second.second)
                throw ParseError("function '" + name + "' expects " + std::to_string(it->second.second) +
                                     " argument(s), got " + std::to_string(args.size()),
                                 start);
            auto n = std::make_shared<ExprNode>();
            n->kind = ExprNode::Kind::call;
            n->func = it->second.first;
            n->args = std::move(args);
            return n;
        }

        if (name == "pi") {
            auto n = std::make_shared<ExprNode>();
            n->number = std::numbers::pi;
            return n;
        }
        if (name.size() >= 2 && (name[0] == 'x' || name[0] == 'v')) {
            bool digits = true;
            for (std::size_t i = 1; i < name.size(); ++i) digits = digits && std::isdigit(static_cast<unsigned char>(name[i]));
            if (digits && (name.size() == 2 || name[1] != '0')) {
                const int idx = std::atoi(name.c_str() + 1);
                if (idx >= dim_)
                    throw ParseError("symbol '" + name + "' exceeds dimension " + std::to_string(dim_), start);
                auto n = std::make_shared<ExprNode>();
                n->kind = name[0] == 'x' ? ExprNode::Kind::base : ExprNode::Kind::fiber;
                n->index = idx;
                return n;
            }
        }
        throw ParseError("unknown symbol '" + name + "'", start);
    }

    const std::string& src_;
    int dim_;
    std::size_t pos_ = 0;
};

bool integer_literal(const ExprNode& n, int& out) {
    if (n.kind == ExprNode::Kind::neg && integer_literal(*n.args[0], out)) {
        out = -out;
        return true;
    }
    if (n.kind != ExprNode::Kind::number) return false;
    const double r = std::round(n.number);
    if (r != n.number || std::abs(r) > 64) return false;
    out = static_cast<int>(r);
    return true;
}

template <class T>
T apply(Func f, const std::vector<T>& a) {
    using std::atan;
    using std::atan2;
    using std::cos;
    using std::cosh;
    using std::exp;
    using std::sin;
    using std::sinh;
    switch (f) {
        case Func::exp: return exp(a[0]);
        case Func::log:
            if constexpr (std::is_same_v<T, double>) return checked_log(a[0]);
            else return log(a[0]);
        case Func::sqrt:
            if constexpr (std::is_same_v<T, double>) return checked_sqrt(a[0]);
            else return sqrt(a[0]);
        case Func::sin: return sin(a[0]);
        case Func::cos: return cos(a[0]);
        case Func::sinh: return sinh(a[0]);
        case Func::cosh: return cosh(a[0]);
        case Func::atan: return atan(a[0]);
        case Func::atan2:
            if constexpr (std::is_same_v<T, double>) {
                if (a[0] == 0.0 && a[1] == 0.0) throw DomainError("atan2 at the origin");
                return atan2(a[0], a[1]);
            } else {
                return atan2(a[0], a[1]);
            }
        case Func::pow:
            if constexpr (std::is_same_v<T, double>) {
                if (!(a[0] > 0.0)) throw DomainError("real power of non-positive value");
                return std::pow(a[0], a[1]);
            } else {
                return pow(a[0], a[1]);
            }
    }
    throw Error("unknown function");
}

template <class T>
T eval(const ExprNode& n, std::span<const T> x, std::span<const T> v) {
    using K = ExprNode::Kind;
    switch (n.kind) {
        case K::number: return T(n.number);
        case K::base: return x[n.index];
        case K::fiber: return v[n.index];
        case K::neg: return -eval(*n.args[0], x, v);
        case K::add: return eval(*n.args[0], x, v) + eval(*n.args[1], x, v);
        case K::sub: return eval(*n.args[0], x, v) - eval(*n.args[1], x, v);
        case K::mul: return eval(*n.args[0], x, v) * eval(*n.args[1], x, v);
        case K::div: {
            T den = eval(*n.args[1], x, v);
            if constexpr (std::is_same_v<T, double>)
                if (den == 0.0) throw DomainError("division by zero");
            return eval(*n.args[0], x, v) / den;
        }
        case K::pow: {
            int k = 0;
            T base = eval(*n.args[0], x, v);
            if (integer_literal(*n.args[1], k)) return ipow(base, k);
            std::vector<T> a{base, eval(*n.args[1], x, v)};
            return apply<T>(Func::pow, a);
        }
        case K::call: {
            std::vector<T> a;
            a.reserve(n.args.size());
            for (const auto& arg : n.args) a.push_back(eval(*arg, x, v));
            return apply<T>(n.func, a);
        }
    }
    throw Error("corrupt expression tree");
}

void print(const ExprNode& n, std::string& out) {
    using K = ExprNode::Kind;
    switch (n.kind) {
        case K::number: {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.17g", n.number);
            out += buf;
            return;
        }
        case K::base: out += "x" + std::to_string(n.index); return;
        case K::fiber: out += "v" + std::to_string(n.index); return;
        case K::neg:
            out += "(-";
            print(*n.args[0], out);
            out += ")";
            return;
        case K::call:
            out += function_name(n.func);
            out += "(";
            for (std::size_t i = 0; i < n.args.size(); ++i) {
                if (i) out += ", ";
                print(*n.args[i], out);
            }
            out += ")";
            return;
        default: break;
    }
    const char* op = n.kind == K::add ? " + " : n.kind == K::sub ? " - " : n.kind == K::mul ? " * " : n.kind == K::div ? " / " : " ^ ";
    out += "(";
    print(*n.args[0], out);
    out += op;
    print(*n.args[1], out);
    out += ")";
}

}  // namespace

bool same_tree(const ExprNode& a, const ExprNode& b) {
    if (a.kind != b.kind || a.args.size() != b.args.size()) return false;
    switch (a.kind) {
        case ExprNode::Kind::number:
            if (a.number != b.number) return false;
            break;
        case ExprNode::Kind::base:
        case ExprNode::Kind::fiber:
            if (a.index != b.index) return false;
            break;
        case ExprNode::Kind::call:
            if (a.func != b.func) return false;
            break;
        default: break;
    }
    for (std::size_t i = 0; i < a.args.size(); ++i)
        if (!same_tree(*a.args[i], *b.args[i])) return false;
    return true;
}

double ModelExpression::evaluate(std::span<const double> x, std::span<const double> v) const {
    return eval<double>(*root_, x, v);
}

Jet ModelExpression::evaluate(std::span<const Jet> x, std::span<const Jet> v) const { return eval<Jet>(*root_, x, v); }

std::string ModelExpression::to_string() const {
    std::string out;
    print(*root_, out);
    return out;
}

ModelExpression parse_expression(const std::string& source, int dim) {
    if (dim < 1) throw ParameterError("expression dimension must be positive");
    Parser p(source, dim);
    return ModelExpression(source, p.parse(), dim);
}

}  // namespace wlf
