#include "hita/model/eval.hpp"

#include <cmath>
#include <cstdint>

#include "hita/model/printer.hpp"

namespace hita::model {

Value literal_value(const Literal& l) { return l.value; }

namespace {

std::int64_t wrap_add(std::int64_t a, std::int64_t b) {
    return static_cast<std::int64_t>(static_cast<std::uint64_t>(a) + static_cast<std::uint64_t>(b));
}
std::int64_t wrap_sub(std::int64_t a, std::int64_t b) {
    return static_cast<std::int64_t>(static_cast<std::uint64_t>(a) - static_cast<std::uint64_t>(b));
}
std::int64_t wrap_mul(std::int64_t a, std::int64_t b) {
    return static_cast<std::int64_t>(static_cast<std::uint64_t>(a) * static_cast<std::uint64_t>(b));
}

bool is_num(const Value& v) { return std::holds_alternative<std::int64_t>(v) || std::holds_alternative<double>(v); }

double as_double(const Value& v) {
    if (const auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
    return std::get<double>(v);
}

bool as_bool(const Value& v, const Expr& e) {
    if (const auto* b = std::get_if<bool>(&v)) return *b;
    throw EvalTypeError("expected bool in '" + print_expr(e) + "'");
}

int compare(const Value& a, const Value& b, const Expr& e) {
    if (std::holds_alternative<std::int64_t>(a) && std::holds_alternative<std::int64_t>(b)) {
        const auto x = std::get<std::int64_t>(a), y = std::get<std::int64_t>(b);
        return x < y ? -1 : (x > y ? 1 : 0);
    }
    if (is_num(a) && is_num(b)) {
        const double x = as_double(a), y = as_double(b);
        return x < y ? -1 : (x > y ? 1 : 0);
    }
    if (a.index() == b.index() && std::holds_alternative<std::string>(a)) {
        const int c = std::get<std::string>(a).compare(std::get<std::string>(b));
        return c < 0 ? -1 : (c > 0 ? 1 : 0);
    }
    if (a.index() == b.index() && std::holds_alternative<bool>(a)) return static_cast<int>(std::get<bool>(a)) - std::get<bool>(b);
    throw EvalTypeError("incomparable operands in '" + print_expr(e) + "'");
}

bool equal(const Value& a, const Value& b, const Expr& e) {
    if (is_num(a) != is_num(b) && !(a.index() == b.index())) throw EvalTypeError("incomparable operands in '" + print_expr(e) + "'");
    return compare(a, b, e) == 0;
}

Value arith(BinaryOp op, const Value& a, const Value& b, const Expr& e) {
    if (!is_num(a) || !is_num(b)) throw EvalTypeError("arithmetic on non-numbers in '" + print_expr(e) + "'");
    if (std::holds_alternative<std::int64_t>(a) && std::holds_alternative<std::int64_t>(b)) {
        const auto x = std::get<std::int64_t>(a), y = std::get<std::int64_t>(b);
        switch (op) {
            case BinaryOp::Add: return wrap_add(x, y);
            case BinaryOp::Sub: return wrap_sub(x, y);
            case BinaryOp::Mul: return wrap_mul(x, y);
            case BinaryOp::Div:
                if (y == 0) return std::int64_t{0};
                if (x == INT64_MIN && y == -1) return x;
                return x / y;
            case BinaryOp::Mod:
                if (y == 0 || (x == INT64_MIN && y == -1)) return std::int64_t{0};
                return x % y;
            default: break;
        }
    } else {
        const double x = as_double(a), y = as_double(b);
        switch (op) {
            case BinaryOp::Add: return x + y;
            case BinaryOp::Sub: return x - y;
            case BinaryOp::Mul: return x * y;
            case BinaryOp::Div: return x / y;
            case BinaryOp::Mod: return std::fmod(x, y);
            default: break;
        }
    }
    throw EvalTypeError("bad arithmetic operator");
}

}  // namespace

Value evaluate(const Expr& e, const Lookup& lookup) {
    switch (e.kind) {
        case ExprKind::Literal: return e.literal.value;
        case ExprKind::Ref: {
            auto v = lookup(e.ref);
            if (!v) throw MissingBinding(e.ref);
            return *v;
        }
        case ExprKind::Unary: {
            const Value v = evaluate(e.operands[0], lookup);
            if (e.unary == UnaryOp::Not) return !as_bool(v, e);
            if (const auto* i = std::get_if<std::int64_t>(&v)) return wrap_sub(0, *i);
            if (const auto* d = std::get_if<double>(&v)) return -*d;
            throw EvalTypeError("negation of non-number in '" + print_expr(e) + "'");
        }
        case ExprKind::In: {
            const Value v = evaluate(e.operands[0], lookup);
            for (const auto& l : e.set)
                if (equal(v, l.value, e)) return true;
            return false;
        }
        case ExprKind::Binary: break;
    }
    switch (e.binary) {
        case BinaryOp::And: return as_bool(evaluate(e.operands[0], lookup), e) && as_bool(evaluate(e.operands[1], lookup), e);
        case BinaryOp::Or: return as_bool(evaluate(e.operands[0], lookup), e) || as_bool(evaluate(e.operands[1], lookup), e);
        case BinaryOp::Implies: return !as_bool(evaluate(e.operands[0], lookup), e) || as_bool(evaluate(e.operands[1], lookup), e);
        default: break;
    }
    const Value a = evaluate(e.operands[0], lookup);
    const Value b = evaluate(e.operands[1], lookup);
    switch (e.binary) {
        case BinaryOp::Eq: return equal(a, b, e);
        case BinaryOp::Ne: return !equal(a, b, e);
        case BinaryOp::Lt: return compare(a, b, e) < 0;
        case BinaryOp::Le: return compare(a, b, e) <= 0;
        case BinaryOp::Gt: return compare(a, b, e) > 0;
        case BinaryOp::Ge: return compare(a, b, e) >= 0;
        default: return arith(e.binary, a, b, e);
    }
}

bool evaluate_bool(const Expr& e, const Lookup& lookup) { return as_bool(evaluate(e, lookup), e); }

ConstraintResult eval_constraint(const Constraint& c, const Bindings& values) {
    const Lookup lookup = [&](std::string_view path) -> std::optional<Value> {
        auto it = values.find(path);
        if (it == values.end()) return std::nullopt;
        return it->second;
    };
    if (evaluate_bool(c.expr, lookup)) return {true, std::nullopt};
    return {false, c.message};
}

}  // namespace hita::model
