#include "hita/model/device_model.hpp"

#include <algorithm>
#include <cstdio>

namespace hita::model {

std::string to_string(const Type& t) {
    switch (t.kind) {
        case TypeKind::Int: return "int";
        case TypeKind::Float: return "float";
        case TypeKind::Bool: return "bool";
        case TypeKind::String: return "string";
        case TypeKind::Datetime: return "datetime";
        case TypeKind::Duration: return "duration";
        case TypeKind::Plan: return "plan";
        case TypeKind::Enum: {
            std::string out = "enum{";
            for (std::size_t i = 0; i < t.enum_values.size(); ++i) {
                if (i) out += ", ";
                out += t.enum_values[i];
            }
            return out + "}";
        }
    }
    return "?";
}

std::string to_string(const Value& v) {
    struct Visitor {
        std::string operator()(bool b) const { return b ? "true" : "false"; }
        std::string operator()(std::int64_t i) const { return std::to_string(i); }
        std::string operator()(double d) const {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.17g", d);
            return buf;
        }
        std::string operator()(const std::string& s) const { return s; }
    };
    return std::visit(Visitor{}, v);
}

std::string_view to_string(BinaryOp op) {
    switch (op) {
        case BinaryOp::Add: return "+";
        case BinaryOp::Sub: return "-";
        case BinaryOp::Mul: return "*";
        case BinaryOp::Div: return "/";
        case BinaryOp::Mod: return "%";
        case BinaryOp::Eq: return "==";
        case BinaryOp::Ne: return "!=";
        case BinaryOp::Lt: return "<";
        case BinaryOp::Le: return "<=";
        case BinaryOp::Gt: return ">";
        case BinaryOp::Ge: return ">=";
        case BinaryOp::And: return "and";
        case BinaryOp::Or: return "or";
        case BinaryOp::Implies: return "=>";
    }
    return "?";
}

Expr Expr::lit(Literal l, SourcePos p) {
    Expr e;
    e.kind = ExprKind::Literal;
    e.literal = std::move(l);
    e.pos = p;
    return e;
}

Expr Expr::reference(std::string path, SourcePos p) {
    Expr e;
    e.kind = ExprKind::Ref;
    e.ref = std::move(path);
    e.pos = p;
    return e;
}

Expr Expr::un(UnaryOp op, Expr x, SourcePos p) {
    Expr e;
    e.kind = ExprKind::Unary;
    e.unary = op;
    e.operands.push_back(std::move(x));
    e.pos = p;
    return e;
}

Expr Expr::bin(BinaryOp op, Expr l, Expr r, SourcePos p) {
    Expr e;
    e.kind = ExprKind::Binary;
    e.binary = op;
    e.operands.push_back(std::move(l));
    e.operands.push_back(std::move(r));
    e.pos = p;
    return e;
}

Expr Expr::member(Expr x, std::vector<Literal> values, SourcePos p) {
    Expr e;
    e.kind = ExprKind::In;
    e.operands.push_back(std::move(x));
    e.set = std::move(values);
    e.pos = p;
    return e;
}

const FieldDef* EndpointDef::find_request_field(std::string_view name) const {
    for (const auto& f : request)
        if (f.name == name) return &f;
    return nullptr;
}

const FieldDef* EndpointDef::find_response_field(std::string_view name) const {
    for (const auto& f : response)
        if (f.name == name) return &f;
    return nullptr;
}

const PropertyDef* DeviceModel::find_property(std::string_view n) const {
    for (const auto& p : properties)
        if (p.name == n) return &p;
    return nullptr;
}

const EndpointDef* DeviceModel::find_endpoint(std::string_view operation) const {
    for (const auto& e : api)
        if (e.operation == operation) return &e;
    return nullptr;
}

const State* DeviceModel::find_state(std::string_view n) const {
    for (const auto& s : behavior.states)
        if (s.name == n) return &s;
    return nullptr;
}

std::optional<std::size_t> DeviceModel::outcome_index(std::string_view outcome) const {
    auto it = std::find(outcomes.begin(), outcomes.end(), outcome);
    if (it == outcomes.end()) return std::nullopt;
    return static_cast<std::size_t>(it - outcomes.begin());
}

std::vector<std::string> DeviceModel::expand_sources(const Transition& t) const {
    if (t.sources.size() == 1 && t.sources.front() == kAnyState) {
        std::vector<std::string> all;
        for (const auto& s : behavior.states) all.push_back(s.name);
        return all;
    }
    return t.sources;
}

}  // namespace hita::model
