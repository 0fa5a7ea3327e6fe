#include "hita/model/printer.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "hita/common/vtime.hpp"

namespace hita::model {

namespace {

std::string quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            default: out += c;
        }
    }
    return out + "\"";
}

std::string format_float(double d) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", d);
    std::string s = buf;
    if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
    return s;
}

int precedence(const Expr& e) {
    switch (e.kind) {
        case ExprKind::Literal:
        case ExprKind::Ref: return 100;
        case ExprKind::Unary: return e.unary == UnaryOp::Neg ? 90 : 30;
        case ExprKind::In: return 40;
        case ExprKind::Binary:
            switch (e.binary) {
                case BinaryOp::Implies: return 10;
                case BinaryOp::Or: return 20;
                case BinaryOp::And: return 25;
                case BinaryOp::Eq:
                case BinaryOp::Ne:
                case BinaryOp::Lt:
                case BinaryOp::Le:
                case BinaryOp::Gt:
                case BinaryOp::Ge: return 40;
                case BinaryOp::Add:
                case BinaryOp::Sub: return 50;
                case BinaryOp::Mul:
                case BinaryOp::Div:
                case BinaryOp::Mod: return 60;
            }
    }
    return 0;
}

// Every non-atomic operand is parenthesised; the output is unambiguous without
// having to reason about associativity.
std::string operand(const Expr& e) {
    const std::string s = print_expr(e);
    return precedence(e) >= 90 ? s : "(" + s + ")";
}

void print_actions(std::ostringstream& out, const std::vector<Action>& actions, const char* indent) {
    for (const auto& a : actions) {
        out << indent;
        auto inits = [&] {
            if (a.fields.empty()) return;
            out << " {";
            for (std::size_t i = 0; i < a.fields.size(); ++i) {
                out << (i ? ", " : " ") << a.fields[i].name << ": " << print_expr(a.fields[i].value);
            }
            out << " }";
        };
        switch (a.kind) {
            case ActionKind::Assign: out << a.target << " := " << print_expr(a.value); break;
            case ActionKind::Respond:
                out << "respond " << a.target;
                inits();
                break;
            case ActionKind::Notify:
                out << "notify " << a.target;
                inits();
                break;
            case ActionKind::PlanLoad: out << "plan.load(" << a.target << ")"; break;
            case ActionKind::PlanAdvance: out << "plan.advance"; break;
            case ActionKind::PlanClear: out << "plan.clear"; break;
        }
        out << ";\n";
    }
}

std::string print_field(const FieldDef& f) {
    std::string s = f.name + ": " + to_string(f.type);
    if (f.range) s += " range " + format_float(f.range->lo) + ".." + format_float(f.range->hi);
    return s;
}

}  // namespace

std::string print_literal(const Literal& l) {
    switch (l.kind) {
        case Literal::Kind::Int: return std::to_string(std::get<std::int64_t>(l.value));
        case Literal::Kind::Float: return format_float(std::get<double>(l.value));
        case Literal::Kind::Bool: return std::get<bool>(l.value) ? "true" : "false";
        case Literal::Kind::String: return quote(std::get<std::string>(l.value));
        case Literal::Kind::Symbol: return std::get<std::string>(l.value);
        case Literal::Kind::Datetime: return "@" + vtime::format_datetime(std::get<std::int64_t>(l.value));
        case Literal::Kind::Duration: {
            const std::int64_t d = std::get<std::int64_t>(l.value);
            return d < 0 ? "-" + vtime::format_duration(-d) : vtime::format_duration(d);
        }
    }
    return "?";
}

std::string print_expr(const Expr& e) {
    switch (e.kind) {
        case ExprKind::Literal: {
            const std::string s = print_literal(e.literal);
            return s.starts_with("-") ? "(" + s + ")" : s;
        }
        case ExprKind::Ref: return e.ref;
        case ExprKind::Unary:
            return e.unary == UnaryOp::Neg ? "-" + operand(e.operands[0]) : "not " + operand(e.operands[0]);
        case ExprKind::Binary:
            return operand(e.operands[0]) + " " + std::string(to_string(e.binary)) + " " + operand(e.operands[1]);
        case ExprKind::In: {
            std::string s = operand(e.operands[0]) + " in {";
            for (std::size_t i = 0; i < e.set.size(); ++i) s += (i ? ", " : "") + print_literal(e.set[i]);
            return s + "}";
        }
    }
    return "?";
}

std::string print_model(const DeviceModel& m) {
    std::ostringstream out;
    out << "twinmodel 1\n\n";
    out << "device " << m.name << " version " << quote(m.version) << ";\n\n";

    out << "properties {\n";
    for (const auto& p : m.properties) {
        out << "  " << p.name << ": " << to_string(p.type);
        if (p.unit) out << " unit " << quote(*p.unit);
        if (p.default_value) out << " = " << print_literal(*p.default_value);
        out << ";\n";
    }
    out << "}\n\n";

    out << "constraints {\n";
    for (const auto& c : m.constraints)
        out << "  " << c.id << ": " << print_expr(c.expr) << "\n    message " << quote(c.message) << ";\n";
    out << "}\n\n";

    out << "states {\n";
    for (const auto& s : m.behavior.states) {
        out << "  " << (s.name == m.behavior.initial ? "initial " : "") << s.name;
        if (s.entry.empty()) {
            out << ";\n";
        } else {
            out << " {\n    entry {\n";
            print_actions(out, s.entry, "      ");
            out << "    }\n  }\n";
        }
    }
    out << "}\n\n";

    out << "transitions {\n";
    for (const auto& t : m.behavior.transitions) {
        out << "  ";
        for (std::size_t i = 0; i < t.sources.size(); ++i) out << (i ? "|" : "") << t.sources[i];
        out << " -> " << t.target << " on " << t.trigger;
        if (t.guard) out << "\n    when " << print_expr(*t.guard);
        if (t.actions.empty()) {
            out << ";\n";
        } else {
            out << " {\n";
            print_actions(out, t.actions, "    ");
            out << "  }\n";
        }
    }
    out << "}\n\n";

    out << "api {\n  outcomes ";
    for (std::size_t i = 0; i < m.outcomes.size(); ++i) out << (i ? ", " : "") << m.outcomes[i];
    out << ";\n";
    for (const auto& ep : m.api) {
        out << "  op " << ep.operation << "(";
        for (std::size_t i = 0; i < ep.request.size(); ++i) out << (i ? ", " : "") << print_field(ep.request[i]);
        out << ")";
        if (!ep.response.empty()) {
            out << " -> (";
            for (std::size_t i = 0; i < ep.response.size(); ++i) out << (i ? ", " : "") << print_field(ep.response[i]);
            out << ")";
        }
        out << ";\n";
    }
    out << "}\n";
    return out.str();
}

}  // namespace hita::model
