#include "hita/model/checker.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>

#include "hita/model/builtins.hpp"
#include "hita/model/printer.hpp"

namespace hita::model {

std::string_view to_string(DiagCode c) {
    switch (c) {
        case DiagCode::DuplicateName: return "duplicate-name";
        case DiagCode::UnknownReference: return "unknown-reference";
        case DiagCode::TypeMismatch: return "type-mismatch";
        case DiagCode::EmptyEnum: return "empty-enum";
        case DiagCode::InvalidDefault: return "invalid-default";
        case DiagCode::ReservedName: return "reserved-name";
        case DiagCode::MissingInitial: return "missing-initial";
        case DiagCode::MissingOutcome: return "missing-outcome";
        case DiagCode::InvalidAction: return "invalid-action";
        case DiagCode::Nondeterminism: return "nondeterminism";
        case DiagCode::PossibleOverlap: return "possible-overlap";
    }
    return "?";
}

bool has_errors(const std::vector<Diagnostic>& diags) {
    return std::any_of(diags.begin(), diags.end(), [](const Diagnostic& d) { return d.severity == Severity::Error; });
}

namespace {

enum class SKind { Int, Float, Bool, String, Enum, Datetime, Duration, Plan, Symbol };

struct SType {
    SKind kind = SKind::Int;
    std::vector<std::string> domain;  // Enum
    std::string symbol;               // Symbol
};

SType from_type(const Type& t) {
    switch (t.kind) {
        case TypeKind::Int: return {SKind::Int};
        case TypeKind::Float: return {SKind::Float};
        case TypeKind::Bool: return {SKind::Bool};
        case TypeKind::String: return {SKind::String};
        case TypeKind::Enum: return {SKind::Enum, t.enum_values};
        case TypeKind::Datetime: return {SKind::Datetime};
        case TypeKind::Duration: return {SKind::Duration};
        case TypeKind::Plan: return {SKind::Plan};
    }
    return {};
}

std::string describe(const SType& t) {
    switch (t.kind) {
        case SKind::Int: return "int";
        case SKind::Float: return "float";
        case SKind::Bool: return "bool";
        case SKind::String: return "string";
        case SKind::Enum: return to_string(Type::enumeration(t.domain));
        case SKind::Datetime: return "datetime";
        case SKind::Duration: return "duration";
        case SKind::Plan: return "plan";
        case SKind::Symbol: return "symbol '" + t.symbol + "'";
    }
    return "?";
}

bool numeric(SKind k) { return k == SKind::Int || k == SKind::Float; }

bool contains(const std::vector<std::string>& v, const std::string& s) { return std::find(v.begin(), v.end(), s) != v.end(); }

// Where an expression lives decides which names it may use.
struct Scope {
    const DeviceModel* model = nullptr;
    const EndpointDef* endpoint = nullptr;  // triggering operation (null for tick/entry/constraints)
    bool runtime = false;                   // now / plan.* visible
    bool request = false;                   // req.* visible
};

std::optional<SType> resolve_name(const Scope& sc, std::string_view path) {
    const auto dot = path.find('.');
    if (dot == std::string_view::npos) {
        if (const auto* p = sc.model->find_property(path)) return from_type(p->type);
        if (sc.runtime && path == "now") return SType{SKind::Datetime};
        return std::nullopt;
    }
    const std::string_view head = path.substr(0, dot);
    const std::string_view rest = path.substr(dot + 1);
    if (head == "req" && sc.request && sc.endpoint) {
        const auto dot2 = rest.find('.');
        const std::string_view field = rest.substr(0, dot2);
        const FieldDef* f = sc.endpoint->find_request_field(field);
        if (!f) return std::nullopt;
        if (dot2 == std::string_view::npos) return from_type(f->type);
        if (f->type.kind != TypeKind::Plan) return std::nullopt;
        const std::string_view acc = rest.substr(dot2 + 1);
        for (const auto& b : kPlanRequestFields)
            if (b.name == acc) return from_type(Type::of(b.type));
        return std::nullopt;
    }
    if (head == "plan" && sc.runtime) {
        for (const auto& b : kPlanStateFields)
            if (b.name == rest) return from_type(Type::of(b.type));
    }
    return std::nullopt;
}

class Checker {
public:
    explicit Checker(const DeviceModel& m) : m_(m) {}

    std::vector<Diagnostic> run() {
        check_properties();
        check_api();
        check_constraints();
        check_states();
        check_transitions();
        if (!has_errors(diags_)) check_determinism();
        return std::move(diags_);
    }

private:
    void report(DiagCode code, std::string msg, SourcePos pos, Severity sev = Severity::Error) {
        diags_.push_back({sev, code, std::move(msg), pos});
    }

    void check_type_decl(const Type& t, const std::string& owner, SourcePos pos) {
        if (t.kind != TypeKind::Enum) return;
        if (t.enum_values.empty()) report(DiagCode::EmptyEnum, "enum type of '" + owner + "' has no values", pos);
        std::set<std::string> seen;
        for (const auto& v : t.enum_values)
            if (!seen.insert(v).second) report(DiagCode::DuplicateName, "enum value '" + v + "' repeated in '" + owner + "'", pos);
    }

    void check_properties() {
        std::set<std::string> seen;
        for (const auto& p : m_.properties) {
            if (!seen.insert(p.name).second) report(DiagCode::DuplicateName, "duplicate property '" + p.name + "'", p.pos);
            if (is_reserved(p.name)) report(DiagCode::ReservedName, "'" + p.name + "' is a reserved name", p.pos);
            if (p.type.kind == TypeKind::Plan) report(DiagCode::TypeMismatch, "property '" + p.name + "' cannot have plan type", p.pos);
            check_type_decl(p.type, p.name, p.pos);
            if (p.default_value && !literal_fits(*p.default_value, p.type))
                report(DiagCode::InvalidDefault,
                       "default " + print_literal(*p.default_value) + " of '" + p.name + "' is not a " + to_string(p.type), p.pos);
        }
    }

    static bool literal_fits(const Literal& l, const Type& t) {
        using K = Literal::Kind;
        switch (t.kind) {
            case TypeKind::Int: return l.kind == K::Int;
            case TypeKind::Float: return l.kind == K::Float || l.kind == K::Int;
            case TypeKind::Bool: return l.kind == K::Bool;
            case TypeKind::String: return l.kind == K::String;
            case TypeKind::Datetime: return l.kind == K::Datetime;
            case TypeKind::Duration: return l.kind == K::Duration;
            case TypeKind::Enum: return l.kind == K::Symbol && contains(t.enum_values, std::get<std::string>(l.value));
            case TypeKind::Plan: return false;
        }
        return false;
    }

    void check_api() {
        std::set<std::string> outcomes;
        for (const auto& o : m_.outcomes)
            if (!outcomes.insert(o).second) report(DiagCode::DuplicateName, "duplicate outcome '" + o + "'", {});
        for (auto required : {kOutcomeAccepted, kOutcomeRejected, kOutcomeError})
            if (!outcomes.count(std::string(required)))
                report(DiagCode::MissingOutcome, "outcomes must include '" + std::string(required) + "'", {});

        std::set<std::string> ops;
        for (const auto& ep : m_.api) {
            if (!ops.insert(ep.operation).second) report(DiagCode::DuplicateName, "duplicate operation '" + ep.operation + "'", ep.pos);
            if (is_reserved(ep.operation)) report(DiagCode::ReservedName, "'" + ep.operation + "' is a reserved name", ep.pos);
            for (const auto* list : {&ep.request, &ep.response}) {
                std::set<std::string> names;
                for (const auto& f : *list) {
                    if (!names.insert(f.name).second)
                        report(DiagCode::DuplicateName, "duplicate field '" + f.name + "' in '" + ep.operation + "'", ep.pos);
                    check_type_decl(f.type, ep.operation + "." + f.name, ep.pos);
                    if (list == &ep.response && f.type.kind == TypeKind::Plan)
                        report(DiagCode::TypeMismatch, "response field '" + f.name + "' cannot have plan type", ep.pos);
                    if (f.range && f.range->lo > f.range->hi)
                        report(DiagCode::TypeMismatch, "empty range on '" + ep.operation + "." + f.name + "'", ep.pos);
                }
            }
        }
    }

    void check_constraints() {
        std::set<std::string> ids;
        Scope sc{&m_, nullptr, false, false};
        for (const auto& c : m_.constraints) {
            if (!ids.insert(c.id).second) report(DiagCode::DuplicateName, "duplicate constraint '" + c.id + "'", c.pos);
            expect_bool(c.expr, sc, "constraint '" + c.id + "'");
        }
    }

    void check_states() {
        std::set<std::string> names;
        for (const auto& s : m_.behavior.states)
            if (!names.insert(s.name).second) report(DiagCode::DuplicateName, "duplicate state '" + s.name + "'", s.pos);
        if (m_.behavior.initial.empty()) report(DiagCode::MissingInitial, "no initial state declared", {});
        else if (!names.count(m_.behavior.initial))
            report(DiagCode::UnknownReference, "initial state '" + m_.behavior.initial + "' is not declared", {});
        Scope sc{&m_, nullptr, true, false};
        for (const auto& s : m_.behavior.states) check_actions(s.entry, sc, nullptr, true);
    }

    void check_transitions() {
        for (const auto& t : m_.behavior.transitions) {
            for (const auto& s : t.sources) {
                if (s == kAnyState) {
                    if (t.sources.size() != 1) report(DiagCode::UnknownReference, "'*' cannot be combined with other sources", t.pos);
                } else if (!m_.find_state(s)) {
                    report(DiagCode::UnknownReference, "transition source state '" + s + "' is not declared", t.pos);
                }
            }
            if (t.target != kAnyState && !m_.find_state(t.target))
                report(DiagCode::UnknownReference, "transition target state '" + t.target + "' is not declared", t.pos);
            const EndpointDef* ep = nullptr;
            if (t.trigger != kTickTrigger) {
                ep = m_.find_endpoint(t.trigger);
                if (!ep) report(DiagCode::UnknownReference, "trigger '" + t.trigger + "' is not a declared operation", t.pos);
            }
            Scope sc{&m_, ep, true, ep != nullptr};
            if (t.guard) expect_bool(*t.guard, sc, "guard");
            check_actions(t.actions, sc, ep, false);
        }
    }

    void check_actions(const std::vector<Action>& actions, const Scope& sc, const EndpointDef* ep, bool entry) {
        for (const auto& a : actions) {
            switch (a.kind) {
                case ActionKind::Assign: {
                    const PropertyDef* p = m_.find_property(a.target);
                    if (!p) {
                        report(DiagCode::UnknownReference, "assignment to undeclared property '" + a.target + "'", a.pos);
                        break;
                    }
                    if (auto vt = infer(a.value, sc)) {
                        if (!assignable(*vt, p->type))
                            report(DiagCode::TypeMismatch,
                                   "cannot assign " + describe(*vt) + " to '" + a.target + "' of type " + to_string(p->type), a.pos);
                    }
                    break;
                }
                case ActionKind::Respond: {
                    if (entry) {
                        report(DiagCode::InvalidAction, "respond is not allowed in entry actions", a.pos);
                        break;
                    }
                    if (!contains(m_.outcomes, a.target))
                        report(DiagCode::UnknownReference, "outcome '" + a.target + "' is not declared", a.pos);
                    std::set<std::string> names;
                    for (const auto& f : a.fields) {
                        if (!names.insert(f.name).second) report(DiagCode::DuplicateName, "response field '" + f.name + "' repeated", a.pos);
                        const FieldDef* fd = ep ? ep->find_response_field(f.name) : nullptr;
                        if (!fd) {
                            report(DiagCode::UnknownReference, "response field '" + f.name + "' is not declared for this trigger", a.pos);
                            continue;
                        }
                        if (auto vt = infer(f.value, sc)) {
                            if (!assignable(*vt, fd->type))
                                report(DiagCode::TypeMismatch, "response field '" + f.name + "' expects " + to_string(fd->type), a.pos);
                        }
                    }
                    break;
                }
                case ActionKind::Notify: {
                    std::set<std::string> names;
                    for (const auto& f : a.fields) {
                        if (!names.insert(f.name).second) report(DiagCode::DuplicateName, "event field '" + f.name + "' repeated", a.pos);
                        if (auto vt = infer(f.value, sc)) {
                            if (vt->kind == SKind::Symbol || vt->kind == SKind::Plan)
                                report(DiagCode::TypeMismatch, "event field '" + f.name + "' has no value type", a.pos);
                        }
                    }
                    break;
                }
                case ActionKind::PlanLoad: {
                    if (entry || !sc.request) {
                        report(DiagCode::InvalidAction, "plan.load needs a request-triggered transition", a.pos);
                        break;
                    }
                    auto t = resolve_name(sc, a.target);
                    if (!t) report(DiagCode::UnknownReference, "unknown reference '" + a.target + "'", a.pos);
                    else if (t->kind != SKind::Plan) report(DiagCode::TypeMismatch, "plan.load expects a plan field", a.pos);
                    break;
                }
                case ActionKind::PlanAdvance:
                case ActionKind::PlanClear: break;
            }
        }
    }

    static bool assignable(const SType& v, const Type& target) {
        switch (target.kind) {
            case TypeKind::Int: return v.kind == SKind::Int;
            case TypeKind::Float: return numeric(v.kind);
            case TypeKind::Bool: return v.kind == SKind::Bool;
            case TypeKind::String: return v.kind == SKind::String;
            case TypeKind::Datetime: return v.kind == SKind::Datetime;
            case TypeKind::Duration: return v.kind == SKind::Duration;
            case TypeKind::Enum:
                if (v.kind == SKind::Symbol) return contains(target.enum_values, v.symbol);
                if (v.kind == SKind::Enum)
                    return std::all_of(v.domain.begin(), v.domain.end(), [&](const std::string& s) { return contains(target.enum_values, s); });
                return false;
            case TypeKind::Plan: return false;
        }
        return false;
    }

    void expect_bool(const Expr& e, const Scope& sc, const std::string& what) {
        if (auto t = infer(e, sc); t && t->kind != SKind::Bool)
            report(DiagCode::TypeMismatch, what + " must be bool, found " + describe(*t), e.pos);
    }

    std::optional<SType> mismatch(const Expr& e, const std::string& msg) {
        report(DiagCode::TypeMismatch, msg + " in '" + print_expr(e) + "'", e.pos);
        return std::nullopt;
    }

    static SType literal_type(const Literal& l) {
        switch (l.kind) {
            case Literal::Kind::Int: return {SKind::Int};
            case Literal::Kind::Float: return {SKind::Float};
            case Literal::Kind::Bool: return {SKind::Bool};
            case Literal::Kind::String: return {SKind::String};
            case Literal::Kind::Duration: return {SKind::Duration};
            case Literal::Kind::Datetime: return {SKind::Datetime};
            case Literal::Kind::Symbol: return {SKind::Symbol, {}, std::get<std::string>(l.value)};
        }
        return {};
    }

    // Equality-compatible; returns an error message or empty.
    static std::string eq_compatible(const SType& a, const SType& b) {
        if (numeric(a.kind) && numeric(b.kind)) return {};
        if (a.kind == SKind::Enum && b.kind == SKind::Symbol)
            return contains(a.domain, b.symbol) ? "" : "'" + b.symbol + "' is not a value of " + describe(a);
        if (a.kind == SKind::Symbol && b.kind == SKind::Enum) return eq_compatible(b, a);
        if (a.kind == SKind::Enum && b.kind == SKind::Enum) return {};
        if (a.kind == SKind::Symbol || b.kind == SKind::Symbol || a.kind == SKind::Plan || b.kind == SKind::Plan)
            return "cannot compare " + describe(a) + " with " + describe(b);
        if (a.kind == b.kind) return {};
        return "cannot compare " + describe(a) + " with " + describe(b);
    }

    std::optional<SType> infer(const Expr& e, const Scope& sc) {
        switch (e.kind) {
            case ExprKind::Literal: return literal_type(e.literal);
            case ExprKind::Ref: {
                auto t = resolve_name(sc, e.ref);
                if (!t) {
                    report(DiagCode::UnknownReference, "unknown reference '" + e.ref + "'", e.pos);
                    return std::nullopt;
                }
                return t;
            }
            case ExprKind::Unary: {
                auto t = infer(e.operands[0], sc);
                if (!t) return std::nullopt;
                if (e.unary == UnaryOp::Not) {
                    if (t->kind != SKind::Bool) return mismatch(e, "'not' needs bool");
                    return t;
                }
                if (!numeric(t->kind) && t->kind != SKind::Duration) return mismatch(e, "'-' needs a number or duration");
                return t;
            }
            case ExprKind::In: {
                auto t = infer(e.operands[0], sc);
                if (!t) return std::nullopt;
                for (const auto& l : e.set) {
                    const std::string err = eq_compatible(*t, literal_type(l));
                    if (!err.empty()) return mismatch(e, err);
                }
                return SType{SKind::Bool};
            }
            case ExprKind::Binary: break;
        }
        auto lt = infer(e.operands[0], sc);
        auto rt = infer(e.operands[1], sc);
        if (!lt || !rt) return std::nullopt;
        const SKind l = lt->kind, r = rt->kind;
        switch (e.binary) {
            case BinaryOp::And:
            case BinaryOp::Or:
            case BinaryOp::Implies:
                if (l != SKind::Bool || r != SKind::Bool) return mismatch(e, "boolean operator needs bool operands");
                return SType{SKind::Bool};
            case BinaryOp::Eq:
            case BinaryOp::Ne: {
                const std::string err = eq_compatible(*lt, *rt);
                if (!err.empty()) return mismatch(e, err);
                return SType{SKind::Bool};
            }
            case BinaryOp::Lt:
            case BinaryOp::Le:
            case BinaryOp::Gt:
            case BinaryOp::Ge:
                if ((numeric(l) && numeric(r)) || (l == r && (l == SKind::Datetime || l == SKind::Duration)))
                    return SType{SKind::Bool};
                return mismatch(e, "cannot order " + describe(*lt) + " and " + describe(*rt));
            case BinaryOp::Add:
            case BinaryOp::Sub:
                if (numeric(l) && numeric(r)) return SType{l == SKind::Float || r == SKind::Float ? SKind::Float : SKind::Int};
                if (l == SKind::Datetime && r == SKind::Duration) return SType{SKind::Datetime};
                if (e.binary == BinaryOp::Add && l == SKind::Duration && r == SKind::Datetime) return SType{SKind::Datetime};
                if (e.binary == BinaryOp::Sub && l == SKind::Datetime && r == SKind::Datetime) return SType{SKind::Duration};
                if (l == SKind::Duration && r == SKind::Duration) return SType{SKind::Duration};
                return mismatch(e, "invalid operands " + describe(*lt) + " and " + describe(*rt));
            case BinaryOp::Mul:
                if (numeric(l) && numeric(r)) return SType{l == SKind::Float || r == SKind::Float ? SKind::Float : SKind::Int};
                if ((l == SKind::Duration && r == SKind::Int) || (l == SKind::Int && r == SKind::Duration)) return SType{SKind::Duration};
                return mismatch(e, "invalid operands " + describe(*lt) + " and " + describe(*rt));
            case BinaryOp::Div:
                if (numeric(l) && numeric(r)) return SType{l == SKind::Float || r == SKind::Float ? SKind::Float : SKind::Int};
                if (l == SKind::Duration && r == SKind::Int) return SType{SKind::Duration};
                return mismatch(e, "invalid operands " + describe(*lt) + " and " + describe(*rt));
            case BinaryOp::Mod:
                if (l == SKind::Int && r == SKind::Int) return SType{SKind::Int};
                return mismatch(e, "'%' needs int operands");
        }
        return std::nullopt;
    }

    // ---- determinism ------------------------------------------------------

    struct Leaf {
        enum class Kind { Var, Atom } kind = Kind::Atom;
        std::string key;
    };

    struct Space {
        std::map<std::string, std::vector<std::string>> vars;  // enumerable refs -> domain
        std::vector<std::string> atoms;                        // opaque canonical comparisons
    };

    // Canonical key and polarity for an opaque comparison.
    static std::pair<std::string, bool> canonical_atom(const Expr& e) {
        if (e.kind == ExprKind::Binary) {
            const std::string a = print_expr(e.operands[0]);
            const std::string b = print_expr(e.operands[1]);
            switch (e.binary) {
                case BinaryOp::Le: return {a + " <= " + b, true};
                case BinaryOp::Ge: return {b + " <= " + a, true};
                case BinaryOp::Lt: return {b + " <= " + a, false};
                case BinaryOp::Gt: return {a + " <= " + b, false};
                case BinaryOp::Eq: return {std::min(a, b) + " == " + std::max(a, b), true};
                case BinaryOp::Ne: return {std::min(a, b) + " == " + std::max(a, b), false};
                default: break;
            }
        }
        return {print_expr(e), true};
    }

    std::optional<SType> quiet_type(const Expr& e, const Scope& sc) {
        const std::size_t before = diags_.size();
        auto t = infer(e, sc);
        diags_.resize(before);
        return t;
    }

    bool enumerable_ref(const Expr& e, const Scope& sc, std::vector<std::string>& domain) {
        if (e.kind != ExprKind::Ref) return false;
        auto t = quiet_type(e, sc);
        if (!t) return false;
        if (t->kind == SKind::Bool) {
            domain = {"false", "true"};
            return true;
        }
        if (t->kind == SKind::Enum) {
            domain = t->domain;
            return true;
        }
        return false;
    }

    void collect(const Expr& e, const Scope& sc, Space& space) {
        if (e.kind == ExprKind::Binary && (e.binary == BinaryOp::And || e.binary == BinaryOp::Or || e.binary == BinaryOp::Implies)) {
            collect(e.operands[0], sc, space);
            collect(e.operands[1], sc, space);
            return;
        }
        if (e.kind == ExprKind::Unary && e.unary == UnaryOp::Not) {
            collect(e.operands[0], sc, space);
            return;
        }
        if (e.kind == ExprKind::Literal) return;
        std::vector<std::string> domain;
        if (enumerable_ref(e, sc, domain)) {
            space.vars[e.ref] = domain;
            return;
        }
        if (e.kind == ExprKind::Binary && (e.binary == BinaryOp::Eq || e.binary == BinaryOp::Ne)) {
            bool any = false;
            for (const auto& side : e.operands) {
                if (enumerable_ref(side, sc, domain)) {
                    space.vars[side.ref] = domain;
                    any = true;
                } else if (side.kind != ExprKind::Literal) {
                    any = false;
                    break;
                }
            }
            if (any) return;
        }
        if (e.kind == ExprKind::In && enumerable_ref(e.operands[0], sc, domain)) {
            space.vars[e.operands[0].ref] = domain;
            return;
        }
        auto [key, pol] = canonical_atom(e);
        if (std::find(space.atoms.begin(), space.atoms.end(), key) == space.atoms.end()) space.atoms.push_back(key);
    }

    struct Assignment {
        std::map<std::string, std::string> vars;
        std::map<std::string, bool> atoms;
    };

    static std::string leaf_value(const Expr& e, const Assignment& a) {
        if (e.kind == ExprKind::Ref) return a.vars.at(e.ref);
        if (e.literal.kind == Literal::Kind::Bool) return std::get<bool>(e.literal.value) ? "true" : "false";
        return std::get<std::string>(e.literal.value);
    }

    bool truth(const Expr& e, const Assignment& a) {
        if (e.kind == ExprKind::Binary) {
            switch (e.binary) {
                case BinaryOp::And: return truth(e.operands[0], a) && truth(e.operands[1], a);
                case BinaryOp::Or: return truth(e.operands[0], a) || truth(e.operands[1], a);
                case BinaryOp::Implies: return !truth(e.operands[0], a) || truth(e.operands[1], a);
                default: break;
            }
        }
        if (e.kind == ExprKind::Unary && e.unary == UnaryOp::Not) return !truth(e.operands[0], a);
        if (e.kind == ExprKind::Literal) return e.literal.kind == Literal::Kind::Bool && std::get<bool>(e.literal.value);
        if (e.kind == ExprKind::Ref && a.vars.count(e.ref)) return a.vars.at(e.ref) == "true";
        if (e.kind == ExprKind::Binary && (e.binary == BinaryOp::Eq || e.binary == BinaryOp::Ne)) {
            const auto& l = e.operands[0];
            const auto& r = e.operands[1];
            auto is_var = [&](const Expr& x) { return x.kind == ExprKind::Ref && a.vars.count(x.ref); };
            auto is_const = [&](const Expr& x) {
                return x.kind == ExprKind::Literal && (x.literal.kind == Literal::Kind::Symbol || x.literal.kind == Literal::Kind::Bool);
            };
            if ((is_var(l) || is_const(l)) && (is_var(r) || is_const(r)) && (is_var(l) || is_var(r))) {
                const bool eq = leaf_value(l, a) == leaf_value(r, a);
                return e.binary == BinaryOp::Eq ? eq : !eq;
            }
        }
        if (e.kind == ExprKind::In && e.operands[0].kind == ExprKind::Ref && a.vars.count(e.operands[0].ref)) {
            const std::string& v = a.vars.at(e.operands[0].ref);
            for (const auto& l : e.set) {
                if (l.kind == Literal::Kind::Symbol && std::get<std::string>(l.value) == v) return true;
                if (l.kind == Literal::Kind::Bool && (std::get<bool>(l.value) ? "true" : "false") == v) return true;
            }
            return false;
        }
        auto [key, pol] = canonical_atom(e);
        return a.atoms.at(key) == pol;
    }

    enum class Overlap { None, Definite, Possible, TooComplex };

    Overlap overlap(const Expr* g1, const Expr* g2, const Scope& s1, const Scope& s2) {
        Space space;
        if (g1) collect(*g1, s1, space);
        if (g2) collect(*g2, s2, space);
        double combos = std::pow(2.0, static_cast<double>(space.atoms.size()));
        for (const auto& [k, d] : space.vars) combos *= static_cast<double>(std::max<std::size_t>(d.size(), 1));
        if (combos > static_cast<double>(1 << 20)) return Overlap::TooComplex;

        std::vector<std::pair<std::string, const std::vector<std::string>*>> vars;
        for (const auto& [k, d] : space.vars) vars.emplace_back(k, &d);
        std::vector<std::size_t> idx(vars.size(), 0);
        const std::uint64_t atom_combos = std::uint64_t{1} << space.atoms.size();
        for (;;) {
            Assignment a;
            for (std::size_t i = 0; i < vars.size(); ++i) a.vars[vars[i].first] = (*vars[i].second)[idx[i]];
            for (std::uint64_t mask = 0; mask < atom_combos; ++mask) {
                for (std::size_t j = 0; j < space.atoms.size(); ++j) a.atoms[space.atoms[j]] = (mask >> j) & 1;
                if ((!g1 || truth(*g1, a)) && (!g2 || truth(*g2, a)))
                    return space.atoms.empty() ? Overlap::Definite : Overlap::Possible;
            }
            std::size_t k = 0;
            while (k < vars.size() && ++idx[k] == vars[k].second->size()) idx[k++] = 0;
            if (k == vars.size()) break;
        }
        return Overlap::None;
    }

    void check_determinism() {
        const auto& ts = m_.behavior.transitions;
        for (const auto& state : m_.behavior.states) {
            std::map<std::string, std::vector<std::size_t>> by_trigger;
            for (std::size_t i = 0; i < ts.size(); ++i) {
                const auto srcs = m_.expand_sources(ts[i]);
                if (std::find(srcs.begin(), srcs.end(), state.name) != srcs.end()) by_trigger[ts[i].trigger].push_back(i);
            }
            for (const auto& [trigger, list] : by_trigger) {
                const EndpointDef* ep = trigger == kTickTrigger ? nullptr : m_.find_endpoint(trigger);
                const Scope sc{&m_, ep, true, ep != nullptr};
                for (std::size_t a = 0; a < list.size(); ++a) {
                    for (std::size_t b = a + 1; b < list.size(); ++b) {
                        const Transition& t1 = ts[list[a]];
                        const Transition& t2 = ts[list[b]];
                        const Overlap o = overlap(t1.guard ? &*t1.guard : nullptr, t2.guard ? &*t2.guard : nullptr, sc, sc);
                        const std::string where = "in state '" + state.name + "' on '" + trigger + "': transitions #" +
                                                  std::to_string(list[a] + 1) + " and #" + std::to_string(list[b] + 1);
                        if (o == Overlap::Definite)
                            report(DiagCode::Nondeterminism, "nondeterministic " + where + " can both be enabled", t2.pos);
                        else if (o == Overlap::Possible)
                            report(DiagCode::PossibleOverlap, "guards " + where + " are not provably disjoint", t2.pos, Severity::Warning);
                        else if (o == Overlap::TooComplex)
                            report(DiagCode::PossibleOverlap, "guards " + where + " are too complex to analyse", t2.pos, Severity::Warning);
                    }
                }
            }
        }
    }

    const DeviceModel& m_;
    std::vector<Diagnostic> diags_;
};

void resolve_expr(Expr& e, const Scope& sc) {
    if (e.kind == ExprKind::Ref) {
        if (e.ref.find('.') == std::string::npos && !resolve_name(sc, e.ref)) {
            Literal l;
            l.kind = Literal::Kind::Symbol;
            l.value = e.ref;
            e = Expr::lit(std::move(l), e.pos);
        }
        return;
    }
    for (auto& op : e.operands) resolve_expr(op, sc);
}

void resolve_actions(std::vector<Action>& actions, const Scope& sc) {
    for (auto& a : actions) {
        if (a.kind == ActionKind::Assign) resolve_expr(a.value, sc);
        for (auto& f : a.fields) resolve_expr(f.value, sc);
    }
}

}  // namespace

std::vector<Diagnostic> check_model(const DeviceModel& model) { return Checker(model).run(); }

void resolve_symbols(DeviceModel& m) {
    const Scope constraints{&m, nullptr, false, false};
    for (auto& c : m.constraints) resolve_expr(c.expr, constraints);
    const Scope entry{&m, nullptr, true, false};
    for (auto& s : m.behavior.states) resolve_actions(s.entry, entry);
    for (auto& t : m.behavior.transitions) {
        const EndpointDef* ep = t.trigger == kTickTrigger ? nullptr : m.find_endpoint(t.trigger);
        const Scope sc{&m, ep, true, ep != nullptr};
        if (t.guard) resolve_expr(*t.guard, sc);
        resolve_actions(t.actions, sc);
    }
}

}  // namespace hita::model
