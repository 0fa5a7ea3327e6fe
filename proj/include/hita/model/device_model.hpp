#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace hita::model {

enum class TypeKind { Int, Float, Bool, String, Enum, Datetime, Duration, Plan };

struct Type {
    TypeKind kind = TypeKind::Int;
    std::vector<std::string> enum_values;  // Enum only, declaration order

    static Type of(TypeKind k) { return Type{k, {}}; }
    static Type enumeration(std::vector<std::string> values) { return Type{TypeKind::Enum, std::move(values)}; }
    bool operator==(const Type&) const = default;
};

std::string to_string(const Type& t);

// Runtime value. Datetime/Duration are int64 milliseconds, Enum values are their symbol.
using Value = std::variant<bool, std::int64_t, double, std::string>;

std::string to_string(const Value& v);

// Source positions never take part in structural equality.
struct SourcePos {
    int line = 0;
    int column = 0;
    friend bool operator==(const SourcePos&, const SourcePos&) { return true; }
};

struct Literal {
    enum class Kind { Int, Float, Bool, String, Duration, Datetime, Symbol };
    Kind kind = Kind::Int;
    Value value = std::int64_t{0};
    bool operator==(const Literal&) const = default;
};

enum class ExprKind { Literal, Ref, Unary, Binary, In };
enum class UnaryOp { Neg, Not };
enum class BinaryOp { Add, Sub, Mul, Div, Mod, Eq, Ne, Lt, Le, Gt, Ge, And, Or, Implies };

std::string_view to_string(BinaryOp op);

struct Expr {
    ExprKind kind = ExprKind::Literal;
    Literal literal;             // Literal
    std::string ref;             // Ref: dotted path such as "roll_capacity" or "req.plan.total_doses"
    UnaryOp unary = UnaryOp::Not;
    BinaryOp binary = BinaryOp::Add;
    std::vector<Expr> operands;  // Unary: 1, Binary: 2, In: 1
    std::vector<Literal> set;    // In
    SourcePos pos;

    bool operator==(const Expr&) const = default;

    static Expr lit(Literal l, SourcePos p = {});
    static Expr reference(std::string path, SourcePos p = {});
    static Expr un(UnaryOp op, Expr e, SourcePos p = {});
    static Expr bin(BinaryOp op, Expr l, Expr r, SourcePos p = {});
    static Expr member(Expr e, std::vector<Literal> values, SourcePos p = {});
};

struct FieldInit {
    std::string name;
    Expr value;
    bool operator==(const FieldInit&) const = default;
};

enum class ActionKind { Assign, Respond, Notify, PlanLoad, PlanAdvance, PlanClear };

struct Action {
    ActionKind kind = ActionKind::Assign;
    // Assign: property name. Respond: outcome. Notify: event name. PlanLoad: request path ("req.plan").
    std::string target;
    Expr value;                     // Assign
    std::vector<FieldInit> fields;  // Respond, Notify
    SourcePos pos;
    bool operator==(const Action&) const = default;
};

struct State {
    std::string name;
    std::vector<Action> entry;
    SourcePos pos;
    bool operator==(const State&) const = default;
};

inline constexpr std::string_view kAnyState = "*";
inline constexpr std::string_view kTickTrigger = "tick";

struct Transition {
    std::vector<std::string> sources;  // {"*"} matches every state
    std::string target;                // "*" stays in the source state
    std::string trigger;               // API operation or "tick"
    std::optional<Expr> guard;
    std::vector<Action> actions;
    SourcePos pos;
    bool operator==(const Transition&) const = default;
};

struct StateMachine {
    std::vector<State> states;
    std::string initial;
    std::vector<Transition> transitions;
    bool operator==(const StateMachine&) const = default;
};

struct Range {
    double lo = 0;
    double hi = 0;
    bool operator==(const Range&) const = default;
};

struct FieldDef {
    std::string name;
    Type type;
    std::optional<Range> range;  // generator bounds for numeric fields
    bool operator==(const FieldDef&) const = default;
};

struct EndpointDef {
    std::string operation;
    std::vector<FieldDef> request;
    std::vector<FieldDef> response;
    SourcePos pos;
    bool operator==(const EndpointDef&) const = default;

    const FieldDef* find_request_field(std::string_view name) const;
    const FieldDef* find_response_field(std::string_view name) const;
};

struct PropertyDef {
    std::string name;
    Type type;
    std::optional<std::string> unit;
    std::optional<Literal> default_value;
    SourcePos pos;
    bool operator==(const PropertyDef&) const = default;
};

struct Constraint {
    std::string id;
    Expr expr;
    std::string message;
    SourcePos pos;
    bool operator==(const Constraint&) const = default;
};

// Outcomes the runtime itself emits; every model must declare them.
inline constexpr std::string_view kOutcomeAccepted = "accepted";
inline constexpr std::string_view kOutcomeRejected = "rejected";
inline constexpr std::string_view kOutcomeError = "error";

struct DeviceModel {
    std::string name;
    std::string version;
    std::vector<PropertyDef> properties;
    std::vector<Constraint> constraints;
    StateMachine behavior;
    std::vector<std::string> outcomes;
    std::vector<EndpointDef> api;

    bool operator==(const DeviceModel&) const = default;

    const PropertyDef* find_property(std::string_view name) const;
    const EndpointDef* find_endpoint(std::string_view operation) const;
    const State* find_state(std::string_view name) const;
    std::optional<std::size_t> outcome_index(std::string_view outcome) const;
    // Source states a transition applies to, with "*" expanded.
    std::vector<std::string> expand_sources(const Transition& t) const;
};

}  // namespace hita::model
