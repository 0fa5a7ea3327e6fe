#pragma once

#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "hita/model/device_model.hpp"

namespace hita::model {

class MissingBinding : public std::runtime_error {
public:
    explicit MissingBinding(const std::string& name) : std::runtime_error("missing binding: " + name), name_(name) {}
    const std::string& name() const { return name_; }

private:
    std::string name_;
};

class EvalTypeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using Bindings = std::map<std::string, Value, std::less<>>;

// Name lookup for evaluation; returns nullopt when the path is unbound.
using Lookup = std::function<std::optional<Value>(std::string_view path)>;

// Integer division and modulo by zero yield 0; integer overflow wraps.
Value evaluate(const Expr& e, const Lookup& lookup);
bool evaluate_bool(const Expr& e, const Lookup& lookup);

struct ConstraintResult {
    bool holds = false;
    std::optional<std::string> message;  // present iff violated
};

ConstraintResult eval_constraint(const Constraint& c, const Bindings& values);

// Literal to runtime value (Symbol -> its name).
Value literal_value(const Literal& l);

}  // namespace hita::model
