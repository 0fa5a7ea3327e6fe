#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

#include "hita/model/device_model.hpp"

namespace hita::model {

class ParseError : public std::runtime_error {
public:
    ParseError(int line, int column, const std::string& what)
        : std::runtime_error(std::to_string(line) + ":" + std::to_string(column) + ": " + what), line_(line), column_(column) {}
    int line() const { return line_; }
    int column() const { return column_; }

private:
    int line_;
    int column_;
};

// Syntax only; names are not resolved and nothing is type-checked.
DeviceModel parse_model_syntax(std::string_view text);

// Syntax, symbol resolution and static checks. Throws ParseError for syntax errors and
// for any error-level diagnostic other than guard nondeterminism, which is left to check_model.
DeviceModel parse_model(std::string_view text);

DeviceModel load_model_file(const std::string& path);

// Parses a single expression (used by tests and tooling).
Expr parse_expression(std::string_view text);

}  // namespace hita::model
