#pragma once

#include <string>

#include "hita/model/device_model.hpp"

namespace hita::model {

std::string print_model(const DeviceModel& model);
std::string print_expr(const Expr& e);
std::string print_literal(const Literal& l);

}  // namespace hita::model
