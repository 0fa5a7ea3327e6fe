#pragma once

#include <string_view>

#include "hita/model/device_model.hpp"

// Reserved names visible inside guards and actions.
//   now                  current virtual time (datetime)
//   req.<field>          request payload field of the triggering operation
//   req.<plan>.<acc>     derived values of a plan-typed request field
//   plan.<acc>           the twin's loaded medication plan
namespace hita::model {

struct BuiltinField {
    std::string_view name;
    TypeKind type;
};

inline constexpr BuiltinField kPlanRequestFields[] = {
    {"intakes_per_day", TypeKind::Int}, {"doses_per_intake", TypeKind::Int}, {"days", TypeKind::Int},
    {"total_doses", TypeKind::Int},     {"roll_total", TypeKind::Int},       {"start", TypeKind::Datetime},
};

inline constexpr BuiltinField kPlanStateFields[] = {
    {"loaded", TypeKind::Bool},         {"next_due", TypeKind::Datetime}, {"remaining", TypeKind::Int},
    {"doses_per_intake", TypeKind::Int}, {"intakes_per_day", TypeKind::Int}, {"days", TypeKind::Int},
    {"roll_total", TypeKind::Int},
};

inline constexpr std::string_view kReservedNames[] = {"now", "req", "plan", "tick"};

inline bool is_reserved(std::string_view name) {
    for (auto r : kReservedNames)
        if (r == name) return true;
    return false;
}

}  // namespace hita::model
