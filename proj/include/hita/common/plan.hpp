#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hita/common/json.hpp"
#include "hita/common/vtime.hpp"

namespace hita {

// Intakes happen on each of plan_days consecutive days starting at start_date,
// at every dose time of the day; each intake releases doses_per_intake doses.
struct MedicationPlan {
    vtime::Millis start_date = 0;  // midnight UTC
    std::vector<int> dose_times;   // minutes after midnight, strictly increasing
    int doses_per_intake = 1;
    int plan_days = 1;
    int roll_total = 1;

    bool operator==(const MedicationPlan&) const = default;

    int intakes_per_day() const { return static_cast<int>(dose_times.size()); }
    int intake_count() const { return intakes_per_day() * plan_days; }
    std::int64_t total_doses() const { return static_cast<std::int64_t>(intake_count()) * doses_per_intake; }
    bool fits_roll() const { return total_doses() <= roll_total; }
    // Time of the k-th intake, 0 <= k < intake_count(); intakes are in time order.
    vtime::Millis intake_time(int k) const;
    vtime::Millis first_intake() const { return intake_time(0); }
};

// Structural checks only; whether the plan fits a roll is the device's business.
// Throws ValidationError.
MedicationPlan plan_from_json(const Json& j);
Json to_json(const MedicationPlan& p);

// Position of a device within its loaded plan.
struct PlanCursor {
    MedicationPlan plan;
    int next = 0;  // index of the next intake not yet dispensed-and-resolved

    bool operator==(const PlanCursor&) const = default;

    // Intakes already in the past are skipped.
    static PlanCursor load(MedicationPlan p, vtime::Millis now);
    int remaining() const { return plan.intake_count() - next; }
    vtime::Millis next_due() const { return remaining() > 0 ? plan.intake_time(next) : vtime::kNever; }
    void advance() {
        if (next < plan.intake_count()) ++next;
    }
};

}  // namespace hita
