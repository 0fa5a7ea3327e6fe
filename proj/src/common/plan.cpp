#include "hita/common/plan.hpp"

#include "hita/common/errors.hpp"

namespace hita {

vtime::Millis MedicationPlan::intake_time(int k) const {
    const int per_day = intakes_per_day();
    return start_date + static_cast<vtime::Millis>(k / per_day) * vtime::kDay +
           static_cast<vtime::Millis>(dose_times[static_cast<std::size_t>(k % per_day)]) * vtime::kMinute;
}

namespace {

int positive_int(const Json& j, const char* key, int max) {
    auto it = j.find(key);
    if (it == j.end() || !it->is_number_integer()) throw ValidationError(std::string("plan: '") + key + "' must be an integer");
    const auto v = it->get<std::int64_t>();
    if (v < 1 || v > max) throw ValidationError(std::string("plan: '") + key + "' out of range");
    return static_cast<int>(v);
}

}  // namespace

MedicationPlan plan_from_json(const Json& j) {
    if (!j.is_object()) throw ValidationError("plan: expected an object");
    static const char* const keys[] = {"start_date", "dose_times", "doses_per_intake", "plan_days", "roll_total"};
    for (const auto& [k, v] : j.items()) {
        bool known = false;
        for (const char* key : keys) known = known || k == key;
        if (!known) throw ValidationError("plan: unknown field '" + k + "'");
    }
    MedicationPlan p;
    auto sd = j.find("start_date");
    if (sd == j.end() || !sd->is_string()) throw ValidationError("plan: 'start_date' must be a date string");
    auto date = vtime::parse_date(sd->get<std::string>());
    if (!date) throw ValidationError("plan: bad start_date");
    p.start_date = *date;

    auto dt = j.find("dose_times");
    if (dt == j.end() || !dt->is_array() || dt->empty() || dt->size() > 24)
        throw ValidationError("plan: 'dose_times' must be a non-empty list");
    for (const auto& t : *dt) {
        if (!t.is_string()) throw ValidationError("plan: dose time must be \"HH:MM\"");
        auto m = vtime::parse_time_of_day(t.get<std::string>());
        if (!m) throw ValidationError("plan: bad dose time");
        if (!p.dose_times.empty() && *m <= p.dose_times.back()) throw ValidationError("plan: dose times must be strictly increasing");
        p.dose_times.push_back(*m);
    }
    p.doses_per_intake = positive_int(j, "doses_per_intake", 16);
    p.plan_days = positive_int(j, "plan_days", 366);
    p.roll_total = positive_int(j, "roll_total", 100000);
    return p;
}

Json to_json(const MedicationPlan& p) {
    Json times = Json::array();
    for (int t : p.dose_times) times.push_back(vtime::format_time_of_day(t));
    return Json{{"start_date", vtime::format_date(p.start_date)},
                {"dose_times", times},
                {"doses_per_intake", p.doses_per_intake},
                {"plan_days", p.plan_days},
                {"roll_total", p.roll_total}};
}

PlanCursor PlanCursor::load(MedicationPlan p, vtime::Millis now) {
    PlanCursor c{std::move(p), 0};
    while (c.remaining() > 0 && c.plan.intake_time(c.next) < now) ++c.next;
    return c;
}

}  // namespace hita
