#include "hita/harness/generator.hpp"

#include <algorithm>
#include <cmath>

#include "hita/common/errors.hpp"

namespace hita::harness {

namespace {

const char* const kWords[] = {"alpha", "birch", "cedar", "delta", "ember", "fjord", "grove", "heron", "iris", "juniper"};

}  // namespace

GeneratorConfig generator_config_from_json(const Json& j) {
    GeneratorConfig c;
    if (!j.is_object()) throw ValidationError("generator config must be an object");
    if (auto w = j.find("op_weights"); w != j.end()) {
        if (!w->is_object()) throw ValidationError("op_weights must be an object");
        c.op_weights.clear();
        for (const auto& [op, v] : w->items()) {
            if (!v.is_number() || v.get<double>() < 0) throw ValidationError("weight of '" + op + "' must be a non-negative number");
            c.op_weights[op] = v.get<double>();
        }
    }
    if (auto r = j.find("invalid_ratio"); r != j.end()) {
        if (!r->is_number()) throw ValidationError("invalid_ratio must be a number");
        c.invalid_ratio = r->get<double>();
    }
    if (!(c.invalid_ratio >= 0 && c.invalid_ratio <= 1)) throw ValidationError("invalid_ratio must be in [0,1]");
    return c;
}

Json to_json(const GeneratorConfig& c) {
    Json w = Json::object();
    for (const auto& [k, v] : c.op_weights) w[k] = v;
    return Json{{"op_weights", w}, {"invalid_ratio", c.invalid_ratio}};
}

MedicationPlan generate_plan(Rng& rng, const StateHints& hints, bool invalid) {
    const int capacity = std::max(1, hints.roll_capacity);
    const vtime::Millis today = vtime::start_of_day(hints.now);
    const int minute_now = static_cast<int>((hints.now - today) / vtime::kMinute);

    MedicationPlan p;
    p.start_date = today;
    const int n = static_cast<int>(rng.uniform_int(1, 3));
    std::vector<int> offsets;
    int t = static_cast<int>(rng.uniform_int(1, 10));
    for (int i = 0; i < n; ++i) {
        offsets.push_back(t);
        t += static_cast<int>(rng.uniform_int(10, 60));
    }
    for (int off : offsets)
        if (minute_now + off < 24 * 60) p.dose_times.push_back(minute_now + off);
    if (p.dose_times.empty()) {
        p.start_date = today + vtime::kDay;
        for (int off : offsets) p.dose_times.push_back(8 * 60 + off);
    }
    p.doses_per_intake = static_cast<int>(rng.uniform_int(1, 2));
    p.plan_days = static_cast<int>(rng.uniform_int(1, 3));
    while (p.total_doses() > capacity) {
        if (p.plan_days > 1) --p.plan_days;
        else if (p.doses_per_intake > 1) --p.doses_per_intake;
        else p.dose_times.pop_back();
    }
    const int total = static_cast<int>(p.total_doses());
    if (!invalid) {
        p.roll_total = static_cast<int>(rng.uniform_int(total, capacity));
    } else if (total >= 2 && rng.bernoulli(0.5)) {
        p.roll_total = static_cast<int>(rng.uniform_int(1, total - 1));
    } else {
        p.roll_total = capacity + static_cast<int>(rng.uniform_int(1, 8));
    }
    return p;
}

RequestGenerator::RequestGenerator(std::vector<model::EndpointDef> api, GeneratorConfig cfg) : api_(std::move(api)), cfg_(std::move(cfg)) {
    if (api_.empty()) throw ValidationError("request generation needs at least one operation");
    for (const auto& ep : api_) {
        for (const auto& f : ep.request)
            if (f.type.kind == model::TypeKind::Enum && f.type.enum_values.empty())
                throw ValidationError("field '" + ep.operation + "." + f.name + "' has an empty enum domain");
        auto it = cfg_.op_weights.find(ep.operation);
        weights_.push_back(it == cfg_.op_weights.end() ? 1.0 : it->second);
    }
    double total = 0;
    for (double w : weights_) total += w;
    if (!(total > 0)) throw ValidationError("operation weights sum to zero");
}

Json RequestGenerator::field_value(Rng& rng, const model::FieldDef& f, const StateHints& hints) {
    using model::TypeKind;
    switch (f.type.kind) {
        case TypeKind::Int: {
            const auto lo = f.range ? static_cast<std::int64_t>(std::ceil(f.range->lo)) : 0;
            const auto hi = f.range ? static_cast<std::int64_t>(std::floor(f.range->hi)) : 100;
            return rng.uniform_int(lo, std::max(lo, hi));
        }
        case TypeKind::Float: return f.range ? rng.uniform(f.range->lo, f.range->hi) : rng.uniform01();
        case TypeKind::Bool: return rng.bernoulli(0.5);
        case TypeKind::String: return kWords[rng.index(std::size(kWords))];
        case TypeKind::Enum: return f.type.enum_values[rng.index(f.type.enum_values.size())];
        case TypeKind::Datetime: return vtime::format_datetime(hints.now + rng.uniform_int(-60, 360) * vtime::kMinute);
        case TypeKind::Duration: return vtime::format_duration(rng.uniform_int(1, 120) * vtime::kMinute);
        case TypeKind::Plan: {
            const bool invalid = rng.bernoulli(cfg_.invalid_ratio);
            ++plans_;
            if (invalid) ++invalid_plans_;
            return hita::to_json(generate_plan(rng, hints, invalid));
        }
    }
    return nullptr;
}

DeviceRequest RequestGenerator::next(Rng& rng, const StateHints& hints) {
    const auto& ep = api_[rng.weighted(weights_)];
    DeviceRequest req;
    req.operation = ep.operation;
    req.virtual_now = hints.now;
    for (const auto& f : ep.request) req.payload[f.name] = field_value(rng, f, hints);
    return req;
}

DeviceRequest generate_request(Rng& rng, const std::vector<model::EndpointDef>& api, const StateHints& hints) {
    RequestGenerator gen(api, GeneratorConfig{});
    return gen.next(rng, hints);
}

}  // namespace hita::harness
