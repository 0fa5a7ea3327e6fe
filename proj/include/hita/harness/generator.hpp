#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "hita/common/json.hpp"
#include "hita/common/plan.hpp"
#include "hita/common/rng.hpp"
#include "hita/common/wire.hpp"
#include "hita/model/device_model.hpp"

namespace hita::harness {

struct GeneratorConfig {
    // Relative weights per operation; operations not listed get weight 1. The
    // default profile keeps a dispenser busy: plans get loaded and confirmed far
    // more often than they are cancelled.
    std::map<std::string, double> op_weights{{"get_status", 3},     {"set_language", 1},     {"set_alarm", 1},
                                             {"load_plan", 1.5},    {"confirm_intake", 1.5}, {"cancel_plan", 0.01}};
    // Fraction of generated medication plans that deliberately break the roll constraints.
    double invalid_ratio = 0.1;

    bool operator==(const GeneratorConfig&) const = default;
};

GeneratorConfig generator_config_from_json(const Json& j);
Json to_json(const GeneratorConfig& c);

// What the generator may know about the device; never the twin's live state.
struct StateHints {
    vtime::Millis now = 0;
    int roll_capacity = 28;
};

// Medication plans start close to `now` so doses fall due within a campaign.
// With probability cfg.invalid_ratio the plan needs more doses than the roll
// holds, or the roll is larger than the capacity.
MedicationPlan generate_plan(Rng& rng, const StateHints& hints, bool invalid);

class RequestGenerator {
public:
    // Throws ValidationError when api is empty or declares an empty enum.
    RequestGenerator(std::vector<model::EndpointDef> api, GeneratorConfig cfg);

    DeviceRequest next(Rng& rng, const StateHints& hints);

    std::uint64_t plans_generated() const { return plans_; }
    std::uint64_t invalid_plans_generated() const { return invalid_plans_; }

private:
    Json field_value(Rng& rng, const model::FieldDef& f, const StateHints& hints);

    std::vector<model::EndpointDef> api_;
    GeneratorConfig cfg_;
    std::vector<double> weights_;
    std::uint64_t plans_ = 0;
    std::uint64_t invalid_plans_ = 0;
};

// One-shot form: a generator with default configuration drawing a single request.
DeviceRequest generate_request(Rng& rng, const std::vector<model::EndpointDef>& api, const StateHints& hints);

}  // namespace hita::harness
