#include "hita/refdev/ref_device.hpp"

#include <algorithm>

#include "hita/common/errors.hpp"

namespace hita::refdev {

namespace {

const std::vector<std::string> kLanguages = {"no", "en", "sv", "da"};
const std::vector<std::string> kVolumes = {"low", "medium", "high"};
const std::vector<std::string> kStates = {"Idle", "PlanLoaded", "DispenseDue", "Dispensed", "Missed"};

bool known(const std::vector<std::string>& domain, const std::string& v) {
    return std::find(domain.begin(), domain.end(), v) != domain.end();
}

// Any element of domain other than current.
std::string other(Rng& rng, const std::vector<std::string>& domain, const std::string& current) {
    std::vector<std::string> rest;
    for (const auto& d : domain)
        if (d != current) rest.push_back(d);
    return rest[rng.index(rest.size())];
}

bool only_keys(const Json& payload, std::initializer_list<const char*> keys) {
    if (!payload.is_object() || payload.size() != keys.size()) return false;
    for (const char* k : keys)
        if (!payload.contains(k)) return false;
    return true;
}

}  // namespace

void RefDeviceConfig::validate() const {
    if (!(divergence.p >= 0.0 && divergence.p <= 1.0)) throw ValidationError("divergence probability must be in [0,1]");
    if (processing_delay < 0) throw ValidationError("processing delay must be non-negative");
    if (grace_window < 0) throw ValidationError("grace window must be non-negative");
    if (roll_capacity <= 0) throw ValidationError("roll capacity must be positive");
    if (!known(kLanguages, language)) throw ValidationError("unknown language '" + language + "'");
    if (!known(kVolumes, alarm_volume)) throw ValidationError("unknown alarm volume '" + alarm_volume + "'");
}

RefDeviceConfig config_from_json(const Json& j) {
    RefDeviceConfig c;
    try {
        c.language = j.value("language", c.language);
        c.alarm_volume = j.value("alarm_volume", c.alarm_volume);
        c.roll_capacity = j.value("roll_capacity", c.roll_capacity);
        c.grace_window = j.value("grace_window_ms", c.grace_window);
        c.processing_delay = j.value("processing_delay_ms", c.processing_delay);
        if (auto d = j.find("divergence"); d != j.end()) {
            c.divergence.p = d->value("p", 0.0);
            c.divergence.seed = d->value("seed", c.divergence.seed);
            const std::string kind = d->value("kind", std::string("flip"));
            if (kind == "flip") c.divergence.kind = DivergenceKind::Flip;
            else if (kind == "perturb") c.divergence.kind = DivergenceKind::Perturb;
            else throw ValidationError("unknown divergence kind '" + kind + "'");
        }
    } catch (const Json::exception& e) {
        throw ValidationError(std::string("ref-device config: ") + e.what());
    }
    c.validate();
    return c;
}

Json to_json(const RefDeviceConfig& c) {
    return Json{{"language", c.language},
                {"alarm_volume", c.alarm_volume},
                {"roll_capacity", c.roll_capacity},
                {"grace_window_ms", c.grace_window},
                {"processing_delay_ms", c.processing_delay},
                {"divergence",
                 {{"p", c.divergence.p},
                  {"kind", c.divergence.kind == DivergenceKind::Flip ? "flip" : "perturb"},
                  {"seed", c.divergence.seed}}}};
}

RefDevice::RefDevice(RefDeviceConfig cfg) : cfg_(std::move(cfg)), rng_(cfg_.divergence.seed) {
    cfg_.validate();
    language_ = cfg_.language;
    alarm_ = cfg_.alarm_volume;
    roll_capacity_ = cfg_.roll_capacity;
}

Timed RefDevice::submit(const DeviceRequest& req, vtime::Millis arrival) {
    Timed t;
    t.started_at = std::max(arrival, busy_until_);
    t.completed_at = t.started_at + cfg_.processing_delay;
    busy_until_ = t.completed_at;
    t.response = canonical_response(req, arrival);
    diverge(t.response);
    ++handled_;
    return t;
}

std::vector<std::string> RefDevice::violations() const {
    std::vector<std::string> v;
    if (!(roll_capacity_ > 0)) v.push_back("capacity_positive");
    if (!known(kVolumes, alarm_)) v.push_back("volume_known");
    if (doses_per_day_ * plan_days_ > roll_capacity_) v.push_back("plan_fits_capacity");
    if (roll_loaded_ > roll_capacity_) v.push_back("roll_fits_capacity");
    if (doses_per_day_ * plan_days_ > roll_loaded_) v.push_back("plan_fits_roll");
    if (roll_remaining_ < 0 || roll_remaining_ > roll_loaded_) v.push_back("roll_bounds");
    if (dispensed_ + roll_remaining_ != roll_loaded_) v.push_back("roll_conservation");
    return v;
}

DeviceResponse RefDevice::canonical_response(const DeviceRequest& req, vtime::Millis now) {
    DeviceResponse r;
    r.state = state_;
    const std::string& op = req.operation;
    auto error = [&](std::string msg) {
        r.status = "error";
        r.state = state_;
        r.message = std::move(msg);
        return r;
    };
    auto rejected = [&] {
        r.status = "rejected";
        r.message = rejected_message(state_);
        return r;
    };
    auto accept = [&](const std::string& next) {
        r.status = "accepted";
        r.state = next;
        state_ = next;
        return r;
    };
    auto completed = [&] {
        r.notifications.push_back({"plan_completed", now, Json{{"taken", taken_}, {"missed", missed_}}});
        return accept("Idle");
    };

    if (op == "tick") {
        if (state_ == "Idle") return accept("Idle");
        if (state_ == "PlanLoaded") {
            if (plan_->remaining() > 0 && now >= plan_->next_due()) {
                const std::int64_t doses = plan_->plan.doses_per_intake;
                roll_remaining_ -= doses;
                dispensed_ += doses;
                if (auto v = violations(); !v.empty()) {
                    roll_remaining_ += doses;
                    dispensed_ -= doses;
                    return error(constraint_violation_message(v));
                }
                r.notifications.push_back({"dose_dispensed", now, Json{{"due", plan_->next_due()}, {"doses", doses}}});
                r.status = "dispensed";
                r.state = state_ = "DispenseDue";
                return r;
            }
            if (plan_->remaining() > 0) return accept("PlanLoaded");
            return completed();
        }
        if (state_ == "DispenseDue") {
            if (now >= plan_->next_due() + cfg_.grace_window) {
                r.notifications.push_back({"missed_dose", now, Json{{"due", plan_->next_due()}}});
                plan_->advance();
                ++missed_;
                r.status = "missed";
                r.state = state_ = "Missed";
                return r;
            }
            return accept("DispenseDue");
        }
        // Dispensed or Missed
        if (plan_->remaining() > 0) return accept("PlanLoaded");
        return completed();
    }

    if (op == "load_plan") {
        if (!only_keys(req.payload, {"plan"})) return error(malformed_payload_message(op));
        MedicationPlan p;
        try {
            p = plan_from_json(req.payload.at("plan"));
        } catch (const ValidationError&) {
            return error(malformed_payload_message(op));
        }
        if (state_ != "Idle") return rejected();
        const auto saved = std::make_tuple(doses_per_day_, plan_days_, roll_loaded_, roll_remaining_, dispensed_);
        doses_per_day_ = static_cast<std::int64_t>(p.intakes_per_day()) * p.doses_per_intake;
        plan_days_ = p.plan_days;
        roll_loaded_ = p.roll_total;
        roll_remaining_ = p.roll_total;
        dispensed_ = 0;
        if (auto v = violations(); !v.empty()) {
            std::tie(doses_per_day_, plan_days_, roll_loaded_, roll_remaining_, dispensed_) = saved;
            return error(constraint_violation_message(v));
        }
        plan_ = PlanCursor::load(std::move(p), now);
        return accept("PlanLoaded");
    }
    if (op == "cancel_plan") {
        if (!only_keys(req.payload, {})) return error(malformed_payload_message(op));
        if (state_ == "Idle") return rejected();
        plan_.reset();
        return accept("Idle");
    }
    if (op == "confirm_intake") {
        if (!only_keys(req.payload, {})) return error(malformed_payload_message(op));
        if (state_ != "DispenseDue") return rejected();
        plan_->advance();
        ++taken_;
        return accept("Dispensed");
    }
    if (op == "set_language") {
        if (!only_keys(req.payload, {"language"})) return error(malformed_payload_message(op));
        const Json& v = req.payload.at("language");
        if (!v.is_string() || !known(kLanguages, v.get<std::string>())) return error(malformed_payload_message(op));
        language_ = v.get<std::string>();
        return accept(state_);
    }
    if (op == "set_alarm") {
        if (!only_keys(req.payload, {"volume"})) return error(malformed_payload_message(op));
        const Json& v = req.payload.at("volume");
        if (!v.is_string() || !known(kVolumes, v.get<std::string>())) return error(malformed_payload_message(op));
        alarm_ = v.get<std::string>();
        return accept(state_);
    }
    if (op == "get_status") {
        if (!only_keys(req.payload, {})) return error(malformed_payload_message(op));
        r.fields = Json{{"language", language_}, {"alarm_volume", alarm_}};
        return accept(state_);
    }
    return error(unknown_operation_message(op));
}

void RefDevice::diverge(DeviceResponse& r) {
    if (cfg_.divergence.p <= 0.0) return;
    if (!rng_.bernoulli(cfg_.divergence.p)) return;
    ++perturbed_;
    if (cfg_.divergence.kind == DivergenceKind::Flip) {
        r.status = other(rng_, kOutcomeClasses, r.status);
        return;
    }
    if (r.fields.contains("language")) {
        if (rng_.bernoulli(0.5)) r.fields["language"] = other(rng_, kLanguages, r.fields["language"].get<std::string>());
        else r.fields["alarm_volume"] = other(rng_, kVolumes, r.fields["alarm_volume"].get<std::string>());
        return;
    }
    r.state = other(rng_, kStates, r.state);
}

}  // namespace hita::refdev
