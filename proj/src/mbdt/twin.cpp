#include "hita/mbdt/twin.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <map>
#include <mutex>

#include "hita/common/digest.hpp"
#include "hita/model/builtins.hpp"
#include "hita/model/printer.hpp"

namespace hita::mbdt {

using model::Type;
using model::TypeKind;
using model::Value;

namespace {

std::string violation_text(const std::vector<Violation>& v) {
    std::string out = "constraint violation:";
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "; " : " ") + v[i].id + " (" + v[i].message + ")";
    return out;
}

std::optional<Value> value_from_json(const Json& j, const Type& t) {
    switch (t.kind) {
        case TypeKind::Int:
            if (j.is_number_integer()) return Value{j.get<std::int64_t>()};
            return std::nullopt;
        case TypeKind::Float:
            if (j.is_number()) return Value{j.get<double>()};
            return std::nullopt;
        case TypeKind::Bool:
            if (j.is_boolean()) return Value{j.get<bool>()};
            return std::nullopt;
        case TypeKind::String:
            if (j.is_string()) return Value{j.get<std::string>()};
            return std::nullopt;
        case TypeKind::Enum:
            if (j.is_string()) {
                const auto s = j.get<std::string>();
                for (const auto& v : t.enum_values)
                    if (v == s) return Value{s};
            }
            return std::nullopt;
        case TypeKind::Datetime:
            if (j.is_number_integer()) return Value{j.get<std::int64_t>()};
            if (j.is_string())
                if (auto v = vtime::parse_datetime(j.get<std::string>())) return Value{*v};
            return std::nullopt;
        case TypeKind::Duration:
            if (j.is_number_integer()) return Value{j.get<std::int64_t>()};
            if (j.is_string())
                if (auto v = vtime::parse_duration(j.get<std::string>())) return Value{*v};
            return std::nullopt;
        case TypeKind::Plan: return std::nullopt;
    }
    return std::nullopt;
}

Json value_to_json(const Value& v) {
    return std::visit([](const auto& x) { return Json(x); }, v);
}

Json value_to_json(const Value& v, const Type& t) {
    if (t.kind == TypeKind::Float)
        if (const auto* i = std::get_if<std::int64_t>(&v)) return Json(static_cast<double>(*i));
    return value_to_json(v);
}

Value coerce(Value v, const Type& t) {
    if (t.kind == TypeKind::Float)
        if (const auto* i = std::get_if<std::int64_t>(&v)) return Value{static_cast<double>(*i)};
    return v;
}

Value type_default(const Type& t) {
    switch (t.kind) {
        case TypeKind::Float: return Value{0.0};
        case TypeKind::Bool: return Value{false};
        case TypeKind::String: return Value{std::string()};
        case TypeKind::Enum: return Value{t.enum_values.empty() ? std::string() : t.enum_values.front()};
        default: return Value{std::int64_t{0}};
    }
}

std::vector<Violation> check_constraints(const model::DeviceModel& m, const model::Bindings& values) {
    std::vector<Violation> out;
    for (const auto& c : m.constraints) {
        auto r = model::eval_constraint(c, values);
        if (!r.holds) out.push_back({c.id, *r.message});
    }
    return out;
}

std::atomic<std::uint64_t> g_twin_counter{0};

}  // namespace

ConstraintViolationError::ConstraintViolationError(std::vector<Violation> v)
    : ValidationError(violation_text(v)), violations_(std::move(v)) {}

InstanceModel instantiate(ModelPtr model, const Json& inputs, vtime::Millis created_at) {
    if (!model) throw ValidationError("instantiate: no model");
    if (!inputs.is_object()) throw ValidationError("instance inputs must be a JSON object");
    for (const auto& [key, v] : inputs.items())
        if (!model->find_property(key)) throw ValidationError("unknown property '" + key + "'");

    InstanceModel inst{model, {}, created_at};
    for (const auto& p : model->properties) {
        if (auto it = inputs.find(p.name); it != inputs.end()) {
            auto v = value_from_json(*it, p.type);
            if (!v) throw ValidationError("property '" + p.name + "' expects " + model::to_string(p.type));
            inst.values[p.name] = coerce(*v, p.type);
        } else if (p.default_value) {
            inst.values[p.name] = coerce(model::literal_value(*p.default_value), p.type);
        } else {
            inst.values[p.name] = type_default(p.type);
        }
    }
    if (auto v = check_constraints(*model, inst.values); !v.empty()) throw ConstraintViolationError(std::move(v));
    return inst;
}

Json to_json(const EventRecord& e) {
    Json notes = Json::array();
    for (const auto& n : e.notifications) notes.push_back(hita::to_json(n));
    return Json{{"seq", e.seq},       {"at", e.at},           {"operation", e.operation}, {"status", e.status},
                {"from", e.from_state}, {"to", e.to_state}, {"notifications", notes}};
}

EventRecord event_from_json(const Json& j) {
    try {
        EventRecord e;
        e.seq = j.at("seq").get<std::uint64_t>();
        e.at = j.at("at").get<vtime::Millis>();
        e.operation = j.at("operation").get<std::string>();
        e.status = j.at("status").get<std::string>();
        e.from_state = j.at("from").get<std::string>();
        e.to_state = j.at("to").get<std::string>();
        for (const auto& n : j.at("notifications"))
            e.notifications.push_back({n.at("event").get<std::string>(), n.at("at").get<vtime::Millis>(), n.at("fields")});
        return e;
    } catch (const Json::exception& ex) {
        throw IntegrityError(std::string("event record: ") + ex.what());
    }
}

std::string model_digest(const model::DeviceModel& m) { return sha256_hex(model::print_model(m)); }

namespace {

// Snapshots are written after every step; printing the model each time would dominate.
std::string cached_digest(const ModelPtr& m) {
    static std::mutex mu;
    static std::map<const model::DeviceModel*, std::pair<std::weak_ptr<const model::DeviceModel>, std::string>> cache;
    std::lock_guard lock(mu);
    auto it = cache.find(m.get());
    if (it != cache.end() && it->second.first.lock() == m) return it->second.second;
    for (auto i = cache.begin(); i != cache.end();) i = i->second.first.expired() ? cache.erase(i) : std::next(i);
    std::string d = model_digest(*m);
    cache[m.get()] = {m, d};
    return d;
}

}  // namespace

std::string next_twin_id() {
    const std::uint64_t n = ++g_twin_counter;
    char buf[32];
    std::snprintf(buf, sizeof buf, "dt-%06llu", static_cast<unsigned long long>(n));
    return buf;
}

void reserve_twin_ids(std::uint64_t at_least) {
    std::uint64_t cur = g_twin_counter.load();
    while (cur < at_least && !g_twin_counter.compare_exchange_weak(cur, at_least)) {
    }
}

ExecutableDT make_executable(InstanceModel inst, std::uint64_t seed, std::string id) {
    ExecutableDT dt;
    dt.id_ = id.empty() ? next_twin_id() : std::move(id);
    dt.state_ = inst.model->behavior.initial;
    dt.instance_ = std::move(inst);
    dt.seed_ = seed;
    return dt;
}

bool ExecutableDT::same_as(const ExecutableDT& o) const {
    return instance_ == o.instance_ && state_ == o.state_ && plan_ == o.plan_ && log_ == o.log_ && seed_ == o.seed_ &&
           steps_ == o.steps_;
}

DeviceResponse ExecutableDT::step(const DeviceRequest& req, vtime::Millis now) {
    const model::DeviceModel& m = *instance_.model;
    ++steps_;

    auto finish = [&](DeviceResponse r) {
        log_.push_back({steps_, now, req.operation, r.status, state_, r.state, r.notifications});
        return r;
    };
    auto fail = [&](std::string message) {
        DeviceResponse r;
        r.status = std::string(model::kOutcomeError);
        r.state = state_;
        r.message = std::move(message);
        return finish(std::move(r));
    };

    const bool tick = req.operation == kTickOperation;
    const model::EndpointDef* ep = tick ? nullptr : m.find_endpoint(req.operation);
    if (!tick && !ep) return fail(unknown_operation_message(req.operation));

    // Request bindings.
    model::Bindings req_values;
    std::map<std::string, MedicationPlan, std::less<>> req_plans;
    if (ep) {
        if (!req.payload.is_object()) return fail(malformed_payload_message(req.operation));
        for (const auto& [key, v] : req.payload.items())
            if (!ep->find_request_field(key)) return fail(malformed_payload_message(req.operation));
        for (const auto& f : ep->request) {
            auto it = req.payload.find(f.name);
            if (it == req.payload.end()) return fail(malformed_payload_message(req.operation));
            const std::string base = "req." + f.name;
            if (f.type.kind == TypeKind::Plan) {
                MedicationPlan p;
                try {
                    p = plan_from_json(*it);
                } catch (const ValidationError&) {
                    return fail(malformed_payload_message(req.operation));
                }
                req_values[base + ".intakes_per_day"] = std::int64_t{p.intakes_per_day()};
                req_values[base + ".doses_per_intake"] = std::int64_t{p.doses_per_intake};
                req_values[base + ".days"] = std::int64_t{p.plan_days};
                req_values[base + ".total_doses"] = p.total_doses();
                req_values[base + ".roll_total"] = std::int64_t{p.roll_total};
                req_values[base + ".start"] = p.first_intake();
                req_plans[base] = std::move(p);
            } else {
                auto v = value_from_json(*it, f.type);
                if (!v) return fail(malformed_payload_message(req.operation));
                req_values[base] = coerce(*v, f.type);
            }
        }
    }

    model::Bindings props = instance_.values;
    std::optional<PlanCursor> plan = plan_;

    const model::Lookup lookup = [&](std::string_view path) -> std::optional<Value> {
        if (auto it = props.find(path); it != props.end()) return it->second;
        if (path == "now") return Value{now};
        if (path.starts_with("req.")) {
            if (auto it = req_values.find(path); it != req_values.end()) return it->second;
            return std::nullopt;
        }
        if (path.starts_with("plan.")) {
            const std::string_view f = path.substr(5);
            if (f == "loaded") return Value{plan.has_value()};
            if (f == "next_due") return Value{plan ? plan->next_due() : vtime::kNever};
            if (f == "remaining") return Value{std::int64_t{plan ? plan->remaining() : 0}};
            if (f == "doses_per_intake") return Value{std::int64_t{plan ? plan->plan.doses_per_intake : 0}};
            if (f == "intakes_per_day") return Value{std::int64_t{plan ? plan->plan.intakes_per_day() : 0}};
            if (f == "days") return Value{std::int64_t{plan ? plan->plan.plan_days : 0}};
            if (f == "roll_total") return Value{std::int64_t{plan ? plan->plan.roll_total : 0}};
        }
        return std::nullopt;
    };

    try {
        const model::Transition* fired = nullptr;
        for (const auto& t : m.behavior.transitions) {
            if (t.trigger != req.operation) continue;
            const bool from_here =
                t.sources.size() == 1 && t.sources[0] == model::kAnyState
                    ? true
                    : std::find(t.sources.begin(), t.sources.end(), state_) != t.sources.end();
            if (!from_here) continue;
            if (!t.guard || model::evaluate_bool(*t.guard, lookup)) {
                fired = &t;
                break;
            }
        }
        if (!fired) {
            DeviceResponse r;
            r.status = std::string(model::kOutcomeRejected);
            r.state = state_;
            r.message = rejected_message(state_);
            return finish(std::move(r));
        }

        std::string outcome(model::kOutcomeAccepted);
        Json fields = Json::object();
        std::vector<Notification> notes;

        auto run = [&](const std::vector<model::Action>& actions) {
            for (const auto& a : actions) {
                switch (a.kind) {
                    case model::ActionKind::Assign: {
                        const auto* p = m.find_property(a.target);
                        props[a.target] = coerce(model::evaluate(a.value, lookup), p->type);
                        break;
                    }
                    case model::ActionKind::Respond:
                        outcome = a.target;
                        fields = Json::object();
                        for (const auto& f : a.fields) {
                            const auto* fd = ep ? ep->find_response_field(f.name) : nullptr;
                            const Value v = model::evaluate(f.value, lookup);
                            fields[f.name] = fd ? value_to_json(v, fd->type) : value_to_json(v);
                        }
                        break;
                    case model::ActionKind::Notify: {
                        Notification n{a.target, now, Json::object()};
                        for (const auto& f : a.fields) n.fields[f.name] = value_to_json(model::evaluate(f.value, lookup));
                        notes.push_back(std::move(n));
                        break;
                    }
                    case model::ActionKind::PlanLoad: plan = PlanCursor::load(req_plans.at(a.target), now); break;
                    case model::ActionKind::PlanAdvance:
                        if (plan) plan->advance();
                        break;
                    case model::ActionKind::PlanClear: plan.reset(); break;
                }
            }
        };

        run(fired->actions);
        const std::string target = fired->target == model::kAnyState ? state_ : fired->target;
        if (target != state_)
            if (const auto* s = m.find_state(target)) run(s->entry);

        if (auto v = check_constraints(m, props); !v.empty()) {
            std::vector<std::string> ids;
            for (const auto& x : v) ids.push_back(x.id);
            return fail(constraint_violation_message(ids));
        }

        DeviceResponse r;
        r.status = outcome;
        r.state = target;
        r.fields = std::move(fields);
        r.notifications = std::move(notes);
        log_.push_back({steps_, now, req.operation, r.status, state_, target, r.notifications});
        instance_.values = std::move(props);
        plan_ = std::move(plan);
        state_ = target;
        return r;
    } catch (const model::MissingBinding& e) {
        return fail(std::string("evaluation failed: ") + e.what());
    } catch (const model::EvalTypeError& e) {
        return fail(std::string("evaluation failed: ") + e.what());
    }
}

namespace {

constexpr const char* kSnapshotFormat = "hita.dt-snapshot";
constexpr int kSnapshotVersion = 1;

}  // namespace

std::string ExecutableDT::snapshot(bool include_log) const {
    const model::DeviceModel& m = *instance_.model;
    Json values = Json::object();
    for (const auto& p : m.properties) values[p.name] = value_to_json(instance_.values.at(p.name), p.type);
    Json body{{"format", kSnapshotFormat},
              {"version", kSnapshotVersion},
              {"model", {{"name", m.name}, {"version", m.version}, {"digest", cached_digest(instance_.model)}}},
              {"id", id_},
              {"seed", seed_},
              {"steps", steps_},
              {"created_at", instance_.created_at},
              {"state", state_},
              {"values", values},
              {"plan", plan_ ? Json{{"plan", hita::to_json(plan_->plan)}, {"next", plan_->next}} : Json(nullptr)},
              {"log_length", log_.size()}};
    if (include_log) {
        Json log = Json::array();
        for (const auto& e : log_) log.push_back(to_json(e));
        body["log"] = std::move(log);
    }
    body["checksum"] = sha256_hex(canonical(body));
    return canonical(body);
}

ExecutableDT ExecutableDT::restore(const std::string& bytes, ModelPtr model) { return restore_impl(bytes, std::move(model), std::nullopt); }

ExecutableDT ExecutableDT::restore(const std::string& bytes, ModelPtr model, std::vector<EventRecord> log) {
    return restore_impl(bytes, std::move(model), std::move(log));
}

ExecutableDT ExecutableDT::restore_impl(const std::string& bytes, ModelPtr model, std::optional<std::vector<EventRecord>> log) {
    Json body = Json::parse(bytes, nullptr, false);
    if (body.is_discarded() || !body.is_object()) throw IntegrityError("snapshot is not valid JSON");
    auto ck = body.find("checksum");
    if (ck == body.end() || !ck->is_string()) throw IntegrityError("snapshot has no checksum");
    const std::string expected = ck->get<std::string>();
    body.erase("checksum");
    if (sha256_hex(canonical(body)) != expected) throw IntegrityError("snapshot checksum mismatch");
    try {
        if (body.at("format") != kSnapshotFormat) throw IntegrityError("not a twin snapshot");
        if (body.at("version") != kSnapshotVersion) throw IntegrityError("unsupported snapshot version");
        if (!model) throw IntegrityError("no model to restore against");
        if (body.at("model").at("digest") != cached_digest(model)) throw IntegrityError("snapshot was taken from a different model");

        ExecutableDT dt;
        dt.id_ = body.at("id").get<std::string>();
        dt.seed_ = body.at("seed").get<std::uint64_t>();
        dt.steps_ = body.at("steps").get<std::uint64_t>();
        dt.instance_.model = model;
        dt.instance_.created_at = body.at("created_at").get<vtime::Millis>();
        dt.state_ = body.at("state").get<std::string>();
        if (!model->find_state(dt.state_)) throw IntegrityError("snapshot state '" + dt.state_ + "' not in model");
        const Json& values = body.at("values");
        for (const auto& p : model->properties) {
            auto v = value_from_json(values.at(p.name), p.type);
            if (!v) throw IntegrityError("snapshot value of '" + p.name + "' is ill-typed");
            dt.instance_.values[p.name] = coerce(*v, p.type);
        }
        if (const Json& pl = body.at("plan"); !pl.is_null()) {
            PlanCursor c{plan_from_json(pl.at("plan")), pl.at("next").get<int>()};
            dt.plan_ = std::move(c);
        }
        const auto length = body.at("log_length").get<std::size_t>();
        if (log) {
            dt.log_ = std::move(*log);
        } else {
            for (const auto& e : body.at("log")) dt.log_.push_back(event_from_json(e));
        }
        if (dt.log_.size() != length) throw IntegrityError("event log length does not match snapshot");
        return dt;
    } catch (const Json::exception& ex) {
        throw IntegrityError(std::string("malformed snapshot: ") + ex.what());
    } catch (const ValidationError& ex) {
        throw IntegrityError(std::string("malformed snapshot: ") + ex.what());
    }
}

}  // namespace hita::mbdt
