#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hita/common/errors.hpp"
#include "hita/common/json.hpp"
#include "hita/common/plan.hpp"
#include "hita/common/wire.hpp"
#include "hita/model/device_model.hpp"
#include "hita/model/eval.hpp"

namespace hita::mbdt {

using ModelPtr = std::shared_ptr<const model::DeviceModel>;

struct Violation {
    std::string id;
    std::string message;
    bool operator==(const Violation&) const = default;
};

class ConstraintViolationError : public ValidationError {
public:
    explicit ConstraintViolationError(std::vector<Violation> v);
    const std::vector<Violation>& violations() const { return violations_; }

private:
    std::vector<Violation> violations_;
};

struct InstanceModel {
    ModelPtr model;
    model::Bindings values;  // every declared property
    vtime::Millis created_at = 0;

    bool operator==(const InstanceModel& o) const {
        return (model == o.model || (model && o.model && *model == *o.model)) && values == o.values && created_at == o.created_at;
    }
};

// Fills defaults (type defaults for properties without one), checks every constraint.
// Throws ValidationError for unknown or ill-typed fields, ConstraintViolationError otherwise.
InstanceModel instantiate(ModelPtr model, const Json& inputs, vtime::Millis created_at = 0);

// One entry per step, including rejected and erroneous ones.
struct EventRecord {
    std::uint64_t seq = 0;
    vtime::Millis at = 0;
    std::string operation;
    std::string status;
    std::string from_state;
    std::string to_state;
    std::vector<Notification> notifications;
    bool operator==(const EventRecord&) const = default;
};

Json to_json(const EventRecord& e);
EventRecord event_from_json(const Json& j);

// Digest of the canonical printed model; snapshots are bound to it.
std::string model_digest(const model::DeviceModel& m);

class ExecutableDT {
public:
    const std::string& id() const { return id_; }
    const InstanceModel& instance() const { return instance_; }
    const std::string& current_state() const { return state_; }
    const std::optional<PlanCursor>& plan() const { return plan_; }
    const std::vector<EventRecord>& event_log() const { return log_; }
    std::uint64_t seed() const { return seed_; }
    std::uint64_t steps() const { return steps_; }

    DeviceResponse step(const DeviceRequest& req, vtime::Millis now);

    // Self-describing, checksummed JSON. Without the log only its length is kept;
    // restore then expects the caller to supply the log (see dt-server persistence).
    std::string snapshot(bool include_log = true) const;
    static ExecutableDT restore(const std::string& bytes, ModelPtr model);
    static ExecutableDT restore(const std::string& bytes, ModelPtr model, std::vector<EventRecord> log);

    // Structural identity; the twin id is deliberately excluded.
    bool same_as(const ExecutableDT& o) const;

private:
    friend ExecutableDT make_executable(InstanceModel inst, std::uint64_t seed, std::string id);
    static ExecutableDT restore_impl(const std::string& bytes, ModelPtr model, std::optional<std::vector<EventRecord>> log);

    std::string id_;
    InstanceModel instance_;
    std::string state_;
    std::optional<PlanCursor> plan_;
    std::vector<EventRecord> log_;
    std::uint64_t seed_ = 0;
    std::uint64_t steps_ = 0;
};

// An empty id draws the next one from a process-wide sequence ("dt-000001", ...).
ExecutableDT make_executable(InstanceModel inst, std::uint64_t seed, std::string id = {});

std::string next_twin_id();
// Keeps generated ids above every id already in use (after recovery).
void reserve_twin_ids(std::uint64_t at_least);

}  // namespace hita::mbdt
