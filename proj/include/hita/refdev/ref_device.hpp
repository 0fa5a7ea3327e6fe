#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hita/common/json.hpp"
#include "hita/common/plan.hpp"
#include "hita/common/rng.hpp"
#include "hita/common/wire.hpp"

// Hand-written emulator of a Medido-class dispenser. It does not read any model
// file: it is the independent ground truth the twins are compared against.
namespace hita::refdev {

enum class DivergenceKind { Flip, Perturb };

struct DivergenceSpec {
    double p = 0.0;
    DivergenceKind kind = DivergenceKind::Flip;
    std::uint64_t seed = 7;
    bool operator==(const DivergenceSpec&) const = default;
};

struct RefDeviceConfig {
    std::string language = "no";
    std::string alarm_volume = "medium";
    int roll_capacity = 28;
    vtime::Millis grace_window = 30 * vtime::kMinute;
    vtime::Millis processing_delay = 2 * vtime::kSecond;
    DivergenceSpec divergence;

    // Throws ValidationError when p is outside [0,1], the delay is negative or settings are unknown.
    void validate() const;
    bool operator==(const RefDeviceConfig&) const = default;
};

RefDeviceConfig config_from_json(const Json& j);
Json to_json(const RefDeviceConfig& c);

inline const std::vector<std::string> kOutcomeClasses = {"accepted", "rejected", "dispensed", "missed", "error"};

struct Timed {
    DeviceResponse response;
    vtime::Millis started_at = 0;
    vtime::Millis completed_at = 0;
};

class RefDevice {
public:
    explicit RefDevice(RefDeviceConfig cfg = {});

    // Canonical response, then divergence. Requests queue behind each other for
    // processing_delay virtual ms; the queue changes timing only, never behaviour.
    Timed submit(const DeviceRequest& req, vtime::Millis arrival);
    DeviceResponse handle(const DeviceRequest& req, vtime::Millis now) { return submit(req, now).response; }

    const RefDeviceConfig& config() const { return cfg_; }
    const std::string& state() const { return state_; }
    std::uint64_t handled() const { return handled_; }
    std::uint64_t perturbed() const { return perturbed_; }
    std::int64_t roll_remaining() const { return roll_remaining_; }
    std::int64_t dispensed_total() const { return dispensed_; }
    std::int64_t roll_loaded() const { return roll_loaded_; }

private:
    DeviceResponse canonical_response(const DeviceRequest& req, vtime::Millis now);
    void diverge(DeviceResponse& r);
    std::vector<std::string> violations() const;

    RefDeviceConfig cfg_;
    Rng rng_;
    vtime::Millis busy_until_ = 0;
    std::uint64_t handled_ = 0;
    std::uint64_t perturbed_ = 0;

    std::string state_ = "Idle";
    std::string language_;
    std::string alarm_;
    std::int64_t roll_capacity_ = 0;
    std::int64_t roll_loaded_ = 0;
    std::int64_t roll_remaining_ = 0;
    std::int64_t doses_per_day_ = 0;
    std::int64_t plan_days_ = 0;
    std::int64_t dispensed_ = 0;
    std::int64_t taken_ = 0;
    std::int64_t missed_ = 0;
    std::optional<PlanCursor> plan_;
};

}  // namespace hita::refdev
