#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hita/common/json.hpp"
#include "hita/common/vtime.hpp"

// JSON messages exchanged between the harness, twins, stubs and the reference device.
namespace hita {

inline constexpr const char* kTickOperation = "tick";

struct DeviceRequest {
    std::string operation;
    Json payload = Json::object();
    vtime::Millis virtual_now = 0;

    bool operator==(const DeviceRequest&) const = default;
};

struct Notification {
    std::string event;
    vtime::Millis at = 0;
    Json fields = Json::object();

    bool operator==(const Notification&) const = default;
};

struct DeviceResponse {
    std::string status;
    std::string state;  // empty for twins without an explicit state (MLDT)
    Json fields = Json::object();
    std::vector<Notification> notifications;
    std::optional<std::string> message;

    bool operator==(const DeviceResponse&) const = default;
};

Json to_json(const DeviceRequest& r);
Json to_json(const Notification& n);
Json to_json(const DeviceResponse& r);

// Throw ValidationError on shape errors.
DeviceRequest request_from_json(const Json& j);
DeviceResponse response_from_json(const Json& j);

// Canonical bytes: keys sorted, no whitespace.
std::string canonical(const Json& j);

// Protocol-level messages shared by every device implementation.
std::string unknown_operation_message(const std::string& operation);
std::string malformed_payload_message(const std::string& operation);
std::string rejected_message(const std::string& state);
std::string constraint_violation_message(const std::vector<std::string>& ids);

}  // namespace hita
