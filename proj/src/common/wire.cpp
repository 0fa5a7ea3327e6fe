#include "hita/common/wire.hpp"

#include "hita/common/errors.hpp"

namespace hita {

Json to_json(const DeviceRequest& r) {
    return Json{{"operation", r.operation}, {"payload", r.payload}, {"virtual_now", r.virtual_now}};
}

Json to_json(const Notification& n) { return Json{{"event", n.event}, {"at", n.at}, {"fields", n.fields}}; }

Json to_json(const DeviceResponse& r) {
    Json j{{"status", r.status}, {"fields", r.fields}};
    if (!r.state.empty()) j["state"] = r.state;
    Json notes = Json::array();
    for (const auto& n : r.notifications) notes.push_back(to_json(n));
    j["notifications"] = std::move(notes);
    if (r.message) j["message"] = *r.message;
    return j;
}

namespace {

const Json& member(const Json& j, const char* key, Json::value_t type, const char* what) {
    auto it = j.find(key);
    if (it == j.end()) throw ValidationError(std::string(what) + ": missing '" + key + "'");
    const bool ok = type == Json::value_t::number_integer ? it->is_number_integer() : it->type() == type;
    if (!ok) throw ValidationError(std::string(what) + ": '" + key + "' has the wrong type");
    return *it;
}

}  // namespace

DeviceRequest request_from_json(const Json& j) {
    if (!j.is_object()) throw ValidationError("request: expected an object");
    DeviceRequest r;
    r.operation = member(j, "operation", Json::value_t::string, "request").get<std::string>();
    if (auto it = j.find("payload"); it != j.end()) {
        if (!it->is_object()) throw ValidationError("request: 'payload' must be an object");
        r.payload = *it;
    }
    if (auto it = j.find("virtual_now"); it != j.end()) {
        if (!it->is_number_integer()) throw ValidationError("request: 'virtual_now' must be an integer");
        r.virtual_now = it->get<vtime::Millis>();
    }
    return r;
}

DeviceResponse response_from_json(const Json& j) {
    if (!j.is_object()) throw ValidationError("response: expected an object");
    DeviceResponse r;
    r.status = member(j, "status", Json::value_t::string, "response").get<std::string>();
    if (auto it = j.find("state"); it != j.end() && it->is_string()) r.state = it->get<std::string>();
    if (auto it = j.find("fields"); it != j.end() && it->is_object()) r.fields = *it;
    if (auto it = j.find("message"); it != j.end() && it->is_string()) r.message = it->get<std::string>();
    if (auto it = j.find("notifications"); it != j.end() && it->is_array()) {
        for (const auto& n : *it) {
            Notification note;
            note.event = member(n, "event", Json::value_t::string, "notification").get<std::string>();
            note.at = member(n, "at", Json::value_t::number_integer, "notification").get<vtime::Millis>();
            if (auto f = n.find("fields"); f != n.end() && f->is_object()) note.fields = *f;
            r.notifications.push_back(std::move(note));
        }
    }
    return r;
}

std::string canonical(const Json& j) { return j.dump(); }

std::string unknown_operation_message(const std::string& operation) { return "unknown operation '" + operation + "'"; }

std::string malformed_payload_message(const std::string& operation) { return "malformed payload for '" + operation + "'"; }

std::string rejected_message(const std::string& state) { return "rejected in state " + state; }

std::string constraint_violation_message(const std::vector<std::string>& ids) {
    std::string out = "constraint violation: ";
    for (std::size_t i = 0; i < ids.size(); ++i) out += (i ? ", " : "") + ids[i];
    return out;
}

}  // namespace hita
