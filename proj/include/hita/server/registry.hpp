#pragma once

#include <atomic>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include "hita/mbdt/twin.hpp"
#include "hita/mldt/network.hpp"
#include "hita/server/store.hpp"

namespace hita::server {

class NotFound : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr const char* kKindModel = "mb";
inline constexpr const char* kKindLearned = "ml";

struct CreateSpec {
    std::string device_type;
    std::string kind = kKindModel;
    Json inputs = Json::object();
    std::uint64_t seed = 42;
    std::string model_ref;  // ml: name of a registered trained model
};

// Throws ValidationError on shape errors.
CreateSpec create_spec_from_json(const Json& j);

struct TwinInfo {
    std::string id;
    std::string kind;
    std::string device_type;
    vtime::Millis created_at = 0;
    std::uint64_t steps = 0;
};

struct RoutedResponse {
    DeviceResponse response;
    std::string state_digest;
    std::uint64_t steps = 0;
};

struct RecoveryReport {
    std::vector<std::string> recovered;
    std::vector<QuarantineEntry> quarantined;
};

class FleetRegistry {
public:
    // Without a root the fleet lives in memory only.
    explicit FleetRegistry(std::optional<std::filesystem::path> root = std::nullopt, bool durable = false);
    ~FleetRegistry();

    // A null model registers a type that only hosts learned twins.
    void register_device_type(const std::string& name, mbdt::ModelPtr model);
    // digest identifies the model file; computed from the serialised model when empty.
    void register_learned_model(const std::string& device_type, const std::string& ref,
                                std::shared_ptr<const mldt::TrainedModel> model, std::string digest = {});
    bool has_device_type(const std::string& name) const;
    mbdt::ModelPtr device_model(const std::string& name) const;

    // All twins of a batch are built before any is registered or persisted; a
    // failure leaves the fleet untouched. Throws NotFound for an unknown device
    // type or model ref, ValidationError / ConstraintViolationError for bad inputs.
    std::vector<std::string> create(const CreateSpec& spec, std::size_t count = 1);

    // Requests without their own virtual time run at the fleet clock, which only
    // moves forward with the virtual time of incoming requests.
    RoutedResponse route(const std::string& id, DeviceRequest req, bool has_virtual_now = true);
    Json state(const std::string& id) const;
    std::vector<TwinInfo> list() const;
    void remove(const std::string& id);

    // Rebuilds the fleet from the persistence root; twins that fail to load are
    // quarantined and the rest still come up. Call on an empty registry, after
    // the device types are registered.
    RecoveryReport recover();

    std::size_t size() const;
    vtime::Millis clock() const { return clock_.load(); }
    bool persistent() const { return store_ != nullptr; }
    std::vector<QuarantineEntry> quarantined() const;

private:
    struct Twin;
    struct DeviceType {
        mbdt::ModelPtr model;
        std::map<std::string, std::pair<std::shared_ptr<const mldt::TrainedModel>, std::string>> learned;  // ref -> (model, digest)
    };

    std::shared_ptr<Twin> find(const std::string& id) const;
    std::shared_ptr<Twin> build(const CreationRecord& rec) const;
    void persist_step(Twin& t);
    void advance_clock(vtime::Millis t);

    std::unique_ptr<FleetStore> store_;
    mutable std::shared_mutex types_mu_;
    std::map<std::string, DeviceType> types_;
    mutable std::shared_mutex mu_;
    std::map<std::string, std::shared_ptr<Twin>> twins_;
    std::atomic<vtime::Millis> clock_{0};
};

// Learned-twin snapshot: model binding, step count and the time of the last request.
std::string learned_snapshot(const std::string& id, const std::string& model_ref, const std::string& model_digest,
                             const mldt::MlTwin& twin);

}  // namespace hita::server
