#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include "hita/server/auth.hpp"
#include "hita/server/registry.hpp"

namespace hita::server {

struct DeviceTypeConfig {
    std::filesystem::path model;
    std::map<std::string, std::filesystem::path> learned_models;  // model_ref -> .mldt file
};

struct ServerConfig {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::optional<std::filesystem::path> persistence_root;
    bool durable = false;
    Json api_keys = Json::array();
    double rate_limit_per_minute = 600;
    std::size_t threads = 128;
    std::map<std::string, DeviceTypeConfig> device_types;

    void validate() const;
};

// Relative paths resolve against base (the config file's directory).
ServerConfig server_config_from_json(const Json& j, const std::filesystem::path& base = {});
Json to_json(const ServerConfig& c);

// Registers every configured device type and learned model, then recovers the
// fleet from the persistence root.
struct Fleet {
    std::shared_ptr<FleetRegistry> registry;
    std::shared_ptr<ApiKeyTable> keys;
    RecoveryReport recovery;
};
Fleet open_fleet(const ServerConfig& cfg);

// REST front of a fleet registry. Every route except /health needs X-API-Key.
class DtServer {
public:
    DtServer(std::shared_ptr<FleetRegistry> registry, std::shared_ptr<ApiKeyTable> keys, std::size_t threads = 128);
    ~DtServer();

    // Port 0 picks a free port; returns the bound port.
    int start(const std::string& host, int port);
    void stop();
    void wait();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace hita::server
