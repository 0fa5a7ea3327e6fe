#pragma once

#include <memory>
#include <string>

#include "hita/server/auth.hpp"
#include "hita/stub/stub.hpp"

namespace hita::stub {

struct StubServerConfig {
    std::string host = "127.0.0.1";
    int port = 8090;
    Json api_keys = Json::array();
    double rate_limit_per_minute = 600;
    std::size_t threads = 16;
    std::uint64_t seed = 42;
    GeneratorSpec store;
    std::vector<StubSpec> stubs;
};

StubServerConfig stub_server_config_from_json(const Json& j);

// Admin routes under /_stubs (list, register, unregister); every other path is
// dispatched to the mounted stubs. All routes except /health need X-API-Key.
// Replies carry the virtual latency in X-Stub-Latency-Ms.
class StubServer {
public:
    StubServer(std::shared_ptr<StubEngine> engine, std::shared_ptr<server::ApiKeyTable> keys, std::size_t threads = 16);
    ~StubServer();
    int start(const std::string& host, int port);
    void stop();
    void wait();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace hita::stub
