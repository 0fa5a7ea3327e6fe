#pragma once

#include <memory>
#include <string>

#include "hita/refdev/ref_device.hpp"
#include "hita/server/auth.hpp"

namespace hita::refdev {

// POST /device/requests with a DeviceRequest body; GET /device/state; GET /health.
// Requests are handled one at a time in arrival order. Virtual processing times
// are reported in X-Virtual-Started-At / X-Virtual-Completed-At. With a key
// table, every route except /health needs X-API-Key.
class RefDeviceServer {
public:
    explicit RefDeviceServer(RefDeviceConfig cfg, std::shared_ptr<server::ApiKeyTable> keys = nullptr, std::size_t threads = 8);
    ~RefDeviceServer();
    int start(const std::string& host, int port);
    void stop();
    void wait();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace hita::refdev
