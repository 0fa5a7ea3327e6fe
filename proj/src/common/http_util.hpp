#pragma once

#include <atomic>
#include <memory>
#include <string>
#include <thread>

#include <httplib.h>

#include "hita/common/json.hpp"

namespace hita::http {

inline Json error_body(const std::string& code, const std::string& message, Json details = Json::array()) {
    return Json{{"code", code}, {"message", message}, {"details", std::move(details)}};
}

inline void send_json(httplib::Response& res, int status, const Json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

inline void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message,
                       Json details = Json::array()) {
    send_json(res, status, error_body(code, message, std::move(details)));
}

// An httplib server listening on its own thread.
class Background {
public:
    explicit Background(std::size_t threads) {
        server.new_task_queue = [threads] { return new httplib::ThreadPool(threads); };
        server.set_keep_alive_max_count(1u << 30);
        server.set_keep_alive_timeout(30);
        server.set_payload_max_length(8u << 20);
    }
    ~Background() { stop(); }

    // Port 0 picks a free port; returns the bound port or throws.
    int start(const std::string& host, int port) {
        const int bound = port == 0 ? server.bind_to_any_port(host) : (server.bind_to_port(host, port) ? port : -1);
        if (bound < 0) throw std::runtime_error("cannot listen on " + host + ":" + std::to_string(port));
        thread_ = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
        return bound;
    }
    void stop() {
        if (thread_.joinable()) {
            server.stop();
            thread_.join();
        }
    }
    void wait() {
        if (thread_.joinable()) thread_.join();
    }

    httplib::Server server;

private:
    std::thread thread_;
};

}  // namespace hita::http
