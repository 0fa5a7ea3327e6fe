#include "hita/refdev/server.hpp"

#include <mutex>

#include "../common/http_util.hpp"
#include "hita/common/errors.hpp"

namespace hita::refdev {

struct RefDeviceServer::Impl {
    std::mutex mu;
    RefDevice device;
    std::shared_ptr<server::ApiKeyTable> keys;
    http::Background bg;

    Impl(RefDeviceConfig cfg, std::shared_ptr<server::ApiKeyTable> k, std::size_t threads)
        : device(std::move(cfg)), keys(std::move(k)), bg(threads) {
        routes();
    }

    bool admit(const httplib::Request& req, httplib::Response& res) {
        if (!keys) return true;
        switch (keys->check(req.get_header_value("X-API-Key"))) {
            case server::AuthResult::Ok: return true;
            case server::AuthResult::RateLimited:
                res.set_header("Retry-After", "1");
                http::send_error(res, 429, "rate_limited", "rate limit exceeded");
                return false;
            case server::AuthResult::Unauthorized: break;
        }
        http::send_error(res, 401, "unauthorized", "missing or invalid API key");
        return false;
    }

    void routes() {
        auto& s = bg.server;
        s.Get("/health", [](const httplib::Request&, httplib::Response& res) { http::send_json(res, 200, {{"status", "ok"}}); });
        s.Get("/device/state", [this](const httplib::Request& req, httplib::Response& res) {
            if (!admit(req, res)) return;
            std::lock_guard lock(mu);
            http::send_json(res, 200,
                            {{"state", device.state()},
                             {"handled", device.handled()},
                             {"perturbed", device.perturbed()},
                             {"roll_remaining", device.roll_remaining()},
                             {"roll_loaded", device.roll_loaded()},
                             {"dispensed_total", device.dispensed_total()}});
        });
        s.Post("/device/requests", [this](const httplib::Request& req, httplib::Response& res) {
            if (!admit(req, res)) return;
            const Json body = Json::parse(req.body, nullptr, false);
            if (body.is_discarded()) return http::send_error(res, 400, "bad_request", "request body is not valid JSON");
            DeviceRequest dr;
            try {
                dr = request_from_json(body);
            } catch (const ValidationError& e) {
                return http::send_error(res, 400, "bad_request", e.what());
            }
            std::lock_guard lock(mu);
            const Timed t = device.submit(dr, dr.virtual_now);
            res.set_header("X-Virtual-Started-At", std::to_string(t.started_at));
            res.set_header("X-Virtual-Completed-At", std::to_string(t.completed_at));
            http::send_json(res, 200, to_json(t.response));
        });
    }
};

RefDeviceServer::RefDeviceServer(RefDeviceConfig cfg, std::shared_ptr<server::ApiKeyTable> keys, std::size_t threads)
    : impl_(std::make_unique<Impl>(std::move(cfg), std::move(keys), threads)) {}
RefDeviceServer::~RefDeviceServer() = default;
int RefDeviceServer::start(const std::string& host, int port) { return impl_->bg.start(host, port); }
void RefDeviceServer::stop() { impl_->bg.stop(); }
void RefDeviceServer::wait() { impl_->bg.wait(); }

}  // namespace hita::refdev
