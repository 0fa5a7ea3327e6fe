#include "hita/stub/stub_server.hpp"

#include "../common/http_util.hpp"
#include "hita/common/errors.hpp"

namespace hita::stub {

StubServerConfig stub_server_config_from_json(const Json& j) {
    if (!j.is_object()) throw ValidationError("stub server config must be an object");
    StubServerConfig c;
    try {
        if (auto l = j.find("listen"); l != j.end()) {
            c.host = l->value("host", c.host);
            c.port = l->value("port", c.port);
        }
        c.api_keys = j.value("api_keys", Json::array());
        c.rate_limit_per_minute = j.value("rate_limit_per_minute", c.rate_limit_per_minute);
        c.threads = j.value("threads", c.threads);
        c.seed = j.value("seed", c.seed);
        if (auto s = j.find("store"); s != j.end()) c.store = generator_spec_from_json(*s);
        if (auto s = j.find("stubs"); s != j.end())
            for (const auto& spec : *s) c.stubs.push_back(stub_spec_from_json(spec));
    } catch (const Json::exception& e) {
        throw ValidationError(std::string("stub server config: ") + e.what());
    }
    if (c.threads == 0) throw ValidationError("threads must be at least 1");
    return c;
}

struct StubServer::Impl {
    std::shared_ptr<StubEngine> engine;
    std::shared_ptr<server::ApiKeyTable> keys;
    http::Background bg;

    Impl(std::shared_ptr<StubEngine> e, std::shared_ptr<server::ApiKeyTable> k, std::size_t threads)
        : engine(std::move(e)), keys(std::move(k)), bg(threads) {
        routes();
    }

    bool admit(const httplib::Request& req, httplib::Response& res) {
        switch (keys->check(req.get_header_value("X-API-Key"))) {
            case server::AuthResult::Unauthorized:
                http::send_error(res, 401, "unauthorized", "missing or invalid API key");
                return false;
            case server::AuthResult::RateLimited:
                res.set_header("Retry-After", "1");
                http::send_error(res, 429, "rate_limited", "rate limit exceeded");
                return false;
            case server::AuthResult::Ok: return true;
        }
        return false;
    }

    void dispatch(const httplib::Request& req, httplib::Response& res) {
        if (!admit(req, res)) return;
        StubRequest sr;
        sr.method = req.method;
        sr.path = req.path;
        for (const auto& [k, v] : req.params) sr.query.emplace(k, v);
        sr.body = req.body.empty() ? Json(nullptr) : Json::parse(req.body, nullptr, false);
        if (sr.body.is_discarded()) sr.body = nullptr;
        const StubReply r = engine->handle(sr);
        res.set_header("X-Stub-Latency-Ms", std::to_string(r.latency_ms));
        if (!r.app.empty()) res.set_header("X-Stub-App", r.app);
        http::send_json(res, r.status, r.body);
    }

    void routes() {
        auto& s = bg.server;
        s.Get("/health", [](const httplib::Request&, httplib::Response& res) { http::send_json(res, 200, {{"status", "ok"}}); });
        s.Get("/_stubs", [this](const httplib::Request& req, httplib::Response& res) {
            if (!admit(req, res)) return;
            http::send_json(res, 200, {{"apps", engine->apps()}, {"routes", engine->routes()}, {"collections", engine->store().collections()}});
        });
        s.Post("/_stubs", [this](const httplib::Request& req, httplib::Response& res) {
            if (!admit(req, res)) return;
            try {
                const Json body = Json::parse(req.body, nullptr, false);
                if (body.is_discarded()) throw ValidationError("request body is not valid JSON");
                const auto mounted = engine->register_stub(stub_spec_from_json(body));
                http::send_json(res, 201, {{"mounted", mounted}});
            } catch (const RouteConflict& e) {
                http::send_error(res, 409, "route_conflict", e.what());
            } catch (const ValidationError& e) {
                http::send_error(res, 400, "bad_request", e.what());
            }
        });
        s.Delete(R"(/_stubs/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
            if (!admit(req, res)) return;
            if (!engine->unregister(req.matches[1])) return http::send_error(res, 404, "not_found", "no app '" + std::string(req.matches[1]) + "'");
            http::send_json(res, 200, {{"app", std::string(req.matches[1])}, {"removed", true}});
        });
        auto h = [this](const httplib::Request& req, httplib::Response& res) { dispatch(req, res); };
        s.Get(".*", h);
        s.Post(".*", h);
        s.Put(".*", h);
        s.Patch(".*", h);
        s.Delete(".*", h);
    }
};

StubServer::StubServer(std::shared_ptr<StubEngine> engine, std::shared_ptr<server::ApiKeyTable> keys, std::size_t threads)
    : impl_(std::make_unique<Impl>(std::move(engine), std::move(keys), threads)) {}
StubServer::~StubServer() = default;
int StubServer::start(const std::string& host, int port) { return impl_->bg.start(host, port); }
void StubServer::stop() { impl_->bg.stop(); }
void StubServer::wait() { impl_->bg.wait(); }

}  // namespace hita::stub
