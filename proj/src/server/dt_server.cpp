#include "hita/server/dt_server.hpp"

#include <chrono>

#include "../common/http_util.hpp"
#include "hita/common/digest.hpp"
#include "hita/model/parser.hpp"

namespace hita::server {

void ServerConfig::validate() const {
    if (port < 0 || port > 65535) throw ValidationError("port out of range");
    if (threads == 0) throw ValidationError("threads must be at least 1");
    if (rate_limit_per_minute < 0) throw ValidationError("rate limit must be non-negative");
    if (device_types.empty()) throw ValidationError("at least one device type is required");
}

ServerConfig server_config_from_json(const Json& j, const std::filesystem::path& base) {
    if (!j.is_object()) throw ValidationError("server config must be an object");
    auto resolve = [&](const std::string& p) {
        std::filesystem::path path(p);
        return path.is_relative() && !base.empty() ? base / path : path;
    };
    ServerConfig c;
    try {
        for (const auto& [k, v] : j.items())
            if (k != "listen" && k != "persistence_root" && k != "durable" && k != "api_keys" && k != "rate_limit_per_minute" &&
                k != "threads" && k != "device_types")
                throw ValidationError("unknown server config key '" + k + "'");
        if (auto l = j.find("listen"); l != j.end()) {
            c.host = l->value("host", c.host);
            c.port = l->value("port", c.port);
        }
        if (auto r = j.find("persistence_root"); r != j.end() && !r->is_null()) c.persistence_root = resolve(r->get<std::string>());
        c.durable = j.value("durable", c.durable);
        c.api_keys = j.value("api_keys", Json::array());
        c.rate_limit_per_minute = j.value("rate_limit_per_minute", c.rate_limit_per_minute);
        c.threads = j.value("threads", c.threads);
        if (auto d = j.find("device_types"); d != j.end()) {
            for (const auto& [name, spec] : d->items()) {
                DeviceTypeConfig t;
                t.model = resolve(spec.at("model").get<std::string>());
                if (auto lm = spec.find("learned_models"); lm != spec.end())
                    for (const auto& [ref, path] : lm->items()) t.learned_models[ref] = resolve(path.get<std::string>());
                c.device_types[name] = std::move(t);
            }
        }
    } catch (const Json::exception& e) {
        throw ValidationError(std::string("server config: ") + e.what());
    }
    c.validate();
    return c;
}

Json to_json(const ServerConfig& c) {
    Json types = Json::object();
    for (const auto& [name, t] : c.device_types) {
        Json lm = Json::object();
        for (const auto& [ref, p] : t.learned_models) lm[ref] = p.string();
        types[name] = {{"model", t.model.string()}, {"learned_models", lm}};
    }
    return Json{{"listen", {{"host", c.host}, {"port", c.port}}},
                {"persistence_root", c.persistence_root ? Json(c.persistence_root->string()) : Json(nullptr)},
                {"durable", c.durable},
                {"api_keys", c.api_keys},
                {"rate_limit_per_minute", c.rate_limit_per_minute},
                {"threads", c.threads},
                {"device_types", types}};
}

Fleet open_fleet(const ServerConfig& cfg) {
    Fleet f;
    f.registry = std::make_shared<FleetRegistry>(cfg.persistence_root, cfg.durable);
    f.keys = std::make_shared<ApiKeyTable>(cfg.rate_limit_per_minute);
    f.keys->add_from_json(cfg.api_keys);
    for (const auto& [name, t] : cfg.device_types) {
        f.registry->register_device_type(name, std::make_shared<const model::DeviceModel>(model::load_model_file(t.model.string())));
        for (const auto& [ref, path] : t.learned_models) {
            const std::string bytes = read_file(path);
            f.registry->register_learned_model(name, ref, std::make_shared<const mldt::TrainedModel>(mldt::load_model(bytes)),
                                               mldt::model_file_digest(bytes));
        }
    }
    f.recovery = f.registry->recover();
    return f;
}

struct DtServer::Impl {
    std::shared_ptr<FleetRegistry> registry;
    std::shared_ptr<ApiKeyTable> keys;
    http::Background bg;

    Impl(std::shared_ptr<FleetRegistry> r, std::shared_ptr<ApiKeyTable> k, std::size_t threads)
        : registry(std::move(r)), keys(std::move(k)), bg(threads) {
        routes();
    }

    // Runs fn when the request carries a valid key, mapping exceptions to error bodies.
    template <class Fn>
    httplib::Server::Handler guarded(Fn fn) {
        return [this, fn](const httplib::Request& req, httplib::Response& res) {
            switch (keys->check(req.get_header_value("X-API-Key"))) {
                case AuthResult::Unauthorized: return http::send_error(res, 401, "unauthorized", "missing or invalid API key");
                case AuthResult::RateLimited:
                    res.set_header("Retry-After", "1");
                    return http::send_error(res, 429, "rate_limited", "rate limit exceeded");
                case AuthResult::Ok: break;
            }
            try {
                fn(req, res);
            } catch (const NotFound& e) {
                http::send_error(res, 404, "not_found", e.what());
            } catch (const mbdt::ConstraintViolationError& e) {
                Json details = Json::array();
                for (const auto& v : e.violations()) details.push_back({{"constraint", v.id}, {"message", v.message}});
                http::send_error(res, 422, "constraint_violation", e.what(), details);
            } catch (const ValidationError& e) {
                http::send_error(res, 400, "bad_request", e.what());
            } catch (const std::exception& e) {
                http::send_error(res, 500, "internal", e.what());
            }
        };
    }

    static Json parse_body(const httplib::Request& req) {
        Json j = Json::parse(req.body, nullptr, false);
        if (j.is_discarded()) throw ValidationError("request body is not valid JSON");
        return j;
    }

    Json created(const CreateSpec& spec, const std::vector<std::string>& ids, double ms) const {
        return Json{{"ids", ids},
                    {"count", ids.size()},
                    {"kind", spec.kind},
                    {"device_type", spec.device_type},
                    {"created_at", registry->clock()},
                    {"creation_ms", ms}};
    }

    void routes() {
        auto& s = bg.server;
        s.Get("/health", [this](const httplib::Request&, httplib::Response& res) {
            Json q = Json::array();
            for (const auto& e : registry->quarantined()) q.push_back({{"id", e.id}, {"reason", e.reason}});
            http::send_json(res, 200, {{"status", "ok"}, {"twins", registry->size()}, {"quarantined", q}});
        });
        s.Post("/dts", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const Json body = parse_body(req);
            if (body.is_object() && body.contains("count")) throw ValidationError("use /dts:batch to create several twins");
            const CreateSpec spec = create_spec_from_json(body);
            const auto t0 = std::chrono::steady_clock::now();
            const auto ids = registry->create(spec, 1);
            const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
            Json out = created(spec, ids, ms);
            out["id"] = ids.front();
            http::send_json(res, 201, out);
        }));
        s.Post("/dts:batch", guarded([this](const httplib::Request& req, httplib::Response& res) {
            Json body = parse_body(req);
            if (!body.is_object() || !body.contains("count") || !body["count"].is_number_unsigned())
                throw ValidationError("'count' must be a positive integer");
            const auto count = body["count"].get<std::size_t>();
            if (count == 0 || count > 10000) throw ValidationError("'count' must be between 1 and 10000");
            const CreateSpec spec = create_spec_from_json(body);
            const auto t0 = std::chrono::steady_clock::now();
            const auto ids = registry->create(spec, count);
            const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
            http::send_json(res, 201, created(spec, ids, ms));
        }));
        s.Get("/dts", guarded([this](const httplib::Request&, httplib::Response& res) {
            Json list = Json::array();
            for (const auto& t : registry->list())
                list.push_back({{"id", t.id}, {"kind", t.kind}, {"device_type", t.device_type}, {"created_at", t.created_at}, {"steps", t.steps}});
            http::send_json(res, 200, {{"twins", list}});
        }));
        s.Get(R"(/dts/([^/]+)/state)", guarded([this](const httplib::Request& req, httplib::Response& res) {
            http::send_json(res, 200, registry->state(req.matches[1]));
        }));
        s.Post(R"(/dts/([^/]+)/requests)", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const Json body = parse_body(req);
            const DeviceRequest dr = request_from_json(body);
            const bool has_now = body.is_object() && body.contains("virtual_now");
            const RoutedResponse r = registry->route(req.matches[1], dr, has_now);
            Json out = to_json(r.response);
            out["twin"] = {{"id", std::string(req.matches[1])}, {"state_digest", r.state_digest}, {"steps", r.steps}};
            http::send_json(res, 200, out);
        }));
        s.Delete(R"(/dts/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
            registry->remove(req.matches[1]);
            http::send_json(res, 200, {{"id", std::string(req.matches[1])}, {"deleted", true}});
        }));
        // Unmatched paths still demand a key, so probing reveals nothing.
        s.set_error_handler([this](const httplib::Request& req, httplib::Response& res) {
            if (res.status != 404 || !res.body.empty()) return;
            if (keys->check(req.get_header_value("X-API-Key")) == AuthResult::Unauthorized)
                return http::send_error(res, 401, "unauthorized", "missing or invalid API key");
            http::send_error(res, 404, "not_found", "no route for " + req.method + " " + req.path);
        });
    }
};

DtServer::DtServer(std::shared_ptr<FleetRegistry> registry, std::shared_ptr<ApiKeyTable> keys, std::size_t threads)
    : impl_(std::make_unique<Impl>(std::move(registry), std::move(keys), threads)) {}

DtServer::~DtServer() = default;

int DtServer::start(const std::string& host, int port) { return impl_->bg.start(host, port); }
void DtServer::stop() { impl_->bg.stop(); }
void DtServer::wait() { impl_->bg.wait(); }

}  // namespace hita::server
