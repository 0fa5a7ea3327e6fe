#include "hita/stub/stub.hpp"

#include <algorithm>
#include <set>

#include "hita/common/digest.hpp"
#include "hita/common/errors.hpp"

namespace hita::stub {

namespace {

const std::set<std::string> kMethods = {"GET", "POST", "PUT", "PATCH", "DELETE"};
const char* const kQueryOps[] = {"$query", "$first", "$count"};

bool is_query_op(const Json& t, std::string* op = nullptr) {
    if (!t.is_object() || t.size() != 1) return false;
    for (const char* k : kQueryOps)
        if (t.contains(k)) {
            if (op) *op = k;
            return true;
        }
    return false;
}

void collect_collections(const Json& t, std::set<std::string>& out) {
    std::string op;
    if (is_query_op(t, &op)) {
        const Json& q = t[op];
        if (!q.is_object() || !q.contains("collection") || !q["collection"].is_string())
            throw ValidationError(op + " needs a 'collection'");
        if (auto w = q.find("where"); w != q.end() && !w->is_object()) throw ValidationError(op + ": 'where' must be an object");
        if (auto l = q.find("limit"); l != q.end() && !l->is_number_unsigned()) throw ValidationError(op + ": 'limit' must be non-negative");
        out.insert(q["collection"].get<std::string>());
        if (auto w = q.find("where"); w != q.end())
            for (const auto& [k, v] : w->items()) collect_collections(v, out);
        return;
    }
    if (t.is_object())
        for (const auto& [k, v] : t.items()) collect_collections(v, out);
    else if (t.is_array())
        for (const auto& v : t) collect_collections(v, out);
}

std::string text_of(const Json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

}  // namespace

StubSpec stub_spec_from_json(const Json& j) {
    if (!j.is_object()) throw ValidationError("stub spec must be an object");
    StubSpec s;
    if (!j.contains("app") || !j["app"].is_string() || j["app"].get<std::string>().empty()) throw ValidationError("stub spec needs an 'app'");
    s.app = j["app"];
    if (!j.contains("endpoints") || !j["endpoints"].is_array()) throw ValidationError("stub spec needs an 'endpoints' array");
    std::set<std::string> seen;
    for (const auto& e : j["endpoints"]) {
        Endpoint ep;
        try {
            ep.method = e.value("method", std::string("GET"));
            ep.route = e.at("route").get<std::string>();
            if (auto l = e.find("latency_ms"); l != e.end()) {
                if (l->is_number()) ep.latency.fixed_ms = l->get<double>();
                else {
                    ep.latency.fixed_ms = l->value("fixed", 0.0);
                    ep.latency.jitter_ms = l->value("jitter", 0.0);
                }
            }
            ep.failure_rate = e.value("failure_rate", 0.0);
            for (const auto& r : e.at("rules")) {
                Rule rule;
                if (auto m = r.find("match"); m != r.end()) {
                    rule.match.query = m->value("query", Json::object());
                    rule.match.body = m->value("body", Json::object());
                    if (!rule.match.query.is_object() || !rule.match.body.is_object()) throw ValidationError("match entries must be objects");
                }
                rule.status = r.value("status", 200);
                rule.response = r.value("response", Json(nullptr));
                if (auto ins = r.find("insert"); ins != r.end()) {
                    if (!ins->is_object() || !ins->contains("collection") || !(*ins)["collection"].is_string() || !ins->contains("record"))
                        throw ValidationError("insert needs 'collection' and 'record'");
                    rule.insert = *ins;
                }
                if (rule.status < 100 || rule.status > 599) throw ValidationError("rule status must be an HTTP status");
                ep.rules.push_back(std::move(rule));
            }
        } catch (const Json::exception& ex) {
            throw ValidationError(std::string("endpoint: ") + ex.what());
        }
        std::transform(ep.method.begin(), ep.method.end(), ep.method.begin(), ::toupper);
        if (!kMethods.count(ep.method)) throw ValidationError("unsupported method '" + ep.method + "'");
        if (ep.route.empty() || ep.route[0] != '/') throw ValidationError("routes must start with '/'");
        if (ep.route.rfind("/_stubs", 0) == 0) throw ValidationError("routes under /_stubs are reserved");
        if (!(ep.failure_rate >= 0 && ep.failure_rate <= 1)) throw ValidationError("failure_rate must be in [0,1]");
        if (ep.latency.fixed_ms < 0 || ep.latency.jitter_ms < 0) throw ValidationError("latency must be non-negative");
        if (ep.rules.empty()) throw ValidationError("endpoint " + ep.route + " has no rules");
        if (!seen.insert(ep.method + " " + ep.route).second) throw ValidationError("duplicate route " + ep.method + " " + ep.route);
        s.endpoints.push_back(std::move(ep));
    }
    referenced_collections(s);
    return s;
}

std::vector<std::string> referenced_collections(const StubSpec& spec) {
    std::set<std::string> out;
    for (const auto& ep : spec.endpoints)
        for (const auto& r : ep.rules) {
            collect_collections(r.response, out);
            if (r.insert) {
                out.insert((*r.insert)["collection"].get<std::string>());
                collect_collections((*r.insert)["record"], out);
            }
        }
    return {out.begin(), out.end()};
}

StubEngine::StubEngine(std::shared_ptr<ArtificialDataStore> store, std::uint64_t seed) : store_(std::move(store)), seed_(seed) {
    if (!store_) store_ = std::make_shared<ArtificialDataStore>();
}

std::vector<std::string> StubEngine::register_stub(const StubSpec& spec) {
    for (const auto& c : referenced_collections(spec))
        if (!store_->has_collection(c)) throw ValidationError("stub '" + spec.app + "' references undeclared collection '" + c + "'");
    std::unique_lock lock(mu_);
    auto next = std::make_shared<Table>();
    for (const auto& [key, m] : *table_)
        if (m->app != spec.app) (*next)[key] = m;
    std::vector<std::string> mounted;
    for (const auto& ep : spec.endpoints) {
        const std::string key = ep.method + " " + ep.route;
        if (auto it = next->find(key); it != next->end()) throw RouteConflict("route " + key + " already belongs to '" + it->second->app + "'");
        const std::string h = sha256_hex(spec.app + "\n" + key).substr(0, 16);
        auto m = std::make_shared<Mounted>(Mounted{spec.app, ep, std::make_shared<std::mutex>(),
                                                   std::make_shared<Rng>(seed_ ^ std::stoull(h, nullptr, 16))});
        (*next)[key] = std::move(m);
        mounted.push_back(key);
    }
    table_ = std::move(next);
    return mounted;
}

bool StubEngine::unregister(const std::string& app) {
    std::unique_lock lock(mu_);
    auto next = std::make_shared<Table>();
    bool found = false;
    for (const auto& [key, m] : *table_) {
        if (m->app == app) found = true;
        else (*next)[key] = m;
    }
    table_ = std::move(next);
    return found;
}

std::vector<std::string> StubEngine::apps() const {
    std::shared_lock lock(mu_);
    std::set<std::string> s;
    for (const auto& [k, m] : *table_) s.insert(m->app);
    return {s.begin(), s.end()};
}

std::vector<std::string> StubEngine::routes() const {
    std::shared_lock lock(mu_);
    std::vector<std::string> out;
    for (const auto& [k, m] : *table_) out.push_back(k);
    return out;
}

namespace {

const Json* body_path(const Json& body, const std::string& path) {
    const Json* cur = &body;
    std::size_t at = 0;
    while (at <= path.size()) {
        const auto dot = path.find('.', at);
        const std::string key = path.substr(at, dot == std::string::npos ? std::string::npos : dot - at);
        if (!cur->is_object()) return nullptr;
        auto it = cur->find(key);
        if (it == cur->end()) return nullptr;
        cur = &*it;
        if (dot == std::string::npos) break;
        at = dot + 1;
    }
    return cur;
}

struct Renderer {
    const StubRequest& req;
    const std::string& app;
    ArtificialDataStore& store;

    Json value(const std::string& s) const {
        if (s == "$app") return app;
        if (s.rfind("$query.", 0) == 0) {
            auto it = req.query.find(s.substr(7));
            return it == req.query.end() ? Json(nullptr) : Json(it->second);
        }
        if (s.rfind("$body.", 0) == 0) {
            const Json* v = body_path(req.body, s.substr(6));
            return v ? *v : Json(nullptr);
        }
        return s;
    }

    std::vector<Condition> conditions(const Json& where) const {
        std::vector<Condition> out;
        for (const auto& [field, v] : where.items()) {
            Condition c{field, std::nullopt, std::nullopt, std::nullopt};
            if (v.is_object() && (v.contains("min") || v.contains("max")) && !is_query_op(v)) {
                if (auto m = v.find("min"); m != v.end()) {
                    const Json r = render(*m);
                    c.min = r.is_number() ? r.get<double>() : std::stod(text_of(r));
                }
                if (auto m = v.find("max"); m != v.end()) {
                    const Json r = render(*m);
                    c.max = r.is_number() ? r.get<double>() : std::stod(text_of(r));
                }
            } else {
                c.equals = render(v);
            }
            out.push_back(std::move(c));
        }
        return out;
    }

    Json render(const Json& t) const {
        std::string op;
        if (is_query_op(t, &op)) {
            const Json& q = t[op];
            const auto where = conditions(q.value("where", Json::object()));
            const auto limit = op == "$first" ? 1 : q.value("limit", std::size_t{0});
            auto rows = store.query(q["collection"].get<std::string>(), where, op == "$count" ? 0 : limit);
            if (op == "$count") return rows.size();
            if (op == "$first") return rows.empty() ? Json(nullptr) : rows.front();
            Json arr = Json::array();
            for (auto& r : rows) arr.push_back(std::move(r));
            return arr;
        }
        if (t.is_string()) return value(t.get<std::string>());
        if (t.is_object()) {
            Json out = Json::object();
            for (const auto& [k, v] : t.items()) out[k] = render(v);
            return out;
        }
        if (t.is_array()) {
            Json out = Json::array();
            for (const auto& v : t) out.push_back(render(v));
            return out;
        }
        return t;
    }
};

bool rule_matches(const MatchRule& m, const StubRequest& req) {
    for (const auto& [k, v] : m.query.items()) {
        auto it = req.query.find(k);
        if (v.is_object() && v.contains("present")) {
            if ((it != req.query.end()) != v["present"].get<bool>()) return false;
        } else if (it == req.query.end() || it->second != text_of(v)) {
            return false;
        }
    }
    for (const auto& [k, v] : m.body.items()) {
        const Json* got = body_path(req.body, k);
        if (v.is_object() && v.contains("present")) {
            if ((got != nullptr) != v["present"].get<bool>()) return false;
        } else if (!got || *got != v) {
            return false;
        }
    }
    return true;
}

}  // namespace

StubReply StubEngine::handle(const StubRequest& req) {
    std::shared_ptr<const Table> table;
    {
        std::shared_lock lock(mu_);
        table = table_;
    }
    StubReply reply;
    auto it = table->find(req.method + " " + req.path);
    if (it == table->end()) {
        reply.status = 404;
        reply.body = {{"code", "not_found"}, {"message", "no stub serves " + req.method + " " + req.path}, {"details", Json::array()}};
        return reply;
    }
    const Mounted& m = *it->second;
    reply.app = m.app;
    bool fail = false;
    {
        std::lock_guard lock(*m.rng_mu);
        reply.latency_ms = m.endpoint.latency.fixed_ms + (m.endpoint.latency.jitter_ms > 0 ? m.rng->uniform(0, m.endpoint.latency.jitter_ms) : 0.0);
        if (m.endpoint.failure_rate > 0) fail = m.rng->bernoulli(m.endpoint.failure_rate);
    }
    if (fail) {
        reply.status = 503;
        reply.body = {{"code", "unavailable"}, {"message", "injected failure in '" + m.app + "'"}, {"details", Json::array()}};
        return reply;
    }
    for (const auto& rule : m.endpoint.rules) {
        if (!rule_matches(rule.match, req)) continue;
        Renderer r{req, m.app, *store_};
        try {
            if (rule.insert) store_->insert((*rule.insert)["collection"].get<std::string>(), r.render((*rule.insert)["record"]));
            reply.body = r.render(rule.response);
            reply.status = rule.status;
        } catch (const std::exception& e) {
            reply.status = 400;
            reply.body = {{"code", "bad_request"}, {"message", e.what()}, {"details", Json::array()}};
        }
        return reply;
    }
    reply.status = 404;
    reply.body = {{"code", "not_found"}, {"message", "no rule of '" + m.app + "' matches the request"}, {"details", {m.app}}};
    return reply;
}

}  // namespace hita::stub
