#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "hita/common/json.hpp"
#include "hita/common/rng.hpp"
#include "hita/stub/store.hpp"

namespace hita::stub {

// A rule matches when every listed query parameter and body field matches. A
// query entry is either a literal (compared as text) or {"present": bool}.
struct MatchRule {
    Json query = Json::object();
    Json body = Json::object();
};

// Template language: strings "$query.<p>", "$body.<path>" and "$app" are
// substituted; an object {"$query": {"collection": c, "where": {...}, "limit": n}}
// becomes the list of matching records, {"$first": {...}} the first of them or
// null, {"$count": {...}} their number. A "where" entry is a template value for
// equality or {"min": x, "max": y}.
struct Rule {
    MatchRule match;
    int status = 200;
    Json response;
    std::optional<Json> insert;  // {"collection": c, "record": template}, applied before rendering
};

struct LatencyModel {
    double fixed_ms = 0;
    double jitter_ms = 0;  // uniform extra in [0, jitter]
};

struct Endpoint {
    std::string method;  // GET POST PUT PATCH DELETE
    std::string route;   // exact path
    std::vector<Rule> rules;
    LatencyModel latency;
    double failure_rate = 0;
};

struct StubSpec {
    std::string app;
    std::vector<Endpoint> endpoints;
};

// Throws ValidationError (duplicate routes within the app, bad rates, bad templates).
StubSpec stub_spec_from_json(const Json& j);
// Collections a spec's templates query or insert into.
std::vector<std::string> referenced_collections(const StubSpec& spec);

struct StubRequest {
    std::string method;
    std::string path;
    std::map<std::string, std::string> query;
    Json body;  // null when absent or not JSON
};

struct StubReply {
    int status = 200;
    Json body;
    double latency_ms = 0;  // virtual; reported, never slept
    std::string app;
};

class RouteConflict : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class StubEngine {
public:
    explicit StubEngine(std::shared_ptr<ArtificialDataStore> store, std::uint64_t seed = 42);

    // Mounts the app's routes, replacing an earlier spec of the same app in one
    // step. Throws RouteConflict when another app owns one of the routes and
    // ValidationError when a template names a collection the store lacks.
    std::vector<std::string> register_stub(const StubSpec& spec);
    bool unregister(const std::string& app);
    std::vector<std::string> apps() const;
    std::vector<std::string> routes() const;  // "METHOD /path"

    StubReply handle(const StubRequest& req);

    ArtificialDataStore& store() { return *store_; }

private:
    struct Mounted {
        std::string app;
        Endpoint endpoint;
        std::shared_ptr<std::mutex> rng_mu;
        std::shared_ptr<Rng> rng;
    };
    using Table = std::map<std::string, std::shared_ptr<const Mounted>>;

    std::shared_ptr<ArtificialDataStore> store_;
    std::uint64_t seed_;
    mutable std::shared_mutex mu_;
    std::shared_ptr<const Table> table_ = std::make_shared<Table>();
};

}  // namespace hita::stub
