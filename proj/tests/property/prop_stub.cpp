#include <cmath>
#include <set>

#include "hita/stub/store.hpp"
#include "hita/stub/stub.hpp"
#include "property.hpp"

using namespace hita;
using namespace hita::stub;
using hita::prop::check;

namespace {

struct Generated {
    Json spec;
    // int fields per collection with their bounds
    std::map<std::string, std::map<std::string, std::pair<std::int64_t, std::int64_t>>> ints;
    std::map<std::string, std::map<std::string, std::string>> refs;
};

Generated random_spec(Rng& rng) {
    Generated g;
    Json cols = Json::array();
    const int n = static_cast<int>(rng.uniform_int(1, 4));
    for (int c = 0; c < n; ++c) {
        const std::string name = "c" + std::to_string(c);
        Json fields{{"id", {{"type", "id"}, {"prefix", name + "-"}}}};
        const int k = static_cast<int>(rng.uniform_int(0, 4));
        for (int f = 0; f < k; ++f) {
            const std::string fname = "f" + std::to_string(f);
            switch (rng.uniform_int(0, 4)) {
                case 0: {
                    const auto lo = rng.uniform_int(-50, 50);
                    const auto hi = lo + rng.uniform_int(0, 20);
                    fields[fname] = {{"type", "int"}, {"min", lo}, {"max", hi}};
                    g.ints[name][fname] = {lo, hi};
                    break;
                }
                case 1: fields[fname] = {{"type", "choice"}, {"values", {"a", "b", "c"}}}; break;
                case 2: fields[fname] = {{"type", "bool"}}; break;
                case 3:
                    if (c > 0) {
                        const std::string target = "c" + std::to_string(rng.uniform_int(0, c - 1));
                        fields[fname] = {{"type", "ref"}, {"collection", target}};
                        g.refs[name][fname] = target;
                        break;
                    }
                    [[fallthrough]];
                default: fields[fname] = {{"type", "word"}};
            }
        }
        cols.push_back({{"name", name}, {"count", rng.uniform_int(0, 40)}, {"fields", fields}});
    }
    g.spec = {{"collections", cols}};
    return g;
}

}  // namespace

PROPERTY("ts-stub", generated_store_deterministic_and_consistent, 200) {
    const auto g = random_spec(rng);
    const auto spec = generator_spec_from_json(g.spec);
    const std::uint64_t seed = rng.next();
    ArtificialDataStore a, b;
    a.seed(spec, seed);
    b.seed(spec, seed);
    check(a.export_jsonl() == b.export_jsonl(), "same seed produced different data");
    for (const auto& col : g.spec["collections"]) {
        const std::string name = col["name"];
        check(a.size(name) == col["count"].get<std::size_t>(), "record count differs from the spec");
        std::set<std::string> ids;
        for (const auto& r : a.query(name, {})) {
            ids.insert(r["id"].get<std::string>());
            if (auto it = g.ints.find(name); it != g.ints.end())
                for (const auto& [f, range] : it->second) {
                    const auto v = r[f].get<std::int64_t>();
                    check(v >= range.first && v <= range.second, "int outside its range");
                }
            if (auto it = g.refs.find(name); it != g.refs.end())
                for (const auto& [f, target] : it->second) {
                    if (a.size(target) == 0) {
                        check(r[f].is_null(), "ref into an empty collection must be null");
                        continue;
                    }
                    check(!a.query(target, {{"id", r[f], std::nullopt, std::nullopt}}).empty(), "dangling ref");
                }
        }
        check(ids.size() == a.size(name), "duplicate ids");
    }
}

// Store queries agree with a plain filter over every record.
PROPERTY("ts-stub", query_equals_brute_force_filter, 200) {
    const auto g = random_spec(rng);
    ArtificialDataStore s;
    s.seed(generator_spec_from_json(g.spec), rng.next());
    for (const auto& [col, fields] : g.ints) {
        const auto all = s.query(col, {});
        for (const auto& [f, range] : fields) {
            const double lo = static_cast<double>(rng.uniform_int(range.first - 2, range.second));
            const double hi = lo + static_cast<double>(rng.uniform_int(0, 10));
            const Json eq = static_cast<std::int64_t>(rng.uniform_int(range.first, range.second));
            const std::vector<Condition> conds = rng.bernoulli(0.5) ? std::vector<Condition>{{f, std::nullopt, lo, hi}}
                                                                    : std::vector<Condition>{{f, eq, std::nullopt, std::nullopt}};
            std::vector<Json> want;
            for (const auto& r : all) {
                const double v = r[f].get<double>();
                if (conds[0].equals ? r[f] == *conds[0].equals : (v >= lo && v <= hi)) want.push_back(r);
            }
            check(s.query(col, conds) == want, "query differs from filter");
            const std::size_t limit = rng.index(5) + 1;
            const auto got = s.query(col, conds, limit);
            check(got.size() == std::min(limit, want.size()), "limit not honoured");
        }
    }
}

// Latency stays within fixed..fixed+jitter and injected failures come out near
// the configured rate.
PROPERTY("ts-stub", latency_and_failure_bounds, 200) {
    auto store = std::make_shared<ArtificialDataStore>();
    store->seed(generator_spec_from_json(Json{{"collections", {{{"name", "c"}, {"count", 3}, {"fields", {{"id", {{"type", "id"}}}}}}}}}), 1);
    const auto fixed = rng.uniform_int(0, 200);
    const auto jitter = rng.uniform_int(0, 100);
    const double rate = rng.uniform(0.0, 0.5);
    const Json spec{{"app", "p"},
                    {"endpoints",
                     {{{"method", "GET"},
                       {"route", "/c"},
                       {"latency_ms", {{"fixed", fixed}, {"jitter", jitter}}},
                       {"failure_rate", rate},
                       {"rules", {{{"response", {{"$count", {{"collection", "c"}}}}}}}}}}}};
    StubEngine e(store, rng.next());
    e.register_stub(stub_spec_from_json(spec));
    const int n = 400;
    int failed = 0;
    for (int i = 0; i < n; ++i) {
        const auto r = e.handle({"GET", "/c", {}, nullptr});
        check(r.latency_ms >= fixed && r.latency_ms <= fixed + jitter, "latency out of bounds");
        if (r.status == 503) {
            ++failed;
        } else {
            check(r.status == 200 && r.body == 3, "wrong reply");
        }
    }
    const double sd = std::sqrt(rate * (1 - rate) / n);
    check(std::abs(failed / double(n) - rate) <= 5 * sd + 1e-12, "failure rate far from configured");
}

// Requests that match no route leave the store untouched and answer 404.
PROPERTY("ts-stub", unmatched_requests_leave_store_unchanged, 200) {
    const auto g = random_spec(rng);
    auto store = std::make_shared<ArtificialDataStore>();
    store->seed(generator_spec_from_json(g.spec), rng.next());
    const auto before = store->export_jsonl();
    StubEngine e(store, rng.next());
    const std::vector<std::string> methods = {"GET", "POST", "PUT", "DELETE", "PATCH"};
    for (int i = 0; i < 20; ++i) {
        std::string path = "/";
        for (int j = static_cast<int>(rng.uniform_int(0, 12)); j > 0; --j) path.push_back("abc_/:.x"[rng.index(8)]);
        Json body{{"collection", "c0"}, {"record", {{"id", "c0-intruder"}}}};
        const auto r = e.handle({methods[rng.index(methods.size())], path, {}, body});
        check(r.status == 404, "unrouted request did not 404");
    }
    check(store->export_jsonl() == before, "store changed");
}
