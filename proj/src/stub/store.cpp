#include "hita/stub/store.hpp"

#include <cmath>
#include <cstdio>
#include <mutex>
#include <set>

#include "hita/common/errors.hpp"
#include "hita/common/rng.hpp"
#include "hita/common/vtime.hpp"

namespace hita::stub {

namespace {

const char* const kGiven[] = {"Ada", "Bjorn", "Cora", "Dag", "Edda", "Finn", "Greta", "Hakon", "Ingrid", "Jon",
                              "Kari", "Leif", "Maja", "Nils", "Oda", "Per", "Ragna", "Sven", "Tora", "Ulf"};
const char* const kFamily[] = {"Aalto", "Berget", "Dalen", "Eik", "Fjell", "Haug", "Li", "Moen", "Nes", "Strand",
                               "Vik", "Lund", "Rud", "Bakke", "Foss", "Holt", "Kvam", "Myr", "Sand", "Tveit"};
const char* const kWords[] = {"amber", "basil", "clove", "dune", "elm", "flint", "gale", "haze", "ivy", "jade",
                              "kelp", "loam", "moss", "nectar", "opal", "pine", "quartz", "reed", "sage", "thyme"};

double number(const Json& spec, const char* key, const std::string& where) {
    auto it = spec.find(key);
    if (it == spec.end() || !it->is_number()) throw ValidationError(where + ": '" + key + "' must be a number");
    return it->get<double>();
}

void validate_field(const FieldGenerator& f, const std::set<std::string>& earlier, const std::string& coll) {
    const std::string where = coll + "." + f.name;
    if (!f.spec.is_object() || !f.spec.contains("type") || !f.spec["type"].is_string())
        throw ValidationError(where + ": generator needs a 'type'");
    const std::string type = f.spec["type"];
    if (type == "int" || type == "float") {
        const double lo = number(f.spec, "min", where), hi = number(f.spec, "max", where);
        if (lo > hi) throw ValidationError(where + ": min exceeds max");
        if (type == "int" && (lo != std::floor(lo) || hi != std::floor(hi))) throw ValidationError(where + ": int bounds must be integers");
    } else if (type == "choice") {
        auto v = f.spec.find("values");
        if (v == f.spec.end() || !v->is_array() || v->empty()) throw ValidationError(where + ": choice needs non-empty 'values'");
    } else if (type == "ref") {
        auto c = f.spec.find("collection");
        if (c == f.spec.end() || !c->is_string() || !earlier.count(c->get<std::string>()))
            throw ValidationError(where + ": ref must name a collection generated earlier");
    } else if (type == "date") {
        auto from = f.spec.find("from");
        if (from == f.spec.end() || !from->is_string()) throw ValidationError(where + ": date needs 'from'");
        if (!vtime::parse_date(from->get<std::string>())) throw ValidationError(where + ": 'from' must be YYYY-MM-DD");
        if (number(f.spec, "days", where) < 0) throw ValidationError(where + ": 'days' must be non-negative");
    } else if (type != "id" && type != "name" && type != "word" && type != "bool") {
        throw ValidationError(where + ": unknown generator type '" + type + "'");
    }
}

}  // namespace

GeneratorSpec generator_spec_from_json(const Json& j) {
    if (!j.is_object() || !j.contains("collections") || !j["collections"].is_array())
        throw ValidationError("generator spec needs a 'collections' array");
    GeneratorSpec spec;
    std::set<std::string> earlier;
    for (const auto& c : j["collections"]) {
        if (!c.is_object() || !c.contains("name") || !c["name"].is_string()) throw ValidationError("collection needs a 'name'");
        CollectionSpec cs;
        cs.name = c["name"];
        if (cs.name.empty()) throw ValidationError("collection name must not be empty");
        if (earlier.count(cs.name)) throw ValidationError("collection '" + cs.name + "' generated twice");
        if (!c.contains("count") || !c["count"].is_number_integer()) throw ValidationError(cs.name + ": 'count' must be an integer");
        cs.count = c["count"];
        if (cs.count < 0 || cs.count > 1000000) throw ValidationError(cs.name + ": 'count' must be in [0, 1000000]");
        if (auto f = c.find("fields"); f != c.end()) {
            if (!f->is_object()) throw ValidationError(cs.name + ": 'fields' must be an object");
            for (const auto& [name, g] : f->items()) cs.fields.push_back({name, g});
        }
        for (const auto& f : cs.fields) validate_field(f, earlier, cs.name);
        earlier.insert(cs.name);
        spec.collections.push_back(std::move(cs));
    }
    return spec;
}

bool Condition::matches(const Json& record) const {
    auto it = record.find(field);
    if (it == record.end()) return false;
    if (equals && *it != *equals) {
        // query strings arrive untyped: "3" equals 3, "true" equals true
        if (!equals->is_string() || it->is_string()) return false;
        if (it->dump() != equals->get<std::string>()) return false;
    }
    if (min || max) {
        if (!it->is_number()) return false;
        const double v = it->get<double>();
        if (min && v < *min) return false;
        if (max && v > *max) return false;
    }
    return true;
}

void ArtificialDataStore::seed(const GeneratorSpec& spec, std::uint64_t seed) {
    Rng rng(seed);
    std::map<std::string, std::vector<std::string>> ids;
    for (const auto& cs : spec.collections) {
        std::vector<Json> records;
        records.reserve(static_cast<std::size_t>(cs.count));
        for (std::int64_t i = 0; i < cs.count; ++i) {
            Json r = Json::object();
            for (const auto& f : cs.fields) {
                const std::string type = f.spec["type"];
                if (type == "id") {
                    char buf[32];
                    std::snprintf(buf, sizeof buf, "%06lld", static_cast<long long>(i + 1));
                    r[f.name] = f.spec.value("prefix", std::string()) + buf;
                } else if (type == "name") {
                    r[f.name] = std::string(kGiven[rng.index(std::size(kGiven))]) + " " + kFamily[rng.index(std::size(kFamily))];
                } else if (type == "word") {
                    r[f.name] = kWords[rng.index(std::size(kWords))];
                } else if (type == "int") {
                    r[f.name] = rng.uniform_int(f.spec["min"].get<std::int64_t>(), f.spec["max"].get<std::int64_t>());
                } else if (type == "float") {
                    r[f.name] = rng.uniform(f.spec["min"].get<double>(), f.spec["max"].get<double>());
                } else if (type == "bool") {
                    r[f.name] = rng.bernoulli(0.5);
                } else if (type == "choice") {
                    r[f.name] = f.spec["values"][rng.index(f.spec["values"].size())];
                } else if (type == "ref") {
                    const auto& pool = ids[f.spec["collection"].get<std::string>()];
                    r[f.name] = pool.empty() ? Json(nullptr) : Json(pool[rng.index(pool.size())]);
                } else if (type == "date") {
                    const auto from = *vtime::parse_date(f.spec["from"].get<std::string>());
                    const auto days = f.spec["days"].get<std::int64_t>();
                    r[f.name] = vtime::format_date(from + rng.uniform_int(0, days) * vtime::kDay);
                }
            }
            records.push_back(std::move(r));
        }
        auto& pool = ids[cs.name];
        for (const auto& r : records)
            for (const auto& f : cs.fields)
                if (f.spec["type"] == "id") {
                    pool.push_back(r[f.name].get<std::string>());
                    break;
                }
        auto coll = std::make_shared<Collection>();
        coll->records = std::move(records);
        std::unique_lock lock(mu_);
        collections_[cs.name] = std::move(coll);
    }
}

std::shared_ptr<ArtificialDataStore::Collection> ArtificialDataStore::find(const std::string& name) const {
    std::shared_lock lock(mu_);
    auto it = collections_.find(name);
    if (it == collections_.end()) throw ValidationError("unknown collection '" + name + "'");
    return it->second;
}

bool ArtificialDataStore::has_collection(const std::string& name) const {
    std::shared_lock lock(mu_);
    return collections_.count(name) > 0;
}

std::vector<std::string> ArtificialDataStore::collections() const {
    std::shared_lock lock(mu_);
    std::vector<std::string> out;
    for (const auto& [k, v] : collections_) out.push_back(k);
    return out;
}

std::size_t ArtificialDataStore::size(const std::string& collection) const {
    auto c = find(collection);
    std::shared_lock lock(c->mu);
    return c->records.size();
}

std::vector<Json> ArtificialDataStore::query(const std::string& collection, const std::vector<Condition>& where, std::size_t limit) const {
    auto c = find(collection);
    std::shared_lock lock(c->mu);
    std::vector<Json> out;
    for (const auto& r : c->records) {
        bool ok = true;
        for (const auto& cond : where)
            if (!cond.matches(r)) {
                ok = false;
                break;
            }
        if (!ok) continue;
        out.push_back(r);
        if (limit && out.size() >= limit) break;
    }
    return out;
}

Json ArtificialDataStore::insert(const std::string& collection, Json record) {
    if (!record.is_object()) throw ValidationError("records must be objects");
    auto c = find(collection);
    std::unique_lock lock(c->mu);
    c->records.push_back(record);
    return record;
}

std::size_t ArtificialDataStore::update(const std::string& collection, const std::vector<Condition>& where, const Json& patch) {
    if (!patch.is_object()) throw ValidationError("update patch must be an object");
    auto c = find(collection);
    std::unique_lock lock(c->mu);
    std::size_t n = 0;
    for (auto& r : c->records) {
        bool ok = true;
        for (const auto& cond : where)
            if (!cond.matches(r)) {
                ok = false;
                break;
            }
        if (!ok) continue;
        r.merge_patch(patch);
        ++n;
    }
    return n;
}

std::string ArtificialDataStore::export_jsonl() const {
    std::string out;
    std::shared_lock lock(mu_);
    for (const auto& [name, c] : collections_) {
        std::shared_lock cl(c->mu);
        for (const auto& r : c->records) out += Json{{"collection", name}, {"record", r}}.dump() + "\n";
    }
    return out;
}

}  // namespace hita::stub
