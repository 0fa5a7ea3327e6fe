#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "hita/common/json.hpp"

namespace hita::stub {

// Field generators: {"type": "id", "prefix": "P"} | {"type": "name"} | {"type": "word"}
// | {"type": "int", "min": a, "max": b} | {"type": "float", "min": a, "max": b}
// | {"type": "bool"} | {"type": "choice", "values": [...]}
// | {"type": "ref", "collection": c} (id of a random record of an earlier collection)
// | {"type": "date", "from": "YYYY-MM-DD", "days": n}
struct FieldGenerator {
    std::string name;
    Json spec;
};

struct CollectionSpec {
    std::string name;
    std::int64_t count = 0;
    std::vector<FieldGenerator> fields;
};

struct GeneratorSpec {
    std::vector<CollectionSpec> collections;  // generated in order
};

// Throws ValidationError for negative counts, empty or inverted ranges, unknown
// generator types, refs to collections not generated earlier.
GeneratorSpec generator_spec_from_json(const Json& j);

// A range or equality condition on one field.
struct Condition {
    std::string field;
    std::optional<Json> equals;
    std::optional<double> min;  // inclusive
    std::optional<double> max;  // inclusive
    bool matches(const Json& record) const;
};

// In-memory synthetic records. Collections are filled only by seed(); there is no
// import path for outside data. Reads run concurrently, writes are serialised per
// collection.
class ArtificialDataStore {
public:
    // Replaces every collection named in the spec with freshly generated records.
    void seed(const GeneratorSpec& spec, std::uint64_t seed);

    bool has_collection(const std::string& name) const;
    std::vector<std::string> collections() const;
    std::size_t size(const std::string& collection) const;

    // Records satisfying every condition, in insertion order. Throws ValidationError
    // for an unknown collection.
    std::vector<Json> query(const std::string& collection, const std::vector<Condition>& where, std::size_t limit = 0) const;
    // Appends a record built by a stub template; returns it.
    Json insert(const std::string& collection, Json record);
    // Merges patch into every matching record; returns how many changed.
    std::size_t update(const std::string& collection, const std::vector<Condition>& where, const Json& patch);

    // JSON-lines dump ({"collection": c, "record": r} per line) for inspection.
    std::string export_jsonl() const;

private:
    struct Collection {
        mutable std::shared_mutex mu;
        std::vector<Json> records;
    };
    std::shared_ptr<Collection> find(const std::string& name) const;

    mutable std::shared_mutex mu_;
    std::map<std::string, std::shared_ptr<Collection>> collections_;
};

}  // namespace hita::stub
