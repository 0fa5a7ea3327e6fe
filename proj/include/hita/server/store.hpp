#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "hita/common/json.hpp"
#include "hita/common/vtime.hpp"

namespace hita::server {

// Everything needed to rebuild a twin that has not taken a step yet.
struct CreationRecord {
    std::string id;
    std::string kind;  // "mb" or "ml"
    std::string device_type;
    std::string model_ref;  // ml only
    Json inputs = Json::object();
    std::uint64_t seed = 0;
    vtime::Millis created_at = 0;
    bool operator==(const CreationRecord&) const = default;
};

Json to_json(const CreationRecord& c);
CreationRecord creation_from_json(const Json& j);

// Append-only step journal of one twin, one JSON document per line.
class Journal {
public:
    Journal(std::filesystem::path path, bool durable);
    void append(const std::string& line);

private:
    std::filesystem::path path_;
    std::ofstream out_;
    bool durable_;
};

struct StoredTwin {
    CreationRecord creation;
    std::optional<std::string> snapshot;
    std::vector<std::string> journal;  // complete lines only
};

struct QuarantineEntry {
    std::string id;
    std::string reason;
};

// Layout under root:
//   fleet.jsonl             create / delete / quarantine records, in order
//   twins/<id>.snapshot.json  latest state, replaced atomically
//   twins/<id>.events.jsonl   step journal
//   twins/<id>.tombstone       deleted twin marker
//   quarantine/               files of twins that failed to load, plus report.jsonl
class FleetStore {
public:
    explicit FleetStore(std::filesystem::path root, bool durable = false);

    const std::filesystem::path& root() const { return root_; }

    // One manifest write for the whole batch.
    void record_creations(const std::vector<CreationRecord>& records);
    void record_deletion(const std::string& id);
    void write_snapshot(const std::string& id, const std::string& bytes);
    std::unique_ptr<Journal> open_journal(const std::string& id);
    // Keeps the first n lines.
    void truncate_journal(const std::string& id, std::size_t n);
    void quarantine(const std::string& id, const std::string& reason);

    // Twins created and neither deleted nor quarantined, in creation order.
    std::vector<StoredTwin> load() const;
    std::vector<QuarantineEntry> quarantined() const;

private:
    void append_manifest(const std::string& text);
    std::filesystem::path twin_file(const std::string& id, const char* suffix) const;

    std::filesystem::path root_;
    bool durable_;
    mutable std::mutex mu_;
};

// Reads a file whole; throws std::runtime_error when it cannot be opened.
std::string read_file(const std::filesystem::path& p);
// Writes to a sibling temporary file and renames it over p.
void write_file_atomic(const std::filesystem::path& p, const std::string& bytes, bool durable = false);

}  // namespace hita::server
