#include "hita/server/store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <map>
#include <set>
#include <sstream>

#include "hita/common/errors.hpp"

namespace hita::server {

namespace fs = std::filesystem;

Json to_json(const CreationRecord& c) {
    return Json{{"op", "create"},       {"id", c.id},         {"kind", c.kind},           {"device_type", c.device_type},
                {"model_ref", c.model_ref}, {"inputs", c.inputs}, {"seed", c.seed},       {"created_at", c.created_at}};
}

CreationRecord creation_from_json(const Json& j) {
    try {
        CreationRecord c;
        c.id = j.at("id").get<std::string>();
        c.kind = j.at("kind").get<std::string>();
        c.device_type = j.at("device_type").get<std::string>();
        c.model_ref = j.value("model_ref", std::string());
        c.inputs = j.value("inputs", Json::object());
        c.seed = j.at("seed").get<std::uint64_t>();
        c.created_at = j.at("created_at").get<vtime::Millis>();
        return c;
    } catch (const Json::exception& e) {
        throw IntegrityError(std::string("creation record: ") + e.what());
    }
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

namespace {

void sync_path(const fs::path& p) {
    const int fd = ::open(p.c_str(), O_RDONLY);
    if (fd < 0) return;
    ::fsync(fd);
    ::close(fd);
}

std::vector<std::string> complete_lines(const std::string& text) {
    std::vector<std::string> out;
    std::size_t at = 0;
    while (at < text.size()) {
        const auto nl = text.find('\n', at);
        if (nl == std::string::npos) break;  // torn final write
        if (nl > at) out.push_back(text.substr(at, nl - at));
        at = nl + 1;
    }
    return out;
}

}  // namespace

void write_file_atomic(const fs::path& p, const std::string& bytes, bool durable) {
    fs::path tmp = p;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) throw std::runtime_error("short write to " + tmp.string());
    }
    if (durable) sync_path(tmp);
    fs::rename(tmp, p);
    if (durable) sync_path(p.parent_path());
}

Journal::Journal(fs::path path, bool durable) : path_(std::move(path)), out_(path_, std::ios::binary | std::ios::app), durable_(durable) {
    if (!out_) throw std::runtime_error("cannot open journal " + path_.string());
}

void Journal::append(const std::string& line) {
    out_ << line << '\n';
    out_.flush();
    if (!out_) throw std::runtime_error("journal write failed: " + path_.string());
    if (durable_) sync_path(path_);
}

FleetStore::FleetStore(fs::path root, bool durable) : root_(std::move(root)), durable_(durable) {
    fs::create_directories(root_ / "twins");
    fs::create_directories(root_ / "quarantine");
}

fs::path FleetStore::twin_file(const std::string& id, const char* suffix) const { return root_ / "twins" / (id + suffix); }

void FleetStore::append_manifest(const std::string& text) {
    std::lock_guard lock(mu_);
    std::ofstream out(root_ / "fleet.jsonl", std::ios::binary | std::ios::app);
    out << text;
    out.flush();
    if (!out) throw std::runtime_error("fleet manifest write failed");
    out.close();
    if (durable_) sync_path(root_ / "fleet.jsonl");
}

void FleetStore::record_creations(const std::vector<CreationRecord>& records) {
    std::string text;
    for (const auto& r : records) text += to_json(r).dump() + "\n";
    append_manifest(text);
}

void FleetStore::record_deletion(const std::string& id) {
    write_file_atomic(twin_file(id, ".tombstone"), Json{{"id", id}}.dump() + "\n", durable_);
    append_manifest(Json{{"op", "delete"}, {"id", id}}.dump() + "\n");
    std::error_code ec;
    fs::remove(twin_file(id, ".snapshot.json"), ec);
    fs::remove(twin_file(id, ".events.jsonl"), ec);
}

void FleetStore::write_snapshot(const std::string& id, const std::string& bytes) {
    write_file_atomic(twin_file(id, ".snapshot.json"), bytes, durable_);
}

std::unique_ptr<Journal> FleetStore::open_journal(const std::string& id) {
    return std::make_unique<Journal>(twin_file(id, ".events.jsonl"), durable_);
}

void FleetStore::truncate_journal(const std::string& id, std::size_t n) {
    const fs::path p = twin_file(id, ".events.jsonl");
    std::string text;
    if (fs::exists(p)) text = read_file(p);
    auto lines = complete_lines(text);
    if (lines.size() > n) lines.resize(n);
    std::string out;
    for (const auto& l : lines) out += l + "\n";
    write_file_atomic(p, out, durable_);
}

void FleetStore::quarantine(const std::string& id, const std::string& reason) {
    std::error_code ec;
    for (const char* suffix : {".snapshot.json", ".events.jsonl"}) {
        const fs::path from = twin_file(id, suffix);
        if (fs::exists(from)) fs::rename(from, root_ / "quarantine" / (id + suffix), ec);
    }
    {
        std::lock_guard lock(mu_);
        std::ofstream out(root_ / "quarantine" / "report.jsonl", std::ios::binary | std::ios::app);
        out << Json{{"id", id}, {"reason", reason}}.dump() << '\n';
    }
    append_manifest(Json{{"op", "quarantine"}, {"id", id}}.dump() + "\n");
}

std::vector<StoredTwin> FleetStore::load() const {
    std::vector<StoredTwin> out;
    const fs::path manifest = root_ / "fleet.jsonl";
    if (!fs::exists(manifest)) return out;
    std::vector<CreationRecord> created;
    std::set<std::string> gone;
    for (const auto& line : complete_lines(read_file(manifest))) {
        Json j = Json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) continue;
        const std::string op = j.value("op", std::string());
        if (op == "create") {
            try {
                created.push_back(creation_from_json(j));
            } catch (const IntegrityError&) {
            }
        } else if ((op == "delete" || op == "quarantine") && j.contains("id") && j["id"].is_string()) {
            gone.insert(j["id"].get<std::string>());
        }
    }
    for (auto& c : created) {
        if (gone.count(c.id) || fs::exists(twin_file(c.id, ".tombstone"))) continue;
        StoredTwin t;
        t.creation = std::move(c);
        const fs::path snap = twin_file(t.creation.id, ".snapshot.json");
        if (fs::exists(snap)) t.snapshot = read_file(snap);
        const fs::path journal = twin_file(t.creation.id, ".events.jsonl");
        if (fs::exists(journal)) t.journal = complete_lines(read_file(journal));
        out.push_back(std::move(t));
    }
    return out;
}

std::vector<QuarantineEntry> FleetStore::quarantined() const {
    std::vector<QuarantineEntry> out;
    const fs::path report = root_ / "quarantine" / "report.jsonl";
    if (!fs::exists(report)) return out;
    for (const auto& line : complete_lines(read_file(report))) {
        Json j = Json::parse(line, nullptr, false);
        if (j.is_object()) out.push_back({j.value("id", std::string()), j.value("reason", std::string())});
    }
    return out;
}

}  // namespace hita::server
