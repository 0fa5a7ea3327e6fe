#include "hita/server/registry.hpp"

#include <algorithm>
#include <cstdlib>

#include "hita/common/digest.hpp"

namespace hita::server {

CreateSpec create_spec_from_json(const Json& j) {
    if (!j.is_object()) throw ValidationError("creation body must be an object");
    CreateSpec s;
    for (const auto& [k, v] : j.items())
        if (k != "device_type" && k != "kind" && k != "inputs" && k != "seed" && k != "model_ref" && k != "count")
            throw ValidationError("unknown field '" + k + "'");
    auto dt = j.find("device_type");
    if (dt == j.end() || !dt->is_string()) throw ValidationError("'device_type' must be a string");
    s.device_type = dt->get<std::string>();
    if (auto k = j.find("kind"); k != j.end()) {
        if (!k->is_string() || (*k != kKindModel && *k != kKindLearned)) throw ValidationError("'kind' must be \"mb\" or \"ml\"");
        s.kind = k->get<std::string>();
    }
    if (auto in = j.find("inputs"); in != j.end()) {
        if (!in->is_object()) throw ValidationError("'inputs' must be an object");
        s.inputs = *in;
    }
    if (auto sd = j.find("seed"); sd != j.end()) {
        if (!sd->is_number_integer() || (!sd->is_number_unsigned() && sd->get<std::int64_t>() < 0))
            throw ValidationError("'seed' must be a non-negative integer");
        s.seed = sd->get<std::uint64_t>();
    }
    if (auto r = j.find("model_ref"); r != j.end()) {
        if (!r->is_string()) throw ValidationError("'model_ref' must be a string");
        s.model_ref = r->get<std::string>();
    }
    if (s.kind == kKindLearned && s.model_ref.empty()) throw ValidationError("learned twins need a 'model_ref'");
    if (s.kind == kKindLearned && !s.inputs.empty()) throw ValidationError("learned twins take no inputs");
    return s;
}

struct FleetRegistry::Twin {
    CreationRecord creation;
    std::mutex mu;
    bool deleted = false;
    std::optional<mbdt::ExecutableDT> mb;
    std::optional<mldt::MlTwin> ml;
    std::string model_digest;  // ml
    std::unique_ptr<Journal> journal;

    std::uint64_t steps() const { return mb ? mb->steps() : ml->steps(); }
    std::string snapshot() const {
        return mb ? mb->snapshot(false) : learned_snapshot(creation.id, creation.model_ref, model_digest, *ml);
    }
};

std::string learned_snapshot(const std::string& id, const std::string& model_ref, const std::string& model_digest,
                             const mldt::MlTwin& twin) {
    Json body{{"format", "hita.ml-twin"},      {"version", 1},       {"id", id}, {"model_ref", model_ref},
              {"model_digest", model_digest}, {"steps", twin.steps()}, {"last_request", twin.last_request()}};
    body["checksum"] = sha256_hex(canonical(body));
    return canonical(body);
}

namespace {

Json verified_learned_snapshot(const std::string& bytes) {
    Json body = Json::parse(bytes, nullptr, false);
    if (body.is_discarded() || !body.is_object() || !body.contains("checksum") || !body["checksum"].is_string())
        throw IntegrityError("learned twin snapshot is not valid");
    const std::string expected = body["checksum"].get<std::string>();
    body.erase("checksum");
    if (sha256_hex(canonical(body)) != expected) throw IntegrityError("learned twin snapshot checksum mismatch");
    if (body.value("format", std::string()) != "hita.ml-twin" || body.value("version", 0) != 1)
        throw IntegrityError("not a learned twin snapshot");
    return body;
}

std::uint64_t id_number(const std::string& id) {
    if (id.rfind("dt-", 0) != 0) return 0;
    return std::strtoull(id.c_str() + 3, nullptr, 10);
}

}  // namespace

FleetRegistry::FleetRegistry(std::optional<std::filesystem::path> root, bool durable) {
    if (root) store_ = std::make_unique<FleetStore>(*root, durable);
}

FleetRegistry::~FleetRegistry() = default;

void FleetRegistry::register_device_type(const std::string& name, mbdt::ModelPtr model) {
    std::unique_lock lock(types_mu_);
    types_[name].model = std::move(model);
}

void FleetRegistry::register_learned_model(const std::string& device_type, const std::string& ref,
                                           std::shared_ptr<const mldt::TrainedModel> model, std::string digest) {
    if (!model) throw ValidationError("learned model '" + ref + "' is empty");
    if (digest.empty()) digest = sha256_hex(mldt::save_model(*model));
    std::unique_lock lock(types_mu_);
    auto it = types_.find(device_type);
    if (it == types_.end()) throw NotFound("unknown device type '" + device_type + "'");
    it->second.learned[ref] = {std::move(model), digest};
}

bool FleetRegistry::has_device_type(const std::string& name) const {
    std::shared_lock lock(types_mu_);
    return types_.count(name) > 0;
}

mbdt::ModelPtr FleetRegistry::device_model(const std::string& name) const {
    std::shared_lock lock(types_mu_);
    auto it = types_.find(name);
    if (it == types_.end()) throw NotFound("unknown device type '" + name + "'");
    return it->second.model;
}

std::shared_ptr<FleetRegistry::Twin> FleetRegistry::build(const CreationRecord& rec) const {
    auto t = std::make_shared<Twin>();
    t->creation = rec;
    std::shared_lock lock(types_mu_);
    auto it = types_.find(rec.device_type);
    if (it == types_.end()) throw NotFound("unknown device type '" + rec.device_type + "'");
    if (rec.kind == kKindModel) {
        if (!it->second.model) throw ValidationError("device type '" + rec.device_type + "' has no behaviour model");
        t->mb = mbdt::make_executable(mbdt::instantiate(it->second.model, rec.inputs, rec.created_at), rec.seed, rec.id);
    } else {
        auto m = it->second.learned.find(rec.model_ref);
        if (m == it->second.learned.end()) throw NotFound("unknown learned model '" + rec.model_ref + "'");
        t->ml.emplace(m->second.first);
        t->model_digest = m->second.second;
    }
    return t;
}

std::vector<std::string> FleetRegistry::create(const CreateSpec& spec, std::size_t count) {
    if (count == 0) throw ValidationError("count must be at least 1");
    if (spec.kind != kKindModel && spec.kind != kKindLearned) throw ValidationError("unknown twin kind '" + spec.kind + "'");
    std::vector<std::shared_ptr<Twin>> built;
    std::vector<CreationRecord> records;
    built.reserve(count);
    records.reserve(count);
    const vtime::Millis now = clock();
    for (std::size_t i = 0; i < count; ++i) {
        CreationRecord rec{mbdt::next_twin_id(), spec.kind, spec.device_type, spec.model_ref, spec.inputs, spec.seed, now};
        built.push_back(build(rec));
        records.push_back(std::move(rec));
    }
    if (store_) store_->record_creations(records);
    std::vector<std::string> ids;
    ids.reserve(count);
    std::unique_lock lock(mu_);
    for (auto& t : built) {
        ids.push_back(t->creation.id);
        twins_[t->creation.id] = std::move(t);
    }
    return ids;
}

std::shared_ptr<FleetRegistry::Twin> FleetRegistry::find(const std::string& id) const {
    std::shared_lock lock(mu_);
    auto it = twins_.find(id);
    if (it == twins_.end()) throw NotFound("unknown twin '" + id + "'");
    return it->second;
}

void FleetRegistry::advance_clock(vtime::Millis t) {
    vtime::Millis cur = clock_.load();
    while (t > cur && !clock_.compare_exchange_weak(cur, t)) {
    }
}

void FleetRegistry::persist_step(Twin& t) {
    if (!store_) return;
    if (t.mb && !t.journal) t.journal = store_->open_journal(t.creation.id);
    if (t.mb) t.journal->append(canonical(mbdt::to_json(t.mb->event_log().back())));
    store_->write_snapshot(t.creation.id, t.snapshot());
}

RoutedResponse FleetRegistry::route(const std::string& id, DeviceRequest req, bool has_virtual_now) {
    auto t = find(id);
    if (has_virtual_now) advance_clock(req.virtual_now);
    else req.virtual_now = clock();
    std::lock_guard lock(t->mu);
    if (t->deleted) throw NotFound("unknown twin '" + id + "'");
    RoutedResponse out;
    out.response = t->mb ? t->mb->step(req, req.virtual_now) : t->ml->step(req);
    persist_step(*t);
    out.state_digest = sha256_hex(t->snapshot());
    out.steps = t->steps();
    return out;
}

Json FleetRegistry::state(const std::string& id) const {
    auto t = find(id);
    std::lock_guard lock(t->mu);
    if (t->deleted) throw NotFound("unknown twin '" + id + "'");
    const std::string snap = t->snapshot();
    Json doc{{"id", id},
             {"kind", t->creation.kind},
             {"device_type", t->creation.device_type},
             {"created_at", t->creation.created_at},
             {"steps", t->steps()},
             {"state_digest", sha256_hex(snap)}};
    if (t->mb) {
        const Json body = Json::parse(snap);
        doc["current_state"] = t->mb->current_state();
        doc["values"] = body.at("values");
        doc["plan"] = body.at("plan");
        doc["log_length"] = t->mb->event_log().size();
    } else {
        doc["model_ref"] = t->creation.model_ref;
        doc["last_request"] = t->ml->last_request();
    }
    return doc;
}

std::vector<TwinInfo> FleetRegistry::list() const {
    std::vector<std::shared_ptr<Twin>> all;
    {
        std::shared_lock lock(mu_);
        for (const auto& [id, t] : twins_) all.push_back(t);
    }
    std::vector<TwinInfo> out;
    for (const auto& t : all) {
        std::lock_guard lock(t->mu);
        if (t->deleted) continue;
        out.push_back({t->creation.id, t->creation.kind, t->creation.device_type, t->creation.created_at, t->steps()});
    }
    return out;
}

void FleetRegistry::remove(const std::string& id) {
    std::shared_ptr<Twin> t;
    {
        std::unique_lock lock(mu_);
        auto it = twins_.find(id);
        if (it == twins_.end()) throw NotFound("unknown twin '" + id + "'");
        t = it->second;
        twins_.erase(it);
    }
    std::lock_guard lock(t->mu);
    t->deleted = true;
    t->journal.reset();
    if (store_) store_->record_deletion(id);
}

std::size_t FleetRegistry::size() const {
    std::shared_lock lock(mu_);
    return twins_.size();
}

std::vector<QuarantineEntry> FleetRegistry::quarantined() const { return store_ ? store_->quarantined() : std::vector<QuarantineEntry>{}; }

RecoveryReport FleetRegistry::recover() {
    RecoveryReport report;
    if (!store_) return report;
    std::uint64_t max_id = 0;
    vtime::Millis clock = 0;
    for (auto& stored : store_->load()) {
        const CreationRecord& rec = stored.creation;
        max_id = std::max(max_id, id_number(rec.id));
        try {
            auto t = build(rec);
            std::size_t keep = 0;
            if (stored.snapshot && t->mb) {
                const Json body = Json::parse(*stored.snapshot, nullptr, false);
                if (body.is_discarded() || !body.is_object() || !body.contains("log_length") || !body["log_length"].is_number_unsigned())
                    throw IntegrityError("snapshot is not valid");
                keep = body["log_length"].get<std::size_t>();
                if (stored.journal.size() < keep) throw IntegrityError("step journal is shorter than the snapshot");
                std::vector<mbdt::EventRecord> log;
                log.reserve(keep);
                for (std::size_t i = 0; i < keep; ++i) {
                    Json e = Json::parse(stored.journal[i], nullptr, false);
                    if (e.is_discarded()) throw IntegrityError("step journal line " + std::to_string(i + 1) + " is not valid JSON");
                    log.push_back(mbdt::event_from_json(e));
                }
                auto dt = mbdt::ExecutableDT::restore(*stored.snapshot, t->mb->instance().model, std::move(log));
                if (dt.id() != rec.id) throw IntegrityError("snapshot belongs to twin '" + dt.id() + "'");
                if (!dt.event_log().empty()) clock = std::max(clock, dt.event_log().back().at);
                t->mb = std::move(dt);
            } else if (stored.snapshot) {
                const Json body = verified_learned_snapshot(*stored.snapshot);
                if (body.value("id", std::string()) != rec.id) throw IntegrityError("snapshot belongs to another twin");
                if (body.value("model_digest", std::string()) != t->model_digest)
                    throw IntegrityError("snapshot was taken with a different learned model");
                const auto last = body.at("last_request").get<vtime::Millis>();
                t->ml.emplace(t->ml->model_ptr(), last, body.at("steps").get<std::uint64_t>());
                clock = std::max(clock, last);
            }
            if (stored.journal.size() != keep) store_->truncate_journal(rec.id, keep);
            clock = std::max(clock, rec.created_at);
            report.recovered.push_back(rec.id);
            std::unique_lock lock(mu_);
            twins_[rec.id] = std::move(t);
        } catch (const std::exception& e) {
            store_->quarantine(rec.id, e.what());
            report.quarantined.push_back({rec.id, e.what()});
        }
    }
    mbdt::reserve_twin_ids(max_id);
    advance_clock(clock);
    return report;
}

}  // namespace hita::server
