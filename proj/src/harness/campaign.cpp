#include "hita/harness/campaign.hpp"

#include <atomic>
#include <cmath>
#include <sstream>
#include <thread>

#include "hita/common/digest.hpp"
#include "hita/common/errors.hpp"

namespace hita::harness {

void CampaignConfig::validate() const {
    if (!(rate_per_minute > 0)) throw ValidationError("campaign rate must be positive");
    if (requests == 0 && duration <= 0) throw ValidationError("campaign needs a request count or a duration");
    if (tick_interval < 0) throw ValidationError("tick interval must be non-negative");
    if (roll_capacity <= 0) throw ValidationError("roll capacity hint must be positive");
}

std::uint64_t CampaignConfig::request_count() const {
    if (requests > 0) return requests;
    return static_cast<std::uint64_t>(std::floor(static_cast<double>(duration) * rate_per_minute / vtime::kMinute));
}

vtime::Millis CampaignConfig::request_time(std::uint64_t i) const {
    return start + static_cast<vtime::Millis>(std::floor(static_cast<double>(i) * vtime::kMinute / rate_per_minute));
}

namespace {

vtime::Millis duration_field(const Json& j, const char* key, vtime::Millis fallback) {
    auto it = j.find(key);
    if (it == j.end()) return fallback;
    if (it->is_number_integer()) return it->get<vtime::Millis>();
    if (it->is_string())
        if (auto d = vtime::parse_duration(it->get<std::string>())) return *d;
    throw ValidationError(std::string("campaign: bad duration '") + key + "'");
}

}  // namespace

CampaignConfig campaign_config_from_json(const Json& j) {
    if (!j.is_object()) throw ValidationError("campaign config must be an object");
    CampaignConfig c;
    try {
        c.seed = j.value("seed", c.seed);
        c.requests = j.value("requests", c.requests);
        c.duration = duration_field(j, "duration", 0);
        c.rate_per_minute = j.value("rate_per_minute", c.rate_per_minute);
        if (auto s = j.find("start"); s != j.end()) {
            auto t = vtime::parse_datetime(s->get<std::string>());
            if (!t) throw ValidationError("campaign: bad start time");
            c.start = *t;
        }
        c.tick_interval = duration_field(j, "tick_interval", c.tick_interval);
        c.roll_capacity = j.value("roll_capacity", c.roll_capacity);
        if (auto g = j.find("generator"); g != j.end()) c.generator = generator_config_from_json(*g);
        c.reference = j.value("reference", c.reference);
        if (auto ts = j.find("targets"); ts != j.end()) {
            for (const auto& t : *ts) {
                TargetSpec s;
                s.name = t.at("name").get<std::string>();
                s.kind = t.value("kind", std::string("http"));
                s.url = t.value("url", std::string());
                s.path = t.value("path", std::string());
                s.api_key = t.value("api_key", std::string());
                c.targets.push_back(std::move(s));
            }
        }
    } catch (const Json::exception& e) {
        throw ValidationError(std::string("campaign config: ") + e.what());
    }
    c.validate();
    return c;
}

Json to_json(const CampaignConfig& c) {
    Json targets = Json::array();
    for (const auto& t : c.targets)
        targets.push_back({{"name", t.name}, {"kind", t.kind}, {"url", t.url}, {"path", t.path}, {"api_key", t.api_key}});
    Json j{{"seed", c.seed},
           {"rate_per_minute", c.rate_per_minute},
           {"start", vtime::format_datetime(c.start)},
           {"tick_interval", c.tick_interval},
           {"roll_capacity", c.roll_capacity},
           {"generator", to_json(c.generator)},
           {"targets", targets},
           {"reference", c.reference}};
    if (c.requests > 0) j["requests"] = c.requests;
    else j["duration"] = c.duration;
    return j;
}

std::vector<ScheduledRequest> build_schedule(const CampaignConfig& cfg, const std::vector<model::EndpointDef>& api) {
    cfg.validate();
    RequestGenerator gen(api, cfg.generator);
    Rng rng(cfg.seed);
    const std::uint64_t n = cfg.request_count();
    std::vector<ScheduledRequest> out;
    out.reserve(n + n / 50 + 4);
    std::uint64_t tick = 0;
    auto next_tick_time = [&] { return cfg.start + static_cast<vtime::Millis>(tick + 1) * cfg.tick_interval; };
    for (std::uint64_t i = 0; i < n; ++i) {
        const vtime::Millis t = cfg.request_time(i);
        while (cfg.tick_interval > 0 && next_tick_time() <= t) {
            ScheduledRequest s;
            s.seq = out.size();
            s.tick = true;
            s.index = tick;
            s.request = DeviceRequest{kTickOperation, Json::object(), next_tick_time()};
            out.push_back(std::move(s));
            ++tick;
        }
        ScheduledRequest s;
        s.seq = out.size();
        s.index = i;
        s.request = gen.next(rng, StateHints{t, cfg.roll_capacity});
        out.push_back(std::move(s));
    }
    return out;
}

std::optional<std::size_t> PairedResponses::target_index(const std::string& name) const {
    for (std::size_t i = 0; i < targets.size(); ++i)
        if (targets[i] == name) return i;
    return std::nullopt;
}

CampaignResult run_campaign(const CampaignConfig& cfg, const std::vector<model::EndpointDef>& api,
                            std::vector<std::unique_ptr<Target>>& targets) {
    return run_schedule(cfg, build_schedule(cfg, api), targets);
}

CampaignResult run_schedule(const CampaignConfig& cfg, const std::vector<ScheduledRequest>& schedule,
                            std::vector<std::unique_ptr<Target>>& targets) {
    if (targets.empty()) throw ValidationError("campaign needs at least one target");
    const std::size_t nt = targets.size();
    std::vector<std::vector<TargetReply>> replies(nt);
    std::vector<std::string> digests(nt);
    std::vector<std::string> reasons(nt);
    std::atomic<bool> abort{false};

    auto pipeline = [&](std::size_t k) {
        Sha256 digest;
        auto& out = replies[k];
        out.reserve(schedule.size());
        for (const auto& item : schedule) {
            if (abort.load(std::memory_order_relaxed)) break;
            digest.update(canonical(to_json(item.request)));
            digest.update("\n");
            TargetReply r = targets[k]->send(item.request);
            if (r.unreachable) {
                reasons[k] = targets[k]->name() + " unreachable: " + r.error;
                abort = true;
                break;
            }
            out.push_back(std::move(r));
        }
        digests[k] = digest.hex();
    };

    if (nt == 1) {
        pipeline(0);
    } else {
        std::vector<std::thread> threads;
        for (std::size_t k = 0; k < nt; ++k) threads.emplace_back(pipeline, k);
        for (auto& t : threads) t.join();
    }

    CampaignResult result;
    auto& p = result.paired;
    p.seed = cfg.seed;
    for (const auto& t : targets) p.targets.push_back(t->name());
    p.request_digests = digests;
    std::size_t complete = schedule.size();
    for (const auto& r : replies) complete = std::min(complete, r.size());
    p.aborted = abort.load();
    for (const auto& r : reasons)
        if (!r.empty()) p.abort_reason += (p.abort_reason.empty() ? "" : "; ") + r;
    p.records.reserve(complete);
    for (std::size_t i = 0; i < complete; ++i) {
        PairedRecord rec;
        rec.item = schedule[i];
        for (std::size_t k = 0; k < nt; ++k) rec.replies.push_back(std::move(replies[k][i]));
        if (rec.item.tick) ++p.ticks;
        else ++p.generated;
        p.records.push_back(std::move(rec));
    }
    if (auto ref = p.target_index(cfg.reference)) result.trace = trace_from(p, *ref);
    return result;
}

std::vector<TraceRecord> trace_from(const PairedResponses& paired, std::size_t target) {
    std::vector<TraceRecord> out;
    vtime::Millis prev = -1;
    for (const auto& rec : paired.records) {
        if (rec.item.tick) continue;
        const auto& reply = rec.replies.at(target);
        const vtime::Millis now = rec.item.request.virtual_now;
        if (reply.response) {
            TraceRecord t;
            t.seq = rec.item.seq;
            t.request = rec.item.request;
            t.response = *reply.response;
            t.since_previous = prev < 0 ? -1 : now - prev;
            out.push_back(std::move(t));
        }
        prev = now;
    }
    return out;
}

Json to_json(const TraceRecord& r) {
    return Json{{"seq", r.seq}, {"request", to_json(r.request)}, {"response", to_json(r.response)}, {"since_previous_ms", r.since_previous}};
}

TraceRecord trace_record_from_json(const Json& j) {
    try {
        TraceRecord r;
        r.seq = j.at("seq").get<std::uint64_t>();
        r.request = request_from_json(j.at("request"));
        r.response = response_from_json(j.at("response"));
        r.since_previous = j.value("since_previous_ms", vtime::Millis{-1});
        return r;
    } catch (const Json::exception& e) {
        throw ValidationError(std::string("trace record: ") + e.what());
    }
}

std::string paired_to_jsonl(const PairedResponses& p) {
    std::ostringstream out;
    Json meta{{"kind", "campaign"},
              {"seed", p.seed},
              {"targets", p.targets},
              {"request_digests", p.request_digests},
              {"generated", p.generated},
              {"ticks", p.ticks},
              {"aborted", p.aborted}};
    if (p.aborted) meta["abort_reason"] = p.abort_reason;
    out << canonical(meta) << '\n';
    for (const auto& rec : p.records) {
        Json responses = Json::object();
        Json status = Json::object();
        for (std::size_t k = 0; k < p.targets.size(); ++k) {
            const auto& r = rec.replies[k];
            responses[p.targets[k]] = r.response ? to_json(*r.response) : Json(nullptr);
            status[p.targets[k]] = r.http_status;
        }
        out << canonical(Json{{"seq", rec.item.seq},
                              {"tick", rec.item.tick},
                              {"request", to_json(rec.item.request)},
                              {"responses", responses},
                              {"http_status", status}})
            << '\n';
    }
    return out.str();
}

std::string trace_to_jsonl(const std::vector<TraceRecord>& t) {
    std::string out;
    for (const auto& r : t) out += canonical(to_json(r)) + '\n';
    return out;
}

std::vector<TraceRecord> trace_from_jsonl(const std::string& text) {
    std::vector<TraceRecord> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        Json j = Json::parse(line, nullptr, false);
        if (j.is_discarded()) throw ValidationError("trace: line " + std::to_string(out.size() + 1) + " is not JSON");
        out.push_back(trace_record_from_json(j));
    }
    return out;
}

}  // namespace hita::harness
