#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hita/common/json.hpp"
#include "hita/common/wire.hpp"
#include "hita/harness/generator.hpp"

namespace hita::harness {

inline constexpr vtime::Millis kCampaignStart = 1709280000000;  // 2024-03-01T08:00:00Z

struct TargetSpec {
    std::string name;
    std::string kind;  // "http" (url + path) or an in-process kind resolved by the caller
    std::string url;   // e.g. http://127.0.0.1:8080
    std::string path;  // e.g. /dts/dt-000001/requests
    std::string api_key;
    bool operator==(const TargetSpec&) const = default;
};

struct CampaignConfig {
    std::uint64_t seed = 42;
    std::uint64_t requests = 0;          // used when > 0
    vtime::Millis duration = 0;          // otherwise requests = duration * rate / minute
    double rate_per_minute = 100;
    vtime::Millis start = kCampaignStart;
    vtime::Millis tick_interval = vtime::kMinute;  // 0 disables ticks
    int roll_capacity = 28;                        // generator hint
    GeneratorConfig generator;
    std::vector<TargetSpec> targets;
    std::string reference = "ref";  // target whose stream becomes the trace

    void validate() const;
    std::uint64_t request_count() const;
    // Virtual time of the i-th generated request (0-based); exactly rate requests per minute.
    vtime::Millis request_time(std::uint64_t i) const;
};

CampaignConfig campaign_config_from_json(const Json& j);
Json to_json(const CampaignConfig& c);

struct TargetReply {
    std::optional<DeviceResponse> response;
    int http_status = 200;
    bool unreachable = false;
    std::string error;
};

class Target {
public:
    virtual ~Target() = default;
    virtual const std::string& name() const = 0;
    virtual TargetReply send(const DeviceRequest& req) = 0;
};

// A pre-materialised stream: generated requests and ticks in delivery order.
struct ScheduledRequest {
    std::uint64_t seq = 0;    // position in the delivered stream
    bool tick = false;
    std::uint64_t index = 0;  // generated-request index, or tick index
    DeviceRequest request;
};

std::vector<ScheduledRequest> build_schedule(const CampaignConfig& cfg, const std::vector<model::EndpointDef>& api);

struct PairedRecord {
    ScheduledRequest item;
    std::vector<TargetReply> replies;  // one per target, campaign target order
};

struct PairedResponses {
    std::vector<std::string> targets;
    std::vector<PairedRecord> records;
    std::vector<std::string> request_digests;  // SHA-256 over the bytes each target was sent
    std::uint64_t generated = 0;
    std::uint64_t ticks = 0;
    bool aborted = false;
    std::string abort_reason;
    std::uint64_t seed = 0;

    std::optional<std::size_t> target_index(const std::string& name) const;
};

struct TraceRecord {
    std::uint64_t seq = 0;
    DeviceRequest request;
    DeviceResponse response;
    vtime::Millis since_previous = -1;  // virtual ms since the previous generated request, -1 for the first
};

Json to_json(const TraceRecord& r);
TraceRecord trace_record_from_json(const Json& j);

struct CampaignResult {
    PairedResponses paired;
    std::vector<TraceRecord> trace;  // reference stream, generated requests only
};

// Runs one pipeline per target; pairing is by sequence number. A target answering
// 429 gets its pair marked and the campaign goes on; an unreachable target aborts
// the campaign, keeping what was paired so far.
CampaignResult run_campaign(const CampaignConfig& cfg, const std::vector<model::EndpointDef>& api,
                            std::vector<std::unique_ptr<Target>>& targets);

// Same, over an explicit schedule.
CampaignResult run_schedule(const CampaignConfig& cfg, const std::vector<ScheduledRequest>& schedule,
                            std::vector<std::unique_ptr<Target>>& targets);

std::vector<TraceRecord> trace_from(const PairedResponses& paired, std::size_t target);

// JSON-lines persistence.
std::string paired_to_jsonl(const PairedResponses& p);
std::string trace_to_jsonl(const std::vector<TraceRecord>& t);
std::vector<TraceRecord> trace_from_jsonl(const std::string& text);

}  // namespace hita::harness
