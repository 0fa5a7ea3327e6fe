#include <httplib.h>

#include "hita/harness/targets.hpp"

namespace hita::harness {

struct HttpTarget::Impl {
    explicit Impl(const std::string& url) : client(url) {
        client.set_keep_alive(true);
        client.set_connection_timeout(5);
        client.set_read_timeout(30);
    }
    httplib::Client client;
};

HttpTarget::HttpTarget(TargetSpec spec) : spec_(std::move(spec)), impl_(std::make_unique<Impl>(spec_.url)) {}

HttpTarget::~HttpTarget() = default;

TargetReply HttpTarget::send(const DeviceRequest& req) {
    httplib::Headers headers;
    if (!spec_.api_key.empty()) headers.emplace("X-API-Key", spec_.api_key);
    auto res = impl_->client.Post(spec_.path, headers, canonical(to_json(req)), "application/json");
    TargetReply reply;
    if (!res) {
        reply.unreachable = true;
        reply.http_status = 0;
        reply.error = httplib::to_string(res.error());
        return reply;
    }
    reply.http_status = res->status;
    if (res->status != 200) {
        reply.error = res->body;
        return reply;
    }
    Json body = Json::parse(res->body, nullptr, false);
    if (body.is_discarded()) {
        reply.error = "response is not JSON";
        return reply;
    }
    body.erase("twin");
    try {
        reply.response = response_from_json(body);
    } catch (const std::exception& e) {
        reply.error = e.what();
    }
    return reply;
}

}  // namespace hita::harness
