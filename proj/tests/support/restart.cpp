#include "restart.hpp"

#include <httplib.h>

#include <atomic>
#include <csignal>
#include <fstream>
#include <regex>
#include <thread>

#include "hita/common/rng.hpp"
#include "hita/harness/campaign.hpp"
#include "process.hpp"
#include "support.hpp"

namespace hita::test {

namespace fs = std::filesystem;

namespace {

constexpr const char* kKey = "restart-key";

struct Server {
    std::unique_ptr<Process> proc;
    int port = 0;
    std::size_t recovered = 0;
};

fs::path write_config(const fs::path& dir) {
    fs::create_directories(dir);
    const Json cfg{{"listen", {{"host", "127.0.0.1"}, {"port", 0}}},
                   {"persistence_root", (dir / "var").string()},
                   {"durable", true},
                   {"api_keys", {kKey}},
                   {"rate_limit_per_minute", 0},
                   {"threads", 8},
                   {"device_types", {{"medido", {{"model", HITA_MODEL_FILE}}}}}};
    std::ofstream(dir / "server.json") << cfg.dump(2);
    return dir / "server.json";
}

Server start(const fs::path& config) {
    Server s;
    s.proc = std::make_unique<Process>(std::vector<std::string>{HITA_CLI, "--config", config.string(), "serve", "dt", "--port", "0"});
    const auto line = s.proc->read_line(std::chrono::seconds(30));
    static const std::regex re(R"(dt-server listening on [^:]+:(\d+) \((\d+) twins recovered\))");
    std::smatch m;
    if (!line || !std::regex_search(*line, m, re)) throw std::runtime_error("dt-server did not start: " + line.value_or("<no output>"));
    s.port = std::stoi(m[1]);
    s.recovered = std::stoul(m[2]);
    return s;
}

httplib::Client client(int port) {
    httplib::Client c("127.0.0.1", port);
    c.set_default_headers({{"X-API-Key", kKey}});
    c.set_read_timeout(10, 0);
    return c;
}

std::optional<Json> post(httplib::Client& c, const std::string& path, const Json& body) {
    auto r = c.Post(path, body.dump(), "application/json");
    if (!r || r->status >= 300) return std::nullopt;
    return Json::parse(r->body);
}

Json state(httplib::Client& c, const std::string& id) {
    auto r = c.Get("/dts/" + id + "/state");
    if (!r || r->status != 200) return nullptr;
    return Json::parse(r->body);
}

}  // namespace

KillRestartOutcome kill_and_restart(const fs::path& work, std::uint64_t seed, std::size_t twins, std::size_t requests_per_twin) {
    KillRestartOutcome out;
    out.twins = twins;
    auto fail = [&](std::string why) { out.failures.push_back(std::move(why)); };

    const auto subject_cfg = write_config(work / "subject");
    const auto control_cfg = write_config(work / "control");
    Server subject = start(subject_cfg);
    Server control = start(control_cfg);
    auto sc = client(subject.port);
    auto cc = client(control.port);

    Rng rng(seed);
    std::vector<std::string> ids;
    std::vector<std::vector<Json>> streams;
    for (std::size_t k = 0; k < twins; ++k) {
        const Json spec{{"device_type", "medido"}, {"seed", rng.next() >> 1}};
        const auto a = post(sc, "/dts", spec);
        const auto b = post(cc, "/dts", spec);
        if (!a || !b) throw std::runtime_error("twin creation failed");
        ids.push_back(a->at("id").get<std::string>());
        if (b->at("id") != a->at("id")) fail("control and subject assigned different ids");
        std::vector<Json> s;
        for (auto& x : harness::build_schedule(small_campaign(rng.next(), requests_per_twin), medido()->api)) s.push_back(to_json(x.request));
        streams.push_back(std::move(s));
    }

    // Interleaved prefix, acknowledged by both servers.
    std::vector<std::size_t> sent(twins, 0);
    const std::size_t prefix = requests_per_twin / 2;
    for (std::size_t i = 0; i < prefix; ++i)
        for (std::size_t k = 0; k < twins; ++k) {
            const std::string path = "/dts/" + ids[k] + "/requests";
            const auto a = post(sc, path, streams[k][i]);
            const auto b = post(cc, path, streams[k][i]);
            if (!a || !b) throw std::runtime_error("request failed before the kill");
            if (*a != *b) fail("subject and control disagree before the kill");
            ++sent[k];
            ++out.acknowledged;
        }

    // Keep twin 0 busy from a second connection and kill mid-stream.
    std::atomic<std::size_t> acked_during{0};
    std::atomic<bool> stop{false};
    std::thread hammer([&] {
        auto c = client(subject.port);
        for (std::size_t i = prefix; i < streams[0].size() && !stop; ++i) {
            if (!post(c, "/dts/" + ids[0] + "/requests", streams[0][i])) break;
            acked_during.fetch_add(1);
        }
    });
    while (acked_during.load() < std::min<std::size_t>(5, requests_per_twin - prefix)) std::this_thread::yield();
    subject.proc->signal(SIGKILL);
    subject.proc->wait();
    stop = true;
    hammer.join();
    const std::size_t acked0 = acked_during.load();
    out.acknowledged += acked0;

    Server restarted = start(subject_cfg);
    out.recovered = restarted.recovered;
    if (restarted.recovered != twins) fail("restart recovered " + std::to_string(restarted.recovered) + " of " + std::to_string(twins) + " twins");
    auto rc = client(restarted.port);

    // Twin 0 may also hold the request that was in flight when the process died.
    const Json st0 = state(rc, ids[0]);
    if (st0.is_null()) {
        fail("twin 0 missing after restart");
    } else {
        const auto steps = st0.at("steps").get<std::size_t>();
        if (steps < prefix + acked0 || steps > prefix + acked0 + 1)
            fail("twin 0 recovered " + std::to_string(steps) + " steps, acknowledged " + std::to_string(prefix + acked0));
        for (; sent[0] < steps; ++sent[0]) post(cc, "/dts/" + ids[0] + "/requests", streams[0][sent[0]]);
    }

    for (std::size_t k = 0; k < twins; ++k) {
        const Json a = state(rc, ids[k]);
        const Json b = state(cc, ids[k]);
        if (a.is_null() || a != b) fail("twin " + ids[k] + " recovered to a different state than the control");
    }
    for (std::size_t k = 0; k < twins; ++k)
        for (std::size_t i = sent[k]; i < streams[k].size(); ++i) {
            const std::string path = "/dts/" + ids[k] + "/requests";
            const auto a = post(rc, path, streams[k][i]);
            const auto b = post(cc, path, streams[k][i]);
            ++out.suffix;
            if (!a || !b || *a != *b) {
                fail("twin " + ids[k] + " diverged from the control at request " + std::to_string(i));
                break;
            }
        }
    restarted.proc->signal(SIGTERM);
    control.proc->signal(SIGTERM);
    if (restarted.proc->wait() != 0) fail("restarted server did not exit cleanly");
    control.proc->wait();
    return out;
}

}  // namespace hita::test
