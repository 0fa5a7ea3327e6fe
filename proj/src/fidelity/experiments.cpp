#include "hita/fidelity/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <numeric>
#include <set>

#include "../common/http_util.hpp"
#include "hita/common/digest.hpp"
#include "hita/harness/targets.hpp"
#include "hita/mldt/dataset.hpp"
#include "hita/mldt/target.hpp"
#include "hita/model/parser.hpp"
#include "hita/server/registry.hpp"
#include "hita/server/store.hpp"

namespace hita::fidelity {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) { return std::chrono::duration<double, std::milli>(Clock::now() - t0).count(); }

refdev::RefDeviceConfig with_divergence(refdev::RefDeviceConfig c, double p) {
    c.divergence.p = p;
    c.divergence.kind = refdev::DivergenceKind::Flip;
    return c;
}

harness::CampaignResult campaign_against(const harness::CampaignConfig& base, const model::DeviceModel& m,
                                         std::unique_ptr<harness::Target> twin, const refdev::RefDeviceConfig& ref) {
    harness::CampaignConfig cfg = base;
    cfg.reference = "ref";
    cfg.roll_capacity = ref.roll_capacity;
    std::vector<std::unique_ptr<harness::Target>> targets;
    targets.push_back(std::move(twin));
    targets.push_back(std::make_unique<harness::RefDeviceTarget>("ref", ref));
    return harness::run_campaign(cfg, m.api, targets);
}

double agreement_of(const FidelityReport& r) { return r.n ? static_cast<double>(r.outcome_agreements) / static_cast<double>(r.n) : 0.0; }

Json to_json(const FidelityArm& a) {
    return Json{{"kind", a.kind},
                {"baseline_agreement", a.baseline_agreement},
                {"divergence", a.divergence},
                {"target", a.target},
                {"expected_similarity", a.expected_similarity},
                {"report", fidelity::to_json(a.report)}};
}

}  // namespace

// ---- calibrated fidelity ------------------------------------------------------------------

CalibratedFidelityConfig::CalibratedFidelityConfig() { campaign.requests = 12000; }

double heldout_accuracy(const mldt::TrainedModel& m, const std::vector<harness::TraceRecord>& trace, std::size_t from) {
    std::size_t hit = 0, n = 0;
    for (std::size_t i = from; i < trace.size(); ++i) {
        ++n;
        hit += mldt::infer(m, trace[i].request, trace[i].since_previous).status == trace[i].response.status;
    }
    return n ? static_cast<double>(hit) / static_cast<double>(n) : 0.0;
}

CalibratedFidelityResult run_calibrated_fidelity(const mbdt::ModelPtr& model, const CalibratedFidelityConfig& cfg) {
    if (!model) throw ValidationError("fidelity experiment needs a device model");
    cfg.campaign.validate();
    const auto enc = ResponseEncoder::for_model(*model);
    const std::size_t classes = refdev::kOutcomeClasses.size();
    const auto clean = with_divergence(cfg.reference, 0.0);
    CalibratedFidelityResult out;

    auto fresh_mbdt = [&] {
        return std::make_unique<harness::MbdtTarget>("mbdt", mbdt::make_executable(mbdt::instantiate(model, Json::object(), cfg.campaign.start),
                                                                                  cfg.campaign.seed, "calibration-mbdt"));
    };

    auto base = campaign_against(cfg.campaign, *model, fresh_mbdt(), clean);
    if (base.paired.aborted) throw std::runtime_error("baseline campaign aborted: " + base.paired.abort_reason);
    out.trace = base.trace;
    out.mbdt.kind = "mbdt";
    out.mbdt.baseline_agreement = agreement_of(evaluate_fidelity(base.paired, "mbdt", "ref", enc));

    if (out.trace.size() <= cfg.train_records) throw ValidationError("campaign too short for the training split");
    std::vector<harness::TraceRecord> train(out.trace.begin(), out.trace.begin() + static_cast<std::ptrdiff_t>(cfg.train_records));
    const auto fm = mldt::preprocess(train, model->outcomes);
    out.preprocess = fm.report;
    auto trained = std::make_shared<const mldt::TrainedModel>(mldt::train(fm, cfg.training));
    out.model = trained;
    out.training = trained->report;
    out.heldout_rows = out.trace.size() - cfg.train_records;
    out.heldout_accuracy = heldout_accuracy(*trained, out.trace, cfg.train_records);

    auto ml_base = campaign_against(cfg.campaign, *model, std::make_unique<mldt::MlTwinTarget>("mldt", trained), clean);
    out.mldt.kind = "mldt";
    out.mldt.baseline_agreement = agreement_of(evaluate_fidelity(ml_base.paired, "mldt", "ref", enc));

    for (FidelityArm* arm : {&out.mbdt, &out.mldt}) {
        arm->target = arm == &out.mbdt ? cfg.mbdt_target : cfg.mldt_target;
        arm->divergence = divergence_for_target(arm->baseline_agreement, arm->target, classes);
        arm->expected_similarity = expected_similarity(arm->baseline_agreement, arm->divergence, classes);
    }
    auto mb_run = campaign_against(cfg.campaign, *model, fresh_mbdt(), with_divergence(cfg.reference, out.mbdt.divergence));
    out.mbdt.report = evaluate_fidelity(mb_run.paired, "mbdt", "ref", enc);
    auto ml_run = campaign_against(cfg.campaign, *model, std::make_unique<mldt::MlTwinTarget>("mldt", trained),
                                   with_divergence(cfg.reference, out.mldt.divergence));
    out.mldt.report = evaluate_fidelity(ml_run.paired, "mldt", "ref", enc);
    return out;
}

Json to_json(const CalibratedFidelityResult& r) {
    return Json{{"mbdt", to_json(r.mbdt)},
                {"mldt", to_json(r.mldt)},
                {"training",
                 {{"initial_loss", r.training.initial_loss},
                  {"final_loss", r.training.final_loss},
                  {"final_accuracy", r.training.final_accuracy},
                  {"rows", r.training.rows},
                  {"epochs", r.training.epoch_loss.size()}}},
                {"preprocess",
                 {{"input_rows", r.preprocess.input_rows},
                  {"dropped_missing_categorical", r.preprocess.dropped_missing_categorical},
                  {"dropped_outliers", r.preprocess.dropped_outliers},
                  {"imputed_values", r.preprocess.imputed_values}}},
                {"heldout_accuracy", r.heldout_accuracy},
                {"heldout_rows", r.heldout_rows}};
}

// ---- scalability ------------------------------------------------------------------

ScalabilityConfig::ScalabilityConfig() { campaign.requests = 600; }

void ScalabilityConfig::validate() const {
    if (batch_sizes.empty()) throw ValidationError("at least one batch size is required");
    for (std::size_t i = 0; i < batch_sizes.size(); ++i) {
        if (batch_sizes[i] == 0) throw ValidationError("batch sizes must be positive");
        if (i > 0 && batch_sizes[i] <= batch_sizes[i - 1]) throw ValidationError("batch sizes must be strictly increasing");
    }
    if (url.empty()) throw ValidationError("scalability needs a dt-server URL");
    campaign.validate();
    reference.validate();
}

bool ScalabilityReport::all_completed() const {
    return !batches.empty() && std::all_of(batches.begin(), batches.end(), [](const BatchResult& b) { return b.completed; });
}

bool ScalabilityReport::isolation_ok() const {
    return !batches.empty() && std::all_of(batches.begin(), batches.end(), [](const BatchResult& b) { return b.isolation_ok; });
}

double ScalabilityReport::median_spread() const {
    double lo = 1e300, hi = -1e300;
    for (const auto& b : batches) {
        if (!b.completed) continue;
        lo = std::min(lo, b.summary.median);
        hi = std::max(hi, b.summary.median);
    }
    return hi >= lo ? hi - lo : 0.0;
}

namespace {

struct Admin {
    httplib::Client client;
    httplib::Headers headers;

    Admin(const std::string& url, const std::string& key) : client(url) {
        client.set_connection_timeout(5);
        client.set_read_timeout(120);
        headers = {{"X-API-Key", key}};
    }

    Json call(const char* method, const std::string& path, const Json* body, int expect) {
        httplib::Result r = std::string(method) == "POST" ? client.Post(path, headers, body->dump(), "application/json")
                            : std::string(method) == "DELETE" ? client.Delete(path, headers)
                                                              : client.Get(path, headers);
        if (!r) throw std::runtime_error(std::string(method) + " " + path + ": " + httplib::to_string(r.error()));
        if (r->status != expect) throw std::runtime_error(std::string(method) + " " + path + " -> " + std::to_string(r->status) + " " + r->body);
        return Json::parse(r->body);
    }
};

// State document without the fields that legitimately differ between twins.
Json comparable_state(Json s) {
    s.erase("id");
    s.erase("state_digest");
    return s;
}

}  // namespace

ScalabilityReport run_scalability(const ScalabilityConfig& cfg, const std::vector<model::EndpointDef>& api, const ResponseEncoder& enc) {
    cfg.validate();
    ScalabilityReport rep;
    Admin admin(cfg.url, cfg.api_key);
    for (const std::size_t b : cfg.batch_sizes) {
        BatchResult br;
        br.size = b;
        try {
            Json body{{"device_type", cfg.device_type}, {"kind", cfg.kind}, {"seed", cfg.twin_seed}, {"count", b + 1}};
            if (cfg.kind == "ml") body["model_ref"] = cfg.model_ref;
            else body["inputs"] = cfg.inputs;
            const auto t0 = Clock::now();
            const Json created = admin.call("POST", "/dts:batch", &body, 201);
            br.create_ms = ms_since(t0);
            br.ids = created.at("ids").get<std::vector<std::string>>();
            const std::string canary = br.ids.back();
            br.ids.pop_back();
            const Json canary_before = admin.call("GET", "/dts/" + canary + "/state", nullptr, 200);

            harness::CampaignConfig cc = cfg.campaign;
            cc.reference = "ref";
            cc.roll_capacity = cfg.reference.roll_capacity;
            std::vector<std::unique_ptr<harness::Target>> targets;
            for (const auto& id : br.ids) {
                harness::TargetSpec ts{id, "http", cfg.url, "/dts/" + id + "/requests", cfg.api_key};
                targets.push_back(std::make_unique<harness::HttpTarget>(ts));
            }
            targets.push_back(std::make_unique<harness::RefDeviceTarget>("ref", cfg.reference));
            const auto t1 = Clock::now();
            const auto res = harness::run_campaign(cc, api, targets);
            br.campaign_ms = ms_since(t1);
            if (res.paired.aborted) throw std::runtime_error("campaign aborted: " + res.paired.abort_reason);
            for (const auto& id : br.ids) br.fidelities.push_back(evaluate_fidelity(res.paired, id, "ref", enc).mean_cosine);
            br.summary = summarize(br.fidelities);

            const Json canary_after = admin.call("GET", "/dts/" + canary + "/state", nullptr, 200);
            if (canary_after != canary_before) br.isolation_failures.push_back("idle twin " + canary + " changed during the campaign");
            Json first;
            for (const auto& id : br.ids) {
                const Json s = comparable_state(admin.call("GET", "/dts/" + id + "/state", nullptr, 200));
                if (first.is_null()) first = s;
                else if (s != first) br.isolation_failures.push_back("twin " + id + " diverged from its peers");
            }
            const std::size_t digests = std::set<std::string>(res.paired.request_digests.begin(), res.paired.request_digests.end()).size();
            if (digests != 1) br.isolation_failures.push_back("targets were sent different request streams");
            br.isolation_ok = br.isolation_failures.empty();
            br.completed = true;
            br.ids.push_back(canary);
        } catch (const std::exception& e) {
            br.error = e.what();
        }
        for (const auto& id : br.ids) {
            try {
                admin.call("DELETE", "/dts/" + id, nullptr, 200);
            } catch (const std::exception&) {
            }
        }
        rep.batches.push_back(std::move(br));
    }
    return rep;
}

namespace {

Json summary_json(const Summary& s) {
    return Json{{"min", s.min}, {"q1", s.q1}, {"median", s.median}, {"q3", s.q3}, {"max", s.max}, {"mean", s.mean}, {"n", s.n}};
}

}  // namespace

Json to_json(const ScalabilityReport& r) {
    Json batches = Json::array();
    for (const auto& b : r.batches)
        batches.push_back({{"size", b.size},
                           {"completed", b.completed},
                           {"error", b.error},
                           {"fidelity", summary_json(b.summary)},
                           {"fidelities", b.fidelities},
                           {"create_ms", b.create_ms},
                           {"campaign_ms", b.campaign_ms},
                           {"isolation_ok", b.isolation_ok},
                           {"isolation_failures", b.isolation_failures}});
    return Json{{"batches", batches},
                {"all_completed", r.all_completed()},
                {"isolation_ok", r.isolation_ok()},
                {"median_spread", r.median_spread()}};
}

Json boxplot_json(const ScalabilityReport& r) {
    Json out = Json::array();
    for (const auto& b : r.batches)
        if (b.completed) out.push_back({{"batch", b.size}, {"box", summary_json(b.summary)}, {"values", b.fidelities}});
    return out;
}

std::string scalability_table(const ScalabilityReport& r) {
    std::string out = "batch  done  min      q1       median   q3       max      create ms  campaign ms  isolated\n";
    char buf[256];
    for (const auto& b : r.batches) {
        const auto& s = b.summary;
        std::snprintf(buf, sizeof buf, "%-6zu %-5s %-8.4f %-8.4f %-8.4f %-8.4f %-8.4f %-10.1f %-12.1f %s\n", b.size, b.completed ? "yes" : "no",
                      s.min, s.q1, s.median, s.q3, s.max, b.create_ms, b.campaign_ms, b.isolation_ok ? "yes" : "no");
        out += buf;
    }
    std::snprintf(buf, sizeof buf, "median spread across batches: %.4f percentage points\n", 100.0 * r.median_spread());
    return out + buf;
}

// ---- time cost ------------------------------------------------------------------

TimeCostConfig::TimeCostConfig() { data_campaign.requests = 2000; }

const TimeCostStep* TimeCostReport::find(const std::string& stage, const std::string& step) const {
    for (const auto& s : steps)
        if (s.stage == stage && s.step == step) return &s;
    return nullptr;
}

namespace {

// cleanup(i) runs after each run, outside the timed region.
template <class Fn, class Cleanup>
TimeCostStep timed(std::string stage, std::string step, std::string description, std::size_t runs, Fn fn, Cleanup cleanup) {
    TimeCostStep s{std::move(stage), std::move(step), std::move(description), "automatic", true, {}, 0, {}};
    fn(runs);  // warm-up, index == runs
    cleanup(runs);
    for (std::size_t i = 0; i < runs; ++i) {
        const auto t0 = Clock::now();
        fn(i);
        s.samples_ms.push_back(ms_since(t0));
        cleanup(i);
    }
    s.mean_ms = std::accumulate(s.samples_ms.begin(), s.samples_ms.end(), 0.0) / static_cast<double>(s.samples_ms.size());
    return s;
}

TimeCostStep documented(std::string stage, std::string step, std::string description, std::string automation, std::string range) {
    return TimeCostStep{std::move(stage), std::move(step), std::move(description), std::move(automation), false, {}, 0, std::move(range)};
}

}  // namespace

TimeCostReport measure_time_costs(const TimeCostConfig& cfg) {
    if (cfg.runs == 0) throw ValidationError("at least one timed run is required");
    if (cfg.batch == 0) throw ValidationError("batch size must be positive");
    namespace fs = std::filesystem;
    const fs::path work = cfg.work_dir.empty() ? fs::temp_directory_path() / "hita-timecost" : cfg.work_dir;
    fs::remove_all(work);
    fs::create_directories(work);
    TimeCostReport rep;
    rep.batch = cfg.batch;

    const DeviceRequest probe{"get_status", Json::object(), cfg.data_campaign.start};
    const std::string dt = cfg.device_type;

    // storage, executable model, n twins, one request through one of them
    auto build_mbdt = [&](const fs::path& root, std::size_t n) {
        server::FleetRegistry reg(root);
        auto m = std::make_shared<const model::DeviceModel>(model::load_model_file(cfg.model_file.string()));
        reg.register_device_type(dt, m);
        server::CreateSpec spec;
        spec.device_type = dt;
        const auto ids = reg.create(spec, n);
        reg.route(ids.front(), probe);
    };
    const fs::path mldt_file = work / "model.mldt";
    auto build_mldt = [&](const fs::path& root, std::size_t n) {
        server::FleetRegistry reg(root);
        const std::string bytes = server::read_file(mldt_file);
        auto m = std::make_shared<const mldt::TrainedModel>(mldt::load_model(bytes));
        reg.register_device_type(dt, nullptr);
        reg.register_learned_model(dt, "model", m, mldt::model_file_digest(bytes));
        server::CreateSpec spec;
        spec.device_type = dt;
        spec.kind = server::kKindLearned;
        spec.model_ref = "model";
        const auto ids = reg.create(spec, n);
        reg.route(ids.front(), probe);
    };
    auto root_for = [&](const char* tag, std::size_t i) { return work / (std::string(tag) + "-" + std::to_string(i)); };

    auto root_cleanup = [&](const char* tag) {
        return [&, tag](std::size_t i) {
            std::error_code ec;
            fs::remove_all(root_for(tag, i), ec);
        };
    };

    // Training data: the undisturbed reference answering a seeded campaign.
    const auto model = std::make_shared<const model::DeviceModel>(model::load_model_file(cfg.model_file.string()));
    harness::CampaignConfig cc = cfg.data_campaign;
    cc.reference = "ref";
    cc.roll_capacity = cfg.reference.roll_capacity;
    std::vector<std::unique_ptr<harness::Target>> targets;
    targets.push_back(std::make_unique<harness::RefDeviceTarget>("ref", with_divergence(cfg.reference, 0.0)));
    const auto data = harness::run_campaign(cc, model->api, targets).trace;
    auto train_and_save = [&](std::size_t) {
        const auto fm = mldt::preprocess(data, model->outcomes);
        const auto tm = mldt::train(fm, cfg.training);
        server::write_file_atomic(mldt_file, mldt::save_model(tm));
    };
    train_and_save(0);  // the creation steps below load this file

    // Creation is timed before training so both pipelines see the same machine state.
    auto mb1 = timed("mbdt", "create-1", "load and check the model, create storage, create and operate one twin", cfg.runs,
                     [&](std::size_t i) { build_mbdt(root_for("mb1", i), 1); }, root_cleanup("mb1"));
    auto mbn = timed("mbdt", "create-" + std::to_string(cfg.batch), "same, creating the whole batch at once", cfg.runs,
                     [&](std::size_t i) { build_mbdt(root_for("mbn", i), cfg.batch); }, root_cleanup("mbn"));
    auto ml1 = timed("mldt", "create-1", "load the network, create storage, create and operate one twin", cfg.runs,
                     [&](std::size_t i) { build_mldt(root_for("ml1", i), 1); }, root_cleanup("ml1"));
    auto mln = timed("mldt", "create-" + std::to_string(cfg.batch), "same, creating the whole batch at once", cfg.runs,
                     [&](std::size_t i) { build_mldt(root_for("mln", i), cfg.batch); }, root_cleanup("mln"));
    auto training = timed("mldt", "training", "preprocess, train and save the network", cfg.runs, train_and_save, [](std::size_t) {});

    rep.steps.push_back(documented("mbdt", "modeling", "domain model, constraints, state machines", "manual", "1-2 hrs"));
    rep.steps.push_back(documented("mbdt", "inputs", "device properties, server settings, API mapping", "manual", "2-5 min"));
    rep.steps.push_back(std::move(mb1));
    rep.steps.push_back(std::move(mbn));
    rep.steps.push_back(documented("mldt", "data-collection", "run the test generator, compile data from responses", "semi-automatic", "2-3 hrs"));
    rep.steps.push_back(documented("mldt", "ml-configs", "network design, hyperparameter tuning", "semi-automatic", "1-2 hrs"));
    rep.steps.push_back(std::move(training));
    rep.steps.push_back(std::move(ml1));
    rep.steps.push_back(std::move(mln));
    fs::remove_all(work);
    return rep;
}

Json to_json(const TimeCostReport& r) {
    Json steps = Json::array();
    for (const auto& s : r.steps)
        steps.push_back({{"stage", s.stage},
                         {"step", s.step},
                         {"description", s.description},
                         {"automation", s.automation},
                         {"measured", s.measured},
                         {"samples_ms", s.samples_ms},
                         {"mean_ms", s.mean_ms},
                         {"documented", s.documented}});
    return Json{{"batch", r.batch}, {"steps", steps}};
}

std::string timecost_tables(const TimeCostReport& r) {
    std::string out;
    char buf[512];
    for (const char* stage : {"mbdt", "mldt"}) {
        out += std::string(stage) + "\n";
        out += "  step             automation      time\n";
        for (const auto& s : r.steps) {
            if (s.stage != stage) continue;
            if (s.measured)
                std::snprintf(buf, sizeof buf, "  %-16s %-15s %.3f ms (avg of %zu)\n", s.step.c_str(), s.automation.c_str(), s.mean_ms,
                              s.samples_ms.size());
            else
                std::snprintf(buf, sizeof buf, "  %-16s %-15s %s (not measured)\n", s.step.c_str(), s.automation.c_str(), s.documented.c_str());
            out += buf;
        }
    }
    return out;
}

}  // namespace hita::fidelity
