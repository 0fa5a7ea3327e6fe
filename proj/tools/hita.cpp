#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "hita/common/errors.hpp"
#include "hita/fidelity/experiments.hpp"
#include "hita/harness/targets.hpp"
#include "hita/mldt/dataset.hpp"
#include "hita/mldt/target.hpp"
#include "hita/model/checker.hpp"
#include "hita/model/parser.hpp"
#include "hita/refdev/server.hpp"
#include "hita/server/dt_server.hpp"
#include "hita/stub/stub_server.hpp"

namespace fs = std::filesystem;
using namespace hita;

namespace {

struct Global {
    std::string config;
    std::uint64_t seed = 42;
    std::string out_dir = "out";
    bool seed_given = false;
};

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

void wait_for_signal() {
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
}

Json read_json(const std::string& path) {
    const std::string text = server::read_file(path);
    Json j = Json::parse(text, nullptr, false);
    if (j.is_discarded()) throw ValidationError(path + " is not valid JSON");
    return j;
}

Json config_or_empty(const Global& g) { return g.config.empty() ? Json::object() : read_json(g.config); }

fs::path out_path(const Global& g, const std::string& name) {
    fs::create_directories(g.out_dir);
    return fs::path(g.out_dir) / name;
}

void write_text(const fs::path& p, const std::string& text) {
    server::write_file_atomic(p, text);
    std::cerr << "wrote " << p.string() << "\n";
}

mbdt::ModelPtr load_model(const std::string& path) {
    return std::make_shared<const model::DeviceModel>(model::load_model_file(path));
}

harness::CampaignConfig campaign_from(const Json& j, const Global& g, std::uint64_t default_requests) {
    harness::CampaignConfig c;
    c.requests = default_requests;
    if (j.is_object() && !j.empty()) {
        Json copy = j;
        if (!copy.contains("requests") && !copy.contains("duration")) copy["requests"] = default_requests;
        c = harness::campaign_config_from_json(copy);
    }
    if (g.seed_given || !j.contains("seed")) c.seed = g.seed;
    return c;
}

refdev::RefDeviceConfig refdev_from(const Json& j) { return j.is_object() ? refdev::config_from_json(j) : refdev::RefDeviceConfig{}; }

// ---- model ------------------------------------------------------------------

int model_check(const std::string& file) {
    const std::string text = server::read_file(file);
    model::DeviceModel m;
    try {
        m = model::parse_model_syntax(text);
    } catch (const model::ParseError& e) {
        std::cerr << file << ":" << e.what() << "\n";
        return 1;
    }
    model::resolve_symbols(m);
    const auto diags = model::check_model(m);
    for (const auto& d : diags)
        std::cerr << file << ":" << d.pos.line << ":" << d.pos.column << ": " << (d.severity == model::Severity::Error ? "error" : "warning")
                  << " [" << model::to_string(d.code) << "] " << d.message << "\n";
    if (model::has_errors(diags)) return 1;
    std::size_t transitions = m.behavior.transitions.size();
    std::cout << "ok: " << m.name << " " << m.version << " (" << m.properties.size() << " properties, " << m.constraints.size()
              << " constraints, " << m.behavior.states.size() << " states, " << transitions << " transitions, " << m.api.size()
              << " operations)\n";
    return 0;
}

// ---- dt -----------------------------------------------------------------------

int dt_create_mb(const Global& g, const std::string& model_file, const std::string& inputs_file, const std::string& id) {
    auto m = load_model(model_file);
    const Json inputs = inputs_file.empty() ? Json::object() : read_json(inputs_file);
    auto dt = mbdt::make_executable(mbdt::instantiate(m, inputs, harness::kCampaignStart), g.seed, id);
    write_text(out_path(g, dt.id() + ".snapshot.json"), dt.snapshot());
    std::cout << dt.id() << "\n";
    return 0;
}

int dt_train_ml(const Global& g, const std::string& model_file, const std::string& trace_file, std::size_t records, const std::string& out) {
    auto m = load_model(model_file);
    const Json cfg = config_or_empty(g);
    std::vector<harness::TraceRecord> trace;
    if (!trace_file.empty()) {
        trace = harness::trace_from_jsonl(server::read_file(trace_file));
    } else {
        auto cc = campaign_from(cfg.value("campaign", Json::object()), g, 12000);
        cc.reference = "ref";
        std::vector<std::unique_ptr<harness::Target>> targets;
        auto ref = refdev_from(cfg.value("reference", Json::object()));
        ref.divergence.p = 0;
        cc.roll_capacity = ref.roll_capacity;
        targets.push_back(std::make_unique<harness::RefDeviceTarget>("ref", ref));
        trace = harness::run_campaign(cc, m->api, targets).trace;
    }
    if (records > 0 && trace.size() > records) trace.resize(records);
    mldt::TrainingConfig tc = mldt::training_config_from_json(cfg.value("training", Json::object()));
    if (g.seed_given) tc.seed = g.seed;
    const auto fm = mldt::preprocess(trace, m->outcomes);
    const auto t0 = std::chrono::steady_clock::now();
    const auto tm = mldt::train(fm, tc);
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const fs::path dest = out.empty() ? out_path(g, "medido.mldt") : fs::path(out);
    if (dest.has_parent_path()) fs::create_directories(dest.parent_path());
    write_text(dest, mldt::save_model(tm));
    std::printf("rows %zu  features %zu  initial loss %.4f  final loss %.4f  accuracy %.4f  %.1f s\n", fm.X.rows, fm.X.cols,
                tm.report.initial_loss, tm.report.final_loss, tm.report.final_accuracy, s);
    return 0;
}

// ---- serve --------------------------------------------------------------------

int serve_dt(const Global& g, int port_override) {
    if (g.config.empty()) throw ValidationError("serve dt needs --config");
    auto cfg = server::server_config_from_json(read_json(g.config), fs::path(g.config).parent_path());
    if (port_override >= 0) cfg.port = port_override;
    auto fleet = server::open_fleet(cfg);
    for (const auto& q : fleet.recovery.quarantined) std::cerr << "quarantined " << q.id << ": " << q.reason << "\n";
    server::DtServer srv(fleet.registry, fleet.keys, cfg.threads);
    const int port = srv.start(cfg.host, cfg.port);
    std::cout << "dt-server listening on " << cfg.host << ":" << port << " (" << fleet.recovery.recovered.size() << " twins recovered)"
              << std::endl;
    wait_for_signal();
    srv.stop();
    return 0;
}

int serve_stub(const Global& g, int port_override) {
    if (g.config.empty()) throw ValidationError("serve stub needs --config");
    auto cfg = stub::stub_server_config_from_json(read_json(g.config));
    if (port_override >= 0) cfg.port = port_override;
    auto store = std::make_shared<stub::ArtificialDataStore>();
    store->seed(cfg.store, g.seed_given ? g.seed : cfg.seed);
    auto engine = std::make_shared<stub::StubEngine>(store, cfg.seed);
    for (const auto& s : cfg.stubs) engine->register_stub(s);
    auto keys = std::make_shared<server::ApiKeyTable>(cfg.rate_limit_per_minute);
    keys->add_from_json(cfg.api_keys);
    stub::StubServer srv(engine, keys, cfg.threads);
    const int port = srv.start(cfg.host, cfg.port);
    std::cout << "stub server listening on " << cfg.host << ":" << port << " (" << engine->routes().size() << " routes)" << std::endl;
    wait_for_signal();
    srv.stop();
    return 0;
}

int serve_refdev(const Global& g, int port_override) {
    const Json cfg = config_or_empty(g);
    auto dev = refdev_from(cfg.value("device", Json::object()));
    std::shared_ptr<server::ApiKeyTable> keys;
    if (cfg.contains("api_keys") && !cfg["api_keys"].empty()) {
        keys = std::make_shared<server::ApiKeyTable>(cfg.value("rate_limit_per_minute", 0.0));
        keys->add_from_json(cfg["api_keys"]);
    }
    const std::string host = cfg.value("listen", Json::object()).value("host", std::string("127.0.0.1"));
    const int port_cfg = cfg.value("listen", Json::object()).value("port", 8070);
    refdev::RefDeviceServer srv(dev, keys);
    const int port = srv.start(host, port_override >= 0 ? port_override : port_cfg);
    std::cout << "reference device listening on " << host << ":" << port << std::endl;
    wait_for_signal();
    srv.stop();
    return 0;
}

// ---- campaign -----------------------------------------------------------------

int campaign_run(const Global& g, const std::string& model_file, const std::string& refdev_file) {
    auto m = load_model(model_file);
    const Json cfg = config_or_empty(g);
    auto cc = campaign_from(cfg, g, 12000);
    const auto ref = refdev_file.empty() ? refdev::RefDeviceConfig{} : refdev_from(read_json(refdev_file));
    cc.roll_capacity = ref.roll_capacity;
    if (cc.targets.empty()) {
        cc.targets.push_back({"mbdt", "mbdt", "", "", ""});
        cc.targets.push_back({"ref", "refdev", "", "", ""});
    }
    std::vector<std::unique_ptr<harness::Target>> targets;
    for (const auto& t : cc.targets) {
        if (t.kind == "http") targets.push_back(std::make_unique<harness::HttpTarget>(t));
        else if (t.kind == "refdev") targets.push_back(std::make_unique<harness::RefDeviceTarget>(t.name, ref));
        else if (t.kind == "mbdt")
            targets.push_back(std::make_unique<harness::MbdtTarget>(t.name, mbdt::make_executable(mbdt::instantiate(m, Json::object(), cc.start),
                                                                                                 g.seed, t.name)));
        else if (t.kind == "mldt")
            targets.push_back(std::make_unique<mldt::MlTwinTarget>(
                t.name, std::make_shared<const mldt::TrainedModel>(mldt::load_model(server::read_file(t.path)))));
        else throw ValidationError("unknown target kind '" + t.kind + "'");
    }
    const auto t0 = std::chrono::steady_clock::now();
    const auto res = harness::run_campaign(cc, m->api, targets);
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_text(out_path(g, "paired.jsonl"), harness::paired_to_jsonl(res.paired));
    write_text(out_path(g, "trace.jsonl"), harness::trace_to_jsonl(res.trace));
    std::printf("%llu requests, %llu ticks, %zu targets, %.2f s%s\n", static_cast<unsigned long long>(res.paired.generated),
                static_cast<unsigned long long>(res.paired.ticks), res.paired.targets.size(), s, res.paired.aborted ? " (aborted)" : "");
    if (res.paired.aborted) {
        std::cerr << res.paired.abort_reason << "\n";
        return 1;
    }
    const auto enc = fidelity::ResponseEncoder::for_model(*m);
    std::vector<fidelity::FidelityReport> reps;
    if (res.paired.target_index(cc.reference))
        for (const auto& name : res.paired.targets)
            if (name != cc.reference) reps.push_back(fidelity::evaluate_fidelity(res.paired, name, cc.reference, enc));
    if (!reps.empty()) std::cout << fidelity::fidelity_table(reps);
    return 0;
}

// ---- eval ---------------------------------------------------------------------

int eval_fidelity(const Global& g, const std::string& model_file) {
    auto m = load_model(model_file);
    const Json cfg = config_or_empty(g);
    fidelity::CalibratedFidelityConfig rc;
    rc.campaign = campaign_from(cfg.value("campaign", Json::object()), g, 12000);
    rc.reference = refdev_from(cfg.value("reference", Json::object()));
    rc.train_records = cfg.value("train_records", rc.train_records);
    rc.training = mldt::training_config_from_json(cfg.value("training", Json::object()));
    rc.mbdt_target = cfg.value("mbdt_target", rc.mbdt_target);
    rc.mldt_target = cfg.value("mldt_target", rc.mldt_target);
    const auto r = fidelity::run_calibrated_fidelity(m, rc);
    write_text(out_path(g, "fidelity.json"), fidelity::to_json(r).dump(2) + "\n");
    write_text(out_path(g, "medido.mldt"), mldt::save_model(*r.model));
    write_text(out_path(g, "trace.jsonl"), harness::trace_to_jsonl(r.trace));
    const std::string table = fidelity::fidelity_table({r.mbdt.report, r.mldt.report});
    write_text(out_path(g, "fidelity.txt"), table);
    std::cout << table;
    std::printf("calibrated divergence: mbdt %.4f (agreement %.4f), mldt %.4f (agreement %.4f)\n", r.mbdt.divergence,
                r.mbdt.baseline_agreement, r.mldt.divergence, r.mldt.baseline_agreement);
    return 0;
}

std::vector<std::size_t> parse_batches(const std::string& s) {
    std::vector<std::size_t> out;
    std::size_t at = 0;
    while (at < s.size()) {
        const auto comma = s.find(',', at);
        const std::string part = s.substr(at, comma == std::string::npos ? std::string::npos : comma - at);
        try {
            std::size_t used = 0;
            const long long v = std::stoll(part, &used);
            if (used != part.size() || v < 0) throw std::invalid_argument(part);
            out.push_back(static_cast<std::size_t>(v));
        } catch (const std::exception&) {
            throw ValidationError("bad batch size '" + part + "'");
        }
        if (comma == std::string::npos) break;
        at = comma + 1;
    }
    return out;
}

int eval_scalability(const Global& g, const std::string& model_file, std::string url, const std::string& api_key, const std::string& batches,
                     std::uint64_t requests, double divergence) {
    auto m = load_model(model_file);
    const Json cfg = config_or_empty(g);
    fidelity::ScalabilityConfig sc;
    sc.campaign = campaign_from(cfg.value("campaign", Json::object()), g, requests);
    if (requests) sc.campaign.requests = requests;
    sc.reference = refdev_from(cfg.value("reference", Json::object()));
    if (divergence >= 0) sc.reference.divergence.p = divergence;
    if (!batches.empty()) sc.batch_sizes = parse_batches(batches);
    sc.api_key = api_key;

    std::unique_ptr<server::DtServer> local;
    if (url.empty()) {
        auto registry = std::make_shared<server::FleetRegistry>();
        registry->register_device_type(sc.device_type, m);
        auto keys = std::make_shared<server::ApiKeyTable>(0);
        sc.api_key = "local-experiment";
        keys->add_key(sc.api_key);
        std::size_t largest = 1;
        for (auto b : sc.batch_sizes) largest = std::max(largest, b);
        local = std::make_unique<server::DtServer>(registry, keys, largest + 16);
        url = "http://127.0.0.1:" + std::to_string(local->start("127.0.0.1", 0));
    }
    sc.url = url;
    const auto enc = fidelity::ResponseEncoder::for_model(*m);
    const auto r = fidelity::run_scalability(sc, m->api, enc);
    if (local) local->stop();
    write_text(out_path(g, "scalability.json"), fidelity::to_json(r).dump(2) + "\n");
    write_text(out_path(g, "boxplot.json"), fidelity::boxplot_json(r).dump(2) + "\n");
    const std::string table = fidelity::scalability_table(r);
    write_text(out_path(g, "scalability.txt"), table);
    std::cout << table;
    return r.all_completed() ? 0 : 1;
}

int eval_timecost(const Global& g, const std::string& model_file, std::size_t runs, std::size_t batch) {
    const Json cfg = config_or_empty(g);
    fidelity::TimeCostConfig tc;
    tc.model_file = model_file;
    tc.runs = runs;
    tc.batch = batch;
    tc.work_dir = out_path(g, "timecost-work");
    tc.data_campaign = campaign_from(cfg.value("campaign", Json::object()), g, 2000);
    tc.reference = refdev_from(cfg.value("reference", Json::object()));
    tc.training = mldt::training_config_from_json(cfg.value("training", Json::object()));
    const auto r = fidelity::measure_time_costs(tc);
    write_text(out_path(g, "timecost.json"), fidelity::to_json(r).dump(2) + "\n");
    const std::string tables = fidelity::timecost_tables(r);
    write_text(out_path(g, "timecost.txt"), tables);
    std::cout << tables;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hita: digital twins for IoT device testing"};
    app.require_subcommand(1);
    Global g;
    app.add_option("--config", g.config, "JSON config file for the subcommand");
    auto* seed_opt = app.add_option("--seed", g.seed, "seed for every random choice")->capture_default_str();
    app.add_option("--out-dir", g.out_dir, "directory for artifacts")->capture_default_str();

    std::function<int()> action;

    auto* model_cmd = app.add_subcommand("model", "device model tools")->require_subcommand(1);
    auto* check = model_cmd->add_subcommand("check", "parse and statically check a model file");
    std::string check_file;
    check->add_option("file", check_file, "model file")->required();
    check->callback([&] { action = [&] { return model_check(check_file); }; });

    auto* dt_cmd = app.add_subcommand("dt", "twin generation")->require_subcommand(1);
    auto* create_mb = dt_cmd->add_subcommand("create-mb", "instantiate a model-based twin and write its snapshot");
    std::string mb_model = "models/medido.twinmodel", mb_inputs, mb_id;
    create_mb->add_option("--model", mb_model, "model file")->capture_default_str();
    create_mb->add_option("--inputs", mb_inputs, "JSON file with property values");
    create_mb->add_option("--id", mb_id, "twin id");
    create_mb->callback([&] { action = [&] { return dt_create_mb(g, mb_model, mb_inputs, mb_id); }; });
    auto* train_ml = dt_cmd->add_subcommand("train-ml", "train a learned twin from a trace");
    std::string ml_model = "models/medido.twinmodel", ml_trace, ml_out;
    std::size_t ml_records = 2000;
    train_ml->add_option("--model", ml_model, "model file (operation schema and outcome classes)")->capture_default_str();
    train_ml->add_option("--trace", ml_trace, "trace.jsonl; without it a campaign against the reference device is run");
    train_ml->add_option("--records", ml_records, "leading trace records to train on (0 = all)")->capture_default_str();
    train_ml->add_option("--out", ml_out, "model file to write (default <out-dir>/medido.mldt)");
    train_ml->callback([&] { action = [&] { return dt_train_ml(g, ml_model, ml_trace, ml_records, ml_out); }; });

    auto* serve_cmd = app.add_subcommand("serve", "run a server until interrupted")->require_subcommand(1);
    int port = -1;
    auto* s_dt = serve_cmd->add_subcommand("dt", "dt-server");
    s_dt->add_option("--port", port, "override the configured port (0 = any)");
    s_dt->callback([&] { action = [&] { return serve_dt(g, port); }; });
    auto* s_stub = serve_cmd->add_subcommand("stub", "third-party stub server");
    s_stub->add_option("--port", port, "override the configured port (0 = any)");
    s_stub->callback([&] { action = [&] { return serve_stub(g, port); }; });
    auto* s_ref = serve_cmd->add_subcommand("refdev", "reference device");
    s_ref->add_option("--port", port, "override the configured port (0 = any)");
    s_ref->callback([&] { action = [&] { return serve_refdev(g, port); }; });

    auto* campaign_cmd = app.add_subcommand("campaign", "request campaigns")->require_subcommand(1);
    auto* run = campaign_cmd->add_subcommand("run", "run a campaign and record paired responses");
    std::string c_model = "models/medido.twinmodel", c_refdev;
    run->add_option("--model", c_model, "model file (operation schema)")->capture_default_str();
    run->add_option("--refdev", c_refdev, "reference device config for in-process refdev targets");
    run->callback([&] { action = [&] { return campaign_run(g, c_model, c_refdev); }; });

    auto* eval_cmd = app.add_subcommand("eval", "experiments")->require_subcommand(1);
    std::string e_model = "models/medido.twinmodel";
    auto* e_fid = eval_cmd->add_subcommand("fidelity", "fidelity of both twin kinds against a calibrated reference");
    e_fid->add_option("--model", e_model, "model file")->capture_default_str();
    e_fid->callback([&] { action = [&] { return eval_fidelity(g, e_model); }; });
    auto* e_scale = eval_cmd->add_subcommand("scalability", "fidelity across fleet sizes");
    std::string url, api_key, batches;
    std::uint64_t requests = 600;
    double divergence = -1;
    e_scale->add_option("--model", e_model, "model file")->capture_default_str();
    e_scale->add_option("--url", url, "dt-server base URL (default: an in-process server)");
    e_scale->add_option("--api-key", api_key, "API key for --url");
    e_scale->add_option("--batches", batches, "comma-separated batch sizes (default 10,20,...,100)");
    e_scale->add_option("--requests", requests, "requests per batch campaign")->capture_default_str();
    e_scale->add_option("--divergence", divergence, "reference flip probability");
    e_scale->callback([&] { action = [&] { return eval_scalability(g, e_model, url, api_key, batches, requests, divergence); }; });
    auto* e_time = eval_cmd->add_subcommand("timecost", "time cost of every pipeline step");
    std::size_t runs = 10, batch = 100;
    e_time->add_option("--model", e_model, "model file")->capture_default_str();
    e_time->add_option("--runs", runs, "timed runs per automatic step")->capture_default_str();
    e_time->add_option("--batch", batch, "batch size for the batch-creation steps")->capture_default_str();
    e_time->callback([&] { action = [&] { return eval_timecost(g, e_model, runs, batch); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }
    g.seed_given = seed_opt->count() > 0;
    try {
        return action ? action() : 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
