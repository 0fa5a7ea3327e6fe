#include <gtest/gtest.h>

#include <csignal>
#include <fstream>

#include "hita/harness/campaign.hpp"
#include "hita/mldt/network.hpp"
#include "hita/refdev/ref_device.hpp"
#include "hita/server/store.hpp"
#include "process.hpp"
#include "support.hpp"

using namespace hita;
namespace fs = std::filesystem;

namespace {

test::RunResult cli(std::vector<std::string> args) {
    args.insert(args.begin(), HITA_CLI);
    return test::run(args, HITA_SOURCE_DIR);
}

fs::path write(const fs::path& p, const std::string& text) {
    std::ofstream(p) << text;
    return p;
}

std::string slurp(const fs::path& p) { return server::read_file(p); }

Json small_campaign_config(std::uint64_t requests) {
    Json j = Json::parse(slurp(fs::path(HITA_SOURCE_DIR) / "config/campaign.json"));
    j["requests"] = requests;
    return j;
}

}  // namespace

TEST(Cli, HelpAndParseErrors) {
    const auto help = cli({"--help"});
    EXPECT_EQ(help.exit_code, 0);
    for (const char* sub : {"model", "dt", "serve", "campaign", "eval"}) EXPECT_NE(help.out.find(sub), std::string::npos) << sub;
    EXPECT_EQ(cli({}).exit_code, 2);
    EXPECT_EQ(cli({"frobnicate"}).exit_code, 2);
    EXPECT_EQ(cli({"model", "check"}).exit_code, 2);  // file is required
    EXPECT_EQ(cli({"--seed", "minus-one", "model", "check", "models/medido.twinmodel"}).exit_code, 2);
    EXPECT_EQ(cli({"campaign", "run", "--bogus"}).exit_code, 2);
}

TEST(Cli, RuntimeErrorsExitOne) {
    const auto r = cli({"serve", "dt"});
    EXPECT_EQ(r.exit_code, 1);
    EXPECT_NE(r.err.find("error:"), std::string::npos);
    EXPECT_EQ(cli({"model", "check", "/nonexistent/model"}).exit_code, 1);
    test::TempDir dir("hita-cli");
    const auto bad = write(dir.path() / "bad.json", "{nope");
    EXPECT_EQ(cli({"--config", bad.string(), "campaign", "run"}).exit_code, 1);
}

TEST(Cli, ModelCheck) {
    const auto ok = cli({"model", "check", "models/medido.twinmodel"});
    EXPECT_EQ(ok.exit_code, 0) << ok.err;
    EXPECT_EQ(ok.out.rfind("ok: ", 0), 0u) << ok.out;

    test::TempDir dir("hita-cli");
    std::string text = slurp(fs::path(HITA_SOURCE_DIR) / "models/medido.twinmodel");
    const auto broken = write(dir.path() / "broken.twinmodel", text.substr(0, text.size() / 2));
    const auto r = cli({"model", "check", broken.string()});
    EXPECT_EQ(r.exit_code, 1);
    EXPECT_NE(r.err.find(broken.string() + ":"), std::string::npos) << r.err;
}

TEST(Cli, CreateMbWritesRestorableSnapshot) {
    test::TempDir dir("hita-cli");
    const auto r = cli({"--out-dir", dir.path().string(), "dt", "create-mb", "--id", "dt-cli"});
    ASSERT_EQ(r.exit_code, 0) << r.err;
    EXPECT_EQ(r.out, "dt-cli\n");
    const auto snap = slurp(dir.path() / "dt-cli.snapshot.json");
    const auto dt = mbdt::ExecutableDT::restore(snap, test::medido());
    EXPECT_EQ(dt.id(), "dt-cli");
    EXPECT_EQ(dt.snapshot(), test::medido_twin(42, "dt-cli").snapshot());
}

TEST(Cli, CampaignRunIsSeedDeterministic) {
    test::TempDir dir("hita-cli");
    const auto cfg = write(dir.path() / "c.json", small_campaign_config(300).dump());
    auto go = [&](const std::string& out, const std::string& seed) {
        const auto r = cli({"--config", cfg.string(), "--seed", seed, "--out-dir", (dir.path() / out).string(), "campaign", "run"});
        EXPECT_EQ(r.exit_code, 0) << r.err;
        EXPECT_NE(r.out.find("300 requests"), std::string::npos) << r.out;
        return std::make_pair(slurp(dir.path() / out / "paired.jsonl"), slurp(dir.path() / out / "trace.jsonl"));
    };
    const auto a = go("a", "9"), b = go("b", "9"), c = go("c", "10");
    EXPECT_EQ(a, b);
    EXPECT_NE(a.first, c.first);
    EXPECT_FALSE(harness::trace_from_jsonl(a.second).empty());
}

TEST(Cli, TrainMlFromTrace) {
    test::TempDir dir("hita-cli");
    const auto cfg = write(dir.path() / "c.json", small_campaign_config(600).dump());
    ASSERT_EQ(cli({"--config", cfg.string(), "--out-dir", dir.path().string(), "campaign", "run"}).exit_code, 0);
    const auto model = dir.path() / "m.mldt";
    const auto r = cli({"dt", "train-ml", "--trace", (dir.path() / "trace.jsonl").string(), "--records", "400", "--out", model.string()});
    ASSERT_EQ(r.exit_code, 0) << r.err;
    EXPECT_NE(r.out.find("final loss"), std::string::npos);
    EXPECT_NO_THROW(mldt::load_model(slurp(model)));
}

TEST(Cli, ServeStubStopsOnSigterm) {
    test::Process p({HITA_CLI, "--config", "config/stub.json", "serve", "stub", "--port", "0"}, HITA_SOURCE_DIR);
    const auto line = p.read_line(std::chrono::seconds(10));
    ASSERT_TRUE(line);
    EXPECT_EQ(line->rfind("stub server listening on 127.0.0.1:", 0), 0u) << *line;
    p.signal(SIGTERM);
    EXPECT_EQ(p.wait(), 0);
}

TEST(Cli, ShippedConfigsParse) {
    const fs::path dir = fs::path(HITA_SOURCE_DIR) / "config";
    EXPECT_NO_THROW(harness::campaign_config_from_json(Json::parse(slurp(dir / "campaign.json"))));
    EXPECT_NO_THROW(refdev::config_from_json(Json::parse(slurp(dir / "refdev.json")).at("device")));
}
