#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "hita/common/digest.hpp"
#include "hita/common/errors.hpp"
#include "hita/mldt/network.hpp"
#include "hita/refdev/ref_device.hpp"
#include "hita/server/auth.hpp"
#include "hita/server/dt_server.hpp"
#include "hita/server/registry.hpp"
#include "hita/server/store.hpp"
#include "support.hpp"

using namespace hita;
using namespace hita::server;
namespace fs = std::filesystem;

namespace {

std::unique_ptr<FleetRegistry> registry(const std::optional<fs::path>& root = std::nullopt) {
    auto r = std::make_unique<FleetRegistry>(root);
    r->register_device_type("medido", test::medido());
    return r;
}

std::vector<DeviceRequest> requests(std::uint64_t seed, std::size_t n) {
    std::vector<DeviceRequest> out;
    for (auto& s : harness::build_schedule(test::small_campaign(seed, n), test::medido()->api)) out.push_back(s.request);
    return out;
}

std::shared_ptr<const mldt::TrainedModel> tiny_model() {
    static const auto m = [] {
        mldt::TrainingConfig c;
        c.epochs = 50;
        return std::make_shared<const mldt::TrainedModel>(
            mldt::train(mldt::preprocess(test::mbdt_vs_ref(test::small_campaign(1, 300)).trace, refdev::kOutcomeClasses), c));
    }();
    return m;
}

CreateSpec mb_spec(std::uint64_t seed = 42, Json inputs = Json::object()) {
    CreateSpec s;
    s.device_type = "medido";
    s.seed = seed;
    s.inputs = std::move(inputs);
    return s;
}

}  // namespace

// ---- store ---------------------------------------------------------------

TEST(Store, AtomicWriteReplaces) {
    test::TempDir dir;
    const auto p = dir.path() / "f.json";
    write_file_atomic(p, "one");
    write_file_atomic(p, "two");
    EXPECT_EQ(read_file(p), "two");
    for (const auto& e : fs::directory_iterator(dir.path())) EXPECT_EQ(e.path().filename(), "f.json");
    EXPECT_THROW(read_file(dir.path() / "missing"), std::runtime_error);
}

TEST(Store, ManifestTracksCreationsAndDeletions) {
    test::TempDir dir;
    FleetStore store(dir.path());
    CreationRecord a{"dt-000001", "mb", "medido", "", Json{{"language", "en"}}, 1, 10};
    CreationRecord b{"dt-000002", "mb", "medido", "", Json::object(), 2, 11};
    CreationRecord c{"dt-000003", "mb", "medido", "", Json::object(), 3, 12};
    store.record_creations({a, b, c});
    store.write_snapshot("dt-000001", "snap-a");
    auto j = store.open_journal("dt-000001");
    j->append("{\"seq\":1}");
    j->append("{\"seq\":2}");
    j.reset();
    store.record_deletion("dt-000002");
    store.quarantine("dt-000003", "broken");

    const auto loaded = FleetStore(dir.path()).load();
    ASSERT_EQ(loaded.size(), 1u);
    EXPECT_EQ(loaded[0].creation, a);
    EXPECT_EQ(loaded[0].snapshot, "snap-a");
    EXPECT_EQ(loaded[0].journal, (std::vector<std::string>{"{\"seq\":1}", "{\"seq\":2}"}));
    const auto q = store.quarantined();
    ASSERT_EQ(q.size(), 1u);
    EXPECT_EQ(q[0].id, "dt-000003");
    EXPECT_EQ(q[0].reason, "broken");

    store.truncate_journal("dt-000001", 1);
    EXPECT_EQ(store.load()[0].journal.size(), 1u);
    EXPECT_EQ(creation_from_json(to_json(a)), a);
}

TEST(Store, IncompleteJournalLineIsIgnored) {
    test::TempDir dir;
    FleetStore store(dir.path());
    store.record_creations({{"dt-000001", "mb", "medido", "", Json::object(), 1, 0}});
    store.open_journal("dt-000001")->append("{\"seq\":1}");
    {
        std::ofstream out(dir.path() / "twins" / "dt-000001.events.jsonl", std::ios::app);
        out << "{\"seq\":2,\"trunc";
    }
    EXPECT_EQ(store.load()[0].journal, (std::vector<std::string>{"{\"seq\":1}"}));
}

// ---- auth ----------------------------------------------------------------

TEST(Auth, PlainAndHashedKeys) {
    ApiKeyTable keys(0);
    keys.add_key("alpha");
    keys.add_hashed("sha256:" + sha256_hex("beta"));
    keys.add_from_json(Json{"gamma", {{"sha256", sha256_hex("delta")}}});
    EXPECT_EQ(keys.size(), 4u);
    for (const char* k : {"alpha", "beta", "gamma", "delta"}) EXPECT_EQ(keys.check(k), AuthResult::Ok) << k;
    for (const char* k : {"", "alph", "alphaa", "ALPHA", " alpha"}) EXPECT_EQ(keys.check(k), AuthResult::Unauthorized) << k;
    EXPECT_EQ(keys.check(sha256_hex("alpha")), AuthResult::Unauthorized);  // the digest is not a key
    EXPECT_THROW(keys.add_hashed("sha256:xyz"), ValidationError);
    EXPECT_THROW(keys.add_from_json(Json{42}), ValidationError);
}

TEST(Auth, TokenBucket) {
    ApiKeyTable keys(60);  // one token per second, burst of 60
    keys.add_key("k");
    const auto t0 = ApiKeyTable::Clock::time_point{} + std::chrono::hours(1);
    for (int i = 0; i < 60; ++i) ASSERT_EQ(keys.check("k", t0), AuthResult::Ok) << i;
    EXPECT_EQ(keys.check("k", t0), AuthResult::RateLimited);
    EXPECT_EQ(keys.check("k", t0 + std::chrono::milliseconds(999)), AuthResult::RateLimited);
    EXPECT_EQ(keys.check("k", t0 + std::chrono::milliseconds(1001)), AuthResult::Ok);
    EXPECT_EQ(keys.check("k", t0 + std::chrono::milliseconds(1002)), AuthResult::RateLimited);
    // refill is capped at the burst size
    const auto later = t0 + std::chrono::hours(5);
    for (int i = 0; i < 60; ++i) ASSERT_EQ(keys.check("k", later), AuthResult::Ok);
    EXPECT_EQ(keys.check("k", later), AuthResult::RateLimited);
    EXPECT_EQ(keys.check("other", later), AuthResult::Unauthorized);
}

// ---- registry --------------------------------------------------------------

TEST(Registry, CreateRouteStateRemove) {
    auto r = registry();
    const auto ids = r->create(mb_spec(), 3);
    ASSERT_EQ(ids.size(), 3u);
    EXPECT_EQ(r->size(), 3u);
    const auto t = harness::kCampaignStart;
    const auto out = r->route(ids[0], {"set_alarm", Json{{"volume", "high"}}, t});
    EXPECT_EQ(out.response.status, "accepted");
    EXPECT_EQ(out.steps, 1u);
    const auto doc = r->state(ids[0]);
    EXPECT_EQ(doc.at("values").at("alarm_volume"), "high");
    EXPECT_EQ(doc.at("steps"), 1);
    EXPECT_EQ(doc.at("state_digest"), out.state_digest);
    EXPECT_EQ(doc.at("current_state"), "Idle");
    EXPECT_EQ(r->state(ids[1]).at("values").at("alarm_volume"), "medium");
    EXPECT_EQ(r->clock(), t);

    r->remove(ids[1]);
    EXPECT_EQ(r->size(), 2u);
    EXPECT_THROW(r->state(ids[1]), NotFound);
    EXPECT_THROW(r->route(ids[1], {"get_status", Json::object(), t}), NotFound);
    EXPECT_THROW(r->remove("dt-nope"), NotFound);
    EXPECT_EQ(r->list().size(), 2u);
}

TEST(Registry, BatchCreationIsAllOrNothing) {
    auto r = registry();
    EXPECT_THROW(r->create(mb_spec(1, Json{{"roll_capacity", 0}}), 5), mbdt::ConstraintViolationError);
    EXPECT_THROW(r->create(mb_spec(1, Json{{"bogus", 1}}), 5), ValidationError);
    auto unknown = mb_spec();
    unknown.device_type = "toaster";
    EXPECT_THROW(r->create(unknown, 2), NotFound);
    CreateSpec ml = mb_spec();
    ml.kind = kKindLearned;
    ml.model_ref = "missing";
    EXPECT_THROW(r->create(ml, 1), NotFound);
    EXPECT_EQ(r->size(), 0u);
}

TEST(Registry, ClockOnlyMovesForward) {
    auto r = registry();
    const auto id = r->create(mb_spec()).front();
    r->route(id, {"get_status", Json::object(), 5000});
    r->route(id, {"get_status", Json::object(), 1000});
    EXPECT_EQ(r->clock(), 5000);
    const auto out = r->route(id, {"get_status", Json::object(), 0}, false);
    (void)out;
    EXPECT_EQ(r->state(id).at("log_length"), 3);
    EXPECT_EQ(r->clock(), 5000);
}

TEST(Registry, LearnedTwins) {
    auto r = registry();
    r->register_learned_model("medido", "v1", tiny_model());
    CreateSpec s = mb_spec();
    s.kind = kKindLearned;
    s.model_ref = "v1";
    const auto id = r->create(s).front();
    const auto t = harness::kCampaignStart;
    const auto out = r->route(id, {"get_status", Json::object(), t});
    EXPECT_TRUE(out.response.fields.contains("probabilities"));
    EXPECT_EQ(out.response, mldt::infer(*tiny_model(), {"get_status", Json::object(), t}, -1));
    const auto doc = r->state(id);
    EXPECT_EQ(doc.at("kind"), "ml");
    EXPECT_EQ(doc.at("model_ref"), "v1");
    EXPECT_EQ(doc.at("last_request"), t);
}

TEST(Registry, CreateSpecValidation) {
    EXPECT_THROW(create_spec_from_json(Json::array()), ValidationError);
    EXPECT_THROW(create_spec_from_json(Json{{"kind", "mb"}}), ValidationError);
    EXPECT_THROW(create_spec_from_json(Json{{"device_type", "medido"}, {"kind", "xx"}}), ValidationError);
    EXPECT_THROW(create_spec_from_json(Json{{"device_type", "medido"}, {"seed", -1}}), ValidationError);
    EXPECT_THROW(create_spec_from_json(Json{{"device_type", "medido"}, {"kind", "ml"}}), ValidationError);
    EXPECT_THROW(create_spec_from_json(Json{{"device_type", "medido"}, {"colour", "red"}}), ValidationError);
    const auto s = create_spec_from_json(Json{{"device_type", "medido"}, {"seed", 7}, {"inputs", {{"language", "sv"}}}});
    EXPECT_EQ(s.seed, 7u);
    EXPECT_EQ(s.kind, "mb");
}

// ---- persistence and recovery ----------------------------------------------

TEST(Recovery, RestartRestoresEveryTwin) {
    test::TempDir dir;
    std::vector<std::string> ids;
    std::map<std::string, Json> before;
    const auto reqs = requests(3, 200);
    {
        auto r = registry(dir.path());
        r->register_learned_model("medido", "v1", tiny_model());
        ids = r->create(mb_spec(), 3);
        CreateSpec ml = mb_spec();
        ml.kind = kKindLearned;
        ml.model_ref = "v1";
        ids.push_back(r->create(ml).front());
        for (std::size_t i = 0; i < reqs.size(); ++i) r->route(ids[i % ids.size()], reqs[i]);
        r->remove(ids[2]);
        for (const auto& id : r->list()) before[id.id] = r->state(id.id);
    }
    auto r = registry(dir.path());
    r->register_learned_model("medido", "v1", tiny_model());
    const auto rep = r->recover();
    EXPECT_EQ(rep.recovered.size(), 3u);
    EXPECT_TRUE(rep.quarantined.empty());
    for (const auto& [id, doc] : before) EXPECT_EQ(r->state(id), doc) << id;
    EXPECT_THROW(r->state(ids[2]), NotFound);
    EXPECT_EQ(r->clock(), reqs.back().virtual_now);

    // new ids continue after the recovered ones
    const auto fresh = r->create(mb_spec()).front();
    for (const auto& id : ids) EXPECT_GT(fresh, id);
}

TEST(Recovery, RecoveredTwinContinuesLikeAControl) {
    test::TempDir dir;
    const auto reqs = requests(8, 300);
    auto control = registry();
    const auto cid = control->create(mb_spec(5)).front();
    std::string id;
    {
        auto r = registry(dir.path());
        id = r->create(mb_spec(5)).front();
        for (std::size_t i = 0; i < 150; ++i) {
            r->route(id, reqs[i]);
            control->route(cid, reqs[i]);
        }
    }
    auto r = registry(dir.path());
    r->recover();
    for (std::size_t i = 150; i < reqs.size(); ++i) {
        const auto a = r->route(id, reqs[i]);
        const auto b = control->route(cid, reqs[i]);
        ASSERT_EQ(canonical(to_json(a.response)), canonical(to_json(b.response))) << i;
    }
    auto doc = r->state(id), want = control->state(cid);
    for (auto* d : {&doc, &want}) d->erase("id"), d->erase("state_digest");  // the digest covers the id
    EXPECT_EQ(doc, want);
}

TEST(Recovery, CorruptTwinIsQuarantinedOthersSurvive) {
    test::TempDir dir;
    std::vector<std::string> ids;
    {
        auto r = registry(dir.path());
        ids = r->create(mb_spec(), 3);
        for (const auto& id : ids) r->route(id, {"set_language", Json{{"language", "da"}}, harness::kCampaignStart});
    }
    const auto snap = dir.path() / "twins" / (ids[1] + ".snapshot.json");
    std::string bytes = read_file(snap);
    bytes[bytes.size() / 2] ^= 0x20;
    write_file_atomic(snap, bytes);

    auto r = registry(dir.path());
    const auto rep = r->recover();
    EXPECT_EQ(rep.recovered, (std::vector<std::string>{ids[0], ids[2]}));
    ASSERT_EQ(rep.quarantined.size(), 1u);
    EXPECT_EQ(rep.quarantined[0].id, ids[1]);
    EXPECT_THROW(r->state(ids[1]), NotFound);
    EXPECT_EQ(r->quarantined().size(), 1u);
    EXPECT_TRUE(fs::exists(dir.path() / "quarantine"));
    EXPECT_EQ(r->state(ids[0]).at("values").at("language"), "da");

    // a second restart no longer sees the quarantined twin
    auto again = registry(dir.path());
    EXPECT_EQ(again->recover().recovered.size(), 2u);
}

TEST(Recovery, JournalAheadOfSnapshotIsTrimmed) {
    test::TempDir dir;
    std::string id;
    Json state_at_snapshot;
    {
        auto r = registry(dir.path());
        id = r->create(mb_spec()).front();
        r->route(id, {"set_alarm", Json{{"volume", "low"}}, 1});
        state_at_snapshot = r->state(id);
    }
    // simulate a crash between journal append and snapshot write
    {
        std::ofstream out(dir.path() / "twins" / (id + ".events.jsonl"), std::ios::app);
        out << canonical(mbdt::to_json(mbdt::EventRecord{2, 2, "get_status", "accepted", "Idle", "Idle", {}})) << "\n";
    }
    auto r = registry(dir.path());
    r->recover();
    EXPECT_EQ(r->state(id), state_at_snapshot);
    EXPECT_EQ(FleetStore(dir.path()).load()[0].journal.size(), 1u);
}

TEST(ServerConfig, ParseAndValidate) {
    const Json j{{"listen", {{"host", "0.0.0.0"}, {"port", 9000}}},
                 {"persistence_root", "var"},
                 {"api_keys", {"a"}},
                 {"device_types", {{"medido", {{"model", "m.twinmodel"}}}}}};
    const auto c = server_config_from_json(j, "/etc/hita");
    EXPECT_EQ(c.port, 9000);
    EXPECT_EQ(*c.persistence_root, fs::path("/etc/hita/var"));
    EXPECT_EQ(c.device_types.at("medido").model, fs::path("/etc/hita/m.twinmodel"));
    EXPECT_THROW(server_config_from_json(Json{{"device_types", Json::object()}}), ValidationError);
    EXPECT_THROW(server_config_from_json(Json{{"colour", 1}}), ValidationError);
    EXPECT_THROW(server_config_from_json(Json{{"listen", {{"port", 70000}}}, {"device_types", j["device_types"]}}), ValidationError);
    const auto shipped = server_config_from_json(Json::parse(read_file(std::string(HITA_SOURCE_DIR) + "/config/server.json")),
                                                 std::string(HITA_SOURCE_DIR) + "/config");
    EXPECT_NO_THROW(shipped.validate());
}
