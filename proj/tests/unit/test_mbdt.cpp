#include <gtest/gtest.h>

#include <fstream>

#include "hita/common/errors.hpp"
#include "hita/common/vtime.hpp"
#include "hita/mbdt/twin.hpp"
#include "hita/refdev/ref_device.hpp"
#include "support.hpp"

using namespace hita;

namespace {

Json golden() {
    std::ifstream in(std::string(HITA_SOURCE_DIR) + "/tests/golden/medido_plan_trace.json");
    return Json::parse(in);
}

DeviceRequest request_at(const Json& step) {
    const auto at = vtime::parse_datetime(step.at("at").get<std::string>());
    EXPECT_TRUE(at);
    return {step.at("operation").get<std::string>(), step.at("payload"), at.value_or(0)};
}

void expect_matches(const Json& step, const DeviceResponse& r, const std::string& who) {
    const std::string tag = who + " at " + step.at("at").get<std::string>() + " " + step.at("operation").get<std::string>();
    EXPECT_EQ(r.status, step.at("status").get<std::string>()) << tag;
    EXPECT_EQ(r.state, step.at("state").get<std::string>()) << tag;
    std::vector<std::string> events;
    for (const auto& n : r.notifications) events.push_back(n.event);
    EXPECT_EQ(events, step.at("events").get<std::vector<std::string>>()) << tag;
    if (step.contains("fields")) EXPECT_EQ(r.fields, step.at("fields")) << tag;
}

std::int64_t int_value(const mbdt::ExecutableDT& dt, const std::string& name) {
    return std::get<std::int64_t>(dt.instance().values.at(name));
}

DeviceRequest load_plan(vtime::Millis at, int days, int roll_total, int per_intake = 1) {
    Json plan{{"start_date", vtime::format_date(at)}, {"dose_times", {"08:30"}}, {"doses_per_intake", per_intake},
              {"plan_days", days}, {"roll_total", roll_total}};
    return {"load_plan", Json{{"plan", plan}}, at};
}

}  // namespace

TEST(Mbdt, GoldenPlanTrace) {
    const Json g = golden();
    auto dt = test::medido_twin(42, "dt-golden");
    for (const auto& step : g.at("steps")) {
        const auto req = request_at(step);
        expect_matches(step, dt.step(req, req.virtual_now), "mbdt");
    }
    for (const auto& [name, v] : g.at("final").items()) EXPECT_EQ(int_value(dt, name), v.get<std::int64_t>()) << name;
    EXPECT_EQ(dt.event_log().size(), g.at("steps").size());
}

TEST(Mbdt, GoldenNotificationFields) {
    const Json g = golden();
    auto dt = test::medido_twin();
    std::vector<Notification> all;
    for (const auto& step : g.at("steps")) {
        const auto req = request_at(step);
        for (auto& n : dt.step(req, req.virtual_now).notifications) all.push_back(n);
    }
    ASSERT_EQ(all.size(), 4u);
    EXPECT_EQ(all[0].fields.at("doses"), 1);
    EXPECT_EQ(all[0].fields.at("due"), *vtime::parse_datetime("2024-03-01T08:30:00Z"));
    EXPECT_EQ(all[2].fields.at("due"), *vtime::parse_datetime("2024-03-02T08:30:00Z"));
    EXPECT_EQ(all[3].fields, (Json{{"taken", 1}, {"missed", 1}}));
}

TEST(RefDevice, GoldenPlanTrace) {
    const Json g = golden();
    refdev::RefDevice dev;
    for (const auto& step : g.at("steps")) {
        const auto req = request_at(step);
        expect_matches(step, dev.handle(req, req.virtual_now), "refdev");
    }
    EXPECT_EQ(dev.roll_remaining(), g.at("final").at("roll_remaining").get<std::int64_t>());
    EXPECT_EQ(dev.dispensed_total(), g.at("final").at("dispensed_total").get<std::int64_t>());
    EXPECT_EQ(dev.roll_loaded(), g.at("final").at("roll_loaded").get<std::int64_t>());
}

TEST(Mbdt, InstantiateFillsDefaults) {
    const auto inst = mbdt::instantiate(test::medido(), Json::object(), harness::kCampaignStart);
    EXPECT_EQ(inst.values.size(), test::medido()->properties.size());
    EXPECT_EQ(inst.values.at("roll_capacity"), model::Value{std::int64_t{28}});
    EXPECT_EQ(inst.values.at("language"), model::Value{std::string("no")});
    EXPECT_EQ(inst.created_at, harness::kCampaignStart);
}

TEST(Mbdt, InstantiateRejectsBadInputs) {
    EXPECT_THROW(mbdt::instantiate(test::medido(), Json{{"no_such_property", 1}}), ValidationError);
    EXPECT_THROW(mbdt::instantiate(test::medido(), Json{{"roll_capacity", "many"}}), ValidationError);
    EXPECT_THROW(mbdt::instantiate(test::medido(), Json{{"alarm_volume", "deafening"}}), ValidationError);
    try {
        mbdt::instantiate(test::medido(), Json{{"roll_capacity", 0}});
        FAIL() << "no violation";
    } catch (const mbdt::ConstraintViolationError& e) {
        ASSERT_FALSE(e.violations().empty());
        EXPECT_EQ(e.violations()[0].id, "capacity_positive");
        EXPECT_EQ(e.violations()[0].message, "roll capacity must be positive");
    }
}

TEST(Mbdt, PlanExceedingRollIsAnErrorAndLeavesStateAlone) {
    auto dt = test::medido_twin();
    const auto before = dt.instance().values;
    const auto r = dt.step(load_plan(harness::kCampaignStart, 30, 28), harness::kCampaignStart);
    EXPECT_EQ(r.status, "error");
    EXPECT_EQ(r.state, "Idle");
    ASSERT_TRUE(r.message);
    EXPECT_NE(r.message->find("plan_fits_capacity"), std::string::npos);
    EXPECT_EQ(dt.instance().values, before);
    EXPECT_EQ(dt.current_state(), "Idle");
    EXPECT_EQ(dt.event_log().size(), 1u);
    EXPECT_EQ(dt.event_log()[0].status, "error");
}

TEST(Mbdt, ProtocolErrors) {
    auto dt = test::medido_twin();
    const auto t = harness::kCampaignStart;
    auto r = dt.step({"reboot", Json::object(), t}, t);
    EXPECT_EQ(r.status, "error");
    EXPECT_EQ(r.message, unknown_operation_message("reboot"));
    r = dt.step({"set_language", Json{{"language", "fr"}}, t}, t);
    EXPECT_EQ(r.message, malformed_payload_message("set_language"));
    r = dt.step({"set_language", Json{{"language", "en"}, {"extra", 1}}, t}, t);
    EXPECT_EQ(r.message, malformed_payload_message("set_language"));
    r = dt.step({"load_plan", Json{{"plan", "weekly"}}, t}, t);
    EXPECT_EQ(r.message, malformed_payload_message("load_plan"));
    r = dt.step({"confirm_intake", Json::object(), t}, t);
    EXPECT_EQ(r.status, "rejected");
    EXPECT_EQ(r.message, rejected_message("Idle"));
    EXPECT_EQ(dt.steps(), 5u);
}

TEST(Mbdt, SettingsPersistAcrossStates) {
    auto dt = test::medido_twin();
    const auto t = harness::kCampaignStart;
    EXPECT_EQ(dt.step({"set_alarm", Json{{"volume", "high"}}, t}, t).status, "accepted");
    EXPECT_EQ(dt.step(load_plan(t, 1, 1), t).state, "PlanLoaded");
    EXPECT_EQ(dt.step({"set_language", Json{{"language", "sv"}}, t}, t).state, "PlanLoaded");
    const auto r = dt.step({"get_status", Json::object(), t}, t);
    EXPECT_EQ(r.fields, (Json{{"language", "sv"}, {"alarm_volume", "high"}}));
    EXPECT_EQ(dt.step({"cancel_plan", Json::object(), t}, t).state, "Idle");
    EXPECT_FALSE(dt.plan());
}

TEST(Mbdt, SnapshotRestoreIsIdentical) {
    auto dt = test::medido_twin(9, "dt-snap");
    const Json g = golden();
    for (std::size_t i = 0; i < 5; ++i) {
        const auto req = request_at(g.at("steps")[i]);
        dt.step(req, req.virtual_now);
    }
    const auto back = mbdt::ExecutableDT::restore(dt.snapshot(), test::medido());
    EXPECT_TRUE(back.same_as(dt));
    EXPECT_EQ(back.id(), "dt-snap");
    EXPECT_EQ(back.event_log(), dt.event_log());
    EXPECT_EQ(back.snapshot(), dt.snapshot());

    const auto slim = mbdt::ExecutableDT::restore(dt.snapshot(false), test::medido(), dt.event_log());
    EXPECT_TRUE(slim.same_as(dt));
}

TEST(Mbdt, SnapshotIntegrity) {
    auto dt = test::medido_twin();
    std::string s = dt.snapshot();
    const auto at = s.find("\"Idle\"");
    ASSERT_NE(at, std::string::npos);
    s.replace(at, 6, "\"Miss\"");
    EXPECT_THROW(mbdt::ExecutableDT::restore(s, test::medido()), IntegrityError);
    EXPECT_THROW(mbdt::ExecutableDT::restore("{not json", test::medido()), IntegrityError);

    const auto other = std::make_shared<const model::DeviceModel>([] {
        auto m = *test::medido();
        m.version = "9.9.9";
        return m;
    }());
    EXPECT_THROW(mbdt::ExecutableDT::restore(dt.snapshot(), other), IntegrityError);
    // the slim form needs a log of the recorded length
    auto a = test::medido_twin();
    a.step({"get_status", Json::object(), 0}, 0);
    EXPECT_THROW(mbdt::ExecutableDT::restore(a.snapshot(false), test::medido(), {}), IntegrityError);
}

TEST(Mbdt, SameAsIgnoresIdOnly) {
    auto a = test::medido_twin(1, "dt-a");
    auto b = test::medido_twin(1, "dt-b");
    EXPECT_TRUE(a.same_as(b));
    a.step({"set_alarm", Json{{"volume", "low"}}, 0}, 0);
    EXPECT_FALSE(a.same_as(b));
    b.step({"set_alarm", Json{{"volume", "low"}}, 0}, 0);
    EXPECT_TRUE(a.same_as(b));
    EXPECT_FALSE(test::medido_twin(1).same_as(test::medido_twin(2)));
}

TEST(Mbdt, GeneratedIdsAreSequential) {
    const auto inst = mbdt::instantiate(test::medido(), Json::object());
    mbdt::reserve_twin_ids(500000);
    const auto a = mbdt::make_executable(inst, 1);
    const auto b = mbdt::make_executable(inst, 1);
    EXPECT_GT(a.id(), "dt-500000");
    EXPECT_EQ(a.id().size(), b.id().size());
    EXPECT_LT(a.id(), b.id());
}

TEST(Mbdt, EventRecordJsonRoundTrip) {
    mbdt::EventRecord e{3, 42, "tick", "dispensed", "PlanLoaded", "DispenseDue", {{"dose_dispensed", 42, Json{{"doses", 1}}}}};
    EXPECT_EQ(mbdt::event_from_json(mbdt::to_json(e)), e);
}
