#include "hita/fidelity/fidelity.hpp"
#include "hita/harness/campaign.hpp"
#include "hita/mbdt/twin.hpp"
#include "property.hpp"
#include "support.hpp"

using namespace hita;
using hita::prop::check;

namespace {

std::vector<harness::ScheduledRequest> random_schedule(Rng& rng, std::uint64_t requests) {
    auto cfg = test::small_campaign(rng.next(), requests);
    cfg.rate_per_minute = static_cast<double>(rng.uniform_int(5, 200));
    cfg.tick_interval = rng.uniform_int(1, 5) * vtime::kMinute;
    return harness::build_schedule(cfg, test::medido()->api);
}

std::int64_t prop_int(const mbdt::ExecutableDT& dt, const char* name) {
    return std::get<std::int64_t>(dt.instance().values.at(name));
}

}  // namespace

PROPERTY("mbdt", deterministic_responses, 200) {
    const auto schedule = random_schedule(rng, static_cast<std::uint64_t>(rng.uniform_int(10, 150)));
    const std::uint64_t seed = rng.next();
    auto a = test::medido_twin(seed, "a"), b = test::medido_twin(seed, "a");
    for (const auto& s : schedule) {
        const auto ra = a.step(s.request, s.request.virtual_now);
        const auto rb = b.step(s.request, s.request.virtual_now);
        check(canonical(to_json(ra)) == canonical(to_json(rb)), "responses differ at seq " + std::to_string(s.seq));
    }
    check(a.snapshot() == b.snapshot(), "final snapshots differ");
}

PROPERTY("mbdt", dose_conservation, 300) {
    const auto schedule = random_schedule(rng, static_cast<std::uint64_t>(rng.uniform_int(20, 200)));
    auto dt = test::medido_twin(rng.next());
    for (const auto& s : schedule) {
        dt.step(s.request, s.request.virtual_now);
        const auto dispensed = prop_int(dt, "dispensed_total"), remaining = prop_int(dt, "roll_remaining");
        check(dispensed + remaining == prop_int(dt, "roll_loaded"), "dispensed + remaining != roll total at seq " + std::to_string(s.seq));
        check(remaining >= 0, "negative roll");
    }
}

PROPERTY("mbdt", self_fidelity_is_exactly_one, 200) {
    const auto paired = test::self_paired(rng, static_cast<std::size_t>(rng.uniform_int(5, 120)));
    const auto rep = fidelity::evaluate_fidelity(paired, "a", "b", fidelity::ResponseEncoder::for_model(*test::medido()));
    check(rep.mean_cosine == 1.0, "self fidelity " + std::to_string(rep.mean_cosine));
    check(rep.outcome_agreements == rep.n, "outcomes disagree");
}

PROPERTY("mbdt", snapshot_restore_continues_identically, 200) {
    const auto schedule = random_schedule(rng, static_cast<std::uint64_t>(rng.uniform_int(10, 120)));
    const auto cut = rng.index(schedule.size());
    auto dt = test::medido_twin(rng.next());
    for (std::size_t i = 0; i < cut; ++i) dt.step(schedule[i].request, schedule[i].request.virtual_now);
    auto copy = mbdt::ExecutableDT::restore(dt.snapshot(), test::medido());
    check(copy.same_as(dt), "restored twin differs");
    for (std::size_t i = cut; i < schedule.size(); ++i) {
        const auto& r = schedule[i].request;
        check(canonical(to_json(dt.step(r, r.virtual_now))) == canonical(to_json(copy.step(r, r.virtual_now))), "diverged after restore");
    }
}

PROPERTY("mbdt", event_log_records_every_step, 200) {
    const auto schedule = random_schedule(rng, static_cast<std::uint64_t>(rng.uniform_int(5, 80)));
    auto dt = test::medido_twin(rng.next());
    std::uint64_t n = 0;
    for (const auto& s : schedule) {
        const auto r = dt.step(s.request, s.request.virtual_now);
        ++n;
        check(dt.event_log().size() == n, "log length");
        check(dt.event_log().back().status == r.status && dt.event_log().back().to_state == r.state, "log entry mismatch");
    }
}
