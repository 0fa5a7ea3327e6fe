#include "hita/harness/campaign.hpp"
#include "hita/refdev/ref_device.hpp"
#include "property.hpp"
#include "support.hpp"

using namespace hita;
using hita::prop::check;

namespace {

const std::vector<std::string> kLanguages = {"no", "en", "sv", "da"};
const std::vector<std::string> kVolumes = {"low", "medium", "high"};

std::vector<harness::ScheduledRequest> random_schedule(Rng& rng, const refdev::RefDeviceConfig& dev) {
    auto cfg = test::small_campaign(rng.next(), static_cast<std::uint64_t>(rng.uniform_int(20, 300)));
    cfg.rate_per_minute = static_cast<double>(rng.uniform_int(1, 120));
    cfg.tick_interval = rng.uniform_int(1, 10) * vtime::kMinute;
    cfg.roll_capacity = dev.roll_capacity;
    cfg.generator.invalid_ratio = rng.uniform(0.0, 0.5);
    return harness::build_schedule(cfg, test::medido()->api);
}

refdev::RefDeviceConfig random_device(Rng& rng) {
    refdev::RefDeviceConfig c;
    c.language = kLanguages[rng.index(kLanguages.size())];
    c.alarm_volume = kVolumes[rng.index(kVolumes.size())];
    c.roll_capacity = static_cast<int>(rng.uniform_int(7, 56));
    c.grace_window = rng.uniform_int(1, 120) * vtime::kMinute;
    c.processing_delay = rng.uniform_int(0, 5000);
    return c;
}

}  // namespace

// Without divergence the reference device and a twin instantiated with the same
// settings answer every request, ticks included, with the same bytes.
PROPERTY("ref-device", equivalent_to_twin_without_divergence, 200) {
    const auto dev_cfg = random_device(rng);
    const Json inputs{{"language", dev_cfg.language},
                      {"alarm_volume", dev_cfg.alarm_volume},
                      {"roll_capacity", dev_cfg.roll_capacity},
                      {"grace_window", vtime::format_duration(dev_cfg.grace_window)}};
    auto dt = test::medido_twin(rng.next(), "dt-eq", inputs);
    refdev::RefDevice dev(dev_cfg);
    for (const auto& s : random_schedule(rng, dev_cfg)) {
        const auto a = canonical(to_json(dt.step(s.request, s.request.virtual_now)));
        const auto b = canonical(to_json(dev.handle(s.request, s.request.virtual_now)));
        check(a == b, "seq " + std::to_string(s.seq) + " " + canonical(to_json(s.request)) + "\n twin " + a + "\n ref  " + b);
    }
}

PROPERTY("ref-device", divergence_reproducible_from_seed, 200) {
    auto c = random_device(rng);
    c.divergence = {rng.uniform01(), rng.bernoulli(0.5) ? refdev::DivergenceKind::Flip : refdev::DivergenceKind::Perturb, rng.next()};
    refdev::RefDevice a(c), b(c);
    for (const auto& s : random_schedule(rng, c))
        check(a.handle(s.request, s.request.virtual_now) == b.handle(s.request, s.request.virtual_now), "same seed diverged differently");
    check(a.perturbed() == b.perturbed(), "perturbation counts differ");
}

// Each flip changes exactly the outcome class; the count of changed statuses is the perturbation count.
PROPERTY("ref-device", flips_touch_status_only, 200) {
    auto c = random_device(rng);
    c.divergence = {rng.uniform01(), refdev::DivergenceKind::Flip, rng.next()};
    auto clean_cfg = c;
    clean_cfg.divergence.p = 0;
    refdev::RefDevice noisy(c), clean(clean_cfg);
    std::uint64_t changed = 0;
    for (const auto& s : random_schedule(rng, c)) {
        auto x = noisy.handle(s.request, s.request.virtual_now);
        const auto y = clean.handle(s.request, s.request.virtual_now);
        if (x.status != y.status) ++changed;
        x.status = y.status;
        check(x == y, "flip changed more than the status");
    }
    check(changed == noisy.perturbed(), "changed " + std::to_string(changed) + " vs perturbed " + std::to_string(noisy.perturbed()));
}

PROPERTY("ref-device", perturb_keeps_status, 200) {
    auto c = random_device(rng);
    c.divergence = {rng.uniform01(), refdev::DivergenceKind::Perturb, rng.next()};
    auto clean_cfg = c;
    clean_cfg.divergence.p = 0;
    refdev::RefDevice noisy(c), clean(clean_cfg);
    for (const auto& s : random_schedule(rng, c))
        check(noisy.handle(s.request, s.request.virtual_now).status == clean.handle(s.request, s.request.virtual_now).status,
              "perturbation changed the status");
}

PROPERTY("ref-device", queue_is_fifo_and_serial, 200) {
    auto c = random_device(rng);
    refdev::RefDevice dev(c);
    vtime::Millis prev_done = 0, arrival = harness::kCampaignStart;
    for (int i = 0; i < 100; ++i) {
        arrival += rng.uniform_int(0, 2 * c.processing_delay + 1);
        const auto t = dev.submit({"get_status", Json::object(), arrival}, arrival);
        check(t.started_at == std::max(arrival, prev_done), "start time");
        check(t.completed_at == t.started_at + c.processing_delay, "completion time");
        prev_done = t.completed_at;
    }
}
