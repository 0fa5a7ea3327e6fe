// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Pass numbers to run a subset, e.g. `acceptance 1 3 8`.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>
#include <sstream>

#include "hita/fidelity/experiments.hpp"
#include "hita/fidelity/stats.hpp"
#include "hita/mldt/dataset.hpp"
#include "hita/mldt/network.hpp"
#include "hita/server/dt_server.hpp"
#include "hita/server/store.hpp"
#include "oracles.hpp"
#include "property.hpp"
#include "restart.hpp"
#include "support.hpp"

using namespace hita;
using Clock = std::chrono::steady_clock;

namespace {

constexpr std::size_t kClasses = 5;

struct Verdict {
    std::vector<std::string> failures;
    std::ostringstream detail;

    bool ok() const { return failures.empty(); }
    void require(bool cond, const std::string& what) {
        if (!cond) failures.push_back(what);
    }
    std::string line() const {
        std::string out = detail.str();
        for (const auto& f : failures) out += (out.empty() ? "" : " | ") + f;
        return out;
    }
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

harness::CampaignConfig shipped_campaign() {
    auto c = harness::campaign_config_from_json(Json::parse(server::read_file(std::string(HITA_SOURCE_DIR) + "/config/campaign.json")));
    c.targets.clear();
    return c;
}

// The 12000-request campaign against the golden twin and the undisturbed device,
// shared by criteria 3 and 7.
const harness::CampaignResult& golden_campaign(double* seconds = nullptr) {
    static double took = 0;
    static const harness::CampaignResult r = [] {
        const auto t0 = Clock::now();
        auto res = test::mbdt_vs_ref(shipped_campaign());
        took = seconds_since(t0);
        return res;
    }();
    if (seconds) *seconds = took;
    return r;
}

std::vector<double> random_values(Rng& rng, std::size_t n) {
    std::vector<double> v(n);
    // few distinct values so ties and zero differences are common
    for (auto& x : v) x = rng.bernoulli(0.5) ? static_cast<double>(rng.uniform_int(-3, 3)) : rng.uniform(-2.0, 2.0);
    return v;
}

void statistics_oracles(Verdict& v) {
    Rng rng(1);
    const auto t0 = Clock::now();
    double worst_cos = 0;
    std::size_t instances = 0;
    for (; instances < 1000; ++instances) {
        std::vector<double> u, w;
        do {
            const auto dims = static_cast<std::size_t>(rng.uniform_int(1, 16));
            u = random_values(rng, dims);
            w = random_values(rng, dims);
        } while (std::all_of(u.begin(), u.end(), [](double x) { return x == 0; }) || std::all_of(w.begin(), w.end(), [](double x) { return x == 0; }));
        worst_cos = std::max(worst_cos, std::abs(fidelity::cosine(u, w) - static_cast<double>(oracle::cosine(u, w))));

        const auto na = static_cast<std::size_t>(rng.uniform_int(1, 12));
        const auto a = random_values(rng, na);
        const auto b = random_values(rng, rng.bernoulli(0.5) ? na : static_cast<std::size_t>(rng.uniform_int(1, 12)));
        const auto got = fidelity::cliffs_delta(a, b);
        const auto want = oracle::cliffs_delta(a, b);
        v.require(got.delta == want.delta && got.greater == want.greater && got.less == want.less, "Cliff's delta differs from the oracle");

        const auto pb = random_values(rng, na);
        const auto gw = fidelity::wilcoxon_signed_rank(a, pb);
        const auto ow = oracle::wilcoxon_exact(a, pb);
        v.require(gw.p == ow.p && gw.w_plus == ow.w_plus && gw.w_minus == ow.w_minus, "Wilcoxon differs from the oracle");
    }
    const double s = seconds_since(t0);
    v.require(worst_cos <= 1e-12, "cosine error above 1e-12");
    v.require(s < 10, "took longer than 10 s");
    v.detail << instances << " instances, max cosine error " << worst_cos << ", delta and p exact, " << s << " s";
}

void gradient_check(Verdict& v) {
    const auto t0 = Clock::now();
    auto cfg = shipped_campaign();
    cfg.requests = 300;
    const auto fm = mldt::preprocess(test::mbdt_vs_ref(cfg).trace, refdev::kOutcomeClasses);
    double worst = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        // loss() has no dropout, so the check runs on the deterministic network
        const auto net = mldt::init_network(fm.X.cols, {8, 4}, kClasses, seed);
        const auto analytic = mldt::gradient(net, fm.X, fm.y);
        auto params = mldt::flatten(net);
        auto tmp = net;
        const double h = 1e-5;
        for (std::size_t k = 0; k < params.size(); ++k) {
            const double p0 = params[k];
            params[k] = p0 + h;
            mldt::unflatten(tmp, params);
            const double up = mldt::loss(tmp, fm.X, fm.y);
            params[k] = p0 - h;
            mldt::unflatten(tmp, params);
            const double down = mldt::loss(tmp, fm.X, fm.y);
            params[k] = p0;
            const double numeric = (up - down) / (2 * h);
            worst = std::max(worst, std::abs(analytic[k] - numeric) / std::max(1e-8, std::abs(analytic[k]) + std::abs(numeric)));
        }
    }
    const double s = seconds_since(t0);
    v.require(worst <= 1e-4, "relative error above 1e-4");
    v.require(s < 30, "took longer than 30 s");
    v.detail << "5 seeds, max relative error " << worst << ", " << s << " s";
}

void golden_behavior(Verdict& v) {
    double s = 0;
    const auto& res = golden_campaign(&s);
    const auto& p = res.paired;
    v.require(!p.aborted && p.generated == 12000, "campaign did not run 12000 requests");
    std::size_t compared = 0, differing = 0;
    for (const auto& rec : p.records) {
        if (!rec.replies[0].response || !rec.replies[1].response) {
            ++differing;
            continue;
        }
        ++compared;
        if (to_json(*rec.replies[0].response).dump() != to_json(*rec.replies[1].response).dump()) ++differing;
    }
    v.require(differing == 0, std::to_string(differing) + " responses differ");
    v.require(s < 120, "took longer than 2 min");
    v.detail << compared << " responses (" << p.generated << " requests, " << p.ticks << " ticks) byte-identical, " << s << " s";
}

void calibrated_fidelity(Verdict& v) {
    const auto t0 = Clock::now();
    fidelity::CalibratedFidelityConfig cfg;
    cfg.campaign = shipped_campaign();
    const auto r = fidelity::run_calibrated_fidelity(test::medido(), cfg);
    for (const auto* arm : {&r.mbdt, &r.mldt}) {
        const double p = oracle::flip_rate_for(arm->baseline_agreement, arm->target, kClasses);
        const auto& rep = arm->report;
        const std::string k = arm->kind + ": ";
        v.require(std::abs(arm->divergence - p) <= 1e-9, k + "divergence differs from the oracle's");
        v.require(std::abs(rep.mean_cosine - arm->target) <= 0.02, k + "mean cosine outside target +-0.02");
        v.require(rep.wilcoxon.p > 0.05, k + "Wilcoxon p <= 0.05");
        v.require(std::abs(rep.cliffs.delta) < 0.147 && rep.cliffs.magnitude == fidelity::Magnitude::Negligible, k + "delta not negligible");
        v.detail << arm->kind << " target " << arm->target << " p=" << p << " cosine " << rep.mean_cosine << " wilcoxon p " << rep.wilcoxon.p
                 << " delta " << rep.cliffs.delta << "; ";
    }
    v.detail << seconds_since(t0) << " s";
}

void scalability(Verdict& v) {
    const auto t0 = Clock::now();
    fidelity::ScalabilityConfig sc;
    sc.reference.divergence.p = oracle::flip_rate_for(1.0, 0.94, kClasses);
    auto registry = std::make_shared<server::FleetRegistry>();
    registry->register_device_type(sc.device_type, test::medido());
    auto keys = std::make_shared<server::ApiKeyTable>(0);
    sc.api_key = "acceptance";
    keys->add_key(sc.api_key);
    server::DtServer srv(registry, keys, 128);
    sc.url = "http://127.0.0.1:" + std::to_string(srv.start("127.0.0.1", 0));
    const auto r = fidelity::run_scalability(sc, test::medido()->api, fidelity::ResponseEncoder::for_model(*test::medido()));
    srv.stop();
    const double s = seconds_since(t0);
    std::size_t twins = 0;
    for (const auto& b : r.batches) {
        twins += b.fidelities.size();
        v.require(b.fidelities.size() == b.size, "batch " + std::to_string(b.size) + " scored " + std::to_string(b.fidelities.size()) + " twins");
    }
    v.require(r.batches.size() == 10, "expected 10 batches");
    v.require(r.all_completed(), "a batch did not complete");
    v.require(r.isolation_ok(), "isolation check failed");
    v.require(r.median_spread() <= 0.01, "median spread above 1 point");
    v.require(s < 600, "took longer than 10 min");
    v.detail << r.batches.size() << " batches, " << twins << " twins, median spread " << 100 * r.median_spread() << " points, isolated, " << s << " s";
}

void time_cost(Verdict& v) {
    const auto t0 = Clock::now();
    test::TempDir dir("hita-accept-time");
    fidelity::TimeCostConfig tc;
    tc.model_file = HITA_MODEL_FILE;
    tc.work_dir = dir.path() / "work";
    const auto r = fidelity::measure_time_costs(tc);
    for (const auto& s : r.steps)
        if (s.automation == "automatic") v.require(s.measured && s.samples_ms.size() == 10, s.stage + " " + s.step + " lacks 10 samples");
    auto mean = [&](const char* stage, const std::string& step) {
        const auto* s = r.find(stage, step);
        if (!s) {
            v.require(false, std::string("missing step ") + stage + " " + step);
            return 0.0;
        }
        double sum = 0;
        for (double x : s->samples_ms) sum += x;
        return sum / static_cast<double>(s->samples_ms.size());
    };
    const double mb1 = mean("mbdt", "create-1"), mbn = mean("mbdt", "create-100");
    const double ml1 = mean("mldt", "create-1"), mln = mean("mldt", "create-100");
    v.require(mbn < 10 * mb1, "MBDT batch creation not below 10x single");
    v.require(mln < 10 * ml1, "MLDT batch creation not below 10x single");
    v.require(ml1 < mb1, "MLDT creation not faster than MBDT creation");
    v.detail << "mbdt " << mb1 << " / " << mbn << " ms, mldt " << ml1 << " / " << mln << " ms (single / 100), ratios " << mbn / mb1 << "x, "
             << mln / ml1 << "x, " << seconds_since(t0) << " s";
}

void training(Verdict& v) {
    const auto& trace = golden_campaign().trace;
    std::vector<harness::TraceRecord> head(trace.begin(), trace.begin() + 2000);
    const auto t0 = Clock::now();
    const auto m = mldt::train(mldt::preprocess(head, refdev::kOutcomeClasses), mldt::TrainingConfig{});
    const double s = seconds_since(t0);
    std::size_t right = 0, total = 0;
    for (std::size_t i = 2000; i < trace.size(); ++i) {
        right += mldt::infer(m, trace[i].request, trace[i].since_previous).status == trace[i].response.status;
        ++total;
    }
    const double acc = static_cast<double>(right) / static_cast<double>(total);
    const double ratio = m.report.final_loss / m.report.initial_loss;
    v.require(ratio <= 0.10, "final loss above 10% of initial");
    v.require(acc >= 0.90, "held-out accuracy below 0.90");
    v.require(s < 300, "training took longer than 5 min");
    v.detail << "loss " << m.report.initial_loss << " -> " << m.report.final_loss << " (" << 100 * ratio << "%), held-out accuracy " << acc << " on "
             << total << " records, " << s << " s";
}

void persistence(Verdict& v) {
    test::TempDir dir("hita-accept-restart");
    const auto r = test::kill_and_restart(dir.path(), 8, 8, 200);
    for (const auto& f : r.failures) v.require(false, f);
    v.detail << r.recovered << "/" << r.twins << " twins recovered after SIGKILL, " << r.acknowledged << " acknowledged requests, " << r.suffix
                 << " suffix requests equal to the control";
}

void properties(Verdict& v) {
    const std::set<std::string> required = {"device-model", "mbdt", "mldt", "dt-server", "ts-stub", "ref-device", "harness", "fidelity", "cli"};
    std::set<std::string> seen;
    std::size_t count = 0, cases = 0;
    for (const auto& p : prop::registry()) {
        seen.insert(p.module);
        ++count;
        v.require(p.cases >= prop::kMinCases, p.module + "." + p.name + " has fewer than 200 cases");
        const auto r = prop::run(p);
        cases += r.cases;
        v.require(r.ok, p.module + "." + p.name + " failed at case " + std::to_string(r.failing_case) + ": " + r.failure);
        v.require(r.cases == p.cases, p.module + "." + p.name + " stopped early");
    }
    for (const auto& m : required) v.require(seen.count(m) > 0, "no properties for " + m);
    v.detail << count << " properties over " << seen.size() << " modules, " << cases << " cases";
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<std::string, std::function<void(Verdict&)>>> criteria = {
        {"statistics oracles", statistics_oracles}, {"gradient check", gradient_check},     {"golden behavior", golden_behavior},
        {"calibrated fidelity", calibrated_fidelity}, {"scalability", scalability},          {"time cost", time_cost},
        {"training", training},                     {"kill and restart", persistence},     {"property suites", properties}};
    std::set<int> only;
    for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
    bool all = true;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int n = static_cast<int>(i + 1);
        if (!only.empty() && !only.count(n)) continue;
        Verdict v;
        try {
            criteria[i].second(v);
        } catch (const std::exception& e) {
            v.require(false, std::string("exception: ") + e.what());
        }
        all = all && v.ok();
        std::printf("%s %d %s: %s\n", v.ok() ? "PASS" : "FAIL", n, criteria[i].first.c_str(), v.line().c_str());
        std::fflush(stdout);
    }
    return all ? 0 : 1;
}
