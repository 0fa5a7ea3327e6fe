#include "hita/fidelity/fidelity.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "hita/common/errors.hpp"

namespace hita::fidelity {

ResponseEncoder::ResponseEncoder(std::vector<std::string> classes, std::vector<std::string> numeric_fields)
    : classes_(std::move(classes)), numeric_(std::move(numeric_fields)) {
    if (classes_.empty()) throw ValidationError("response encoding needs at least one outcome class");
}

ResponseEncoder ResponseEncoder::for_model(const model::DeviceModel& m) {
    std::vector<std::string> numeric;
    for (const auto& ep : m.api)
        for (const auto& f : ep.response) {
            using model::TypeKind;
            const auto k = f.type.kind;
            if (k != TypeKind::Int && k != TypeKind::Float && k != TypeKind::Duration && k != TypeKind::Datetime) continue;
            if (std::find(numeric.begin(), numeric.end(), f.name) == numeric.end()) numeric.push_back(f.name);
        }
    return ResponseEncoder(m.outcomes, std::move(numeric));
}

std::vector<double> ResponseEncoder::encode(const DeviceResponse& r) const {
    std::vector<double> v(width(), 0.0);
    auto it = std::find(classes_.begin(), classes_.end(), r.status);
    v[static_cast<std::size_t>(it - classes_.begin())] = 1.0;
    for (std::size_t i = 0; i < numeric_.size(); ++i) {
        if (!r.fields.is_object()) break;
        auto f = r.fields.find(numeric_[i]);
        if (f == r.fields.end() || !f->is_number()) continue;
        const double x = f->get<double>();
        if (std::isfinite(x)) v[classes_.size() + 1 + i] = x / (1.0 + std::abs(x));
    }
    return v;
}

Json to_json(const FidelityReport& r) {
    return Json{{"twin", r.twin},
                {"reference", r.reference},
                {"n", r.n},
                {"excluded", r.excluded},
                {"outcome_agreement", r.n ? static_cast<double>(r.outcome_agreements) / static_cast<double>(r.n) : 0.0},
                {"mean_cosine", r.mean_cosine},
                {"wilcoxon",
                 {{"p", r.wilcoxon.p},
                  {"w_plus", r.wilcoxon.w_plus},
                  {"w_minus", r.wilcoxon.w_minus},
                  {"nonzero", r.wilcoxon.n},
                  {"exact", r.wilcoxon.exact},
                  {"all_zero", r.wilcoxon.all_zero}}},
                {"cliffs_delta", {{"delta", r.cliffs.delta}, {"magnitude", to_string(r.cliffs.magnitude)}}},
                {"alpha", r.alpha},
                {"significant", r.significant()}};
}

std::string fidelity_table(const std::vector<FidelityReport>& reports) {
    std::string out = "twin                 reference    n       similarity  wilcoxon p  cliff's delta\n";
    char buf[256];
    for (const auto& r : reports) {
        std::snprintf(buf, sizeof buf, "%-20s %-12s %-7zu %9.2f%%  %10.4f  %+.3f (%s)\n", r.twin.c_str(), r.reference.c_str(), r.n,
                      100.0 * r.mean_cosine, r.wilcoxon.p, r.cliffs.delta, to_string(r.cliffs.magnitude).c_str());
        out += buf;
    }
    return out;
}

FidelityReport evaluate_fidelity(const harness::PairedResponses& paired, const std::string& twin, const std::string& reference,
                                 const ResponseEncoder& enc) {
    const auto ti = paired.target_index(twin);
    const auto ri = paired.target_index(reference);
    if (!ti) throw ValidationError("unknown twin target '" + twin + "'");
    if (!ri) throw ValidationError("unknown reference target '" + reference + "'");

    FidelityReport rep;
    rep.twin = twin;
    rep.reference = reference;
    std::vector<double> a, b;
    double sum = 0;
    for (const auto& rec : paired.records) {
        if (rec.item.tick) continue;
        const auto& rt = rec.replies[*ti];
        const auto& rr = rec.replies[*ri];
        if (!rt.response || !rr.response) {
            ++rep.excluded;
            continue;
        }
        const auto u = enc.encode(*rt.response);
        const auto v = enc.encode(*rr.response);
        sum += cosine(u, v);
        a.insert(a.end(), u.begin(), u.end());
        b.insert(b.end(), v.begin(), v.end());
        rep.outcome_agreements += rt.response->status == rr.response->status;
        ++rep.n;
    }
    if (rep.n == 0) throw ValidationError("no comparable response pairs");
    rep.mean_cosine = sum / static_cast<double>(rep.n);
    rep.wilcoxon = wilcoxon_signed_rank(a, b);
    rep.cliffs = cliffs_delta(a, b);
    return rep;
}

double expected_similarity(double agreement, double p, std::size_t classes) {
    if (classes < 2) throw ValidationError("need at least two classes");
    const double c = static_cast<double>(classes);
    return agreement * (1.0 - p) + (1.0 - agreement) * p / (c - 1.0);
}

double divergence_for_target(double agreement, double target, std::size_t classes) {
    if (classes < 2) throw ValidationError("need at least two classes");
    const double c = static_cast<double>(classes);
    const double slope = agreement - (1.0 - agreement) / (c - 1.0);
    if (slope <= 0) throw ValidationError("twin agreement too low to calibrate");
    const double p = (agreement - target) / slope;
    if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("target similarity not reachable with divergence in [0,1]");
    return p;
}

}  // namespace hita::fidelity
