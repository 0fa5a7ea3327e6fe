#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hita/common/json.hpp"
#include "hita/common/wire.hpp"
#include "hita/fidelity/stats.hpp"
#include "hita/harness/campaign.hpp"
#include "hita/model/device_model.hpp"

namespace hita::fidelity {

// Outcome one-hot (declared outcomes, then one slot for anything else) followed by
// every declared numeric response field squashed with x / (1 + |x|). Absent or
// non-numeric fields encode as 0.
class ResponseEncoder {
public:
    ResponseEncoder(std::vector<std::string> classes, std::vector<std::string> numeric_fields);
    static ResponseEncoder for_model(const model::DeviceModel& m);

    std::size_t width() const { return classes_.size() + 1 + numeric_.size(); }
    const std::vector<std::string>& classes() const { return classes_; }
    const std::vector<std::string>& numeric_fields() const { return numeric_; }
    std::vector<double> encode(const DeviceResponse& r) const;

private:
    std::vector<std::string> classes_;
    std::vector<std::string> numeric_;
};

inline constexpr double kAlpha = 0.05;

struct FidelityReport {
    std::string twin;
    std::string reference;
    std::size_t n = 0;              // pairs compared (generated requests both targets answered)
    std::size_t excluded = 0;       // pairs with a missing reply (429, transport error)
    std::size_t outcome_agreements = 0;
    double mean_cosine = 0;
    WilcoxonResult wilcoxon;
    CliffsDelta cliffs;
    double alpha = kAlpha;

    bool significant() const { return wilcoxon.p < alpha; }
};

Json to_json(const FidelityReport& r);
// One row per report: similarity, p-value, effect size.
std::string fidelity_table(const std::vector<FidelityReport>& reports);

// Compares the twin's replies against the reference's over generated requests.
// The two rank statistics run over the flattened response vectors, twin as the
// first sample. Throws ValidationError for unknown targets or zero comparable pairs.
FidelityReport evaluate_fidelity(const harness::PairedResponses& paired, const std::string& twin, const std::string& reference,
                                 const ResponseEncoder& enc);

// Expected mean cosine when a twin that agrees with the undisturbed reference on a
// fraction `agreement` of outcomes faces a reference flipping each outcome with
// probability p to one of the other (classes - 1) outcomes uniformly.
double expected_similarity(double agreement, double p, std::size_t classes);
// Inverse of expected_similarity in p. Throws ValidationError when the target is
// not reachable with p in [0,1].
double divergence_for_target(double agreement, double target, std::size_t classes);

}  // namespace hita::fidelity
