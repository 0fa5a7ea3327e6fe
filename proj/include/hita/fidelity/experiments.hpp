#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "hita/fidelity/fidelity.hpp"
#include "hita/harness/campaign.hpp"
#include "hita/mbdt/twin.hpp"
#include "hita/mldt/network.hpp"
#include "hita/refdev/ref_device.hpp"

namespace hita::fidelity {

// ---- fidelity of both twin kinds against a calibrated reference -------

struct CalibratedFidelityConfig {
    harness::CampaignConfig campaign;      // requests defaults to 12000
    refdev::RefDeviceConfig reference;     // its divergence p is replaced by the calibrated one
    std::size_t train_records = 2000;      // leading records of the undisturbed trace
    mldt::TrainingConfig training;
    double mbdt_target = 0.94;
    double mldt_target = 0.955;

    CalibratedFidelityConfig();
};

struct FidelityArm {
    std::string kind;                // "mbdt" or "mldt"
    double baseline_agreement = 0;   // outcome agreement with the undisturbed reference
    double divergence = 0;           // calibrated flip probability
    double target = 0;
    double expected_similarity = 0;  // oracle value at the calibrated divergence
    FidelityReport report;
};

struct CalibratedFidelityResult {
    FidelityArm mbdt;
    FidelityArm mldt;
    mldt::TrainingReport training;
    mldt::PreprocessReport preprocess;
    double heldout_accuracy = 0;
    std::size_t heldout_rows = 0;
    std::vector<harness::TraceRecord> trace;  // undisturbed reference stream
    std::shared_ptr<const mldt::TrainedModel> model;
};

CalibratedFidelityResult run_calibrated_fidelity(const mbdt::ModelPtr& model, const CalibratedFidelityConfig& cfg);
Json to_json(const CalibratedFidelityResult& r);

// Outcome agreement of a trained model with recorded responses, records [from, end).
double heldout_accuracy(const mldt::TrainedModel& m, const std::vector<harness::TraceRecord>& trace, std::size_t from);

// ---- fidelity across fleet sizes on a running dt-server ---------------

struct ScalabilityConfig {
    std::vector<std::size_t> batch_sizes{10, 20, 30, 40, 50, 60, 70, 80, 90, 100};
    harness::CampaignConfig campaign;  // requests defaults to 600
    refdev::RefDeviceConfig reference;
    std::string url;                   // dt-server base URL
    std::string api_key;
    std::string device_type = "medido";
    std::string kind = "mb";
    std::string model_ref;
    Json inputs = Json::object();
    std::uint64_t twin_seed = 42;

    ScalabilityConfig();
    // Throws ValidationError for an empty, non-increasing or zero batch list.
    void validate() const;
};

struct BatchResult {
    std::size_t size = 0;
    bool completed = false;
    std::string error;
    std::vector<std::string> ids;
    std::vector<double> fidelities;  // one per twin, campaign order
    Summary summary;
    double create_ms = 0;
    double campaign_ms = 0;
    bool isolation_ok = false;
    std::vector<std::string> isolation_failures;
};

struct ScalabilityReport {
    std::vector<BatchResult> batches;

    bool all_completed() const;
    bool isolation_ok() const;
    // max - min of the per-batch medians (fraction, not percent).
    double median_spread() const;
};

// Each batch creates b twins plus one idle canary, runs the shared campaign
// against the b twins and a fresh reference device, scores every twin, checks
// the canary stayed untouched and the twins agree with each other, then deletes
// the batch. A failing batch is recorded and the next one still runs.
ScalabilityReport run_scalability(const ScalabilityConfig& cfg, const std::vector<model::EndpointDef>& api, const ResponseEncoder& enc);
Json to_json(const ScalabilityReport& r);
// Per-batch box-plot data.
Json boxplot_json(const ScalabilityReport& r);
std::string scalability_table(const ScalabilityReport& r);

// ---- time cost per pipeline step ---------------------------------------

struct TimeCostStep {
    std::string stage;        // "mbdt" or "mldt"
    std::string step;
    std::string description;
    std::string automation;   // "manual", "semi-automatic", "automatic"
    bool measured = false;
    std::vector<double> samples_ms;
    double mean_ms = 0;
    std::string documented;   // reported range for steps that are not measured
};

struct TimeCostReport {
    std::vector<TimeCostStep> steps;
    std::size_t batch = 100;

    const TimeCostStep* find(const std::string& stage, const std::string& step) const;
};

struct TimeCostConfig {
    std::filesystem::path model_file;
    std::filesystem::path work_dir;
    std::size_t runs = 10;
    std::size_t batch = 100;
    std::string device_type = "medido";
    harness::CampaignConfig data_campaign;  // requests defaults to 2000
    refdev::RefDeviceConfig reference;
    mldt::TrainingConfig training;

    TimeCostConfig();
};

// One warm-up run per step, then cfg.runs timed runs on a monotonic clock.
TimeCostReport measure_time_costs(const TimeCostConfig& cfg);
Json to_json(const TimeCostReport& r);
std::string timecost_tables(const TimeCostReport& r);

}  // namespace hita::fidelity
