#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "hita/common/errors.hpp"
#include "hita/common/wire.hpp"
#include "hita/mldt/dataset.hpp"

namespace hita::mldt {

struct TrainingConfig {
    std::vector<std::size_t> hidden_dims{8, 4};
    double dropout = 0.2;
    double learning_rate = 0.01;
    int epochs = 3000;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t seed = 42;

    // Throws ValidationError.
    void validate() const;
    bool operator==(const TrainingConfig&) const = default;
};

Json to_json(const TrainingConfig& c);
TrainingConfig training_config_from_json(const Json& j);

struct Layer {
    std::size_t in = 0;
    std::size_t out = 0;
    std::vector<double> w;  // out x in, row-major
    std::vector<double> b;  // out
    bool operator==(const Layer&) const = default;
};

// Sigmoid hidden layers, softmax output.
struct Network {
    std::vector<Layer> layers;
    bool operator==(const Network&) const = default;

    std::size_t inputs() const { return layers.empty() ? 0 : layers.front().in; }
    std::size_t outputs() const { return layers.empty() ? 0 : layers.back().out; }
    std::size_t parameter_count() const;

    std::vector<double> probabilities(const std::vector<double>& x) const;
};

// Uniform Glorot weights from the given seed, zero biases.
Network init_network(std::size_t inputs, const std::vector<std::size_t>& hidden, std::size_t outputs, std::uint64_t seed);

// Mean cross-entropy of the dropout-free network.
double loss(const Network& net, const Matrix& X, const std::vector<std::size_t>& y);
double accuracy(const Network& net, const Matrix& X, const std::vector<std::size_t>& y);
// Analytic gradient of loss(), flattened layer by layer as (w, b).
std::vector<double> gradient(const Network& net, const Matrix& X, const std::vector<std::size_t>& y);
std::vector<double> flatten(const Network& net);
void unflatten(Network& net, const std::vector<double>& params);

// Largest |analytic - numeric| / max(1e-8, |analytic| + |numeric|) over all
// parameters, numeric gradients by central differences with step h.
double grad_check(const Network& net, const Matrix& X, const std::vector<std::size_t>& y, double h = 1e-5);

class TrainingDiverged : public std::runtime_error {
public:
    explicit TrainingDiverged(int epoch)
        : std::runtime_error("training diverged at epoch " + std::to_string(epoch)), epoch_(epoch) {}
    int epoch() const { return epoch_; }

private:
    int epoch_;
};

struct TrainingReport {
    std::vector<double> epoch_loss;  // training loss (dropout active) per epoch
    double initial_loss = 0;         // dropout-free, before the first update
    double final_loss = 0;           // dropout-free, after the last update
    double final_accuracy = 0;       // on the training matrix
    std::size_t rows = 0;
};

struct TrainedModel {
    Network net;
    FeatureSpec spec;
    TrainingConfig config;
    TrainingReport report;
};

// Full-batch Adam on mean cross-entropy, inverted dropout on hidden activations.
TrainedModel train(const FeatureMatrix& data, const TrainingConfig& cfg);

struct Prediction {
    std::size_t label = 0;
    std::vector<double> probabilities;
};

Prediction predict(const TrainedModel& m, const DeviceRequest& req, vtime::Millis since_previous);
// Outcome = argmax class (lowest index on ties); class probabilities under fields.probabilities.
DeviceResponse infer(const TrainedModel& m, const DeviceRequest& req, vtime::Millis since_previous = -1);

class ModelVersionError : public IntegrityError {
public:
    using IntegrityError::IntegrityError;
};

// Binary container: magic, format version, length-prefixed JSON header (config,
// encoders, classes, shapes, report), weights then the per-epoch loss curve as
// little-endian IEEE-754 doubles,
// SHA-256 of everything before it.
std::string save_model(const TrainedModel& m);
TrainedModel load_model(const std::string& bytes);
// The trailing checksum of a model file (verified by load_model, not here).
std::string model_file_digest(const std::string& bytes);

// A twin answering from a trained model; remembers when it last saw a request.
class MlTwin {
public:
    explicit MlTwin(std::shared_ptr<const TrainedModel> m, vtime::Millis last_request = -1, std::uint64_t steps = 0)
        : model_(std::move(m)), last_(last_request), steps_(steps) {}
    DeviceResponse step(const DeviceRequest& req);
    const TrainedModel& model() const { return *model_; }
    std::shared_ptr<const TrainedModel> model_ptr() const { return model_; }
    vtime::Millis last_request() const { return last_; }
    std::uint64_t steps() const { return steps_; }

private:
    std::shared_ptr<const TrainedModel> model_;
    vtime::Millis last_ = -1;
    std::uint64_t steps_ = 0;
};

}  // namespace hita::mldt
