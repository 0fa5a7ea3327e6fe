#include "hita/mldt/network.hpp"

#include <cmath>
#include <cstring>
#include <limits>

#include "hita/common/digest.hpp"
#include "hita/common/rng.hpp"

namespace hita::mldt {

void TrainingConfig::validate() const {
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ValidationError("dropout must be in [0,1)");
    if (epochs < 1) throw ValidationError("epochs must be at least 1");
    if (!(learning_rate > 0.0)) throw ValidationError("learning rate must be positive");
    if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1 && epsilon > 0)) throw ValidationError("bad Adam parameters");
    for (auto d : hidden_dims)
        if (d == 0) throw ValidationError("hidden layers must be non-empty");
}

Json to_json(const TrainingConfig& c) {
    return Json{{"hidden_dims", c.hidden_dims}, {"dropout", c.dropout}, {"learning_rate", c.learning_rate}, {"epochs", c.epochs},
                {"beta1", c.beta1},             {"beta2", c.beta2},     {"epsilon", c.epsilon},             {"seed", c.seed}};
}

TrainingConfig training_config_from_json(const Json& j) {
    TrainingConfig c;
    try {
        c.hidden_dims = j.value("hidden_dims", c.hidden_dims);
        c.dropout = j.value("dropout", c.dropout);
        c.learning_rate = j.value("learning_rate", c.learning_rate);
        c.epochs = j.value("epochs", c.epochs);
        c.beta1 = j.value("beta1", c.beta1);
        c.beta2 = j.value("beta2", c.beta2);
        c.epsilon = j.value("epsilon", c.epsilon);
        c.seed = j.value("seed", c.seed);
    } catch (const Json::exception& e) {
        throw ValidationError(std::string("training config: ") + e.what());
    }
    c.validate();
    return c;
}

std::size_t Network::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.w.size() + l.b.size();
    return n;
}

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Returns log-softmax into out.
void log_softmax(const std::vector<double>& z, std::vector<double>& out) {
    double mx = -std::numeric_limits<double>::infinity();
    for (double v : z) mx = std::max(mx, v);
    double s = 0;
    for (double v : z) s += std::exp(v - mx);
    const double lse = mx + std::log(s);
    out.resize(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i] - lse;
}

void affine(const Layer& l, const double* in, std::vector<double>& out) {
    out.assign(l.out, 0.0);
    for (std::size_t o = 0; o < l.out; ++o) {
        const double* w = l.w.data() + o * l.in;
        double s = l.b[o];
        for (std::size_t i = 0; i < l.in; ++i) s += w[i] * in[i];
        out[o] = s;
    }
}

// Mean cross-entropy and its gradient (flattened as in flatten()). With rng set,
// inverted dropout with rate p is applied to every hidden activation.
double forward_backward(const Network& net, const Matrix& X, const std::vector<std::size_t>& y, Rng* rng, double p,
                        std::vector<double>* grad) {
    const std::size_t L = net.layers.size();
    const std::size_t n = X.rows;
    if (grad) grad->assign(net.parameter_count(), 0.0);
    std::vector<std::size_t> offsets(L);
    for (std::size_t l = 0, off = 0; l < L; ++l) {
        offsets[l] = off;
        off += net.layers[l].w.size() + net.layers[l].b.size();
    }
    std::vector<std::vector<double>> act(L + 1), mask(L), z(L);
    std::vector<double> logp, delta, prev;
    double total = 0;
    const double keep = 1.0 - p;
    for (std::size_t r = 0; r < n; ++r) {
        act[0].assign(X.row(r), X.row(r) + X.cols);
        for (std::size_t l = 0; l < L; ++l) {
            affine(net.layers[l], act[l].data(), z[l]);
            if (l + 1 < L) {
                act[l + 1].resize(z[l].size());
                mask[l].assign(z[l].size(), 1.0);
                for (std::size_t k = 0; k < z[l].size(); ++k) {
                    if (rng && p > 0) mask[l][k] = rng->uniform01() < keep ? 1.0 / keep : 0.0;
                    act[l + 1][k] = sigmoid(z[l][k]) * mask[l][k];
                }
            }
        }
        log_softmax(z[L - 1], logp);
        total -= logp[y[r]];
        if (!grad) continue;
        delta.resize(logp.size());
        for (std::size_t k = 0; k < logp.size(); ++k) delta[k] = (std::exp(logp[k]) - (k == y[r] ? 1.0 : 0.0)) / static_cast<double>(n);
        for (std::size_t l = L; l-- > 0;) {
            const Layer& layer = net.layers[l];
            double* gw = grad->data() + offsets[l];
            double* gb = gw + layer.w.size();
            const std::vector<double>& a = act[l];
            for (std::size_t o = 0; o < layer.out; ++o) {
                const double d = delta[o];
                gb[o] += d;
                double* row = gw + o * layer.in;
                for (std::size_t i = 0; i < layer.in; ++i) row[i] += d * a[i];
            }
            if (l == 0) break;
            prev.assign(layer.in, 0.0);
            for (std::size_t o = 0; o < layer.out; ++o) {
                const double* w = layer.w.data() + o * layer.in;
                for (std::size_t i = 0; i < layer.in; ++i) prev[i] += w[i] * delta[o];
            }
            // a[i] = sigmoid(z) * mask; d/dz = mask * s * (1 - s)
            for (std::size_t i = 0; i < layer.in; ++i) {
                const double s = sigmoid(z[l - 1][i]);
                prev[i] *= mask[l - 1][i] * s * (1.0 - s);
            }
            delta.swap(prev);
        }
    }
    return total / static_cast<double>(n);
}

}  // namespace

std::vector<double> Network::probabilities(const std::vector<double>& x) const {
    std::vector<double> a = x, z, logp;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        affine(layers[l], a.data(), z);
        if (l + 1 < layers.size()) {
            a.resize(z.size());
            for (std::size_t k = 0; k < z.size(); ++k) a[k] = sigmoid(z[k]);
        }
    }
    log_softmax(z, logp);
    std::vector<double> p(logp.size());
    for (std::size_t k = 0; k < p.size(); ++k) p[k] = std::exp(logp[k]);
    return p;
}

Network init_network(std::size_t inputs, const std::vector<std::size_t>& hidden, std::size_t outputs, std::uint64_t seed) {
    Rng rng(seed);
    Network net;
    std::size_t in = inputs;
    std::vector<std::size_t> dims = hidden;
    dims.push_back(outputs);
    for (std::size_t out : dims) {
        Layer l{in, out, std::vector<double>(in * out), std::vector<double>(out, 0.0)};
        const double a = std::sqrt(6.0 / static_cast<double>(in + out));
        for (double& w : l.w) w = rng.uniform(-a, a);
        net.layers.push_back(std::move(l));
        in = out;
    }
    return net;
}

double loss(const Network& net, const Matrix& X, const std::vector<std::size_t>& y) {
    return forward_backward(net, X, y, nullptr, 0.0, nullptr);
}

double accuracy(const Network& net, const Matrix& X, const std::vector<std::size_t>& y) {
    if (X.rows == 0) return 0.0;
    std::size_t hit = 0;
    for (std::size_t r = 0; r < X.rows; ++r) {
        const auto p = net.probabilities(std::vector<double>(X.row(r), X.row(r) + X.cols));
        std::size_t best = 0;
        for (std::size_t k = 1; k < p.size(); ++k)
            if (p[k] > p[best]) best = k;
        hit += best == y[r];
    }
    return static_cast<double>(hit) / static_cast<double>(X.rows);
}

std::vector<double> gradient(const Network& net, const Matrix& X, const std::vector<std::size_t>& y) {
    std::vector<double> g;
    forward_backward(net, X, y, nullptr, 0.0, &g);
    return g;
}

std::vector<double> flatten(const Network& net) {
    std::vector<double> out;
    out.reserve(net.parameter_count());
    for (const auto& l : net.layers) {
        out.insert(out.end(), l.w.begin(), l.w.end());
        out.insert(out.end(), l.b.begin(), l.b.end());
    }
    return out;
}

void unflatten(Network& net, const std::vector<double>& params) {
    if (params.size() != net.parameter_count()) throw ValidationError("parameter vector has the wrong size");
    std::size_t k = 0;
    for (auto& l : net.layers) {
        for (double& w : l.w) w = params[k++];
        for (double& b : l.b) b = params[k++];
    }
}

double grad_check(const Network& net, const Matrix& X, const std::vector<std::size_t>& y, double h) {
    const std::vector<double> analytic = gradient(net, X, y);
    std::vector<double> params = flatten(net);
    Network probe = net;
    double worst = 0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double saved = params[i];
        params[i] = saved + h;
        unflatten(probe, params);
        const double up = loss(probe, X, y);
        params[i] = saved - h;
        unflatten(probe, params);
        const double down = loss(probe, X, y);
        params[i] = saved;
        const double numeric = (up - down) / (2 * h);
        const double rel = std::abs(analytic[i] - numeric) / std::max(1e-8, std::abs(analytic[i]) + std::abs(numeric));
        worst = std::max(worst, rel);
    }
    return worst;
}

TrainedModel train(const FeatureMatrix& data, const TrainingConfig& cfg) {
    cfg.validate();
    if (data.X.rows == 0) throw ValidationError("training matrix is empty");
    if (data.y.size() != data.X.rows) throw ValidationError("label count does not match rows");
    const std::size_t classes = data.spec.class_names.size();
    for (auto label : data.y)
        if (label >= classes) throw ValidationError("label outside class set");

    TrainedModel m;
    m.spec = data.spec;
    m.config = cfg;
    m.net = init_network(data.X.cols, cfg.hidden_dims, classes, cfg.seed);
    m.report.rows = data.X.rows;
    m.report.initial_loss = loss(m.net, data.X, data.y);

    Rng dropout_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<double> params = flatten(m.net);
    std::vector<double> mom(params.size(), 0.0), vel(params.size(), 0.0), grad;
    double b1t = 1.0, b2t = 1.0;
    m.report.epoch_loss.reserve(static_cast<std::size_t>(cfg.epochs));
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const double l = forward_backward(m.net, data.X, data.y, cfg.dropout > 0 ? &dropout_rng : nullptr, cfg.dropout, &grad);
        if (!std::isfinite(l)) throw TrainingDiverged(epoch);
        m.report.epoch_loss.push_back(l);
        b1t *= cfg.beta1;
        b2t *= cfg.beta2;
        for (std::size_t i = 0; i < params.size(); ++i) {
            mom[i] = cfg.beta1 * mom[i] + (1 - cfg.beta1) * grad[i];
            vel[i] = cfg.beta2 * vel[i] + (1 - cfg.beta2) * grad[i] * grad[i];
            const double mh = mom[i] / (1 - b1t);
            const double vh = vel[i] / (1 - b2t);
            params[i] -= cfg.learning_rate * mh / (std::sqrt(vh) + cfg.epsilon);
        }
        unflatten(m.net, params);
    }
    m.report.final_loss = loss(m.net, data.X, data.y);
    if (!std::isfinite(m.report.final_loss)) throw TrainingDiverged(cfg.epochs);
    m.report.final_accuracy = accuracy(m.net, data.X, data.y);
    return m;
}

Prediction predict(const TrainedModel& m, const DeviceRequest& req, vtime::Millis since_previous) {
    Prediction p;
    p.probabilities = m.net.probabilities(m.spec.encode(extract_features(req, since_previous)));
    for (std::size_t k = 1; k < p.probabilities.size(); ++k)
        if (p.probabilities[k] > p.probabilities[p.label]) p.label = k;
    return p;
}

DeviceResponse infer(const TrainedModel& m, const DeviceRequest& req, vtime::Millis since_previous) {
    DeviceResponse r;
    if (!req.payload.is_object()) {
        r.status = "error";
        r.message = malformed_payload_message(req.operation);
        return r;
    }
    const Prediction p = predict(m, req, since_previous);
    r.status = m.spec.class_names.at(p.label);
    Json probs = Json::object();
    for (std::size_t k = 0; k < p.probabilities.size(); ++k) probs[m.spec.class_names[k]] = p.probabilities[k];
    r.fields["probabilities"] = std::move(probs);
    return r;
}

DeviceResponse MlTwin::step(const DeviceRequest& req) {
    ++steps_;
    // Clock ticks carry no learned behaviour and do not count as requests.
    if (req.operation == kTickOperation) return DeviceResponse{"accepted", "", Json::object(), {}, std::nullopt};
    const vtime::Millis since = last_ < 0 ? -1 : req.virtual_now - last_;
    last_ = req.virtual_now;
    return infer(*model_, req, since);
}

// ---- model file -----------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'H', 'I', 'T', 'A', 'M', 'L', 'D', 'T'};
constexpr std::uint32_t kFormatVersion = 1;

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
void put_f64(std::string& out, double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, sizeof bits);
    put_u64(out, bits);
}
std::uint64_t get_u64(const std::string& in, std::size_t at) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
    return v;
}
double get_f64(const std::string& in, std::size_t at) {
    const std::uint64_t bits = get_u64(in, at);
    double d;
    std::memcpy(&d, &bits, sizeof d);
    return d;
}
std::uint32_t get_u32(const std::string& in, std::size_t at) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
    return v;
}

}  // namespace

std::string save_model(const TrainedModel& m) {
    Json shapes = Json::array();
    for (const auto& l : m.net.layers) shapes.push_back({l.in, l.out});
    const Json header{{"config", to_json(m.config)},
                      {"spec", to_json(m.spec)},
                      {"shapes", shapes},
                      {"report",
                       {{"initial_loss", m.report.initial_loss},
                        {"final_loss", m.report.final_loss},
                        {"final_accuracy", m.report.final_accuracy},
                        {"rows", m.report.rows}}}};
    const std::string h = canonical(header);
    std::string out(kMagic, sizeof kMagic);
    put_u32(out, kFormatVersion);
    put_u64(out, h.size());
    out += h;
    const std::vector<double> params = flatten(m.net);
    put_u64(out, params.size());
    for (double d : params) put_f64(out, d);
    put_u64(out, m.report.epoch_loss.size());
    for (double d : m.report.epoch_loss) put_f64(out, d);
    out += sha256_hex(out);
    return out;
}

TrainedModel load_model(const std::string& bytes) {
    constexpr std::size_t kDigest = 64;
    if (bytes.size() < sizeof kMagic + 4 + 8 + 8 + kDigest) throw IntegrityError("model file is truncated");
    if (bytes.compare(0, sizeof kMagic, kMagic, sizeof kMagic) != 0) throw IntegrityError("not a model file");
    const std::uint32_t version = get_u32(bytes, sizeof kMagic);
    if (version != kFormatVersion) throw ModelVersionError("unsupported model file version " + std::to_string(version));
    const std::string body = bytes.substr(0, bytes.size() - kDigest);
    if (sha256_hex(body) != bytes.substr(bytes.size() - kDigest)) throw IntegrityError("model file checksum mismatch");

    std::size_t at = sizeof kMagic + 4;
    const std::uint64_t hlen = get_u64(bytes, at);
    at += 8;
    if (hlen > body.size() - at) throw IntegrityError("model header length out of range");
    const Json header = Json::parse(body.substr(at, hlen), nullptr, false);
    if (header.is_discarded()) throw IntegrityError("model header is not JSON");
    at += hlen;
    if (body.size() - at < 8) throw IntegrityError("model file is truncated");
    const std::uint64_t count = get_u64(bytes, at);
    at += 8;
    if (count > (body.size() - at) / 8 || body.size() - at < count * 8 + 8) throw IntegrityError("weight block size mismatch");
    const std::size_t curve_at = at + count * 8;
    const std::uint64_t curve = get_u64(bytes, curve_at);
    if (curve > (body.size() - curve_at - 8) / 8 || body.size() - curve_at - 8 != curve * 8) throw IntegrityError("loss curve size mismatch");

    TrainedModel m;
    try {
        m.config = training_config_from_json(header.at("config"));
        m.spec = feature_spec_from_json(header.at("spec"));
        for (const auto& s : header.at("shapes")) {
            const auto in = s.at(0).get<std::size_t>(), out = s.at(1).get<std::size_t>();
            m.net.layers.push_back({in, out, std::vector<double>(in * out), std::vector<double>(out)});
        }
        const Json& r = header.at("report");
        m.report.initial_loss = r.at("initial_loss").get<double>();
        m.report.final_loss = r.at("final_loss").get<double>();
        m.report.final_accuracy = r.at("final_accuracy").get<double>();
        m.report.rows = r.at("rows").get<std::size_t>();
    } catch (const Json::exception& e) {
        throw IntegrityError(std::string("model header: ") + e.what());
    } catch (const ValidationError& e) {
        throw IntegrityError(std::string("model header: ") + e.what());
    }
    if (m.net.parameter_count() != count) throw IntegrityError("weight count does not match layer shapes");
    if (m.net.inputs() != m.spec.width() || m.net.outputs() != m.spec.class_names.size())
        throw IntegrityError("layer shapes do not match the encoders");
    std::vector<double> params(count);
    for (std::size_t i = 0; i < count; ++i) params[i] = get_f64(bytes, at + 8 * i);
    unflatten(m.net, params);
    m.report.epoch_loss.resize(curve);
    for (std::size_t i = 0; i < curve; ++i) m.report.epoch_loss[i] = get_f64(bytes, curve_at + 8 + 8 * i);
    return m;
}

std::string model_file_digest(const std::string& bytes) {
    if (bytes.size() < 64) throw IntegrityError("model file too short");
    return bytes.substr(bytes.size() - 64);
}

}  // namespace hita::mldt
