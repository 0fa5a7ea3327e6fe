#include <algorithm>
#include <cmath>
#include <numeric>

#include "hita/mldt/dataset.hpp"
#include "hita/mldt/network.hpp"
#include "hita/refdev/ref_device.hpp"
#include "property.hpp"
#include "support.hpp"

using namespace hita;
using namespace hita::mldt;
using hita::prop::check;

namespace {

std::vector<std::size_t> random_hidden(Rng& rng) {
    std::vector<std::size_t> h(static_cast<std::size_t>(rng.uniform_int(1, 3)));
    for (auto& d : h) d = static_cast<std::size_t>(rng.uniform_int(1, 6));
    return h;
}

Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols) {
    Matrix X(rows, cols);
    for (auto& v : X.data) v = rng.bernoulli(0.3) ? 0.0 : rng.uniform(-2, 2);
    return X;
}

const FeatureMatrix& shared_features() {
    static const FeatureMatrix fm = preprocess(test::mbdt_vs_ref(test::small_campaign(11, 600)).trace, refdev::kOutcomeClasses);
    return fm;
}

}  // namespace

PROPERTY("mldt", softmax_is_a_distribution, 300) {
    const std::size_t in = static_cast<std::size_t>(rng.uniform_int(1, 20));
    const std::size_t out = static_cast<std::size_t>(rng.uniform_int(2, 6));
    const auto net = init_network(in, random_hidden(rng), out, rng.next());
    const auto X = random_matrix(rng, 5, in);
    for (std::size_t r = 0; r < X.rows; ++r) {
        const auto p = net.probabilities(std::vector<double>(X.row(r), X.row(r) + in));
        check(p.size() == out, "output width");
        const double s = std::accumulate(p.begin(), p.end(), 0.0);
        check(std::abs(s - 1.0) <= 1e-12, "sum " + std::to_string(s));
        for (double v : p) check(v >= 0.0 && v <= 1.0, "probability out of range");
    }
}

// Analytic gradient against this test's own central differences.
PROPERTY("mldt", gradient_matches_finite_differences, 200) {
    const std::size_t in = static_cast<std::size_t>(rng.uniform_int(1, 8));
    const std::size_t classes = static_cast<std::size_t>(rng.uniform_int(2, 5));
    const auto net = init_network(in, random_hidden(rng), classes, rng.next());
    const std::size_t rows = static_cast<std::size_t>(rng.uniform_int(1, 12));
    const auto X = random_matrix(rng, rows, in);
    std::vector<std::size_t> y(rows);
    for (auto& v : y) v = rng.index(classes);

    const auto a = gradient(net, X, y);
    auto p = flatten(net);
    Network tmp = net;
    const double h = 1e-5;
    for (std::size_t k = 0; k < p.size(); ++k) {
        auto q = p;
        q[k] += h;
        unflatten(tmp, q);
        const double up = loss(tmp, X, y);
        q[k] = p[k] - h;
        unflatten(tmp, q);
        const double n = (up - loss(tmp, X, y)) / (2 * h);
        const double rel = std::abs(a[k] - n) / std::max(1e-8, std::abs(a[k]) + std::abs(n));
        check(rel <= 1e-4, "parameter " + std::to_string(k) + " relative error " + std::to_string(rel));
    }
}

PROPERTY("mldt", loss_is_row_order_invariant, 200) {
    const std::size_t in = static_cast<std::size_t>(rng.uniform_int(1, 10));
    const auto net = init_network(in, random_hidden(rng), 3, rng.next());
    const std::size_t rows = static_cast<std::size_t>(rng.uniform_int(2, 20));
    auto X = random_matrix(rng, rows, in);
    std::vector<std::size_t> y(rows);
    for (auto& v : y) v = rng.index(3);
    const double before = loss(net, X, y);
    check(before >= 0.0, "negative loss");
    std::vector<std::size_t> perm(rows);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = rows - 1; i > 0; --i) std::swap(perm[i], perm[rng.index(i + 1)]);
    Matrix P(rows, in);
    std::vector<std::size_t> py(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        std::copy(X.row(perm[r]), X.row(perm[r]) + in, P.data.begin() + static_cast<std::ptrdiff_t>(r * in));
        py[r] = y[perm[r]];
    }
    check(std::abs(loss(net, P, py) - before) <= 1e-12 * std::max(1.0, before), "loss depends on row order");
}

PROPERTY("mldt", one_hot_segments_select_exactly_one, 300) {
    const auto& fm = shared_features();
    const auto& spec = fm.spec;
    const std::size_t r = rng.index(fm.X.rows);
    const std::vector<double> x(fm.X.row(r), fm.X.row(r) + fm.X.cols);
    const std::string op = *spec.decode_categorical(0, x);
    for (std::size_t i = 0; i < spec.categorical.size(); ++i) {
        const auto& enc = spec.categorical[i];
        const std::size_t off = spec.offset_of_categorical(i);
        double sum = 0;
        for (std::size_t k = 0; k < enc.width(); ++k) {
            check(x[off + k] == 0.0 || x[off + k] == 1.0, "one-hot value");
            sum += x[off + k];
        }
        check(sum == ((enc.op.empty() || enc.op == op) ? 1.0 : 0.0), "segment " + enc.column);
    }
    for (std::size_t k = spec.offset_of_categorical(spec.categorical.size()); k < x.size(); ++k)
        check(x[k] >= 0.0 && x[k] <= 1.0, "scaled numeric outside [0,1]");
}

PROPERTY("mldt", model_file_round_trip, 200) {
    TrainedModel m;
    m.spec = shared_features().spec;
    m.config.hidden_dims = random_hidden(rng);
    m.config.seed = rng.next();
    m.config.epochs = static_cast<int>(rng.uniform_int(1, 5000));
    m.net = init_network(m.spec.width(), m.config.hidden_dims, m.spec.class_names.size(), m.config.seed);
    for (int i = 0; i < static_cast<int>(rng.uniform_int(0, 20)); ++i) m.report.epoch_loss.push_back(rng.uniform(0, 3));
    m.report.initial_loss = rng.uniform(0, 3);
    m.report.final_loss = rng.uniform(0, 3);
    const auto bytes = save_model(m);
    const auto back = load_model(bytes);
    check(back.net == m.net && back.spec == m.spec && back.config == m.config, "model changed across save/load");
    check(back.report.epoch_loss == m.report.epoch_loss, "loss curve changed");
    check(save_model(back) == bytes, "save not stable");
    auto damaged = bytes;
    damaged[rng.index(bytes.size())] ^= static_cast<char>(1 << rng.uniform_int(0, 7));
    bool rejected = false;
    try {
        (void)load_model(damaged);
    } catch (const IntegrityError&) {
        rejected = true;
    }
    check(rejected, "damaged file accepted");
}
