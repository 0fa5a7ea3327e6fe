#include "hita/mldt/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "hita/common/errors.hpp"
#include "hita/common/plan.hpp"

namespace hita::mldt {

std::string since_last_bucket(vtime::Millis d) {
    if (d < 0) return "first";
    if (d < vtime::kSecond) return "lt1s";
    if (d < 10 * vtime::kSecond) return "1-10s";
    if (d < vtime::kMinute) return "10-60s";
    return "gt60s";
}

RawFeatures extract_features(const DeviceRequest& req, vtime::Millis since_previous) {
    RawFeatures f;
    f.operation = req.operation;
    f.categorical["operation"] = req.operation;
    f.categorical["since_last"] = since_last_bucket(since_previous);
    if (!req.payload.is_object()) return f;
    for (const auto& [key, v] : req.payload.items()) {
        const std::string col = req.operation + "." + key;
        if (v.is_string()) {
            f.categorical[col] = v.get<std::string>();
        } else if (v.is_boolean()) {
            f.categorical[col] = v.get<bool>() ? "true" : "false";
        } else if (v.is_number()) {
            const double x = v.get<double>();
            if (std::isfinite(x)) f.numeric[col] = x;
        } else if (v.is_object()) {
            try {
                const MedicationPlan p = plan_from_json(v);
                f.numeric[col + ".intakes_per_day"] = p.intakes_per_day();
                f.numeric[col + ".doses_per_intake"] = p.doses_per_intake;
                f.numeric[col + ".days"] = p.plan_days;
                f.numeric[col + ".total_doses"] = static_cast<double>(p.total_doses());
                f.numeric[col + ".roll_total"] = p.roll_total;
                f.numeric[col + ".surplus"] = static_cast<double>(p.roll_total - p.total_doses());
                f.numeric[col + ".lead_minutes"] = static_cast<double>(p.first_intake() - req.virtual_now) / vtime::kMinute;
            } catch (const ValidationError&) {
                // treated as absent
            }
        }
    }
    return f;
}

std::size_t FeatureSpec::width() const {
    std::size_t w = numeric.size();
    for (const auto& c : categorical) w += c.width();
    return w;
}

std::size_t FeatureSpec::offset_of_categorical(std::size_t i) const {
    std::size_t off = 0;
    for (std::size_t k = 0; k < i; ++k) off += categorical[k].width();
    return off;
}

namespace {

bool applies(const std::string& op, const RawFeatures& f) { return op.empty() || op == f.operation; }

}  // namespace

std::vector<double> FeatureSpec::encode(const RawFeatures& f) const {
    std::vector<double> x(width(), 0.0);
    std::size_t off = 0;
    for (const auto& c : categorical) {
        if (applies(c.op, f)) {
            std::size_t idx = c.categories.size();
            if (auto it = f.categorical.find(c.column); it != f.categorical.end()) {
                auto pos = std::lower_bound(c.categories.begin(), c.categories.end(), it->second);
                if (pos != c.categories.end() && *pos == it->second) idx = static_cast<std::size_t>(pos - c.categories.begin());
            }
            x[off + idx] = 1.0;
        }
        off += c.width();
    }
    for (const auto& n : numeric) {
        if (applies(n.op, f)) {
            auto it = f.numeric.find(n.column);
            x[off] = n.scale(it != f.numeric.end() ? it->second : n.median);
        }
        ++off;
    }
    return x;
}

std::optional<std::string> FeatureSpec::decode_categorical(std::size_t i, const std::vector<double>& x) const {
    const auto& c = categorical.at(i);
    const std::size_t off = offset_of_categorical(i);
    for (std::size_t k = 0; k < c.width(); ++k)
        if (x.at(off + k) == 1.0) return k < c.categories.size() ? c.categories[k] : std::string(kUnknownCategory);
    return std::nullopt;
}

Json to_json(const FeatureSpec& s) {
    Json cats = Json::array();
    for (const auto& c : s.categorical) cats.push_back({{"column", c.column}, {"op", c.op}, {"categories", c.categories}});
    Json nums = Json::array();
    for (const auto& n : s.numeric)
        nums.push_back({{"column", n.column}, {"op", n.op}, {"min", n.min}, {"max", n.max}, {"median", n.median}});
    return Json{{"categorical", cats}, {"numeric", nums}, {"classes", s.class_names}};
}

FeatureSpec feature_spec_from_json(const Json& j) {
    FeatureSpec s;
    for (const auto& c : j.at("categorical"))
        s.categorical.push_back({c.at("column").get<std::string>(), c.at("op").get<std::string>(),
                                 c.at("categories").get<std::vector<std::string>>()});
    for (const auto& n : j.at("numeric"))
        s.numeric.push_back({n.at("column").get<std::string>(), n.at("op").get<std::string>(), n.at("min").get<double>(),
                             n.at("max").get<double>(), n.at("median").get<double>()});
    s.class_names = j.at("classes").get<std::vector<std::string>>();
    return s;
}

namespace {

std::string column_op(const std::string& column) {
    if (column == "operation" || column == "since_last") return {};
    return column.substr(0, column.find('.'));
}

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

FeatureMatrix preprocess(const std::vector<TraceRecord>& records, const std::vector<std::string>& class_names) {
    if (records.size() < 50) throw ValidationError("preprocess needs at least 50 records, got " + std::to_string(records.size()));
    if (class_names.empty()) throw ValidationError("preprocess needs a class set");

    std::vector<RawFeatures> raw;
    std::vector<std::size_t> labels;
    raw.reserve(records.size());
    std::set<std::uint64_t> seqs;
    for (const auto& r : records) {
        auto it = std::find(class_names.begin(), class_names.end(), r.response.status);
        if (it == class_names.end()) throw ValidationError("label '" + r.response.status + "' is not a declared class");
        if (!seqs.insert(r.seq).second) throw ValidationError("duplicate sequence number " + std::to_string(r.seq));
        raw.push_back(extract_features(r.request, r.since_previous));
        labels.push_back(static_cast<std::size_t>(it - class_names.begin()));
    }
    if (std::set<std::size_t>(labels.begin(), labels.end()).size() < 2) throw ValidationError("single-class dataset");

    // Schema: every column observed for an operation applies to all records of that operation.
    std::set<std::string> cat_cols, num_cols;
    for (const auto& f : raw) {
        for (const auto& [k, v] : f.categorical) cat_cols.insert(k);
        for (const auto& [k, v] : f.numeric) num_cols.insert(k);
    }

    FeatureMatrix out;
    out.report.input_rows = raw.size();
    std::vector<bool> keep(raw.size(), true);
    for (std::size_t i = 0; i < raw.size(); ++i) {
        for (const auto& col : cat_cols) {
            const std::string op = column_op(col);
            if ((op.empty() || op == raw[i].operation) && !raw[i].categorical.count(col)) {
                keep[i] = false;
                break;
            }
        }
        if (!keep[i]) ++out.report.dropped_missing_categorical;
    }

    std::vector<bool> outlier(raw.size(), false);
    for (const auto& col : num_cols) {
        const std::string op = column_op(col);
        double sum = 0, n = 0;
        for (std::size_t i = 0; i < raw.size(); ++i) {
            if (!keep[i]) continue;
            if (auto it = raw[i].numeric.find(col); it != raw[i].numeric.end()) {
                sum += it->second;
                ++n;
            }
        }
        if (n == 0) continue;
        const double mean = sum / n;
        double ss = 0;
        for (std::size_t i = 0; i < raw.size(); ++i) {
            if (!keep[i]) continue;
            if (auto it = raw[i].numeric.find(col); it != raw[i].numeric.end()) ss += (it->second - mean) * (it->second - mean);
        }
        const double sd = std::sqrt(ss / n);
        if (!(sd > 0)) continue;
        for (std::size_t i = 0; i < raw.size(); ++i) {
            if (!keep[i]) continue;
            if (auto it = raw[i].numeric.find(col); it != raw[i].numeric.end() && std::abs((it->second - mean) / sd) > 3.0)
                outlier[i] = true;
        }
    }
    for (std::size_t i = 0; i < raw.size(); ++i)
        if (keep[i] && outlier[i]) {
            keep[i] = false;
            ++out.report.dropped_outliers;
        }

    FeatureSpec& spec = out.spec;
    spec.class_names = class_names;
    for (const auto& col : cat_cols) {
        std::set<std::string> seen;
        for (std::size_t i = 0; i < raw.size(); ++i)
            if (keep[i])
                if (auto it = raw[i].categorical.find(col); it != raw[i].categorical.end()) seen.insert(it->second);
        spec.categorical.push_back({col, column_op(col), std::vector<std::string>(seen.begin(), seen.end())});
    }
    // "operation" and "since_last" first, in that order, then the rest alphabetically.
    std::sort(spec.categorical.begin(), spec.categorical.end(), [](const CategoricalEncoder& a, const CategoricalEncoder& b) {
        auto rank = [](const CategoricalEncoder& c) { return c.column == "operation" ? 0 : c.column == "since_last" ? 1 : 2; };
        return rank(a) != rank(b) ? rank(a) < rank(b) : a.column < b.column;
    });

    for (const auto& col : num_cols) {
        std::vector<double> present;
        const std::string op = column_op(col);
        for (std::size_t i = 0; i < raw.size(); ++i)
            if (keep[i])
                if (auto it = raw[i].numeric.find(col); it != raw[i].numeric.end()) present.push_back(it->second);
        NumericEncoder e{col, op, 0, 0, 0};
        if (!present.empty()) {
            e.median = median_of(present);
            e.min = *std::min_element(present.begin(), present.end());
            e.max = *std::max_element(present.begin(), present.end());
        }
        spec.numeric.push_back(e);
    }

    std::size_t rows = 0;
    for (bool k : keep) rows += k;
    out.X = Matrix(rows, spec.width());
    std::size_t r = 0;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        if (!keep[i]) continue;
        for (const auto& e : spec.numeric)
            if ((e.op.empty() || e.op == raw[i].operation) && !raw[i].numeric.count(e.column)) ++out.report.imputed_values;
        const auto x = spec.encode(raw[i]);
        std::copy(x.begin(), x.end(), out.X.data.begin() + static_cast<std::ptrdiff_t>(r * out.X.cols));
        out.y.push_back(labels[i]);
        out.kept_seq.push_back(records[i].seq);
        ++r;
    }
    return out;
}

}  // namespace hita::mldt
