#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hita/common/json.hpp"
#include "hita/common/wire.hpp"
#include "hita/harness/campaign.hpp"

namespace hita::mldt {

using harness::TraceRecord;

// Row-major dense matrix.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    const double* row(std::size_t r) const { return data.data() + r * cols; }
    bool operator==(const Matrix&) const = default;
};

// Features of one request before encoding. Column names are "operation",
// "since_last", "<op>.<field>" and, for medication plans, "<op>.<field>.<derived>".
struct RawFeatures {
    std::string operation;
    std::map<std::string, std::string> categorical;
    std::map<std::string, double> numeric;
};

std::string since_last_bucket(vtime::Millis since_previous);
RawFeatures extract_features(const DeviceRequest& req, vtime::Millis since_previous);

inline constexpr const char* kUnknownCategory = "<unknown>";

struct CategoricalEncoder {
    std::string column;
    std::string op;  // empty: applies to every record
    std::vector<std::string> categories;  // observed, sorted; one-hot width is size()+1 (unknown bucket last)
    bool operator==(const CategoricalEncoder&) const = default;
    std::size_t width() const { return categories.size() + 1; }
};

struct NumericEncoder {
    std::string column;
    std::string op;
    double min = 0;
    double max = 0;
    double median = 0;
    bool operator==(const NumericEncoder&) const = default;
    double scale(double v) const { return max > min ? (v - min) / (max - min) : 0.0; }
};

struct FeatureSpec {
    std::vector<CategoricalEncoder> categorical;
    std::vector<NumericEncoder> numeric;
    std::vector<std::string> class_names;
    bool operator==(const FeatureSpec&) const = default;

    std::size_t width() const;
    // Columns that do not apply to the request's operation encode as zeros; an
    // applicable but absent or unseen category goes to the unknown bucket; an
    // absent numeric takes the training median.
    std::vector<double> encode(const RawFeatures& f) const;
    // Category selected in the one-hot segment of encoder i (kUnknownCategory for the bucket,
    // nullopt for an all-zero segment).
    std::optional<std::string> decode_categorical(std::size_t i, const std::vector<double>& x) const;
    std::size_t offset_of_categorical(std::size_t i) const;
};

Json to_json(const FeatureSpec& s);
FeatureSpec feature_spec_from_json(const Json& j);

struct PreprocessReport {
    std::size_t input_rows = 0;
    std::size_t dropped_missing_categorical = 0;
    std::size_t dropped_outliers = 0;
    std::size_t imputed_values = 0;
};

struct FeatureMatrix {
    Matrix X;
    std::vector<std::size_t> y;
    FeatureSpec spec;
    PreprocessReport report;
    std::vector<std::uint64_t> kept_seq;  // sequence numbers of the rows in X
};

// Z-score filter (|z| > 3 on any applicable numeric column drops the row; population
// standard deviation), median imputation of missing numerics, rows missing a
// categorical value dropped, one-hot categoricals, min-max scaled numerics.
// Throws ValidationError for fewer than 50 records, fewer than two labels, or a
// label outside class_names.
FeatureMatrix preprocess(const std::vector<TraceRecord>& records, const std::vector<std::string>& class_names);

}  // namespace hita::mldt
