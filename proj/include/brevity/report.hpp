#pragma once

#include "brevity/dataset.hpp"
#include "brevity/fsm.hpp"
#include "brevity/formula.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace brevity {

enum class OutputFormat { human, csv, json };

std::string_view to_string(OutputFormat format);
OutputFormat output_format_from_string(std::string_view text);

struct CvSettings {
    FsmConfig fsm;          ///< fsm.seed is replaced by a per-fold seed
    std::uint64_t seed = 0; ///< master seed: folds and per-fold splits derive from it
    std::size_t k = 10;
};

struct FoldRecord {
    std::size_t fold = 0;
    std::string formula;  ///< rendered
    nlohmann::json rpn;   ///< serialized tokens
    std::size_t size = 0; ///< size of the final formula
    std::size_t chosen_length = 0;
    Accuracy holdout;
    StopReason stop_reason = StopReason::length_cap;
    double elapsed_s = 0.0;
};

struct CvReport {
    SchemeId scheme = SchemeId::pivot;
    std::uint64_t seed = 0;
    std::size_t k = 0;
    std::vector<FoldRecord> folds;
    double mean_accuracy = 0.0; ///< percent
    double std_accuracy = 0.0;  ///< percent, sample standard deviation
    double mean_size = 0.0;
};

/// k-fold cross-validation of the formula-size method. Each fold trains on the other k-1 folds only.
CvReport cross_validate(const EncodedDataset& ds, const CvSettings& settings);

Accuracy holdout_accuracy(const Formula& f, const EncodedDataset& hold);

/// Recomputes the aggregates from the per-fold records.
void summarize_folds(CvReport& report);

/// `timings = false` writes zero for every elapsed field so that reports compare byte for byte.
std::string summarize(const CvReport& report, OutputFormat format, bool timings = true);

/// Token list with column names, categories and raw-scale thresholds.
nlohmann::json formula_to_json(const Formula& f, std::span<const EncodedAttribute> attributes);
/// Inverse of formula_to_json against an encoded dataset with the same attribute names.
Formula formula_from_json(const nlohmann::json& rpn, std::span<const EncodedAttribute> attributes);

nlohmann::json schema_to_json(const TableSchema& schema);

/// Self-contained classifier file: the tokens plus the schema needed to read new data.
nlohmann::json classifier_file(const Formula& f, const EncodedDataset& ds, const TableSchema& schema);

struct Evaluation {
    Accuracy accuracy;
    std::vector<PointId> rows;            ///< source rows that survived cleaning
    std::vector<std::uint8_t> predictions; ///< aligned with rows
};

/// Applies a classifier file to a raw table read with the file's schema.
Evaluation evaluate_classifier(const nlohmann::json& file, const DataTable& raw);

} // namespace brevity
