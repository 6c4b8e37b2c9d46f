#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cardiofeat/feature_table.hpp"
#include "cardiofeat/mlp.hpp"

namespace cardiofeat {

/// Per-column statistics fitted on a training fold.
struct Scaler {
    std::vector<std::string> columns;
    std::vector<double> mean;    // over non-missing training values (0 if none)
    std::vector<double> stddev;  // population std; 0 marks a constant column

    friend bool operator==(const Scaler &, const Scaler &) = default;
};

Scaler fit_scaler(const FeatureTable &train);
/// Missing -> column mean, then z-score; zero-variance columns -> 0. Throws ColumnMismatch.
FeatureTable apply_scaler(const Scaler &scaler, const FeatureTable &table);
/// Fits on `train`, returns `apply_to` transformed together with the scaler.
std::pair<FeatureTable, Scaler> standardize(const FeatureTable &train, const FeatureTable &apply_to);

/// All values in percent.
struct ClassificationMetrics {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double specificity = 0.0;
    friend bool operator==(const ClassificationMetrics &, const ClassificationMetrics &) = default;
};

/// Positive class = 1. Zero denominators give 0. Throws LengthMismatch / InvalidArgument.
ClassificationMetrics classification_metrics(std::span<const int> predicted, std::span<const int> truth);

/// Fold index per row: each class shuffled with `seed`, then dealt round-robin.
/// Throws InsufficientData when a class has fewer than `folds` rows.
std::vector<int> stratified_folds(std::span<const int> labels, int folds, std::uint64_t seed);

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;  // population (ddof = 0)
    friend bool operator==(const MeanStd &, const MeanStd &) = default;
};
MeanStd mean_std(std::span<const double> values);

struct FoldResult {
    int seed_index = 0;
    std::uint64_t split_seed = 0;
    int fold = 0;
    std::size_t n_train = 0;
    std::size_t n_test = 0;
    ClassificationMetrics metrics;
    friend bool operator==(const FoldResult &, const FoldResult &) = default;
};

struct EvalReport {
    std::string label;  // feature-set name or free text
    std::vector<FoldResult> folds;
    MeanStd accuracy, precision, recall, f1, specificity;

    void write_folds_csv(std::ostream &out) const;
    void write_summary_csv(std::ostream &out) const;
    /// One header line plus one "mean ± std" row.
    std::string text_table() const;
    friend bool operator==(const EvalReport &, const EvalReport &) = default;
};

EvalReport aggregate(std::string label, std::vector<FoldResult> folds);
/// Several reports in one table (one row each).
std::string text_table(std::span<const EvalReport> reports);

/// Supplies the full table (all subjects) to use for one outer fold, e.g.
/// features computed against an atlas built from that fold's training subjects.
using FoldTableProvider =
    std::function<FeatureTable(int seed_index, int fold, const std::vector<std::string> &train_subjects)>;

struct CvOptions {
    int folds = 5;
    std::vector<std::uint64_t> seeds{0, 1, 2};
    unsigned workers = 1;
    FoldTableProvider provider;  // optional
};

/// Stratified k-fold x seeds. Feature-set selection (cfg.feature_set, cfg.n_svd)
/// and standardization happen inside each fold. Deterministic for fixed inputs.
EvalReport cross_validate(const FeatureTable &table, const TrainConfig &config, const CvOptions &options = {});

/// Train seed used for one (config seed, split seed, fold) triple.
std::uint64_t fold_train_seed(std::uint64_t config_seed, std::uint64_t split_seed, int fold);

}  // namespace cardiofeat
