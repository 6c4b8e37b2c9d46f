#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include "cardiofeat/evaluation.hpp"

namespace cardiofeat {

/// Sampling ranges; defaults are the published ones.
struct SearchSpace {
    int min_layers = 1, max_layers = 12;
    int min_units = 8, max_units = 512;
    double min_dropout = 0.0, max_dropout = 0.5;
    double min_learning_rate = 1e-4, max_learning_rate = 1e-2;  // log-uniform
    int min_epochs = 100, max_epochs = 400, epoch_step = 25;
    int min_n_svd = 1, max_n_svd = 3;
};

/// Draws one configuration; fields outside the space are copied from `base`.
TrainConfig sample_config(const SearchSpace &space, const TrainConfig &base, std::mt19937_64 &rng);

struct Trial {
    int index = 0;
    TrainConfig config;
    double score = 0.0;  // mean inner-CV F1 (%)
    double accuracy = 0.0;
};

struct SearchResult {
    TrainConfig best;
    int best_index = 0;
    std::vector<Trial> trials;
    void write_trials_csv(std::ostream &out) const;
};

struct SearchOptions {
    int budget = 50;
    std::uint64_t seed = 0;
    SearchSpace space;
    bool include_base = false;  // trial 0 = the base config itself
    int inner_folds = 5;
    std::vector<std::uint64_t> inner_seeds{0};
    unsigned workers = 1;
};

using TrialScorer = std::function<Trial(const TrainConfig &)>;

/// Generic driver: highest score wins, ties go to the lowest trial index.
/// Throws InvalidArgument when budget < 1.
SearchResult hyperparameter_search(const TrialScorer &scorer, const TrainConfig &base, const SearchOptions &options);
/// Scores each trial by inner cross-validation on `table`.
SearchResult hyperparameter_search(const FeatureTable &table, const TrainConfig &base, const SearchOptions &options);

}  // namespace cardiofeat
