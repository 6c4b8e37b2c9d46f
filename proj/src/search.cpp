#include "cardiofeat/search.hpp"

#include <cmath>
#include <ostream>

#include "cardiofeat/csv.hpp"
#include "cardiofeat/error.hpp"

namespace cardiofeat {
namespace {

double uniform01(std::mt19937_64 &rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

int uniform_int(std::mt19937_64 &rng, int lo, int hi) {
    return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
}

}  // namespace

TrainConfig sample_config(const SearchSpace &space, const TrainConfig &base, std::mt19937_64 &rng) {
    TrainConfig c = base;
    c.hidden_layers = uniform_int(rng, space.min_layers, space.max_layers);
    c.hidden_units = uniform_int(rng, space.min_units, space.max_units);
    c.dropout = space.min_dropout + (space.max_dropout - space.min_dropout) * uniform01(rng);
    const double lo = std::log(space.min_learning_rate), hi = std::log(space.max_learning_rate);
    c.learning_rate = std::exp(lo + (hi - lo) * uniform01(rng));
    const int steps = (space.max_epochs - space.min_epochs) / space.epoch_step;
    c.epochs = space.min_epochs + space.epoch_step * uniform_int(rng, 0, steps);
    c.n_svd = uniform_int(rng, space.min_n_svd, space.max_n_svd);
    return c;
}

SearchResult hyperparameter_search(const TrialScorer &scorer, const TrainConfig &base, const SearchOptions &options) {
    if (options.budget < 1) throw Error(ErrorCode::InvalidArgument, "search budget must be >= 1");
    std::mt19937_64 rng(options.seed);
    SearchResult result;
    for (int i = 0; i < options.budget; ++i) {
        const TrainConfig cfg = (i == 0 && options.include_base) ? base : sample_config(options.space, base, rng);
        Trial t = scorer(cfg);
        t.index = i;
        t.config = cfg;
        if (i == 0 || t.score > result.trials[static_cast<std::size_t>(result.best_index)].score) {
            result.best_index = i;
        }
        result.trials.push_back(t);
    }
    result.best = result.trials[static_cast<std::size_t>(result.best_index)].config;
    return result;
}

SearchResult hyperparameter_search(const FeatureTable &table, const TrainConfig &base, const SearchOptions &options) {
    CvOptions cv;
    cv.folds = options.inner_folds;
    cv.seeds = options.inner_seeds;
    cv.workers = options.workers;
    return hyperparameter_search(
        [&](const TrainConfig &cfg) {
            const EvalReport r = cross_validate(table, cfg, cv);
            Trial t;
            t.score = r.f1.mean;
            t.accuracy = r.accuracy.mean;
            return t;
        },
        base, options);
}

void SearchResult::write_trials_csv(std::ostream &out) const {
    out << "trial,hidden_layers,hidden_units,dropout,learning_rate,epochs,n_svd,feature_set,inner_f1,inner_accuracy,best\n";
    for (const Trial &t : trials) {
        out << t.index << ',' << t.config.hidden_layers << ',' << t.config.hidden_units << ','
            << csv::format_double(t.config.dropout) << ',' << csv::format_double(t.config.learning_rate) << ','
            << t.config.epochs << ',' << t.config.n_svd << ',' << to_string(t.config.feature_set) << ','
            << csv::format_double(t.score) << ',' << csv::format_double(t.accuracy) << ','
            << (t.index == best_index ? 1 : 0) << '\n';
    }
}

}  // namespace cardiofeat
