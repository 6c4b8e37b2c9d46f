#include "cardiofeat/evaluation.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <random>
#include <sstream>

#include "cardiofeat/csv.hpp"
#include "cardiofeat/error.hpp"
#include "cardiofeat/parallel.hpp"

namespace cardiofeat {

Scaler fit_scaler(const FeatureTable &train) {
    Scaler s;
    s.columns = train.columns();
    const std::size_t d = train.cols();
    s.mean.assign(d, 0.0);
    s.stddev.assign(d, 0.0);
    for (std::size_t c = 0; c < d; ++c) {
        double sum = 0.0;
        std::size_t n = 0;
        for (std::size_t r = 0; r < train.rows(); ++r) {
            const double v = train.at(r, c);
            if (is_missing(v)) continue;
            sum += v;
            ++n;
        }
        if (n == 0) continue;
        const double mean = sum / static_cast<double>(n);
        // imputed entries sit at the mean and add nothing to the sum of squares
        double ss = 0.0;
        for (std::size_t r = 0; r < train.rows(); ++r) {
            const double v = train.at(r, c);
            if (!is_missing(v)) ss += (v - mean) * (v - mean);
        }
        s.mean[c] = mean;
        const double sd = std::sqrt(ss / static_cast<double>(train.rows()));
        s.stddev[c] = sd > 1e-12 * std::max(1.0, std::abs(mean)) ? sd : 0.0;
    }
    return s;
}

FeatureTable apply_scaler(const Scaler &scaler, const FeatureTable &table) {
    if (table.columns() != scaler.columns) {
        throw Error(ErrorCode::ColumnMismatch, "table columns do not match the fitted scaler");
    }
    FeatureTable out = table;
    for (std::size_t r = 0; r < out.rows(); ++r) {
        for (std::size_t c = 0; c < out.cols(); ++c) {
            double &v = out.at(r, c);
            if (scaler.stddev[c] == 0.0) {
                v = 0.0;
                continue;
            }
            if (is_missing(v)) v = scaler.mean[c];
            v = (v - scaler.mean[c]) / scaler.stddev[c];
        }
    }
    return out;
}

std::pair<FeatureTable, Scaler> standardize(const FeatureTable &train, const FeatureTable &apply_to) {
    if (train.columns() != apply_to.columns()) {
        throw Error(ErrorCode::ColumnMismatch, "standardize: column sets differ");
    }
    Scaler s = fit_scaler(train);
    FeatureTable t = apply_scaler(s, apply_to);
    return {std::move(t), std::move(s)};
}

ClassificationMetrics classification_metrics(std::span<const int> predicted, std::span<const int> truth) {
    if (predicted.size() != truth.size()) {
        throw Error(ErrorCode::LengthMismatch, "prediction and truth lengths differ");
    }
    double tp = 0, fp = 0, fn = 0, tn = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const int p = predicted[i], t = truth[i];
        if ((p != 0 && p != 1) || (t != 0 && t != 1)) throw Error(ErrorCode::InvalidArgument, "labels must be binary");
        if (p == 1 && t == 1) ++tp;
        else if (p == 1) ++fp;
        else if (t == 1) ++fn;
        else ++tn;
    }
    auto ratio = [](double a, double b) { return b > 0 ? a / b : 0.0; };
    ClassificationMetrics m;
    const double precision = ratio(tp, tp + fp);
    const double recall = ratio(tp, tp + fn);
    m.accuracy = 100.0 * ratio(tp + tn, tp + tn + fp + fn);
    m.precision = 100.0 * precision;
    m.recall = 100.0 * recall;
    m.f1 = 100.0 * ratio(2.0 * precision * recall, precision + recall);
    m.specificity = 100.0 * ratio(tn, tn + fp);
    return m;
}

std::vector<int> stratified_folds(std::span<const int> labels, int folds, std::uint64_t seed) {
    if (folds < 2) throw Error(ErrorCode::InvalidArgument, "need at least 2 folds");
    std::vector<std::size_t> cls[2];
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != 0 && labels[i] != 1) throw Error(ErrorCode::InvalidArgument, "labels must be binary");
        cls[labels[i]].push_back(i);
    }
    for (int c = 0; c < 2; ++c) {
        if (cls[c].size() < static_cast<std::size_t>(folds)) {
            throw Error(ErrorCode::InsufficientData, "class " + std::to_string(c) + " has " +
                                                         std::to_string(cls[c].size()) + " subjects, fewer than " +
                                                         std::to_string(folds) + " folds");
        }
    }
    std::mt19937_64 rng(seed);
    std::vector<int> fold_of(labels.size(), 0);
    std::size_t next = 0;
    for (auto &members : cls) {
        for (std::size_t i = members.size() - 1; i > 0; --i) std::swap(members[i], members[rng() % (i + 1)]);
        for (std::size_t idx : members) fold_of[idx] = static_cast<int>(next++ % static_cast<std::size_t>(folds));
    }
    return fold_of;
}

MeanStd mean_std(std::span<const double> values) {
    MeanStd out;
    if (values.empty()) return out;
    double s = 0.0;
    for (double v : values) s += v;
    out.mean = s / static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.std = std::sqrt(ss / static_cast<double>(values.size()));
    return out;
}

EvalReport aggregate(std::string label, std::vector<FoldResult> folds) {
    EvalReport r;
    r.label = std::move(label);
    r.folds = std::move(folds);
    auto collect = [&](double ClassificationMetrics::*field) {
        std::vector<double> v;
        for (const auto &f : r.folds) v.push_back(f.metrics.*field);
        return mean_std(v);
    };
    r.accuracy = collect(&ClassificationMetrics::accuracy);
    r.precision = collect(&ClassificationMetrics::precision);
    r.recall = collect(&ClassificationMetrics::recall);
    r.f1 = collect(&ClassificationMetrics::f1);
    r.specificity = collect(&ClassificationMetrics::specificity);
    return r;
}

void EvalReport::write_folds_csv(std::ostream &out) const {
    out << "seed_index,split_seed,fold,n_train,n_test,accuracy,precision,recall,f1,specificity\n";
    for (const auto &f : folds) {
        out << f.seed_index << ',' << f.split_seed << ',' << f.fold << ',' << f.n_train << ',' << f.n_test << ','
            << csv::format_double(f.metrics.accuracy) << ',' << csv::format_double(f.metrics.precision) << ','
            << csv::format_double(f.metrics.recall) << ',' << csv::format_double(f.metrics.f1) << ','
            << csv::format_double(f.metrics.specificity) << '\n';
    }
}

void EvalReport::write_summary_csv(std::ostream &out) const {
    out << "feature_set,metric,mean,std\n";
    const std::pair<const char *, const MeanStd *> rows[] = {
        {"accuracy", &accuracy}, {"precision", &precision}, {"recall", &recall}, {"f1", &f1}, {"specificity", &specificity}};
    for (const auto &[name, ms] : rows) {
        out << label << ',' << name << ',' << csv::format_double(ms->mean) << ',' << csv::format_double(ms->std) << '\n';
    }
}

namespace {

std::string cell(const MeanStd &m) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.2f \xC2\xB1 %.2f", m.mean, m.std);
    return buf;
}

std::string pad(std::string s, std::size_t w) {
    // the plus-minus sign is two bytes but one column
    std::size_t visible = 0;
    for (unsigned char ch : s) visible += (ch & 0xC0) != 0x80;
    if (visible < w) s.append(w - visible, ' ');
    return s;
}

}  // namespace

std::string text_table(std::span<const EvalReport> reports) {
    std::size_t w0 = 11;
    for (const auto &r : reports) w0 = std::max(w0, r.label.size());
    std::ostringstream os;
    const char *heads[] = {"Accuracy", "Precision", "Recall", "F1", "Specificity"};
    os << pad("Feature set", w0);
    for (const char *h : heads) os << " | " << pad(h, 15);
    os << '\n';
    for (const auto &r : reports) {
        os << pad(r.label, w0);
        for (const MeanStd *m : {&r.accuracy, &r.precision, &r.recall, &r.f1, &r.specificity}) {
            os << " | " << pad(cell(*m), 15);
        }
        os << '\n';
    }
    return os.str();
}

std::string EvalReport::text_table() const { return cardiofeat::text_table(std::span<const EvalReport>(this, 1)); }

std::uint64_t fold_train_seed(std::uint64_t config_seed, std::uint64_t split_seed, int fold) {
    // splitmix64 over the packed triple
    std::uint64_t z = config_seed * 0x9E3779B97F4A7C15ULL + split_seed * 0xBF58476D1CE4E5B9ULL +
                      static_cast<std::uint64_t>(fold) + 1;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

EvalReport cross_validate(const FeatureTable &table, const TrainConfig &config, const CvOptions &options) {
    if (options.seeds.empty()) throw Error(ErrorCode::InvalidArgument, "cross_validate needs at least one seed");
    const std::size_t n_seeds = options.seeds.size();
    const std::size_t n_folds = static_cast<std::size_t>(options.folds);
    std::vector<std::vector<int>> assignments;
    for (std::uint64_t s : options.seeds) assignments.push_back(stratified_folds(table.labels(), options.folds, s));

    std::vector<FoldResult> results(n_seeds * n_folds);
    parallel_for(results.size(), options.workers, [&](std::size_t task) {
        const int si = static_cast<int>(task / n_folds);
        const int fold = static_cast<int>(task % n_folds);
        const auto &assign = assignments[static_cast<std::size_t>(si)];
        std::vector<std::size_t> train_rows, test_rows;
        std::vector<std::string> train_ids;
        for (std::size_t r = 0; r < table.rows(); ++r) {
            if (assign[r] == fold) {
                test_rows.push_back(r);
            } else {
                train_rows.push_back(r);
                train_ids.push_back(table.subject_ids()[r]);
            }
        }
        FeatureTable source = options.provider ? options.provider(si, fold, train_ids) : table;
        if (options.provider) {
            // realign to the reference row order
            std::vector<std::size_t> order;
            for (const auto &id : table.subject_ids()) order.push_back(source.row_of(id));
            source = source.subset_rows(order);
        }
        const FeatureTable selected = select_feature_set(source, config.feature_set, config.n_svd);
        const FeatureTable train_raw = selected.subset_rows(train_rows);
        const FeatureTable test_raw = selected.subset_rows(test_rows);
        const Scaler scaler = fit_scaler(train_raw);
        const FeatureTable train_std = apply_scaler(scaler, train_raw);
        const FeatureTable test_std = apply_scaler(scaler, test_raw);

        TrainConfig fold_cfg = config;
        fold_cfg.seed = fold_train_seed(config.seed, options.seeds[static_cast<std::size_t>(si)], fold);
        const TrainResult trained = train(train_std, fold_cfg);
        const Predictions pred = predict(trained.model, test_std);

        FoldResult &fr = results[task];
        fr.seed_index = si;
        fr.split_seed = options.seeds[static_cast<std::size_t>(si)];
        fr.fold = fold;
        fr.n_train = train_rows.size();
        fr.n_test = test_rows.size();
        fr.metrics = classification_metrics(pred.labels, test_std.labels());
    });
    return aggregate(std::string(to_string(config.feature_set)), std::move(results));
}

}  // namespace cardiofeat
