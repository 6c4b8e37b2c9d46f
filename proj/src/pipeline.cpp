#include "cardiofeat/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "cardiofeat/csv.hpp"
#include "cardiofeat/error.hpp"
#include "cardiofeat/geomfeat.hpp"
#include "cardiofeat/log.hpp"
#include "cardiofeat/nifti.hpp"
#include "cardiofeat/parallel.hpp"

namespace fs = std::filesystem;

namespace cardiofeat {

std::uint64_t fnv1a(std::string_view data, std::uint64_t h) {
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t hash_file(const fs::path &path, std::uint64_t h) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof buf);
        h = fnv1a(std::string_view(buf, static_cast<std::size_t>(in.gcount())), h);
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::vector<CohortEntry> read_cohort_csv(const fs::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot read cohort table " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorCode::MalformedHeader, "empty cohort table " + path.string());
    const auto header = csv::split(line);
    if (header.size() < 2 || header[0] != "subject_id" || header[1] != "label") {
        throw Error(ErrorCode::MalformedHeader, "cohort table must start with subject_id,label");
    }
    std::vector<CohortEntry> out;
    std::set<std::string> seen;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        const auto cells = csv::split(line);
        if (cells.size() < 2) throw Error(ErrorCode::MalformedHeader, "short cohort row: " + line);
        const double lab = csv::parse_double(cells[1]);
        if (lab != 0.0 && lab != 1.0) throw Error(ErrorCode::InvalidArgument, "label must be 0/1 for " + cells[0]);
        if (!seen.insert(cells[0]).second) throw Error(ErrorCode::InvalidArgument, "duplicate subject " + cells[0]);
        out.push_back({cells[0], static_cast<int>(lab)});
    }
    if (out.empty()) throw Error(ErrorCode::EmptyCohort, "cohort table lists no subjects");
    return out;
}

fs::path subject_file(const fs::path &dir, const std::string &id) {
    for (const char *ext : {".nii.gz", ".nii"}) {
        const fs::path p = dir / (id + ext);
        if (fs::exists(p)) return p;
    }
    throw Error(ErrorCode::IoError, "no " + id + ".nii.gz or " + id + ".nii in " + dir.string());
}

std::vector<Subject> load_subjects(const PipelineConfig &config, std::span<const CohortEntry> cohort) {
    std::vector<Subject> out(cohort.size());
    const bool resample = config.spacing[0] > 0;
    parallel_for(cohort.size(), config.workers, [&](std::size_t i) {
        const auto &e = cohort[i];
        try {
            Subject s;
            s.id = e.id;
            s.label = e.label;
            s.image = load_volume(subject_file(config.images_dir, e.id));
            s.labels = load_labelmap(subject_file(config.labels_dir, e.id));
            if (resample) {
                s.image = resample_to_spacing(s.image, config.spacing);
                s.labels = resample_to_spacing(s.labels, config.spacing);
            }
            require_same_geometry(s.image.geometry(), s.labels.geometry(), "image vs labelmap");
            out[i] = std::move(s);
        } catch (const Error &err) {
            throw err.with_context("[load] subject " + e.id + ": ");
        }
    });
    for (const auto &s : out) {
        if (!same_geometry(s.labels.geometry(), out.front().labels.geometry())) {
            throw Error(ErrorCode::GeometryMismatch, "[load] subject " + s.id + ": grid differs from " +
                                                         out.front().id + " (set radiomics.spacing or resample inputs)");
        }
    }
    return out;
}

FeatureTable radiomics_table(std::span<const Subject> subjects, const radiomics::RadiomicsConfig &config,
                             unsigned workers) {
    std::vector<FeatureVector> rows(subjects.size());
    parallel_for(subjects.size(), workers, [&](std::size_t i) {
        try {
            rows[i] = radiomics::extract_radiomics(subjects[i].image, subjects[i].labels, config);
        } catch (const Error &err) {
            throw err.with_context("[radiomics] subject " + subjects[i].id + ": ");
        }
    });
    FeatureTable table(rows.empty() ? std::vector<std::string>{} : rows.front().names());
    for (std::size_t i = 0; i < rows.size(); ++i) table.add_row(subjects[i].id, rows[i], subjects[i].label);
    return table;
}

GeometryRun geometric_table(std::span<const Subject> subjects, const atlas::SoftLabelImage &atlas_soft,
                            const atlas::AtlasParams &params, bool center, unsigned workers, bool keep_fields) {
    constexpr int kSvd = 3;
    GeometryRun run;
    run.qc.resize(subjects.size());
    std::vector<FeatureVector> rows(subjects.size());
    std::vector<atlas::DisplacementField> fields(subjects.size());
    const double sigma_mm = params.label_sigma_mm(atlas_soft.geometry());
    const auto fixed = atlas::smooth_soft_labels(atlas_soft, sigma_mm);
    parallel_for(subjects.size(), workers, [&](std::size_t i) {
        const Subject &s = subjects[i];
        try {
            const auto moving = atlas::to_soft_labels(s.labels, sigma_mm);
            const auto reg = atlas::register_labels(moving, fixed, params.registration);
            run.qc[i] = atlas::quality_control(reg);
            rows[i] = geom::extract_geometric(reg.field, s.labels, kSvd, center);
            if (keep_fields) fields[i] = reg.field;
        } catch (const Error &err) {
            throw err.with_context("[register] subject " + s.id + ": ");
        }
    });
    run.table = FeatureTable(geom::geometric_feature_names(kSvd));
    for (std::size_t i = 0; i < rows.size(); ++i) run.table.add_row(subjects[i].id, rows[i], subjects[i].label);
    if (keep_fields) run.fields = std::move(fields);
    return run;
}

atlas::AtlasResult build_training_atlas(std::span<const Subject> subjects, std::span<const std::string> train_ids,
                                        const atlas::AtlasParams &params) {
    std::vector<LabelMap> members;
    for (const auto &s : subjects) {
        if (s.label != 0) continue;
        if (std::find(train_ids.begin(), train_ids.end(), s.id) == train_ids.end()) continue;
        members.push_back(s.labels);
    }
    if (members.empty()) throw Error(ErrorCode::EmptyCohort, "[atlas] no healthy training subjects");
    return atlas::build_atlas(members, params);
}

void write_qc_csv(std::span<const Subject> subjects, std::span<const atlas::SubjectQc> qc, const fs::path &path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out << "subject_id,final_energy,mean_displacement_mm,folding_percent,non_converged\n";
    for (std::size_t i = 0; i < qc.size(); ++i) {
        out << subjects[i].id << ',' << csv::format_double(qc[i].final_energy) << ','
            << csv::format_double(qc[i].mean_displacement_mm) << ',' << csv::format_double(qc[i].folding_percent)
            << ',' << (qc[i].non_converged ? 1 : 0) << '\n';
    }
}

namespace {

class Stamps {
public:
    Stamps(fs::path dir, bool force) : dir_(std::move(dir)), force_(force) { fs::create_directories(dir_); }

    bool fresh(const std::string &stage, std::uint64_t hash, std::initializer_list<fs::path> outputs) const {
        if (force_) return false;
        for (const auto &o : outputs) {
            if (!fs::exists(o)) return false;
        }
        std::ifstream in(path(stage));
        std::string content;
        std::getline(in, content);
        return content == hex64(hash);
    }
    void mark(const std::string &stage, std::uint64_t hash) const {
        std::ofstream out(path(stage), std::ios::binary);
        out << hex64(hash) << '\n';
        if (!out) throw Error(ErrorCode::IoError, "cannot write stamp for " + stage);
    }

private:
    fs::path path(const std::string &stage) const {
        std::string name = stage;
        std::replace(name.begin(), name.end(), ':', '_');
        return dir_ / (name + ".stamp");
    }
    fs::path dir_;
    bool force_;
};

void write_text(const fs::path &path, const std::string &text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
}

template <class Fn>
void write_with(const fs::path &path, Fn &&fn) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    fn(out);
    if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

std::vector<FoldResult> read_folds_csv(const fs::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
    std::string line;
    std::getline(in, line);
    std::vector<FoldResult> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto c = csv::split(line);
        if (c.size() != 10) throw Error(ErrorCode::MalformedHeader, "bad fold row in " + path.string());
        FoldResult f;
        f.seed_index = std::stoi(c[0]);
        f.split_seed = std::stoull(c[1]);
        f.fold = std::stoi(c[2]);
        f.n_train = std::stoull(c[3]);
        f.n_test = std::stoull(c[4]);
        f.metrics = {csv::parse_double(c[5]), csv::parse_double(c[6]), csv::parse_double(c[7]),
                     csv::parse_double(c[8]), csv::parse_double(c[9])};
        out.push_back(f);
    }
    return out;
}

TrainConfig read_best_config(const fs::path &trials_csv, TrainConfig base) {
    std::ifstream in(trials_csv, std::ios::binary);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        const auto c = csv::split(line);
        if (c.size() == 11 && c[10] == "1") {
            base.hidden_layers = std::stoi(c[1]);
            base.hidden_units = std::stoi(c[2]);
            base.dropout = csv::parse_double(c[3]);
            base.learning_rate = csv::parse_double(c[4]);
            base.epochs = std::stoi(c[5]);
            base.n_svd = std::stoi(c[6]);
            return base;
        }
    }
    throw Error(ErrorCode::MalformedHeader, "no best trial in " + trials_csv.string());
}

std::string config_hash_text(const TrainConfig &c) {
    std::ostringstream os;
    os << c.hidden_layers << ' ' << c.hidden_units << ' ' << csv::format_double(c.dropout) << ' '
       << csv::format_double(c.learning_rate) << ' ' << c.epochs << ' ' << csv::format_double(c.weight_decay) << ' '
       << c.batch_size << ' ' << c.seed << ' ' << c.n_svd << ' ' << to_string(c.feature_set);
    return os.str();
}

std::string atlas_params_text(const atlas::AtlasParams &a) {
    const auto &r = a.registration;
    std::ostringstream os;
    os << "atlas " << a.iterations << ' ' << csv::format_double(a.label_sigma_voxels) << " reg " << r.levels << ' '
       << r.iterations_per_level << ' ' << csv::format_double(r.sigma_fluid) << ' '
       << csv::format_double(r.sigma_diffusion) << ' ' << csv::format_double(r.step) << ' ' << r.max_halvings << ' '
       << csv::format_double(r.energy_tol) << ' ' << csv::format_double(r.regularization_weight) << '\n';
    return os.str();
}

}  // namespace

PipelineResult run_pipeline(const PipelineConfig &config) {
    config.validate();
    PipelineResult result;
    const fs::path out = config.output_dir;
    for (const char *d : {"features", "atlas", "reports"}) fs::create_directories(out / d);
    const Stamps stamps(out / ".stamps", config.force);
    write_text(out / "config.resolved.ini", config.describe(false));

    const auto cohort = read_cohort_csv(config.cohort_csv);
    std::uint64_t input_hash = fnv1a("inputs");
    for (const auto &e : cohort) {
        input_hash = fnv1a(e.id + ":" + std::to_string(e.label) + ";", input_hash);
        try {
            input_hash = hash_file(subject_file(config.images_dir, e.id), input_hash);
            input_hash = hash_file(subject_file(config.labels_dir, e.id), input_hash);
        } catch (const Error &err) {
            throw err.with_context("[load] subject " + e.id + ": ");
        }
    }
    {
        std::ostringstream sp;
        sp << csv::format_double(config.spacing[0]) << ',' << csv::format_double(config.spacing[1]) << ','
           << csv::format_double(config.spacing[2]);
        input_hash = fnv1a(sp.str(), input_hash);
    }

    std::vector<Subject> subjects;
    auto ensure_subjects = [&] {
        if (subjects.empty()) {
            log_stage("load", "reading " + std::to_string(cohort.size()) + " subjects");
            subjects = load_subjects(config, cohort);
        }
    };
    auto run_stage = [&](const std::string &name) { result.stages_run.push_back(name); };
    auto skip_stage = [&](const std::string &name) {
        result.stages_skipped.push_back(name);
        log_stage(name, "up to date, skipped");
    };

    // radiomics
    const fs::path radiomics_csv = out / "features" / "radiomics.csv";
    const std::uint64_t radiomics_hash = fnv1a(
        "radiomics " + csv::format_double(config.radiomics.bin_width) + " " + std::to_string(config.radiomics.gldm_alpha),
        input_hash);
    if (stamps.fresh("radiomics", radiomics_hash, {radiomics_csv})) {
        skip_stage("radiomics");
    } else {
        run_stage("radiomics");
        ensure_subjects();
        log_stage("radiomics", "extracting features");
        write_feature_table(radiomics_table(subjects, config.radiomics, config.workers), radiomics_csv);
        stamps.mark("radiomics", radiomics_hash);
    }
    const FeatureTable rad = read_feature_table(radiomics_csv);

    // atlas membership per outer fold
    std::vector<int> labels;
    for (const auto &e : cohort) labels.push_back(e.label);
    struct AtlasJob {
        std::string key;
        std::vector<std::string> members;  // sorted healthy training ids
    };
    std::vector<AtlasJob> jobs;
    std::map<std::pair<int, int>, std::size_t> job_of_fold;
    auto job_for = [&](std::vector<std::string> ids) {
        std::sort(ids.begin(), ids.end());
        std::string joined;
        for (const auto &id : ids) joined += id + ",";
        for (std::size_t j = 0; j < jobs.size(); ++j) {
            if (jobs[j].members == ids) return j;
        }
        jobs.push_back({hex64(fnv1a(joined)).substr(0, 12), std::move(ids)});
        return jobs.size() - 1;
    };
    if (config.fold_safe) {
        for (std::size_t si = 0; si < config.seeds.size(); ++si) {
            const auto assign = stratified_folds(labels, config.folds, config.seeds[si]);
            for (int f = 0; f < config.folds; ++f) {
                std::vector<std::string> ids;
                for (std::size_t r = 0; r < cohort.size(); ++r) {
                    if (assign[r] != f && cohort[r].label == 0) ids.push_back(cohort[r].id);
                }
                job_of_fold[{static_cast<int>(si), f}] = job_for(std::move(ids));
            }
        }
    } else {
        std::vector<std::string> ids;
        for (const auto &e : cohort) {
            if (e.label == 0) ids.push_back(e.id);
        }
        job_for(std::move(ids));
    }

    const std::string atlas_params = atlas_params_text(config.atlas);

    std::vector<FeatureTable> joined(jobs.size());
    std::vector<std::uint64_t> geometry_hashes;
    for (std::size_t j = 0; j < jobs.size(); ++j) {
        const AtlasJob &job = jobs[j];
        const fs::path dir = out / "atlas" / job.key;
        fs::create_directories(dir);
        const fs::path soft_path = dir / "atlas_soft.nii.gz";
        const fs::path hard_path = dir / "atlas_labels.nii.gz";
        std::string members;
        for (const auto &m : job.members) members += m + "\n";
        const std::uint64_t atlas_hash = fnv1a(atlas_params + members, input_hash);
        const std::string atlas_stage = "atlas:" + job.key;
        if (stamps.fresh(atlas_stage, atlas_hash, {soft_path, hard_path})) {
            skip_stage(atlas_stage);
        } else {
            run_stage(atlas_stage);
            ensure_subjects();
            log_stage(atlas_stage, "building from " + std::to_string(job.members.size()) + " healthy subjects");
            const auto built = build_training_atlas(subjects, job.members, config.atlas);
            atlas::save_soft_labels(built.atlas.soft, soft_path);
            save_labelmap(built.atlas.hard, hard_path);
            write_text(dir / "members.txt", members);
            stamps.mark(atlas_stage, atlas_hash);
        }

        const fs::path geom_csv = dir / "geometric.csv";
        const fs::path qc_csv = dir / "qc.csv";
        const std::uint64_t geom_hash = fnv1a(std::string("geometry center=") + (config.center_svd ? "1" : "0") +
                                                  (config.fold_safe ? " fold" : " global"),
                                              atlas_hash);
        geometry_hashes.push_back(geom_hash);
        const std::string geom_stage = "geometry:" + job.key;
        if (stamps.fresh(geom_stage, geom_hash, {geom_csv, qc_csv})) {
            skip_stage(geom_stage);
        } else {
            run_stage(geom_stage);
            ensure_subjects();
            log_stage(geom_stage, "registering " + std::to_string(subjects.size()) + " subjects to the atlas");
            // always from disk so fresh and resumed runs see the same atlas values
            const auto soft = atlas::load_soft_labels(soft_path);
            const bool keep = !config.fold_safe;
            auto run = geometric_table(subjects, soft, config.atlas, config.center_svd, config.workers, keep);
            write_feature_table(run.table, geom_csv);
            write_qc_csv(subjects, run.qc, qc_csv);
            if (keep) {
                fs::create_directories(dir / "fields");
                for (std::size_t i = 0; i < subjects.size(); ++i) {
                    atlas::save_field(run.fields[i], dir / "fields" / (subjects[i].id + ".nii.gz"));
                }
            }
            stamps.mark(geom_stage, geom_hash);
        }
        joined[j] = join_columns(rad, read_feature_table(geom_csv));
    }
    if (!config.fold_safe) write_feature_table(joined[0], out / "features" / "combined.csv");

    CvOptions cv;
    cv.folds = config.folds;
    cv.seeds = config.seeds;
    cv.workers = config.workers;
    if (config.fold_safe) {
        cv.provider = [&](int si, int fold, const std::vector<std::string> &) {
            return joined[job_of_fold.at({si, fold})];
        };
    }
    const FeatureTable &reference = joined[0];

    std::uint64_t features_hash = radiomics_hash;
    for (auto h : geometry_hashes) features_hash = fnv1a(hex64(h), features_hash);

    for (FeatureSet set : config.feature_sets) {
        const std::string tag(to_string(set));
        TrainConfig cfg = config.train;
        cfg.feature_set = set;
        if (config.search_budget > 0) {
            const fs::path trials = out / "reports" / ("search_" + tag + ".csv");
            const std::uint64_t h = fnv1a("search " + std::to_string(config.search_budget) + " " +
                                              std::to_string(config.search_seed) + " " + config_hash_text(cfg),
                                          features_hash);
            const std::string stage = "search:" + tag;
            if (stamps.fresh(stage, h, {trials})) {
                skip_stage(stage);
            } else {
                run_stage(stage);
                log_stage(stage, std::to_string(config.search_budget) + " trials");
                SearchOptions so;
                so.budget = config.search_budget;
                so.seed = config.search_seed;
                const auto sr = hyperparameter_search(
                    [&](const TrainConfig &c) {
                        const EvalReport r = cross_validate(reference, c, cv);
                        Trial t;
                        t.score = r.f1.mean;
                        t.accuracy = r.accuracy.mean;
                        return t;
                    },
                    cfg, so);
                write_with(trials, [&](std::ostream &os) { sr.write_trials_csv(os); });
                stamps.mark(stage, h);
            }
            cfg = read_best_config(trials, cfg);
        }
        result.configs[set] = cfg;

        const fs::path folds_csv = out / "reports" / ("cv_" + tag + "_folds.csv");
        const std::uint64_t h = fnv1a("cv " + config_hash_text(cfg), features_hash);
        const std::string stage = "cv:" + tag;
        if (stamps.fresh(stage, h, {folds_csv})) {
            skip_stage(stage);
        } else {
            run_stage(stage);
            log_stage(stage, std::to_string(config.folds) + " folds x " + std::to_string(config.seeds.size()) + " seeds");
            const EvalReport r = cross_validate(reference, cfg, cv);
            write_with(folds_csv, [&](std::ostream &os) { r.write_folds_csv(os); });
            stamps.mark(stage, h);
        }
        result.reports.push_back(aggregate(tag, read_folds_csv(folds_csv)));
    }

    write_with(out / "reports" / "cv_summary.csv", [&](std::ostream &os) {
        os << "feature_set,metric,mean,std\n";
        for (const auto &r : result.reports) {
            std::ostringstream one;
            r.write_summary_csv(one);
            const std::string s = one.str();
            os << s.substr(s.find('\n') + 1);
        }
    });
    write_text(out / "reports" / "table.txt", text_table(result.reports));
    log_stage("report", "written to " + (out / "reports").string());
    return result;
}

}  // namespace cardiofeat
