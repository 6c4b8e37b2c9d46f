// cardiofeat command line: pipeline stages and the synthetic cohort generator.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "cardiofeat/atlasreg.hpp"
#include "cardiofeat/csv.hpp"
#include "cardiofeat/error.hpp"
#include "cardiofeat/evaluation.hpp"
#include "cardiofeat/geomfeat.hpp"
#include "cardiofeat/log.hpp"
#include "cardiofeat/nifti.hpp"
#include "cardiofeat/pipeline.hpp"
#include "cardiofeat/search.hpp"
#include "cardiofeat/segmetrics.hpp"
#include "cardiofeat/synthetic.hpp"

namespace fs = std::filesystem;
using namespace cardiofeat;

namespace {

int exit_code(ErrorCategory c) {
    switch (c) {
        case ErrorCategory::Config: return 2;
        case ErrorCategory::Data: return 3;
        case ErrorCategory::Numeric: return 4;
    }
    return 3;
}

// Flags that map one-to-one onto config keys; only flags given on the command
// line are applied, after the config file.
struct KeyFlag {
    const char *flag;
    const char *section;
    const char *key;
    const char *help;
};

constexpr KeyFlag kKeyFlags[] = {
    {"--images-dir", "paths", "images_dir", "directory with <id>.nii.gz CT volumes"},
    {"--labels-dir", "paths", "labels_dir", "directory with <id>.nii.gz labelmaps"},
    {"--cohort", "paths", "cohort_csv", "subject_id,label table"},
    {"--output-dir", "paths", "output_dir", "where all artifacts go"},
    {"--bin-width", "radiomics", "bin_width", "gray-level bin width (HU)"},
    {"--gldm-alpha", "radiomics", "gldm_alpha", "GLDM dependence tolerance"},
    {"--spacing", "radiomics", "spacing", "resample to this spacing (mm, 's' or 'sx,sy,sz')"},
    {"--atlas-iterations", "atlas", "iterations", "atlas refinement iterations"},
    {"--label-sigma", "atlas", "label_sigma_voxels", "soft-label smoothing (voxels)"},
    {"--levels", "registration", "levels", "pyramid levels"},
    {"--reg-iterations", "registration", "iterations_per_level", "iterations per pyramid level"},
    {"--sigma-fluid", "registration", "sigma_fluid", "update smoothing (voxels)"},
    {"--sigma-diffusion", "registration", "sigma_diffusion", "field smoothing (voxels)"},
    {"--reg-weight", "registration", "regularization_weight", "field-gradient penalty weight"},
    {"--energy-tol", "registration", "energy_tol", "relative energy decrease to stop"},
    {"--n-svd", "geometry", "n_svd", "singular values per structure (1..3)"},
    {"--center-svd", "geometry", "center", "subtract the mean vector before the SVD"},
    {"--hidden-layers", "classifier", "hidden_layers", "L in [1,12]"},
    {"--hidden-units", "classifier", "hidden_units", "H in [8,512]"},
    {"--dropout", "classifier", "dropout", "p in [0,0.5]"},
    {"--lr", "classifier", "learning_rate", "learning rate in [1e-4,1e-2]"},
    {"--epochs", "classifier", "epochs", "100,125,...,400"},
    {"--weight-decay", "classifier", "weight_decay", "AdamW decoupled decay"},
    {"--batch-size", "classifier", "batch_size", "0 = full batch"},
    {"--train-seed", "classifier", "seed", "initialization / dropout seed"},
    {"--search-budget", "search", "budget", "random-search trials (0 = use the fixed config)"},
    {"--search-seed", "search", "seed", "random-search seed"},
    {"--folds", "cv", "folds", "cross-validation folds"},
    {"--seeds", "cv", "seeds", "comma-separated split seeds"},
    {"--feature-sets", "cv", "feature_sets", "comma list of radiomic,geometric,combined"},
    {"--fold-safe", "pipeline", "fold_safe", "one atlas per training fold (true/false)"},
    {"--workers", "pipeline", "workers", "worker threads"},
};

struct KeyFlagValues {
    std::vector<std::string> values = std::vector<std::string>(std::size(kKeyFlags));
    std::vector<CLI::Option *> options = std::vector<CLI::Option *>(std::size(kKeyFlags), nullptr);
};

void add_key_flags(CLI::App *app, KeyFlagValues &v, std::initializer_list<const char *> sections) {
    for (std::size_t i = 0; i < std::size(kKeyFlags); ++i) {
        for (const char *s : sections) {
            if (std::string(kKeyFlags[i].section) == s) {
                v.options[i] = app->add_option(kKeyFlags[i].flag, v.values[i], kKeyFlags[i].help);
            }
        }
    }
}

void apply_key_flags(PipelineConfig &cfg, const KeyFlagValues &v) {
    for (std::size_t i = 0; i < std::size(kKeyFlags); ++i) {
        if (v.options[i] != nullptr && v.options[i]->count() > 0) {
            apply_config_entry(cfg, kKeyFlags[i].section, kKeyFlags[i].key, v.values[i]);
        }
    }
}

FeatureTable load_tables(const std::vector<std::string> &paths) {
    if (paths.empty()) throw Error(ErrorCode::ConfigError, "at least one --features table is required");
    FeatureTable t = read_feature_table(fs::path(paths.front()));
    for (std::size_t i = 1; i < paths.size(); ++i) t = join_columns(t, read_feature_table(fs::path(paths[i])));
    return t;
}

void write_or_print(const std::string &path, const std::function<void(std::ostream &)> &fn) {
    if (path.empty() || path == "-") {
        fn(std::cout);
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
    fn(out);
}

std::vector<Subject> subjects_from(const PipelineConfig &cfg, bool need_images) {
    const auto cohort = read_cohort_csv(cfg.cohort_csv);
    if (need_images) return load_subjects(cfg, cohort);
    std::vector<Subject> out;
    for (const auto &e : cohort) {
        Subject s;
        s.id = e.id;
        s.label = e.label;
        try {
            s.labels = load_labelmap(subject_file(cfg.labels_dir, e.id));
            if (cfg.spacing[0] > 0) s.labels = resample_to_spacing(s.labels, cfg.spacing);
        } catch (const Error &err) {
            throw err.with_context("[load] subject " + e.id + ": ");
        }
        out.push_back(std::move(s));
    }
    return out;
}

nlohmann::json model_json(const MlpModel &m, const Scaler &s, const TrainConfig &c, const std::vector<double> &curve) {
    nlohmann::json j;
    j["layer_sizes"] = m.layer_sizes();
    j["dropout"] = m.dropout();
    j["parameters"] = m.parameters();
    j["columns"] = s.columns;
    j["scaler_mean"] = s.mean;
    j["scaler_std"] = s.stddev;
    j["config"] = {{"hidden_layers", c.hidden_layers}, {"hidden_units", c.hidden_units}, {"dropout", c.dropout},
                   {"learning_rate", c.learning_rate}, {"epochs", c.epochs}, {"weight_decay", c.weight_decay},
                   {"batch_size", c.batch_size},       {"seed", c.seed},     {"n_svd", c.n_svd},
                   {"feature_set", std::string(to_string(c.feature_set))}};
    j["loss_curve"] = curve;
    return j;
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"Post-segmentation cardiac feature pipeline: radiomics, atlas deformation features, MLP"};
    app.require_subcommand(1);
    bool quiet = false;
    app.add_flag("-q,--quiet", quiet, "no progress logs on stderr");

    // gen-synth
    auto *gen = app.add_subcommand("gen-synth", "write a synthetic cohort (images, labelmaps, labels.csv)");
    SyntheticCohortSpec synth;
    std::string gen_out;
    std::vector<int> gen_dims;
    std::vector<double> gen_spacing;
    gen->add_option("--out", gen_out, "output directory")->required();
    gen->add_option("--n-healthy", synth.n_healthy, "healthy subjects")->capture_default_str();
    gen->add_option("--n-diseased", synth.n_diseased, "diseased subjects")->capture_default_str();
    gen->add_option("--seed", synth.seed, "generator seed")->capture_default_str();
    gen->add_option("--dims", gen_dims, "grid size (one or three ints)")->expected(1, 3);
    gen->add_option("--spacing", gen_spacing, "voxel spacing mm (one or three values)")->expected(1, 3);
    gen->add_option("--shape-amplitude", synth.shape_amplitude_mm, "disease shape shift (mm)")->capture_default_str();
    gen->add_option("--texture-noise", synth.texture_noise_hu, "disease texture noise (HU)")->capture_default_str();
    gen->add_option("--blobs", synth.calcification_blobs, "max calcification blobs")->capture_default_str();
    gen->add_option("--calcification-hu", synth.calcification_hu, "blob amplitude (HU)")->capture_default_str();
    gen->add_option("--jitter", synth.position_jitter_mm, "healthy position jitter (mm)")->capture_default_str();

    // build-atlas
    auto *ba = app.add_subcommand("build-atlas", "atlas from the healthy subjects of a cohort");
    KeyFlagValues ba_flags;
    std::string ba_out;
    bool ba_all = false;
    add_key_flags(ba, ba_flags, {"paths", "atlas", "registration", "pipeline"});
    ba->add_option("--out", ba_out, "output directory")->required();
    ba->add_flag("--all-subjects", ba_all, "use every subject, not only label 0");

    // register
    auto *reg = app.add_subcommand("register", "register one labelmap onto an atlas");
    KeyFlagValues reg_flags;
    std::string reg_atlas, reg_labels, reg_out;
    add_key_flags(reg, reg_flags, {"atlas", "registration"});
    reg->add_option("--atlas", reg_atlas, "atlas soft labels (atlas_soft.nii.gz)")->required();
    reg->add_option("--labelmap", reg_labels, "subject labelmap")->required();
    reg->add_option("--out", reg_out, "displacement field (.nii.gz)")->required();

    // radiomics
    auto *rad = app.add_subcommand("radiomics", "radiomic feature table for a cohort");
    KeyFlagValues rad_flags;
    std::string rad_out;
    add_key_flags(rad, rad_flags, {"paths", "radiomics", "pipeline"});
    rad->add_option("--out", rad_out, "feature CSV (default stdout)");

    // geomfeat
    auto *gf = app.add_subcommand("geomfeat", "SVD deformation features from saved fields");
    KeyFlagValues gf_flags;
    std::string gf_fields, gf_out;
    int gf_nsvd = 3;
    bool gf_center = false;
    add_key_flags(gf, gf_flags, {"paths"});
    gf->add_option("--fields-dir", gf_fields, "directory with <id>.nii.gz fields")->required();
    gf->add_option("--n-svd", gf_nsvd, "singular values per structure")->capture_default_str();
    gf->add_flag("--center", gf_center, "subtract the mean vector first");
    gf->add_option("--out", gf_out, "feature CSV (default stdout)");

    // seg-metrics
    auto *sm = app.add_subcommand("seg-metrics", "DSC / HD / HD95 / ASD between two labelmaps");
    std::string sm_pred, sm_gt, sm_out;
    sm->add_option("--pred", sm_pred, "predicted labelmap")->required();
    sm->add_option("--gt", sm_gt, "reference labelmap")->required();
    sm->add_option("--out", sm_out, "report CSV (default stdout)");

    // train / cv / search share table inputs
    auto add_table_inputs = [](CLI::App *sub, std::vector<std::string> &tables, std::string &set) {
        sub->add_option("--features", tables, "feature CSV(s); several are joined on subject_id")->required();
        sub->add_option("--feature-set", set, "radiomic | geometric | combined")->capture_default_str();
    };
    auto *tr = app.add_subcommand("train", "fit one MLP on a whole table");
    KeyFlagValues tr_flags;
    std::vector<std::string> tr_tables;
    std::string tr_set = "combined", tr_out;
    add_table_inputs(tr, tr_tables, tr_set);
    add_key_flags(tr, tr_flags, {"classifier", "geometry"});
    tr->add_option("--out", tr_out, "model JSON")->required();

    auto *cvc = app.add_subcommand("cv", "stratified k-fold x seeds evaluation");
    KeyFlagValues cv_flags;
    std::vector<std::string> cv_tables;
    std::string cv_out;
    cvc->add_option("--features", cv_tables, "feature CSV(s); several are joined on subject_id")->required();
    add_key_flags(cvc, cv_flags, {"classifier", "geometry", "cv", "pipeline"});
    cvc->add_option("--out-dir", cv_out, "write per-fold and summary CSVs here");

    auto *se = app.add_subcommand("search", "random hyperparameter search scored by inner-CV F1");
    KeyFlagValues se_flags;
    std::vector<std::string> se_tables;
    std::string se_set = "combined", se_out;
    int se_budget = 50;
    std::uint64_t se_seed = 0;
    bool se_include_base = false;
    add_table_inputs(se, se_tables, se_set);
    add_key_flags(se, se_flags, {"classifier", "geometry", "pipeline"});
    se->add_option("--budget", se_budget, "trials")->capture_default_str();
    se->add_option("--seed", se_seed, "search seed")->capture_default_str();
    se->add_flag("--include-base", se_include_base, "trial 0 is the fixed config from the flags");
    se->add_option("--out", se_out, "trial log CSV (default stdout)");

    auto *ra = app.add_subcommand("run-all", "full pipeline with resumable stages");
    KeyFlagValues ra_flags;
    std::string ra_config;
    bool ra_force = false;
    ra->add_option("--config", ra_config, "INI config file");
    add_key_flags(ra, ra_flags, {"paths", "radiomics", "atlas", "registration", "geometry", "classifier", "search",
                                 "cv", "pipeline"});
    ra->add_flag("--force", ra_force, "ignore stage stamps");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }
    set_log_enabled(!quiet);

    try {
        if (gen->parsed()) {
            if (gen_dims.size() == 1) synth.dims = {gen_dims[0], gen_dims[0], gen_dims[0]};
            else if (gen_dims.size() == 3) synth.dims = {gen_dims[0], gen_dims[1], gen_dims[2]};
            if (gen_spacing.size() == 1) synth.spacing = {gen_spacing[0], gen_spacing[0], gen_spacing[0]};
            else if (gen_spacing.size() == 3) synth.spacing = {gen_spacing[0], gen_spacing[1], gen_spacing[2]};
            log_stage("gen-synth", "generating " + std::to_string(synth.n_healthy + synth.n_diseased) + " subjects");
            write_synthetic_cohort(generate_synthetic_cohort(synth), gen_out);
            log_stage("gen-synth", "wrote " + gen_out);
        } else if (ba->parsed()) {
            PipelineConfig cfg;
            apply_key_flags(cfg, ba_flags);
            cfg.atlas.workers = cfg.workers;
            auto subjects = subjects_from(cfg, false);
            std::vector<std::string> ids;
            for (const auto &s : subjects) {
                if (ba_all || s.label == 0) ids.push_back(s.id);
            }
            if (ba_all) {
                for (auto &s : subjects) s.label = 0;
            }
            log_stage("build-atlas", "building from " + std::to_string(ids.size()) + " subjects");
            const auto res = build_training_atlas(subjects, ids, cfg.atlas);
            fs::create_directories(fs::path(ba_out) / "fields");
            atlas::save_soft_labels(res.atlas.soft, fs::path(ba_out) / "atlas_soft.nii.gz");
            save_labelmap(res.atlas.hard, fs::path(ba_out) / "atlas_labels.nii.gz");
            std::vector<Subject> members;
            for (const auto &s : subjects) {
                if (std::find(ids.begin(), ids.end(), s.id) != ids.end()) members.push_back(s);
            }
            for (std::size_t i = 0; i < members.size(); ++i) {
                atlas::save_field(res.fields[i], fs::path(ba_out) / "fields" / (members[i].id + ".nii.gz"));
            }
            write_qc_csv(members, res.qc, fs::path(ba_out) / "qc.csv");
        } else if (reg->parsed()) {
            PipelineConfig cfg;
            apply_key_flags(cfg, reg_flags);
            const auto soft = atlas::load_soft_labels(reg_atlas);
            const LabelMap labels = load_labelmap(reg_labels);
            const double sigma_mm = cfg.atlas.label_sigma_mm(labels.geometry());
            const auto moving = atlas::to_soft_labels(labels, sigma_mm);
            const auto r =
                atlas::register_labels(moving, atlas::smooth_soft_labels(soft, sigma_mm), cfg.atlas.registration);
            atlas::save_field(r.field, reg_out);
            const auto qc = atlas::quality_control(r);
            std::printf("initial_energy,final_energy,mean_displacement_mm,folding_percent,non_converged\n%s,%s,%s,%s,%d\n",
                        csv::format_double(r.initial_energy).c_str(), csv::format_double(r.final_energy).c_str(),
                        csv::format_double(qc.mean_displacement_mm).c_str(),
                        csv::format_double(qc.folding_percent).c_str(), qc.non_converged ? 1 : 0);
        } else if (rad->parsed()) {
            PipelineConfig cfg;
            apply_key_flags(cfg, rad_flags);
            const auto subjects = subjects_from(cfg, true);
            const auto table = radiomics_table(subjects, cfg.radiomics, cfg.workers);
            write_or_print(rad_out, [&](std::ostream &os) { write_feature_table(table, os); });
        } else if (gf->parsed()) {
            PipelineConfig cfg;
            apply_key_flags(cfg, gf_flags);
            const auto subjects = subjects_from(cfg, false);
            FeatureTable table(geom::geometric_feature_names(gf_nsvd));
            for (const auto &s : subjects) {
                try {
                    const auto field = atlas::load_field(subject_file(gf_fields, s.id));
                    table.add_row(s.id, geom::extract_geometric(field, s.labels, gf_nsvd, gf_center), s.label);
                } catch (const Error &err) {
                    throw err.with_context("[geomfeat] subject " + s.id + ": ");
                }
            }
            write_or_print(gf_out, [&](std::ostream &os) { write_feature_table(table, os); });
        } else if (sm->parsed()) {
            const auto report = seg::evaluate_segmentation(load_labelmap(sm_pred), load_labelmap(sm_gt));
            write_or_print(sm_out, [&](std::ostream &os) { seg::write_report_csv(report, os); });
        } else if (tr->parsed()) {
            PipelineConfig cfg;
            apply_key_flags(cfg, tr_flags);
            cfg.train.feature_set = parse_feature_set(tr_set);
            cfg.train.validate();
            const auto table = select_feature_set(load_tables(tr_tables), cfg.train.feature_set, cfg.train.n_svd);
            const Scaler scaler = fit_scaler(table);
            const auto res = train(apply_scaler(scaler, table), cfg.train);
            std::ofstream out(tr_out, std::ios::binary);
            if (!out) throw Error(ErrorCode::IoError, "cannot write " + tr_out);
            out << model_json(res.model, scaler, cfg.train, res.loss_curve).dump(1) << '\n';
            log_stage("train", "final loss " + csv::format_double(res.loss_curve.empty() ? 0.0 : res.loss_curve.back()));
        } else if (cvc->parsed()) {
            PipelineConfig cfg;
            apply_key_flags(cfg, cv_flags);
            cfg.train.validate();
            const auto table = load_tables(cv_tables);
            CvOptions opt;
            opt.folds = cfg.folds;
            opt.seeds = cfg.seeds;
            opt.workers = cfg.workers;
            std::vector<EvalReport> reports;
            for (FeatureSet set : cfg.feature_sets) {
                const std::string name(to_string(set));
                TrainConfig c = cfg.train;
                c.feature_set = set;
                log_stage("cv", name);
                reports.push_back(cross_validate(table, c, opt));
                if (!cv_out.empty()) {
                    fs::create_directories(cv_out);
                    std::ofstream f(fs::path(cv_out) / ("cv_" + name + "_folds.csv"), std::ios::binary);
                    reports.back().write_folds_csv(f);
                    std::ofstream s(fs::path(cv_out) / ("cv_" + name + "_summary.csv"), std::ios::binary);
                    reports.back().write_summary_csv(s);
                }
            }
            std::cout << text_table(reports);
        } else if (se->parsed()) {
            PipelineConfig cfg;
            apply_key_flags(cfg, se_flags);
            cfg.train.feature_set = parse_feature_set(se_set);
            const auto table = load_tables(se_tables);
            SearchOptions opt;
            opt.budget = se_budget;
            opt.seed = se_seed;
            opt.include_base = se_include_base;
            opt.workers = cfg.workers;
            const auto res = hyperparameter_search(table, cfg.train, opt);
            write_or_print(se_out, [&](std::ostream &os) { res.write_trials_csv(os); });
            const auto &b = res.best;
            log_stage("search", "best trial " + std::to_string(res.best_index) + ": L=" + std::to_string(b.hidden_layers) +
                                    " H=" + std::to_string(b.hidden_units) + " p=" + csv::format_double(b.dropout) +
                                    " lr=" + csv::format_double(b.learning_rate) + " E=" + std::to_string(b.epochs) +
                                    " n_svd=" + std::to_string(b.n_svd));
        } else if (ra->parsed()) {
            PipelineConfig cfg = ra_config.empty() ? PipelineConfig{} : load_pipeline_config(ra_config);
            apply_key_flags(cfg, ra_flags);
            if (ra_force) cfg.force = true;
            cfg.atlas.workers = cfg.workers;
            if (cfg.cohort_csv.empty()) throw Error(ErrorCode::ConfigError, "paths.cohort_csv (--cohort) is required");
            const auto res = run_pipeline(cfg);
            std::cout << text_table(res.reports);
        }
    } catch (const Error &e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code(e.category());
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
