#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "cardiofeat/atlasreg.hpp"
#include "cardiofeat/evaluation.hpp"
#include "cardiofeat/radiomics.hpp"
#include "cardiofeat/search.hpp"

namespace cardiofeat {

struct PipelineConfig {
    // [paths]
    std::filesystem::path images_dir;
    std::filesystem::path labels_dir;
    std::filesystem::path cohort_csv;  // subject_id,label[,...]
    std::filesystem::path output_dir = "cardiofeat_out";

    // [radiomics]
    radiomics::RadiomicsConfig radiomics;
    Vec3 spacing{0.0, 0.0, 0.0};  // resampling target in mm, 0 = keep native grid

    // [atlas] / [registration]
    atlas::AtlasParams atlas = default_atlas_params();

    // [geometry]; tables always carry 3 singular values, train.n_svd picks how many are used
    bool center_svd = false;

    // [classifier] / [search] / [cv]
    TrainConfig train;
    int search_budget = 0;
    std::uint64_t search_seed = 0;
    int folds = 5;
    std::vector<std::uint64_t> seeds{0, 1, 2};
    std::vector<FeatureSet> feature_sets{FeatureSet::Radiomic, FeatureSet::Geometric, FeatureSet::Combined};

    // [pipeline]
    bool fold_safe = true;
    unsigned workers = 1;
    bool force = false;  // ignore stamps

    static atlas::AtlasParams default_atlas_params();
    /// Range checks; throws ConfigError.
    void validate() const;
    /// Canonical INI listing of every parameter. The copy written into a run
    /// directory leaves out output_dir so the directory can be moved.
    std::string describe(bool with_output_dir = true) const;
};

/// Reads an INI file ([section] key = value). Unknown sections or keys and bad
/// values raise ConfigError.
PipelineConfig load_pipeline_config(const std::filesystem::path &path);
void apply_config_entry(PipelineConfig &config, const std::string &section, const std::string &key,
                        const std::string &value);

struct CohortEntry {
    std::string id;
    int label = 0;
};
/// subject_id,label[,extra columns]. Throws IoError / MalformedHeader / InvalidArgument.
std::vector<CohortEntry> read_cohort_csv(const std::filesystem::path &path);

struct Subject {
    std::string id;
    int label = 0;
    VolumeGrid image;
    LabelMap labels;
};

/// <dir>/<id>.nii.gz, falling back to <dir>/<id>.nii. Throws IoError naming the subject.
std::filesystem::path subject_file(const std::filesystem::path &dir, const std::string &id);

/// Loads, optionally resamples, and checks that all subjects share one grid.
std::vector<Subject> load_subjects(const PipelineConfig &config, std::span<const CohortEntry> cohort);

FeatureTable radiomics_table(std::span<const Subject> subjects, const radiomics::RadiomicsConfig &config,
                             unsigned workers);

struct GeometryRun {
    FeatureTable table;
    std::vector<atlas::SubjectQc> qc;
    std::vector<atlas::DisplacementField> fields;  // only filled when requested
};

/// Registers every subject's soft labels onto the atlas and extracts SVD features.
GeometryRun geometric_table(std::span<const Subject> subjects, const atlas::SoftLabelImage &atlas_soft,
                            const atlas::AtlasParams &params, bool center, unsigned workers,
                            bool keep_fields = false);

/// Atlas from the healthy subjects among `train_ids` only.
atlas::AtlasResult build_training_atlas(std::span<const Subject> subjects, std::span<const std::string> train_ids,
                                        const atlas::AtlasParams &params);

/// Stable FNV-1a 64-bit hash.
std::uint64_t fnv1a(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t hash_file(const std::filesystem::path &path, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);

void write_qc_csv(std::span<const Subject> subjects, std::span<const atlas::SubjectQc> qc,
                  const std::filesystem::path &path);

struct PipelineResult {
    std::vector<EvalReport> reports;  // one per feature set, config order
    std::map<FeatureSet, TrainConfig> configs;
    std::vector<std::string> stages_run;
    std::vector<std::string> stages_skipped;
};

/// Full run: radiomics, atlas(es), registration + geometric features,
/// optional search, cross-validation per feature set. Every artifact is
/// written under output_dir; stages whose stamp matches are skipped.
PipelineResult run_pipeline(const PipelineConfig &config);

}  // namespace cardiofeat
