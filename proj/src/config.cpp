#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <sstream>

#include "cardiofeat/csv.hpp"
#include "cardiofeat/error.hpp"
#include "cardiofeat/pipeline.hpp"

namespace cardiofeat {
namespace {

[[noreturn]] void bad(const std::string &section, const std::string &key, const std::string &why) {
    throw Error(ErrorCode::ConfigError, section + "." + key + ": " + why);
}

std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r\"");
    const auto e = s.find_last_not_of(" \t\r\"");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

double to_double(const std::string &sec, const std::string &key, const std::string &v) {
    try {
        const double d = csv::parse_double(v);
        if (is_missing(d)) bad(sec, key, "empty value");
        return d;
    } catch (const Error &) {
        bad(sec, key, "not a number: '" + v + "'");
    }
}

long long to_int(const std::string &sec, const std::string &key, const std::string &v) {
    long long out = 0;
    auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size()) bad(sec, key, "not an integer: '" + v + "'");
    return out;
}

bool to_bool(const std::string &sec, const std::string &key, const std::string &v) {
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    bad(sec, key, "not a boolean: '" + v + "'");
}

std::vector<std::string> list(const std::string &v) {
    std::vector<std::string> out;
    for (auto &part : csv::split(v)) {
        part = trim(part);
        if (!part.empty()) out.push_back(part);
    }
    return out;
}

}  // namespace

void apply_config_entry(PipelineConfig &c, const std::string &section, const std::string &key_in,
                        const std::string &value_in) {
    const std::string key = trim(key_in);
    const std::string v = trim(value_in);
    const std::string &s = section;
    auto D = [&] { return to_double(s, key, v); };
    auto I = [&] { return to_int(s, key, v); };
    auto B = [&] { return to_bool(s, key, v); };
    auto &r = c.atlas.registration;

    if (s == "paths") {
        if (key == "images_dir") c.images_dir = v;
        else if (key == "labels_dir") c.labels_dir = v;
        else if (key == "cohort_csv") c.cohort_csv = v;
        else if (key == "output_dir") c.output_dir = v;
        else bad(s, key, "unknown key");
    } else if (s == "radiomics") {
        if (key == "bin_width") c.radiomics.bin_width = D();
        else if (key == "gldm_alpha") c.radiomics.gldm_alpha = static_cast<int>(I());
        else if (key == "spacing") {
            const auto parts = list(v);
            if (parts.size() == 1) {
                const double x = to_double(s, key, parts[0]);
                c.spacing = {x, x, x};
            } else if (parts.size() == 3) {
                for (int a = 0; a < 3; ++a) c.spacing[a] = to_double(s, key, parts[static_cast<std::size_t>(a)]);
            } else {
                bad(s, key, "expected one or three values");
            }
        } else bad(s, key, "unknown key");
    } else if (s == "atlas") {
        if (key == "iterations") c.atlas.iterations = static_cast<int>(I());
        else if (key == "label_sigma_voxels") c.atlas.label_sigma_voxels = D();
        else bad(s, key, "unknown key");
    } else if (s == "registration") {
        if (key == "levels") r.levels = static_cast<int>(I());
        else if (key == "iterations_per_level") r.iterations_per_level = static_cast<int>(I());
        else if (key == "sigma_fluid") r.sigma_fluid = D();
        else if (key == "sigma_diffusion") r.sigma_diffusion = D();
        else if (key == "step") r.step = D();
        else if (key == "max_halvings") r.max_halvings = static_cast<int>(I());
        else if (key == "energy_tol") r.energy_tol = D();
        else if (key == "regularization_weight") r.regularization_weight = D();
        else bad(s, key, "unknown key");
    } else if (s == "geometry") {
        if (key == "n_svd") c.train.n_svd = static_cast<int>(I());
        else if (key == "center") c.center_svd = B();
        else bad(s, key, "unknown key");
    } else if (s == "classifier") {
        if (key == "hidden_layers") c.train.hidden_layers = static_cast<int>(I());
        else if (key == "hidden_units") c.train.hidden_units = static_cast<int>(I());
        else if (key == "dropout") c.train.dropout = D();
        else if (key == "learning_rate") c.train.learning_rate = D();
        else if (key == "epochs") c.train.epochs = static_cast<int>(I());
        else if (key == "weight_decay") c.train.weight_decay = D();
        else if (key == "batch_size") c.train.batch_size = static_cast<int>(I());
        else if (key == "seed") c.train.seed = static_cast<std::uint64_t>(I());
        else bad(s, key, "unknown key");
    } else if (s == "search") {
        if (key == "budget") c.search_budget = static_cast<int>(I());
        else if (key == "seed") c.search_seed = static_cast<std::uint64_t>(I());
        else bad(s, key, "unknown key");
    } else if (s == "cv") {
        if (key == "folds") c.folds = static_cast<int>(I());
        else if (key == "seeds") {
            c.seeds.clear();
            for (const auto &p : list(v)) c.seeds.push_back(static_cast<std::uint64_t>(to_int(s, key, p)));
        } else if (key == "feature_sets") {
            c.feature_sets.clear();
            for (const auto &p : list(v)) c.feature_sets.push_back(parse_feature_set(p));
        } else bad(s, key, "unknown key");
    } else if (s == "pipeline") {
        if (key == "fold_safe") c.fold_safe = B();
        else if (key == "workers") c.workers = static_cast<unsigned>(std::max<long long>(1, I()));
        else if (key == "force") c.force = B();
        else bad(s, key, "unknown key");
    } else {
        throw Error(ErrorCode::ConfigError, "unknown config section [" + s + "]");
    }
}

PipelineConfig load_pipeline_config(const std::filesystem::path &path) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        pt::read_ini(path.string(), tree);
    } catch (const pt::ini_parser_error &e) {
        throw Error(ErrorCode::ConfigError, "cannot parse " + path.string() + ": " + e.message() + " (line " +
                                                std::to_string(e.line()) + ")");
    }
    PipelineConfig c;
    for (const auto &[section, body] : tree) {
        if (body.empty()) {
            throw Error(ErrorCode::ConfigError, "key '" + section + "' must live inside a [section]");
        }
        for (const auto &[key, value] : body) apply_config_entry(c, section, key, value.data());
    }
    // relative paths are taken relative to the config file
    const auto base = path.parent_path();
    for (auto *p : {&c.images_dir, &c.labels_dir, &c.cohort_csv, &c.output_dir}) {
        if (!p->empty() && p->is_relative()) *p = base / *p;
    }
    c.validate();
    return c;
}

atlas::AtlasParams PipelineConfig::default_atlas_params() {
    atlas::AtlasParams p;
    p.iterations = 2;
    p.registration.iterations_per_level = 25;
    return p;
}

void PipelineConfig::validate() const {
    auto fail = [](const std::string &m) { throw Error(ErrorCode::ConfigError, m); };
    train.validate();
    if (!(radiomics.bin_width > 0)) fail("radiomics.bin_width must be > 0");
    if (radiomics.gldm_alpha < 0) fail("radiomics.gldm_alpha must be >= 0");
    for (double s : spacing) {
        if (!(s >= 0)) fail("radiomics.spacing must be >= 0");
    }
    if ((spacing[0] > 0) != (spacing[1] > 0) || (spacing[0] > 0) != (spacing[2] > 0)) {
        fail("radiomics.spacing must be all zero or all positive");
    }
    if (atlas.iterations < 0) fail("atlas.iterations must be >= 0");
    if (!(atlas.label_sigma_voxels >= 0)) fail("atlas.label_sigma_voxels must be >= 0");
    const auto &r = atlas.registration;
    if (r.levels < 1) fail("registration.levels must be >= 1");
    if (r.iterations_per_level < 0) fail("registration.iterations_per_level must be >= 0");
    if (!(r.sigma_fluid >= 0) || !(r.sigma_diffusion >= 0)) fail("registration sigmas must be >= 0");
    if (!(r.step > 0)) fail("registration.step must be > 0");
    if (r.max_halvings < 0) fail("registration.max_halvings must be >= 0");
    if (!(r.energy_tol >= 0)) fail("registration.energy_tol must be >= 0");
    if (!(r.regularization_weight >= 0)) fail("registration.regularization_weight must be >= 0");
    if (search_budget < 0) fail("search.budget must be >= 0");
    if (folds < 2) fail("cv.folds must be >= 2");
    if (seeds.empty()) fail("cv.seeds must not be empty");
    if (feature_sets.empty()) fail("cv.feature_sets must not be empty");
    if (workers < 1) fail("pipeline.workers must be >= 1");
}

std::string PipelineConfig::describe(bool with_output_dir) const {
    std::ostringstream os;
    auto f = [](double v) { return csv::format_double(v); };
    const auto &r = atlas.registration;
    os << "[paths]\nimages_dir = " << images_dir.string() << "\nlabels_dir = " << labels_dir.string()
       << "\ncohort_csv = " << cohort_csv.string() << '\n';
    if (with_output_dir) os << "output_dir = " << output_dir.string() << '\n';
    os << '\n';
    os << "[radiomics]\nbin_width = " << f(radiomics.bin_width) << "\ngldm_alpha = " << radiomics.gldm_alpha
       << "\nspacing = " << f(spacing[0]) << ',' << f(spacing[1]) << ',' << f(spacing[2]) << "\n\n";
    os << "[atlas]\niterations = " << atlas.iterations << "\nlabel_sigma_voxels = " << f(atlas.label_sigma_voxels)
       << "\n\n";
    os << "[registration]\nlevels = " << r.levels << "\niterations_per_level = " << r.iterations_per_level
       << "\nsigma_fluid = " << f(r.sigma_fluid) << "\nsigma_diffusion = " << f(r.sigma_diffusion)
       << "\nstep = " << f(r.step) << "\nmax_halvings = " << r.max_halvings << "\nenergy_tol = " << f(r.energy_tol)
       << "\nregularization_weight = " << f(r.regularization_weight) << "\n\n";
    os << "[geometry]\nn_svd = " << train.n_svd << "\ncenter = " << (center_svd ? "true" : "false") << "\n\n";
    os << "[classifier]\nhidden_layers = " << train.hidden_layers << "\nhidden_units = " << train.hidden_units
       << "\ndropout = " << f(train.dropout) << "\nlearning_rate = " << f(train.learning_rate)
       << "\nepochs = " << train.epochs << "\nweight_decay = " << f(train.weight_decay)
       << "\nbatch_size = " << train.batch_size << "\nseed = " << train.seed << "\n\n";
    os << "[search]\nbudget = " << search_budget << "\nseed = " << search_seed << "\n\n";
    os << "[cv]\nfolds = " << folds << "\nseeds = ";
    for (std::size_t i = 0; i < seeds.size(); ++i) os << (i ? "," : "") << seeds[i];
    os << "\nfeature_sets = ";
    for (std::size_t i = 0; i < feature_sets.size(); ++i) os << (i ? "," : "") << to_string(feature_sets[i]);
    os << "\n\n[pipeline]\nfold_safe = " << (fold_safe ? "true" : "false") << "\n";
    return os.str();
}

}  // namespace cardiofeat
