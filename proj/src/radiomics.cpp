#include <string>

#include "cardiofeat/radiomics.hpp"

namespace cardiofeat::radiomics {
namespace {

void append_family(FeatureVector &out, Family family, const FeatureVector &part) {
    out.append(std::string(family_tag(family)) + "_", part);
}

}  // namespace

FeatureVector extract_structure_radiomics(const VolumeGrid &volume, const StructureMask &mask,
                                          const RadiomicsConfig &config) {
    const DiscretizedRegion region = discretize(volume, mask, config.bin_width);
    FeatureVector out;
    append_family(out, Family::FirstOrder, first_order_features(volume, mask, region));
    append_family(out, Family::Shape, shape3d_features(mask).features);
    append_family(out, Family::Glcm, glcm_features(region));
    append_family(out, Family::Glrlm, glrlm_features(region));
    append_family(out, Family::Glszm, glszm_features(region));
    append_family(out, Family::Ngtdm, ngtdm_features(region));
    append_family(out, Family::Gldm, gldm_features(region, config.gldm_alpha));
    return out;
}

FeatureVector extract_radiomics(const VolumeGrid &volume, const LabelMap &labels, const RadiomicsConfig &config) {
    require_same_geometry(volume.geometry(), labels.geometry(), "extract_radiomics");
    FeatureVector out;
    for (int code = 1; code <= kStructureCount; ++code) {
        const std::string prefix = std::string(structure_abbrev(code)) + "_";
        const StructureMask mask = extract_structure_mask(labels, code);
        if (mask.empty()) {
            for (const auto &name : structure_feature_names()) out.add_missing(prefix + name);
            continue;
        }
        out.append(prefix, extract_structure_radiomics(volume, mask, config));
    }
    return out;
}

}  // namespace cardiofeat::radiomics
