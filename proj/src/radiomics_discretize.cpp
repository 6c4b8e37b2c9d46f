#include <algorithm>
#include <cmath>
#include <limits>

#include "cardiofeat/radiomics.hpp"

namespace cardiofeat::radiomics {

std::string_view family_tag(Family family) {
    switch (family) {
    case Family::FirstOrder: return "firstorder";
    case Family::Shape: return "shape";
    case Family::Glcm: return "glcm";
    case Family::Glrlm: return "glrlm";
    case Family::Glszm: return "glszm";
    case Family::Ngtdm: return "ngtdm";
    case Family::Gldm: return "gldm";
    }
    return "unknown";
}

const std::vector<std::string> &family_feature_names(Family family) {
    static const std::vector<std::string> first_order = {"Mean",    "Variance", "Skewness", "Kurtosis",
                                                         "Entropy", "Minimum",  "Maximum",  "Median",
                                                         "Energy",  "RootMeanSquared"};
    static const std::vector<std::string> shape = {"VoxelVolume",     "MeshSurfaceArea", "Sphericity",
                                                   "Compactness",     "Elongation",      "Flatness",
                                                   "MajorAxisLength", "MinorAxisLength", "LeastAxisLength",
                                                   "Maximum3DDiameter"};
    static const std::vector<std::string> glcm = {"Contrast", "Correlation",  "Homogeneity",      "Energy",
                                                  "Entropy",  "ClusterShade", "ClusterProminence"};
    static const std::vector<std::string> glrlm = {"ShortRunEmphasis", "LongRunEmphasis", "GrayLevelNonUniformity",
                                                   "RunLengthNonUniformity", "RunPercentage"};
    static const std::vector<std::string> glszm = {"SmallAreaEmphasis", "LargeAreaEmphasis", "ZoneEntropy",
                                                   "GrayLevelNonUniformity", "SizeZoneNonUniformity"};
    static const std::vector<std::string> ngtdm = {"Coarseness", "Contrast", "Busyness", "Complexity", "Strength"};
    static const std::vector<std::string> gldm = {"SmallDependenceEmphasis", "LargeDependenceEmphasis",
                                                  "DependenceEntropy", "GrayLevelNonUniformity"};
    switch (family) {
    case Family::FirstOrder: return first_order;
    case Family::Shape: return shape;
    case Family::Glcm: return glcm;
    case Family::Glrlm: return glrlm;
    case Family::Glszm: return glszm;
    case Family::Ngtdm: return ngtdm;
    case Family::Gldm: return gldm;
    }
    return first_order;
}

std::vector<std::string> structure_feature_names() {
    std::vector<std::string> out;
    for (Family f : kAllFamilies) {
        for (const auto &n : family_feature_names(f)) {
            out.push_back(std::string(family_tag(f)) + "_" + n);
        }
    }
    return out;
}

const std::array<Index3, 13> &unique_directions() {
    static const std::array<Index3, 13> dirs = {{{1, 0, 0},
                                                 {0, 1, 0},
                                                 {0, 0, 1},
                                                 {1, 1, 0},
                                                 {1, -1, 0},
                                                 {1, 0, 1},
                                                 {1, 0, -1},
                                                 {0, 1, 1},
                                                 {0, 1, -1},
                                                 {1, 1, 1},
                                                 {1, 1, -1},
                                                 {1, -1, 1},
                                                 {1, -1, -1}}};
    return dirs;
}

double TextureMatrix::sum() const {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
}

TextureMatrix TextureMatrix::normalized() const {
    TextureMatrix out = *this;
    const double s = sum();
    if (s > 0.0) {
        for (double &v : out.values) v /= s;
    }
    return out;
}

void DiscretizedRegion::build_lookup() {
    if (voxels.empty()) {
        box_origin_ = {0, 0, 0};
        box_dims_ = {0, 0, 0};
        box_.clear();
        return;
    }
    Index3 lo = voxels.front();
    Index3 hi = voxels.front();
    for (const auto &p : voxels) {
        for (int a = 0; a < 3; ++a) {
            lo[a] = std::min(lo[a], p[a]);
            hi[a] = std::max(hi[a], p[a]);
        }
    }
    box_origin_ = lo;
    for (int a = 0; a < 3; ++a) box_dims_[a] = hi[a] - lo[a] + 1;
    box_.assign(static_cast<std::size_t>(box_dims_[0]) * box_dims_[1] * box_dims_[2], 0);
    for (std::size_t i = 0; i < voxels.size(); ++i) {
        const auto &p = voxels[i];
        const std::size_t idx = static_cast<std::size_t>(p[0] - lo[0]) +
                                static_cast<std::size_t>(box_dims_[0]) *
                                    (static_cast<std::size_t>(p[1] - lo[1]) +
                                     static_cast<std::size_t>(box_dims_[1]) * static_cast<std::size_t>(p[2] - lo[2]));
        box_[idx] = levels[i];
    }
}

DiscretizedRegion discretize(const VolumeGrid &volume, const StructureMask &mask, double bin_width) {
    require_same_geometry(volume.geometry(), mask.geometry(), "discretize");
    if (mask.empty()) {
        throw Error(ErrorCode::EmptyMask, "cannot discretize an empty structure mask");
    }
    if (!(bin_width > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "bin width must be positive");
    }
    DiscretizedRegion r;
    r.bin_width = bin_width;
    r.spacing = volume.geometry().spacing;
    r.voxels = mask.voxels();
    r.intensities.reserve(r.voxels.size());
    double lo = std::numeric_limits<double>::infinity();
    for (const auto &p : r.voxels) {
        const double v = volume.at(p[0], p[1], p[2]);
        r.intensities.push_back(v);
        lo = std::min(lo, v);
    }
    r.min_intensity = lo;
    r.levels.reserve(r.voxels.size());
    int ng = 1;
    for (double v : r.intensities) {
        const int level = static_cast<int>(std::floor((v - lo) / bin_width)) + 1;
        r.levels.push_back(level);
        ng = std::max(ng, level);
    }
    r.gray_levels = ng;
    r.build_lookup();
    return r;
}

}  // namespace cardiofeat::radiomics
