#pragma once

// Per-structure radiomic features: first-order intensity statistics, 3D shape
// descriptors and five texture-matrix families (GLCM, GLRLM, GLSZM, NGTDM,
// GLDM). Definitions follow IBSI conventions; docs/features.md lists every
// formula together with the degenerate-case conventions used here.

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "cardiofeat/feature_vector.hpp"
#include "cardiofeat/volume.hpp"

namespace cardiofeat::radiomics {

enum class Family { FirstOrder, Shape, Glcm, Glrlm, Glszm, Ngtdm, Gldm };

inline constexpr std::array<Family, 7> kAllFamilies = {Family::FirstOrder, Family::Shape, Family::Glcm,
                                                       Family::Glrlm,      Family::Glszm, Family::Ngtdm,
                                                       Family::Gldm};

/// Lower-case tag used in feature names, e.g. "glcm".
std::string_view family_tag(Family family);
/// Feature names emitted by one family, in emission order.
const std::vector<std::string> &family_feature_names(Family family);
/// "<family>_<Feature>" names for one structure (46 entries).
std::vector<std::string> structure_feature_names();

/// Gray levels of the voxels inside one mask, plus a padded dense crop of the
/// mask's bounding box for neighbourhood lookups (level 0 = outside mask).
class DiscretizedRegion {
public:
    std::vector<int> levels;            // per mask voxel, lexicographic order
    std::vector<double> intensities;    // same order
    std::vector<Index3> voxels;         // lattice coordinates, same order
    int gray_levels = 0;                // N_g = max level
    double bin_width = 0.0;
    double min_intensity = 0.0;
    Vec3 spacing{1.0, 1.0, 1.0};

    /// Level at lattice coordinate p, or 0 when p lies outside the mask.
    int level_at(const Index3 &p) const {
        const int x = p[0] - box_origin_[0];
        const int y = p[1] - box_origin_[1];
        const int z = p[2] - box_origin_[2];
        if (x < 0 || y < 0 || z < 0 || x >= box_dims_[0] || y >= box_dims_[1] || z >= box_dims_[2]) {
            return 0;
        }
        return box_[static_cast<std::size_t>(x) +
                    static_cast<std::size_t>(box_dims_[0]) *
                        (static_cast<std::size_t>(y) + static_cast<std::size_t>(box_dims_[1]) * static_cast<std::size_t>(z))];
    }
    std::size_t voxel_count() const noexcept { return levels.size(); }

    /// Builds the neighbourhood lookup from `voxels` / `levels`.
    void build_lookup();

private:
    Index3 box_origin_{0, 0, 0};
    Index3 box_dims_{0, 0, 0};
    std::vector<int> box_;
};

/// level(x) = floor((I(x) - min_I) / bin_width) + 1 over the mask. Throws EmptyMask.
DiscretizedRegion discretize(const VolumeGrid &volume, const StructureMask &mask, double bin_width);

/// Non-negative per-family matrix. Rows index gray level (level - 1); the column
/// meaning depends on the family (GLCM: level, GLRLM: run length - 1, GLSZM:
/// zone size - 1, GLDM: dependence count, NGTDM: [n_i, s_i]).
struct TextureMatrix {
    Family family = Family::Glcm;
    int rows = 0;
    int cols = 0;
    std::vector<double> values;
    std::string metadata;

    TextureMatrix() = default;
    TextureMatrix(Family f, int r, int c, std::string meta = {})
        : family(f), rows(r), cols(c), values(static_cast<std::size_t>(r) * static_cast<std::size_t>(c), 0.0),
          metadata(std::move(meta)) {}

    double &at(int r, int c) { return values[static_cast<std::size_t>(r) * static_cast<std::size_t>(cols) + static_cast<std::size_t>(c)]; }
    double at(int r, int c) const { return values[static_cast<std::size_t>(r) * static_cast<std::size_t>(cols) + static_cast<std::size_t>(c)]; }
    double sum() const;
    /// Copy scaled to unit sum (unchanged when the sum is 0).
    TextureMatrix normalized() const;
};

/// The 13 unique distance-1 offsets of the 26-neighbourhood, fixed order.
const std::array<Index3, 13> &unique_directions();

FeatureVector first_order_features(const VolumeGrid &volume, const StructureMask &mask,
                                   const DiscretizedRegion &region);

struct ShapeFeatures {
    FeatureVector features;
    /// Single voxel, or all voxel centres coplanar/collinear. Features are still valid numbers.
    bool degenerate = false;
};
ShapeFeatures shape3d_features(const StructureMask &mask);

/// Symmetric (unnormalized) co-occurrence counts of in-mask pairs (p, p+direction).
TextureMatrix glcm_matrix(const DiscretizedRegion &region, const Index3 &direction);
FeatureVector glcm_features_from_matrix(const TextureMatrix &counts);
/// Feature-level average over the 13 directions that contain at least one pair.
FeatureVector glcm_features(const DiscretizedRegion &region);

TextureMatrix glrlm_matrix(const DiscretizedRegion &region, const Index3 &direction);
FeatureVector glrlm_features_from_matrix(const TextureMatrix &runs, std::size_t voxel_count);
FeatureVector glrlm_features(const DiscretizedRegion &region);

/// Zones are 26-connected components of equal gray level.
TextureMatrix glszm_matrix(const DiscretizedRegion &region);
FeatureVector glszm_features(const DiscretizedRegion &region);

/// Row i: [n_i, s_i] where n_i counts level-i voxels with at least one in-mask
/// 26-neighbour and s_i sums |i - mean neighbour level| over them.
TextureMatrix ngtdm_matrix(const DiscretizedRegion &region);
FeatureVector ngtdm_features(const DiscretizedRegion &region);

inline constexpr double kCoarsenessCap = 1e6;

/// Dependence = number of in-mask 26-neighbours whose level differs by <= alpha.
TextureMatrix gldm_matrix(const DiscretizedRegion &region, int alpha = 0);
FeatureVector gldm_features(const DiscretizedRegion &region, int alpha = 0);

struct RadiomicsConfig {
    double bin_width = 25.0;  // HU
    int gldm_alpha = 0;
};

/// All families for one non-empty structure, names "<family>_<Feature>".
FeatureVector extract_structure_radiomics(const VolumeGrid &volume, const StructureMask &mask,
                                          const RadiomicsConfig &config);

/// Concatenation over structures 1..7 with names "<ABBR>_<family>_<Feature>";
/// absent structures contribute kMissing for every feature. Throws GeometryMismatch.
FeatureVector extract_radiomics(const VolumeGrid &volume, const LabelMap &labels, const RadiomicsConfig &config = {});

}  // namespace cardiofeat::radiomics
