#pragma once

// Per-structure deformation features: the displacement vectors inside each
// structure form a K x 3 matrix whose singular values (normalized by sqrt(K))
// summarize the magnitude and anisotropy of the local deformation.

#include <string>
#include <vector>

#include "cardiofeat/atlasreg.hpp"
#include "cardiofeat/feature_vector.hpp"
#include "cardiofeat/volume.hpp"

namespace cardiofeat::geom {

struct StructureDisplacementMatrix {
    int structure_code = 0;
    std::size_t rows = 0;           // K = mask voxel count
    std::vector<double> values;     // K x 3 row-major, mm, lexicographic voxel order
    Vec3 centroid_offset{0, 0, 0};  // column mean, mm
};

/// Throws GeometryMismatch / EmptyMask.
StructureDisplacementMatrix mask_displacements(const atlas::DisplacementField &field, const StructureMask &mask);

struct StructureGeometricFeatures {
    int structure_code = 0;
    std::vector<double> singular_values;  // sigma_i / sqrt(K), i <= n_svd, descending, zero-padded
    double mean_magnitude = 0.0;          // mean per-voxel displacement length, mm
};

/// Thin SVD of the (optionally column-centred) matrix. Throws InvalidNSvd for n_svd outside 1..3.
StructureGeometricFeatures svd_features(const StructureDisplacementMatrix &matrix, int n_svd, bool center = false);

/// Names "<ABBR>_geom_sv1".."svN", "<ABBR>_geom_meanmag" for structures 1..7.
std::vector<std::string> geometric_feature_names(int n_svd);

/// Absent structures contribute kMissing. Throws GeometryMismatch / InvalidNSvd.
FeatureVector extract_geometric(const atlas::DisplacementField &field, const LabelMap &labels, int n_svd,
                                bool center = false);

}  // namespace cardiofeat::geom
