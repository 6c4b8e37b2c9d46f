#include "cardiofeat/geomfeat.hpp"

#include <cmath>
#include <string>

#include "cardiofeat/linalg.hpp"

namespace cardiofeat::geom {
namespace {

void check_n_svd(int n_svd) {
    if (n_svd < 1 || n_svd > 3) {
        throw Error(ErrorCode::InvalidNSvd, "n_svd must be 1, 2 or 3 (got " + std::to_string(n_svd) + ")");
    }
}

}  // namespace

StructureDisplacementMatrix mask_displacements(const atlas::DisplacementField &field, const StructureMask &mask) {
    require_same_geometry(field.geometry(), mask.geometry(), "mask_displacements");
    if (mask.empty()) {
        throw Error(ErrorCode::EmptyMask, "structure " + std::to_string(mask.structure_code()) + " is empty");
    }
    StructureDisplacementMatrix m;
    m.structure_code = mask.structure_code();
    m.rows = mask.count();
    m.values.reserve(3 * m.rows);
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (!mask[i]) continue;
        for (int c = 0; c < 3; ++c) {
            m.values.push_back(field[i][c]);
            m.centroid_offset[c] += field[i][c];
        }
    }
    for (double &c : m.centroid_offset) c /= static_cast<double>(m.rows);
    return m;
}

StructureGeometricFeatures svd_features(const StructureDisplacementMatrix &matrix, int n_svd, bool center) {
    check_n_svd(n_svd);
    if (matrix.rows == 0 || matrix.values.size() != 3 * matrix.rows) {
        throw Error(ErrorCode::EmptyMask, "displacement matrix has no rows");
    }
    const double k = static_cast<double>(matrix.rows);
    StructureGeometricFeatures out;
    out.structure_code = matrix.structure_code;

    double mag = 0.0;
    for (std::size_t r = 0; r < matrix.rows; ++r) {
        const double *v = &matrix.values[3 * r];
        mag += std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    }
    out.mean_magnitude = mag / k;

    std::vector<double> a = matrix.values;
    if (center) {
        Vec3 mean{0, 0, 0};
        for (std::size_t r = 0; r < matrix.rows; ++r)
            for (int c = 0; c < 3; ++c) mean[c] += a[3 * r + static_cast<std::size_t>(c)];
        for (double &m : mean) m /= k;
        for (std::size_t r = 0; r < matrix.rows; ++r)
            for (int c = 0; c < 3; ++c) a[3 * r + static_cast<std::size_t>(c)] -= mean[c];
    }
    const auto sv = linalg::singular_values_kx3(a, matrix.rows);
    const double norm = std::sqrt(k);
    for (int i = 0; i < n_svd; ++i) out.singular_values.push_back(sv[static_cast<std::size_t>(i)] / norm);
    return out;
}

std::vector<std::string> geometric_feature_names(int n_svd) {
    check_n_svd(n_svd);
    std::vector<std::string> out;
    for (int code = 1; code <= kStructureCount; ++code) {
        const std::string prefix = std::string(structure_abbrev(code)) + "_geom_";
        for (int i = 1; i <= n_svd; ++i) out.push_back(prefix + "sv" + std::to_string(i));
        out.push_back(prefix + "meanmag");
    }
    return out;
}

FeatureVector extract_geometric(const atlas::DisplacementField &field, const LabelMap &labels, int n_svd,
                                bool center) {
    check_n_svd(n_svd);
    require_same_geometry(field.geometry(), labels.geometry(), "extract_geometric");
    FeatureVector out;
    for (int code = 1; code <= kStructureCount; ++code) {
        const std::string prefix = std::string(structure_abbrev(code)) + "_geom_";
        const StructureMask mask = extract_structure_mask(labels, code);
        if (mask.empty()) {
            for (int i = 1; i <= n_svd; ++i) out.add_missing(prefix + "sv" + std::to_string(i));
            out.add_missing(prefix + "meanmag");
            continue;
        }
        const auto f = svd_features(mask_displacements(field, mask), n_svd, center);
        for (int i = 0; i < n_svd; ++i) out.add(prefix + "sv" + std::to_string(i + 1), f.singular_values[static_cast<std::size_t>(i)]);
        out.add(prefix + "meanmag", f.mean_magnitude);
    }
    return out;
}

}  // namespace cardiofeat::geom
