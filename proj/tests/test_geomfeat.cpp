#include "doctest.h"

#include <Eigen/Dense>

#include <cmath>
#include <random>

#include "cardiofeat/geomfeat.hpp"
#include "cardiofeat/linalg.hpp"
#include "helpers.hpp"

using namespace cardiofeat;
using namespace cardiofeat::geom;
using atlas::DisplacementField;

namespace {

// sqrt of the Gram-matrix eigenvalues, descending
std::array<double, 3> gram_singular_values(const std::vector<double> &rows, std::size_t k) {
    Eigen::Matrix3d gram = Eigen::Matrix3d::Zero();
    for (std::size_t r = 0; r < k; ++r) {
        const Eigen::Vector3d v(rows[3 * r], rows[3 * r + 1], rows[3 * r + 2]);
        gram += v * v.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(gram);
    const Eigen::Vector3d ev = es.eigenvalues();
    return {std::sqrt(std::max(0.0, ev[2])), std::sqrt(std::max(0.0, ev[1])), std::sqrt(std::max(0.0, ev[0]))};
}

StructureDisplacementMatrix matrix_of(const std::vector<double> &rows) {
    StructureDisplacementMatrix m;
    m.structure_code = 1;
    m.rows = rows.size() / 3;
    m.values = rows;
    return m;
}

}  // namespace

TEST_CASE("mask displacement matrices") {
    const Geometry g = testing_util::cube_geometry(6);
    const LabelMap labels = testing_util::box_labels(g, {1, 1, 1}, {3, 3, 4}, 2);
    const StructureMask mask = extract_structure_mask(labels, 2);
    const StructureDisplacementMatrix z = mask_displacements(DisplacementField(g), mask);
    CHECK(z.rows == mask.count());
    for (double v : z.values) CHECK(v == 0.0);
    CHECK(z.centroid_offset == Vec3{0, 0, 0});

    const Vec3 t{1.0, -2.0, 0.5};
    const DisplacementField c(g, std::vector<Vec3>(g.voxel_count(), t));
    const StructureDisplacementMatrix m = mask_displacements(c, mask);
    CHECK(m.rows == 12);
    for (std::size_t r = 0; r < m.rows; ++r)
        for (int a = 0; a < 3; ++a) CHECK(m.values[3 * r + a] == t[a]);
    CHECK(mask_displacements(c, mask).values == m.values);

    std::vector<Vec3> ramp(g.voxel_count());
    for (std::size_t i = 0; i < ramp.size(); ++i) ramp[i] = {double(i), 0.0, 0.0};
    const StructureDisplacementMatrix rm = mask_displacements(DisplacementField(g, ramp), mask);
    const auto voxels = mask.voxels();
    for (std::size_t r = 0; r < rm.rows; ++r) CHECK(rm.values[3 * r] == double(g.index(voxels[r])));

    CHECK_THROWS_AS((void)mask_displacements(DisplacementField(testing_util::cube_geometry(5)), mask), Error);
    CHECK_THROWS_AS((void)mask_displacements(c, extract_structure_mask(labels, 5)), Error);
}

TEST_CASE("constant fields") {
    const Vec3 t{3.0, 4.0, 12.0};  // |t| = 13
    for (std::size_t k : {1u, 10u, 250u}) {
        std::vector<double> rows;
        for (std::size_t r = 0; r < k; ++r) rows.insert(rows.end(), t.begin(), t.end());
        const auto m = matrix_of(rows);
        const StructureGeometricFeatures f = svd_features(m, 3, false);
        CHECK(f.singular_values[0] == doctest::Approx(13.0).epsilon(1e-12));
        CHECK(std::abs(f.singular_values[1]) <= 1e-9);
        CHECK(std::abs(f.singular_values[2]) <= 1e-9);
        CHECK(f.mean_magnitude == doctest::Approx(13.0).epsilon(1e-12));

        const StructureGeometricFeatures c = svd_features(m, 3, true);
        for (double s : c.singular_values) CHECK(std::abs(s) <= 1e-9);
        CHECK(c.mean_magnitude == doctest::Approx(13.0).epsilon(1e-12));
    }
}

TEST_CASE("singular values match the Gram-matrix eigen decomposition") {
    std::mt19937_64 rng(77);
    std::normal_distribution<double> n(0.0, 2.0);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t k = 3 + rng() % 400;
        std::vector<double> rows(3 * k);
        for (double &v : rows) v = n(rng);
        if (trial % 5 == 0)  // anisotropic
            for (std::size_t r = 0; r < k; ++r) rows[3 * r + 2] *= 0.01;
        const auto want = gram_singular_values(rows, k);
        const auto got = linalg::singular_values_kx3(rows, k);
        const StructureGeometricFeatures f = svd_features(matrix_of(rows), 3, false);
        for (int i = 0; i < 3; ++i) {
            CHECK(std::abs(got[i] - want[i]) <= 1e-9 * want[0]);
            CHECK(std::abs(f.singular_values[static_cast<std::size_t>(i)] - want[i] / std::sqrt(double(k))) <=
                  1e-9 * want[0] / std::sqrt(double(k)));
        }
        CHECK(f.singular_values[0] >= f.singular_values[1]);
        CHECK(f.singular_values[1] >= f.singular_values[2]);
        CHECK(f.singular_values[2] >= 0.0);
    }
}

TEST_CASE("symmetric eigenvalues") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-3, 3);
    for (int t = 0; t < 50; ++t) {
        Eigen::Matrix3d a;
        for (int i = 0; i < 3; ++i)
            for (int j = i; j < 3; ++j) a(i, j) = a(j, i) = u(rng);
        linalg::Mat3 m;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) m[i][j] = a(i, j);
        const auto got = linalg::symmetric_eigenvalues(m);
        const Eigen::Vector3d want = Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(a).eigenvalues();
        for (int i = 0; i < 3; ++i) CHECK(got[i] == doctest::Approx(want[2 - i]).epsilon(1e-10));
    }
}

TEST_CASE("rotation invariance, linearity and zero padding") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n(0.0, 1.0);
    const std::size_t k = 64;
    std::vector<double> rows(3 * k);
    for (double &v : rows) v = n(rng) + 0.5;
    const auto base = svd_features(matrix_of(rows), 3, false);
    // the three 90 degree axis rotations
    const int perms[3][3] = {{1, 0, 2}, {0, 2, 1}, {2, 1, 0}};
    for (const auto &p : perms) {
        std::vector<double> rot(rows.size());
        for (std::size_t r = 0; r < k; ++r) {
            rot[3 * r + p[0]] = rows[3 * r + 0];
            rot[3 * r + p[1]] = -rows[3 * r + 1];
            rot[3 * r + p[2]] = rows[3 * r + 2];
        }
        for (bool center : {false, true}) {
            const auto a = svd_features(matrix_of(rows), 3, center);
            const auto b = svd_features(matrix_of(rot), 3, center);
            for (int i = 0; i < 3; ++i)
                CHECK(b.singular_values[static_cast<std::size_t>(i)] ==
                      doctest::Approx(a.singular_values[static_cast<std::size_t>(i)]).epsilon(1e-12));
            CHECK(b.mean_magnitude == doctest::Approx(a.mean_magnitude).epsilon(1e-12));
        }
    }
    std::vector<double> scaled = rows;
    for (double &v : scaled) v *= 2.5;
    const auto s = svd_features(matrix_of(scaled), 3, false);
    for (int i = 0; i < 3; ++i)
        CHECK(s.singular_values[static_cast<std::size_t>(i)] ==
              doctest::Approx(2.5 * base.singular_values[static_cast<std::size_t>(i)]).epsilon(1e-12));
    CHECK(s.mean_magnitude == doctest::Approx(2.5 * base.mean_magnitude).epsilon(1e-12));

    const auto two = svd_features(matrix_of({1, 0, 0}), 2, false);
    CHECK(two.singular_values.size() == 2);
    CHECK(two.singular_values[1] == 0.0);
    CHECK(svd_features(matrix_of(rows), 1, false).singular_values.size() == 1);
    for (int bad : {0, 4}) {
        try {
            (void)svd_features(matrix_of(rows), bad, false);
            FAIL("expected InvalidNSvd");
        } catch (const Error &e) {
            CHECK(e.code() == ErrorCode::InvalidNSvd);
        }
    }
}

TEST_CASE("whole-labelmap geometric features") {
    const Geometry g = testing_util::cube_geometry(14);
    std::vector<std::uint8_t> codes(g.voxel_count(), 0);
    for (std::size_t i = 0; i < codes.size(); ++i) codes[i] = static_cast<std::uint8_t>(1 + i % 7);
    const LabelMap full(g, codes);
    const FeatureVector z = extract_geometric(DisplacementField(g), full, 3);
    CHECK(z.size() == 28u);
    CHECK(z.names() == geometric_feature_names(3));
    for (double v : z.values()) CHECK(v == 0.0);
    CHECK(z[0].name == "LV_geom_sv1");
    CHECK(z[3].name == "LV_geom_meanmag");

    const LabelMap one = testing_util::box_labels(g, {2, 2, 2}, {6, 6, 6}, 4);
    const Vec3 t{0.0, 3.0, 4.0};
    const FeatureVector f = extract_geometric(DisplacementField(g, std::vector<Vec3>(g.voxel_count(), t)), one, 2);
    CHECK(f.size() == 21u);
    CHECK(f.at("LA_geom_sv1") == doctest::Approx(5.0));
    CHECK(f.at("LA_geom_meanmag") == doctest::Approx(5.0));
    CHECK(is_missing(f.at("LV_geom_sv1")));
    CHECK(is_missing(f.at("PT_geom_meanmag")));
    CHECK_THROWS_AS((void)extract_geometric(DisplacementField(g), one, 7), Error);
}
