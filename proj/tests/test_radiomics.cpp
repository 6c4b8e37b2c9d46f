#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "cardiofeat/radiomics.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace cardiofeat;
using namespace cardiofeat::radiomics;

namespace {

struct Case {
    VolumeGrid volume;
    StructureMask mask;
    std::vector<double> image;
    std::vector<char> inside;
};

Case make_case(const Geometry &g, std::vector<double> image, const std::vector<char> &inside) {
    std::vector<std::uint8_t> occ(inside.begin(), inside.end());
    return {VolumeGrid(g, image), StructureMask(g, occ, 1), std::move(image), inside};
}

Case random_case(std::mt19937_64 &rng, double bin_width) {
    std::uniform_int_distribution<int> dim(3, 8);
    std::uniform_int_distribution<int> levels(1, 8);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Geometry g;
    g.dims = {dim(rng), dim(rng), dim(rng)};
    for (double &s : g.spacing) s = 0.5 + 1.5 * u(rng);
    const int ng = levels(rng);
    const double density = 0.4 + 0.5 * u(rng);
    std::vector<double> image(g.voxel_count());
    std::vector<char> inside(g.voxel_count());
    std::size_t count = 0;
    while (count < 4) {
        count = 0;
        for (std::size_t i = 0; i < image.size(); ++i) {
            image[i] = -300.0 + bin_width * static_cast<int>(rng() % static_cast<unsigned>(ng)) + 0.98 * bin_width * u(rng);
            inside[i] = u(rng) < density;
            count += inside[i];
        }
    }
    return make_case(g, std::move(image), inside);
}

// Compares every library feature to the oracle; returns the number compared.
int compare_all(const Case &c, double bin_width) {
    const RadiomicsConfig cfg{bin_width, 0};
    const FeatureVector lib = extract_structure_radiomics(c.volume, c.mask, cfg);
    const oracle::Region r = oracle::make_region(c.volume.geometry(), c.image, c.inside, bin_width);
    const std::pair<Family, oracle::Features> families[] = {
        {Family::FirstOrder, oracle::first_order(r)}, {Family::Shape, oracle::shape(r)},
        {Family::Glcm, oracle::glcm(r)},              {Family::Glrlm, oracle::glrlm(r)},
        {Family::Glszm, oracle::glszm(r)},            {Family::Ngtdm, oracle::ngtdm(r)},
        {Family::Gldm, oracle::gldm(r)},
    };
    int compared = 0;
    for (const auto &[family, expected] : families) {
        for (const auto &name : family_feature_names(family)) {
            const std::string full = std::string(family_tag(family)) + "_" + name;
            const double got = lib.at(full);
            const double want = expected.at(name);
            INFO(full << " lib=" << got << " oracle=" << want);
            CHECK(oracle::close(got, want, 1e-9));
            ++compared;
        }
    }
    return compared;
}

Case full_box(const Index3 &dims, const std::vector<double> &image) {
    Geometry g;
    g.dims = dims;
    return make_case(g, image, std::vector<char>(g.voxel_count(), 1));
}

int dir_index(const Index3 &d) {
    const auto &dirs = unique_directions();
    for (int i = 0; i < 13; ++i)
        if (dirs[static_cast<std::size_t>(i)] == d) return i;
    return -1;
}

}  // namespace

TEST_CASE("discretization") {
    const Case c = full_box({3, 1, 1}, {0.0, 25.0, 50.0});
    const DiscretizedRegion r = discretize(c.volume, c.mask, 25.0);
    CHECK(r.levels == std::vector<int>{1, 2, 3});
    CHECK(r.gray_levels == 3);

    const Case k = full_box({2, 2, 2}, std::vector<double>(8, 117.0));
    for (double bw : {1.0, 25.0, 1000.0}) {
        const DiscretizedRegion rk = discretize(k.volume, k.mask, bw);
        CHECK(rk.gray_levels == 1);
        CHECK(std::all_of(rk.levels.begin(), rk.levels.end(), [](int l) { return l == 1; }));
    }
    const Geometry g = k.volume.geometry();
    const StructureMask empty(g, std::vector<std::uint8_t>(8, 0), 1);
    CHECK_THROWS_AS((void)discretize(k.volume, empty, 25.0), Error);
}

TEST_CASE("first-order hand cases") {
    const Case k = full_box({2, 2, 1}, std::vector<double>(4, 7.5));
    const FeatureVector f = first_order_features(k.volume, k.mask, discretize(k.volume, k.mask, 25.0));
    CHECK(f.at("Mean") == 7.5);
    CHECK(f.at("Variance") == 0.0);
    CHECK(f.at("Entropy") == 0.0);
    CHECK(f.at("Skewness") == 0.0);
    CHECK(f.at("Kurtosis") == 0.0);

    const Case two = full_box({2, 1, 1}, {0.0, 2.0});
    const FeatureVector t = first_order_features(two.volume, two.mask, discretize(two.volume, two.mask, 1.0));
    CHECK(t.at("Mean") == 1.0);
    CHECK(t.at("Variance") == 1.0);
    CHECK(t.at("Entropy") == 1.0);
}

TEST_CASE("shape closed forms") {
    const double pi = 3.14159265358979323846;
    for (int s : {2, 5, 9}) {
        const Geometry g = testing_util::cube_geometry(s + 4);
        const LabelMap cube = testing_util::box_labels(g, {2, 2, 2}, {2 + s, 2 + s, 2 + s});
        const FeatureVector f = shape3d_features(extract_structure_mask(cube, 1)).features;
        const double v = s * s * s, a = 6.0 * s * s;
        CHECK(f.at("VoxelVolume") == v);
        CHECK(f.at("MeshSurfaceArea") == a);
        CHECK(f.at("Sphericity") == doctest::Approx(std::cbrt(pi) * std::pow(6 * v, 2.0 / 3.0) / a).epsilon(1e-12));
        CHECK(f.at("Sphericity") == doctest::Approx(0.806).epsilon(1e-3));
        CHECK(f.at("Elongation") == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(f.at("Maximum3DDiameter") == doctest::Approx(std::sqrt(3.0) * s).epsilon(1e-12));
    }
    const Geometry g = testing_util::cube_geometry(25);
    const LabelMap ball = testing_util::ball_labels(g, {12, 12, 12}, 10.0);
    const FeatureVector b = shape3d_features(extract_structure_mask(ball, 1)).features;
    CHECK(std::abs(b.at("Elongation") - 1.0) <= 0.02);
    CHECK(std::abs(b.at("Flatness") - 1.0) <= 0.02);

    Geometry aniso = g;
    aniso.spacing = {0.5, 1.0, 2.0};
    const StructureMask am(aniso, std::vector<std::uint8_t>(ball.data().begin(), ball.data().end()), 1);
    CHECK(shape3d_features(am).features.at("VoxelVolume") ==
          doctest::Approx(static_cast<double>(am.count())).epsilon(1e-12));

    const Geometry one = testing_util::cube_geometry(3);
    std::vector<std::uint8_t> single(27, 0);
    single[13] = 1;
    const ShapeFeatures sf = shape3d_features(StructureMask(one, single, 1));
    CHECK(sf.degenerate);
    CHECK(sf.features.at("VoxelVolume") == 1.0);
    CHECK(sf.features.at("Elongation") == 1.0);
}

TEST_CASE("shape features are invariant under 90 degree rotations") {
    std::mt19937_64 rng(11);
    const Geometry g = testing_util::cube_geometry(7);
    std::vector<std::uint8_t> occ(g.voxel_count(), 0);
    for (int z = 1; z < 6; ++z)
        for (int y = 1; y < 5; ++y)
            for (int x = 1; x < 4; ++x)
                if (rng() % 4 != 0) occ[g.index(x, y, z)] = 1;
    const FeatureVector base = shape3d_features(StructureMask(g, occ, 1)).features;
    // rotations about z, x and y
    const auto rotations = std::array<std::function<Index3(const Index3 &)>, 3>{
        [](const Index3 &p) { return Index3{6 - p[1], p[0], p[2]}; },
        [](const Index3 &p) { return Index3{p[0], 6 - p[2], p[1]}; },
        [](const Index3 &p) { return Index3{p[2], p[1], 6 - p[0]}; },
    };
    for (const auto &rot : rotations) {
        std::vector<std::uint8_t> r(g.voxel_count(), 0);
        for (std::size_t i = 0; i < occ.size(); ++i)
            if (occ[i]) r[g.index(rot(g.coords(i)))] = 1;
        const FeatureVector f = shape3d_features(StructureMask(g, r, 1)).features;
        for (std::size_t k = 0; k < base.size(); ++k) {
            INFO(base[k].name);
            CHECK(f[k].value == doctest::Approx(base[k].value).epsilon(1e-9));
        }
    }
}

TEST_CASE("glcm hand cases") {
    const Case k = full_box({3, 3, 3}, std::vector<double>(27, 10.0));
    const DiscretizedRegion kr = discretize(k.volume, k.mask, 25.0);
    const FeatureVector f = glcm_features(kr);
    CHECK(f.at("Contrast") == 0.0);
    CHECK(f.at("Energy") == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(f.at("Correlation") == 1.0);

    // 2x2x1 region [[1,2],[1,2]]
    const Case two = full_box({2, 2, 1}, {1.0, 2.0, 1.0, 2.0});
    CHECK(compare_all(two, 1.0) == 46);

    const DiscretizedRegion tr = discretize(two.volume, two.mask, 1.0);
    for (const auto &d : unique_directions()) {
        const TextureMatrix m = glcm_matrix(tr, d);
        for (int i = 0; i < m.rows; ++i)
            for (int j = 0; j < m.cols; ++j) CHECK(m.at(i, j) == m.at(j, i));
    }
}

TEST_CASE("glrlm hand cases") {
    const Case row = full_box({5, 1, 1}, {0.0, 0.0, 0.0, 1.0, 1.0});
    const DiscretizedRegion r = discretize(row.volume, row.mask, 1.0);
    const TextureMatrix m = glrlm_matrix(r, unique_directions()[static_cast<std::size_t>(dir_index({1, 0, 0}))]);
    CHECK(m.sum() == 2.0);
    CHECK(m.at(0, 2) == 1.0);  // level 1, length 3
    CHECK(m.at(1, 1) == 1.0);  // level 2, length 2

    for (int n : {1, 4, 7}) {
        const Case line = full_box({n, 1, 1}, std::vector<double>(static_cast<std::size_t>(n), 3.0));
        const DiscretizedRegion lr = discretize(line.volume, line.mask, 25.0);
        const TextureMatrix lm = glrlm_matrix(lr, unique_directions()[static_cast<std::size_t>(dir_index({1, 0, 0}))]);
        CHECK(glrlm_features_from_matrix(lm, lr.voxel_count()).at("LongRunEmphasis") == doctest::Approx(n * n));
    }
}

TEST_CASE("glszm hand cases") {
    const Case k = full_box({3, 2, 2}, std::vector<double>(12, 5.0));
    const TextureMatrix m = glszm_matrix(discretize(k.volume, k.mask, 25.0));
    CHECK(m.sum() == 1.0);
    CHECK(m.at(0, 11) == 1.0);

    // blobs of 3 and 5 voxels, same level, separated by a gap
    Geometry g;
    g.dims = {10, 1, 1};
    std::vector<char> inside = {1, 1, 1, 0, 0, 1, 1, 1, 1, 1};
    const Case blobs = make_case(g, std::vector<double>(10, 0.0), inside);
    const TextureMatrix bm = glszm_matrix(discretize(blobs.volume, blobs.mask, 25.0));
    CHECK(bm.sum() == 2.0);
    CHECK(bm.at(0, 2) == 1.0);
    CHECK(bm.at(0, 4) == 1.0);
}

TEST_CASE("ngtdm hand cases") {
    const Case k = full_box({3, 3, 3}, std::vector<double>(27, 0.0));
    const DiscretizedRegion kr = discretize(k.volume, k.mask, 25.0);
    const TextureMatrix km = ngtdm_matrix(kr);
    CHECK(km.at(0, 1) == 0.0);
    CHECK(ngtdm_features(kr).at("Coarseness") == kCoarsenessCap);

    std::vector<double> img(27, 0.0);
    img[13] = 1.0;
    const Case c = full_box({3, 3, 3}, img);
    const TextureMatrix m = ngtdm_matrix(discretize(c.volume, c.mask, 1.0));
    CHECK(m.at(0, 0) == 26.0);
    CHECK(m.at(0, 1) == doctest::Approx(8.0 / 7.0 + 12.0 / 11.0 + 6.0 / 17.0).epsilon(1e-14));
    CHECK(m.at(1, 0) == 1.0);
    CHECK(m.at(1, 1) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("gldm hand cases") {
    const Case k = full_box({3, 3, 3}, std::vector<double>(27, 0.0));
    const TextureMatrix m = gldm_matrix(discretize(k.volume, k.mask, 25.0));
    CHECK(m.cols == 27);
    CHECK(m.at(0, 26) == 1.0);  // centre voxel
    CHECK(m.at(0, 7) == 8.0);   // corners

    const Case one = full_box({1, 1, 1}, {4.0});
    const TextureMatrix sm = gldm_matrix(discretize(one.volume, one.mask, 25.0));
    CHECK(sm.at(0, 0) == 1.0);
    CHECK(sm.sum() == 1.0);
}

TEST_CASE("all families match brute-force enumeration on random volumes") {
    std::mt19937_64 rng(20240601);
    testing_util::Stopwatch clock;
    int compared = 0;
    for (int t = 0; t < 50; ++t) {
        const Case c = random_case(rng, 25.0);
        compared += compare_all(c, 25.0);
    }
    CHECK(compared == 50 * 46);
    CHECK(clock.seconds() < 60.0);
}

TEST_CASE("normalized matrices sum to one") {
    std::mt19937_64 rng(5);
    const Case c = random_case(rng, 25.0);
    const DiscretizedRegion r = discretize(c.volume, c.mask, 25.0);
    std::vector<TextureMatrix> ms = {glszm_matrix(r), gldm_matrix(r)};
    for (const auto &d : unique_directions()) {
        ms.push_back(glcm_matrix(r, d));
        ms.push_back(glrlm_matrix(r, d));
    }
    for (const auto &m : ms) {
        for (double v : m.values) CHECK(v >= 0.0);
        if (m.sum() > 0) CHECK(std::abs(m.normalized().sum() - 1.0) <= 1e-12);
    }
}

TEST_CASE("intensity shift and padding invariance") {
    std::mt19937_64 rng(9);
    const Case c = random_case(rng, 25.0);
    const FeatureVector base = extract_structure_radiomics(c.volume, c.mask, {});

    std::vector<double> shifted = c.image;
    for (double &v : shifted) v += 137.0;
    const FeatureVector s = extract_structure_radiomics(VolumeGrid(c.volume.geometry(), shifted), c.mask, {});

    std::vector<double> padded = c.image;
    for (std::size_t i = 0; i < padded.size(); ++i)
        if (!c.inside[i]) padded[i] = static_cast<double>(rng() % 5000) - 2500.0;
    const FeatureVector p = extract_structure_radiomics(VolumeGrid(c.volume.geometry(), padded), c.mask, {});
    CHECK(p == base);

    for (std::size_t k = 0; k < base.size(); ++k) {
        const std::string &name = base[k].name;
        INFO(name);
        if (name.rfind("firstorder_", 0) != 0) {
            CHECK(s[k].value == base[k].value);
        } else if (name == "firstorder_Mean") {
            CHECK(s[k].value == doctest::Approx(base[k].value + 137.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("whole-labelmap extraction") {
    const Geometry g = testing_util::cube_geometry(10);
    const LabelMap labels = testing_util::box_labels(g, {2, 2, 2}, {7, 6, 8}, 1);
    std::mt19937_64 rng(3);
    std::vector<double> img(g.voxel_count());
    for (double &v : img) v = static_cast<double>(rng() % 400);
    const VolumeGrid vol(g, img);
    const FeatureVector f = extract_radiomics(vol, labels);
    CHECK(f.size() == 7u * 46u);
    CHECK(structure_feature_names().size() == 46u);
    int present = 0, missing = 0;
    for (const auto &e : f.entries()) {
        if (e.name.rfind("LV_", 0) == 0) {
            CHECK(std::isfinite(e.value));
            ++present;
        } else {
            CHECK(is_missing(e.value));
            ++missing;
        }
    }
    CHECK(present == 46);
    CHECK(missing == 6 * 46);
    CHECK(f.find("LV_glcm_Contrast").has_value());
    CHECK(extract_radiomics(vol, labels) == f);

    Geometry other = g;
    other.spacing = {2.0, 2.0, 2.0};
    CHECK_THROWS_AS((void)extract_radiomics(VolumeGrid(other, img), labels), Error);
}
