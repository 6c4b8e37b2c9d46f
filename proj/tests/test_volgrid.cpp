#include "doctest.h"

#include <cstring>
#include <fstream>
#include <random>

#include "cardiofeat/nifti.hpp"
#include "cardiofeat/volume.hpp"
#include "helpers.hpp"

using namespace cardiofeat;
using testing_util::TempDir;

namespace {

// Minimal hand-built NIfTI-1 single file: header fields at their standard byte offsets.
struct RawHeader {
    std::int16_t dim[8] = {3, 1, 1, 1, 1, 1, 1, 1};
    std::int16_t datatype = 4;
    std::int16_t bitpix = 16;
    float pixdim[8] = {1, 1, 1, 1, 1, 1, 1, 1};
    float slope = 0.0f;
    float inter = 0.0f;
    std::int16_t qform = 0;
    std::int16_t sform = 0;
    float srow[12] = {};
};

void write_raw(const std::filesystem::path &path, const RawHeader &h, const std::vector<char> &payload) {
    std::vector<char> buf(352, 0);
    auto put = [&](std::size_t off, const void *src, std::size_t n) { std::memcpy(buf.data() + off, src, n); };
    const std::int32_t sizeof_hdr = 348;
    const float vox_offset = 352.0f;
    put(0, &sizeof_hdr, 4);
    put(40, h.dim, 16);
    put(70, &h.datatype, 2);
    put(72, &h.bitpix, 2);
    put(76, h.pixdim, 32);
    put(108, &vox_offset, 4);
    put(112, &h.slope, 4);
    put(116, &h.inter, 4);
    put(252, &h.qform, 2);
    put(254, &h.sform, 2);
    put(280, h.srow, 48);
    put(344, "n+1\0", 4);
    std::ofstream out(path, std::ios::binary);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
}

VolumeGrid random_volume(const Geometry &g, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> u(-1000.0f, 1000.0f);
    std::vector<double> v(g.voxel_count());
    for (double &x : v) x = u(rng);  // float32-representable
    return VolumeGrid(g, std::move(v));
}

}  // namespace

TEST_CASE("float32 volume round trip, plain and gzip") {
    TempDir dir("vol");
    Geometry g;
    g.dims = {4, 4, 4};
    g.spacing = {0.75, 1.25, 2.5};
    g.origin = {-10.0, 3.5, 7.0};
    const VolumeGrid v = random_volume(g, 1);
    for (const char *name : {"a.nii", "a.nii.gz"}) {
        save_volume(v, dir.path() / name);
        const VolumeGrid back = load_volume(dir.path() / name);
        CHECK(back == v);
    }
}

TEST_CASE("int16 storage with slope and intercept") {
    TempDir dir("slope");
    RawHeader h;
    h.dim[1] = 2;
    h.slope = 2.0f;
    h.inter = -1000.0f;
    const std::int16_t raw[2] = {600, -3};
    std::vector<char> payload(4);
    std::memcpy(payload.data(), raw, 4);
    write_raw(dir.path() / "s.nii", h, payload);
    const VolumeGrid v = load_volume(dir.path() / "s.nii");
    CHECK(v[0] == 200.0);
    CHECK(v[1] == -1006.0);
}

TEST_CASE("malformed headers") {
    TempDir dir("bad");
    RawHeader h;
    h.dim[1] = 0;
    write_raw(dir.path() / "zero.nii", h, {});
    try {
        (void)load_volume(dir.path() / "zero.nii");
        FAIL("expected MalformedHeader");
    } catch (const Error &e) {
        CHECK(e.code() == ErrorCode::MalformedHeader);
    }

    RawHeader sheared;
    sheared.sform = 1;
    const float srow[12] = {1, 0.3f, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0};
    std::memcpy(sheared.srow, srow, sizeof srow);
    write_raw(dir.path() / "shear.nii", sheared, std::vector<char>(2, 0));
    try {
        (void)load_volume(dir.path() / "shear.nii");
        FAIL("expected MalformedHeader");
    } catch (const Error &e) {
        CHECK(e.code() == ErrorCode::MalformedHeader);
    }

    RawHeader rgb;
    rgb.datatype = 128;
    rgb.bitpix = 24;
    write_raw(dir.path() / "rgb.nii", rgb, std::vector<char>(3, 0));
    CHECK_THROWS_AS((void)load_volume(dir.path() / "rgb.nii"), Error);
}

TEST_CASE("labelmap round trip and code checks") {
    TempDir dir("lab");
    const Geometry g = testing_util::cube_geometry(5);
    std::vector<std::uint8_t> codes(g.voxel_count());
    for (std::size_t i = 0; i < codes.size(); ++i) codes[i] = static_cast<std::uint8_t>(i % 8);
    const LabelMap labels(g, codes);
    save_labelmap(labels, dir.path() / "l.nii.gz");
    CHECK(load_labelmap(dir.path() / "l.nii.gz") == labels);

    codes[3] = 9;
    CHECK_THROWS_AS(LabelMap(g, codes), Error);
    CHECK_THROWS_AS((void)extract_structure_mask(labels, 9), Error);
    try {
        (void)extract_structure_mask(labels, 9);
    } catch (const Error &e) {
        CHECK(e.code() == ErrorCode::InvalidCode);
    }
}

TEST_CASE("unwritable path raises IoError") {
    const VolumeGrid v = VolumeGrid::filled(testing_util::cube_geometry(2), 1.0);
    try {
        save_volume(v, "/nonexistent_dir_for_tests/x.nii");
        FAIL("expected IoError");
    } catch (const Error &e) {
        CHECK(e.code() == ErrorCode::IoError);
    }
    try {
        (void)load_volume("/nonexistent_dir_for_tests/x.nii");
        FAIL("expected IoError");
    } catch (const Error &e) {
        CHECK(e.code() == ErrorCode::IoError);
    }
}

TEST_CASE("structure masks") {
    const Geometry g = testing_util::cube_geometry(4);
    const LabelMap zeros = LabelMap::filled(g, 0);
    CHECK(extract_structure_mask(zeros, 3).empty());

    std::vector<std::uint8_t> one(g.voxel_count(), 0);
    one[g.index(1, 2, 3)] = 5;
    const StructureMask m = extract_structure_mask(LabelMap(g, one), 5);
    CHECK(m.count() == 1);
    CHECK(m.voxels() == std::vector<Index3>{{1, 2, 3}});

    // masks over codes 1..7 partition the non-zero voxels
    std::mt19937_64 rng(4);
    std::vector<std::uint8_t> rnd(g.voxel_count());
    std::size_t nonzero = 0;
    for (auto &c : rnd) {
        c = static_cast<std::uint8_t>(rng() % 8);
        nonzero += c != 0;
    }
    const LabelMap labels(g, rnd);
    std::size_t total = 0;
    for (int code = 1; code <= kStructureCount; ++code) total += extract_structure_mask(labels, code).count();
    CHECK(total == nonzero);
}

TEST_CASE("resampling") {
    Geometry g;
    g.dims = {8, 6, 4};
    g.spacing = {1.0, 1.0, 1.0};

    const VolumeGrid v = random_volume(g, 2);
    CHECK(resample_to_spacing(v, g.spacing) == v);
    std::vector<std::uint8_t> codes(g.voxel_count());
    for (std::size_t i = 0; i < codes.size(); ++i) codes[i] = static_cast<std::uint8_t>((i * 7) % 4);
    const LabelMap labels(g, codes);
    CHECK(resample_to_spacing(labels, g.spacing) == labels);

    const VolumeGrid c = resample_to_spacing(VolumeGrid::filled(g, 42.0), {0.7, 1.9, 1.3});
    for (double x : c.data()) CHECK(x == doctest::Approx(42.0).epsilon(1e-12));

    const LabelMap coarse = resample_to_spacing(labels, {1.7, 0.6, 2.2});
    for (auto code : coarse.data()) CHECK(code < 4);

    // ramp downsampled 2x: compare with a direct per-point linear evaluation
    std::vector<double> ramp(g.voxel_count());
    for (int z = 0; z < g.dims[2]; ++z)
        for (int y = 0; y < g.dims[1]; ++y)
            for (int x = 0; x < g.dims[0]; ++x) ramp[g.index(x, y, z)] = 1.5 * x - 2.0 * y + 0.25 * z + 7.0;
    const VolumeGrid down = resample_to_spacing(VolumeGrid(g, ramp), {2.0, 2.0, 2.0});
    const Geometry &dg = down.geometry();
    CHECK(dg.dims == Index3{4, 3, 2});
    for (int z = 0; z < dg.dims[2]; ++z)
        for (int y = 0; y < dg.dims[1]; ++y)
            for (int x = 0; x < dg.dims[0]; ++x) {
                const double sx = 2.0 * x, sy = 2.0 * y, sz = 2.0 * z;
                CHECK(down.at(x, y, z) == doctest::Approx(1.5 * sx - 2.0 * sy + 0.25 * sz + 7.0).epsilon(1e-12));
            }
    CHECK_THROWS_AS((void)resample_to_spacing(v, {0.0, 1.0, 1.0}), Error);
}
