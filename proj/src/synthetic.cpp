#include "cardiofeat/synthetic.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include "cardiofeat/atlasreg.hpp"
#include "cardiofeat/csv.hpp"
#include "cardiofeat/error.hpp"
#include "cardiofeat/nifti.hpp"

namespace cardiofeat {
namespace {

constexpr int LV = 1, MYO = 2, RV = 3, LA = 4, RA = 5, AO = 6, PT = 7;

class Rng {
public:
    explicit Rng(std::uint64_t seed) : g_(seed) {}
    double uniform() { return static_cast<double>(g_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    double normal() {
        // Box-Muller, one value per call keeps the stream easy to reason about
        const double u1 = 1.0 - uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    }
    std::uint64_t next() { return g_(); }

private:
    std::mt19937_64 g_;
};

bool inside(const Ellipsoid &e, const Vec3 &p) {
    double s = 0.0;
    for (int a = 0; a < 3; ++a) {
        const double d = (p[a] - e.center[a]) / e.radii[a];
        s += d * d;
    }
    return s <= 1.0;
}

std::vector<double> smooth_noise(const Geometry &g, Rng &rng, double sigma_vox, double amplitude) {
    std::vector<double> v(g.voxel_count());
    for (double &x : v) x = rng.normal();
    if (sigma_vox > 0) atlas::gaussian_smooth(v, g.dims, {sigma_vox, sigma_vox, sigma_vox});
    double ss = 0.0;
    for (double x : v) ss += x * x;
    const double scale = ss > 0 ? amplitude / std::sqrt(ss / static_cast<double>(v.size())) : 0.0;
    for (double &x : v) x *= scale;
    return v;
}

SyntheticSubject make_subject(const SyntheticCohortSpec &spec, int index, int label, Rng &rng) {
    SyntheticSubject s;
    char id[32];
    std::snprintf(id, sizeof id, "sub%03d", index);
    s.id = id;
    s.label = label;

    Geometry g;
    g.dims = spec.dims;
    g.spacing = spec.spacing;

    // fixed draw order per subject
    std::array<Ellipsoid, kStructureCount + 1> st = spec.structures;
    for (int c = 1; c <= kStructureCount; ++c) {
        for (int a = 0; a < 3; ++a) {
            st[static_cast<std::size_t>(c)].center[a] += spec.position_jitter_mm * rng.normal();
            st[static_cast<std::size_t>(c)].radii[a] *= 1.0 + spec.radius_jitter * rng.normal();
        }
    }
    const double u = rng.uniform();
    Vec3 dir{rng.normal(), rng.normal(), rng.normal()};
    const double dn = std::sqrt(dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]) + 1e-12;
    if (label == 1) {
        s.shape_severity = u;
        s.texture_severity = 1.0 - u;
    }
    // shape effect: LV/MYO complex shifts towards the apex-ish direction, AO kinks sideways
    const double shift = spec.shape_amplitude_mm * s.shape_severity;
    const Vec3 lv_shift{shift * (0.7 + 0.1 * dir[0] / dn), shift * (-0.7 + 0.1 * dir[1] / dn), shift * 0.1 * dir[2] / dn};
    for (int a = 0; a < 3; ++a) st[LV].center[a] += lv_shift[a];
    st[AO].center[0] -= shift * 0.8;

    Ellipsoid myo_outer = st[LV];
    for (int a = 0; a < 3; ++a) myo_outer.radii[a] += spec.myo_thickness_mm;

    std::vector<std::uint8_t> lab(g.voxel_count(), 0);
    const Vec3 centre{0.5 * (g.dims[0] - 1) * g.spacing[0], 0.5 * (g.dims[1] - 1) * g.spacing[1],
                      0.5 * (g.dims[2] - 1) * g.spacing[2]};
    for (int z = 0; z < g.dims[2]; ++z) {
        for (int y = 0; y < g.dims[1]; ++y) {
            for (int x = 0; x < g.dims[0]; ++x) {
                const Vec3 p{x * g.spacing[0] - centre[0], y * g.spacing[1] - centre[1], z * g.spacing[2] - centre[2]};
                std::uint8_t code = 0;
                for (int c : {RA, LA, RV, PT, AO}) {
                    if (inside(st[static_cast<std::size_t>(c)], p)) code = static_cast<std::uint8_t>(c);
                }
                if (inside(myo_outer, p)) code = MYO;
                if (inside(st[LV], p)) code = LV;
                lab[g.index(x, y, z)] = code;
            }
        }
    }

    const auto smooth = smooth_noise(g, rng, 2.0, spec.smooth_noise_hu);
    const auto white = smooth_noise(g, rng, 0.0, spec.white_noise_hu);
    const auto hf = smooth_noise(g, rng, 0.0, spec.texture_noise_hu * s.texture_severity);
    std::vector<double> img(g.voxel_count());
    for (std::size_t i = 0; i < img.size(); ++i) {
        double base;
        switch (lab[i]) {
            case 0: base = -20.0; break;
            case MYO: base = 110.0; break;
            default: base = 330.0; break;
        }
        double v = base + smooth[i] + white[i];
        if (lab[i] == MYO || lab[i] == AO) v += hf[i];
        img[i] = v;
    }

    // calcified spots in the MYO and AO walls
    std::vector<std::size_t> wall;
    for (std::size_t i = 0; i < lab.size(); ++i) {
        if (lab[i] == MYO || lab[i] == AO) wall.push_back(i);
    }
    const int blobs = static_cast<int>(std::lround(spec.calcification_blobs * s.texture_severity));
    for (int b = 0; b < blobs && !wall.empty(); ++b) {
        const Index3 c = g.coords(wall[rng.next() % wall.size()]);
        const double amp = spec.calcification_hu * rng.uniform(0.7, 1.3);
        for (int dz = -1; dz <= 1; ++dz) {
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    const int x = c[0] + dx, y = c[1] + dy, z = c[2] + dz;
                    if (!g.contains(x, y, z)) continue;
                    const double r2 = dx * dx + dy * dy + dz * dz;
                    const std::size_t i = g.index(x, y, z);
                    if (lab[i] == MYO || lab[i] == AO) img[i] += amp * std::exp(-r2 / 1.5);
                }
            }
        }
    }
    // stored as int16 on disk; round here so in-memory and reloaded images agree
    for (double &v : img) v = std::clamp(std::round(v), -1024.0, 3071.0);

    s.image = VolumeGrid(g, std::move(img));
    s.labels = LabelMap(g, std::move(lab));
    return s;
}

}  // namespace

std::array<Ellipsoid, kStructureCount + 1> SyntheticCohortSpec::default_structures() {
    std::array<Ellipsoid, kStructureCount + 1> e{};
    e[LV] = {{8.0, -6.0, -2.0}, {13.0, 10.0, 10.0}};
    e[MYO] = e[LV];  // unused: drawn as a shell around LV
    e[RV] = {{-14.0, -4.0, -2.0}, {10.0, 13.0, 10.0}};
    e[LA] = {{9.0, 19.0, 4.0}, {9.0, 7.0, 8.0}};
    e[RA] = {{-14.0, 17.0, 3.0}, {8.0, 8.0, 8.0}};
    e[AO] = {{2.0, 8.0, 22.0}, {5.0, 5.0, 11.0}};
    e[PT] = {{-9.0, 4.0, 21.0}, {5.0, 5.0, 9.0}};
    return e;
}

void SyntheticCohortSpec::validate() const {
    auto fail = [](const std::string &m) { throw Error(ErrorCode::ConfigError, "synthetic cohort: " + m); };
    if (n_healthy < 1 || n_diseased < 1) fail("subject counts must be >= 1");
    for (int a = 0; a < 3; ++a) {
        if (dims[a] < 4) fail("grid dims must be >= 4");
        if (!(spacing[a] > 0)) fail("spacing must be > 0");
    }
    for (double v : {myo_thickness_mm, position_jitter_mm, radius_jitter, smooth_noise_hu, white_noise_hu,
                     shape_amplitude_mm, texture_noise_hu, calcification_hu}) {
        if (!(v >= 0.0)) fail("amplitudes must be >= 0");
    }
    if (calcification_blobs < 0) fail("calcification_blobs must be >= 0");
    for (int c = 1; c <= kStructureCount; ++c) {
        for (double r : structures[static_cast<std::size_t>(c)].radii) {
            if (!(r > 0)) fail("ellipsoid radii must be > 0");
        }
    }
}

std::vector<SyntheticSubject> generate_synthetic_cohort(const SyntheticCohortSpec &spec) {
    spec.validate();
    Rng master(spec.seed);
    std::vector<SyntheticSubject> out;
    const int n = spec.n_healthy + spec.n_diseased;
    for (int i = 0; i < n; ++i) {
        Rng rng(master.next());
        out.push_back(make_subject(spec, i, i < spec.n_healthy ? 0 : 1, rng));
    }
    return out;
}

void write_synthetic_cohort(const std::vector<SyntheticSubject> &subjects, const std::filesystem::path &dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir / "images", ec);
    std::filesystem::create_directories(dir / "labels", ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());
    std::ofstream csvout(dir / "labels.csv", std::ios::binary);
    if (!csvout) throw Error(ErrorCode::IoError, "cannot write " + (dir / "labels.csv").string());
    csvout << "subject_id,label,shape_severity,texture_severity\n";
    for (const auto &s : subjects) {
        save_volume(s.image, dir / "images" / (s.id + ".nii.gz"), StorageType::Int16);
        save_labelmap(s.labels, dir / "labels" / (s.id + ".nii.gz"));
        csvout << s.id << ',' << s.label << ',' << csv::format_double(s.shape_severity) << ','
               << csv::format_double(s.texture_severity) << '\n';
    }
    if (!csvout) throw Error(ErrorCode::IoError, "write failed for labels.csv");
}

}  // namespace cardiofeat
