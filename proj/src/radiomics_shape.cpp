#include <algorithm>
#include <cmath>
#include <numbers>

#include "cardiofeat/linalg.hpp"
#include "cardiofeat/radiomics.hpp"

namespace cardiofeat::radiomics {
namespace {

// Corner lattice points (voxel-corner indices) of every exposed voxel face.
std::vector<Index3> boundary_vertices(const StructureMask &mask, double &area) {
    const Geometry &g = mask.geometry();
    const Vec3 &s = g.spacing;
    const double face_area[3] = {s[1] * s[2], s[0] * s[2], s[0] * s[1]};
    area = 0.0;
    std::vector<Index3> verts;
    for (const auto &p : mask.voxels()) {
        for (int a = 0; a < 3; ++a) {
            for (int side = 0; side < 2; ++side) {
                Index3 q = p;
                q[a] += side ? 1 : -1;
                if (mask.contains(q[0], q[1], q[2])) {
                    continue;
                }
                area += face_area[a];
                const int b = (a + 1) % 3;
                const int c = (a + 2) % 3;
                for (int db = 0; db < 2; ++db) {
                    for (int dc = 0; dc < 2; ++dc) {
                        Index3 v = p;
                        v[a] += side;
                        v[b] += db;
                        v[c] += dc;
                        verts.push_back(v);
                    }
                }
            }
        }
    }
    std::sort(verts.begin(), verts.end());
    verts.erase(std::unique(verts.begin(), verts.end()), verts.end());
    return verts;
}

// Every convex-hull vertex of a lattice point set is the minimum or maximum
// along at least one axis-parallel line through it, so the diameter can be
// taken over those extremes only.
std::vector<Index3> axis_line_extremes(const std::vector<Index3> &verts) {
    std::vector<Index3> out;
    for (int a = 0; a < 3; ++a) {
        const int b = (a + 1) % 3;
        const int c = (a + 2) % 3;
        std::vector<Index3> sorted = verts;
        std::sort(sorted.begin(), sorted.end(), [&](const Index3 &u, const Index3 &v) {
            if (u[b] != v[b]) return u[b] < v[b];
            if (u[c] != v[c]) return u[c] < v[c];
            return u[a] < v[a];
        });
        for (std::size_t i = 0; i < sorted.size();) {
            std::size_t j = i;
            while (j + 1 < sorted.size() && sorted[j + 1][b] == sorted[i][b] && sorted[j + 1][c] == sorted[i][c]) ++j;
            out.push_back(sorted[i]);
            if (j != i) out.push_back(sorted[j]);
            i = j + 1;
        }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

}  // namespace

ShapeFeatures shape3d_features(const StructureMask &mask) {
    if (mask.empty()) {
        throw Error(ErrorCode::EmptyMask, "shape features need a non-empty mask");
    }
    const Vec3 &s = mask.geometry().spacing;
    const std::vector<Index3> voxels = mask.voxels();
    const double n = static_cast<double>(voxels.size());
    const double volume = n * mask.geometry().voxel_volume();

    double area = 0.0;
    const std::vector<Index3> verts = boundary_vertices(mask, area);

    Vec3 mean{0, 0, 0};
    for (const auto &p : voxels) {
        for (int a = 0; a < 3; ++a) mean[a] += p[a] * s[a];
    }
    for (double &m : mean) m /= n;
    linalg::Mat3 cov{};
    for (const auto &p : voxels) {
        const double d[3] = {p[0] * s[0] - mean[0], p[1] * s[1] - mean[1], p[2] * s[2] - mean[2]};
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) cov[i][j] += d[i] * d[j];
        }
    }
    for (auto &row : cov) {
        for (double &v : row) v /= n;
    }
    auto ev = linalg::symmetric_eigenvalues(cov);
    for (double &e : ev) e = std::max(e, 0.0);

    double diameter_sq = 0.0;
    const std::vector<Index3> hull = axis_line_extremes(verts);
    for (std::size_t i = 0; i < hull.size(); ++i) {
        for (std::size_t j = i + 1; j < hull.size(); ++j) {
            double d2 = 0.0;
            for (int a = 0; a < 3; ++a) {
                const double d = (hull[i][a] - hull[j][a]) * s[a];
                d2 += d * d;
            }
            diameter_sq = std::max(diameter_sq, d2);
        }
    }

    const double pi = std::numbers::pi;
    ShapeFeatures out;
    const double scale = std::max(ev[0], 1e-300);
    out.degenerate = voxels.size() == 1 || ev[2] <= 1e-12 * scale;
    const double elongation = ev[0] > 0.0 ? std::sqrt(ev[1] / ev[0]) : 1.0;
    const double flatness = ev[0] > 0.0 ? std::sqrt(ev[2] / ev[0]) : 1.0;

    FeatureVector &f = out.features;
    f.add("VoxelVolume", volume);
    f.add("MeshSurfaceArea", area);
    f.add("Sphericity", std::cbrt(pi) * std::pow(6.0 * volume, 2.0 / 3.0) / area);
    f.add("Compactness", 36.0 * pi * volume * volume / (area * area * area));
    f.add("Elongation", elongation);
    f.add("Flatness", flatness);
    f.add("MajorAxisLength", 4.0 * std::sqrt(ev[0]));
    f.add("MinorAxisLength", 4.0 * std::sqrt(ev[1]));
    f.add("LeastAxisLength", 4.0 * std::sqrt(ev[2]));
    f.add("Maximum3DDiameter", std::sqrt(diameter_sq));
    return out;
}

}  // namespace cardiofeat::radiomics
