#include "cardiofeat/volume.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace cardiofeat {

Index3 Geometry::coords(std::size_t idx) const {
    const auto nx = static_cast<std::size_t>(dims[0]);
    const auto ny = static_cast<std::size_t>(dims[1]);
    return {static_cast<int>(idx % nx), static_cast<int>((idx / nx) % ny), static_cast<int>(idx / (nx * ny))};
}

void Geometry::validate() const {
    for (int a = 0; a < 3; ++a) {
        if (dims[a] <= 0) {
            throw Error(ErrorCode::MalformedHeader, "dimension " + std::to_string(a) + " is not positive");
        }
        if (!(spacing[a] > 0.0) || !std::isfinite(spacing[a])) {
            throw Error(ErrorCode::InvalidSpacing, "spacing " + std::to_string(a) + " is not positive");
        }
        if (!std::isfinite(origin[a])) {
            throw Error(ErrorCode::MalformedHeader, "origin is not finite");
        }
    }
}

bool same_geometry(const Geometry &a, const Geometry &b) {
    if (a.dims != b.dims) {
        return false;
    }
    for (int i = 0; i < 3; ++i) {
        const double ts = 1e-6 * std::max(std::abs(a.spacing[i]), std::abs(b.spacing[i]));
        if (std::abs(a.spacing[i] - b.spacing[i]) > ts) {
            return false;
        }
        const double to = 1e-4 + 1e-6 * std::max(std::abs(a.origin[i]), std::abs(b.origin[i]));
        if (std::abs(a.origin[i] - b.origin[i]) > to) {
            return false;
        }
    }
    return true;
}

void require_same_geometry(const Geometry &a, const Geometry &b, std::string_view context) {
    if (!same_geometry(a, b)) {
        throw Error(ErrorCode::GeometryMismatch, std::string(context) + ": inputs do not share a voxel grid");
    }
}

std::string_view structure_abbrev(int code) {
    static constexpr std::string_view names[] = {"BG", "LV", "MYO", "RV", "LA", "RA", "AO", "PT"};
    if (code < 0 || code > kStructureCount) {
        throw Error(ErrorCode::InvalidCode, "structure code " + std::to_string(code));
    }
    return names[code];
}

std::string_view structure_name(int code) {
    static constexpr std::string_view names[] = {"background",    "left ventricle", "left ventricular myocardium",
                                                 "right ventricle", "left atrium",  "right atrium",
                                                 "aorta",         "pulmonary trunk"};
    if (code < 0 || code > kStructureCount) {
        throw Error(ErrorCode::InvalidCode, "structure code " + std::to_string(code));
    }
    return names[code];
}

VolumeGrid::VolumeGrid(Geometry geometry, std::vector<double> data)
    : VoxelArray<double>(geometry, std::move(data)) {
    for (double v : data_) {
        if (!std::isfinite(v)) {
            throw Error(ErrorCode::MalformedHeader, "volume contains non-finite intensities");
        }
    }
}

VolumeGrid VolumeGrid::filled(const Geometry &geometry, double value) {
    return VolumeGrid(geometry, std::vector<double>(geometry.voxel_count(), value));
}

LabelMap::LabelMap(Geometry geometry, std::vector<std::uint8_t> data)
    : VoxelArray<std::uint8_t>(geometry, std::move(data)) {
    for (auto v : data_) {
        if (v > kStructureCount) {
            throw Error(ErrorCode::InvalidCode, "label value " + std::to_string(v) + " outside 0..7");
        }
    }
}

LabelMap LabelMap::filled(const Geometry &geometry, std::uint8_t code) {
    return LabelMap(geometry, std::vector<std::uint8_t>(geometry.voxel_count(), code));
}

StructureMask::StructureMask(Geometry geometry, std::vector<std::uint8_t> occupancy, int structure_code)
    : VoxelArray<std::uint8_t>(geometry, std::move(occupancy)), code_(structure_code) {
    if (structure_code < 1 || structure_code > kStructureCount) {
        throw Error(ErrorCode::InvalidCode, "structure code " + std::to_string(structure_code));
    }
    for (auto &v : data_) {
        v = v ? 1 : 0;
        count_ += v;
    }
}

std::vector<Index3> StructureMask::voxels() const {
    std::vector<Index3> out;
    out.reserve(count_);
    for (std::size_t i = 0; i < data_.size(); ++i) {
        if (data_[i]) {
            out.push_back(geometry_.coords(i));
        }
    }
    return out;
}

StructureMask extract_structure_mask(const LabelMap &labels, int code) {
    if (code < 1 || code > kStructureCount) {
        throw Error(ErrorCode::InvalidCode, "structure code " + std::to_string(code) + " outside 1..7");
    }
    std::vector<std::uint8_t> occ(labels.size());
    const auto src = labels.data();
    std::transform(src.begin(), src.end(), occ.begin(),
                   [code](std::uint8_t v) { return static_cast<std::uint8_t>(v == code); });
    return StructureMask(labels.geometry(), std::move(occ), code);
}

double trilinear(std::span<const double> data, const Index3 &dims, double x, double y, double z) {
    const double p[3] = {x, y, z};
    int i0[3];
    int i1[3];
    double f[3];
    for (int a = 0; a < 3; ++a) {
        const double hi = static_cast<double>(dims[a] - 1);
        const double c = std::clamp(p[a], 0.0, hi);
        const double fl = std::floor(c);
        i0[a] = static_cast<int>(fl);
        i1[a] = std::min(i0[a] + 1, dims[a] - 1);
        f[a] = c - fl;
    }
    const auto nx = static_cast<std::size_t>(dims[0]);
    const auto nxy = nx * static_cast<std::size_t>(dims[1]);
    auto at = [&](int xi, int yi, int zi) {
        return data[static_cast<std::size_t>(xi) + nx * static_cast<std::size_t>(yi) + nxy * static_cast<std::size_t>(zi)];
    };
    const double c00 = at(i0[0], i0[1], i0[2]) * (1.0 - f[0]) + at(i1[0], i0[1], i0[2]) * f[0];
    const double c10 = at(i0[0], i1[1], i0[2]) * (1.0 - f[0]) + at(i1[0], i1[1], i0[2]) * f[0];
    const double c01 = at(i0[0], i0[1], i1[2]) * (1.0 - f[0]) + at(i1[0], i0[1], i1[2]) * f[0];
    const double c11 = at(i0[0], i1[1], i1[2]) * (1.0 - f[0]) + at(i1[0], i1[1], i1[2]) * f[0];
    const double c0 = c00 * (1.0 - f[1]) + c10 * f[1];
    const double c1 = c01 * (1.0 - f[1]) + c11 * f[1];
    return c0 * (1.0 - f[2]) + c1 * f[2];
}

Geometry resampled_geometry(const Geometry &source, const Vec3 &target_spacing) {
    Geometry out = source;
    for (int a = 0; a < 3; ++a) {
        if (!(target_spacing[a] > 0.0) || !std::isfinite(target_spacing[a])) {
            throw Error(ErrorCode::InvalidSpacing, "target spacing must be positive");
        }
        const double extent = source.dims[a] * source.spacing[a];
        out.dims[a] = std::max(1, static_cast<int>(std::floor(extent / target_spacing[a] + 0.5)));
        out.spacing[a] = target_spacing[a];
    }
    return out;
}

namespace {

// Source lattice coordinate of target voxel i along axis a (origins coincide).
inline double source_coord(int i, const Geometry &src, const Geometry &dst, int a) {
    if (src.spacing[a] == dst.spacing[a]) {
        return static_cast<double>(i);
    }
    return static_cast<double>(i) * dst.spacing[a] / src.spacing[a];
}

}  // namespace

VolumeGrid resample_to_spacing(const VolumeGrid &volume, const Vec3 &target_spacing) {
    const Geometry &src = volume.geometry();
    const Geometry dst = resampled_geometry(src, target_spacing);
    std::vector<double> out(dst.voxel_count());
    std::size_t idx = 0;
    for (int z = 0; z < dst.dims[2]; ++z) {
        const double sz = source_coord(z, src, dst, 2);
        for (int y = 0; y < dst.dims[1]; ++y) {
            const double sy = source_coord(y, src, dst, 1);
            for (int x = 0; x < dst.dims[0]; ++x) {
                out[idx++] = trilinear(volume.data(), src.dims, source_coord(x, src, dst, 0), sy, sz);
            }
        }
    }
    return VolumeGrid(dst, std::move(out));
}

LabelMap resample_to_spacing(const LabelMap &labels, const Vec3 &target_spacing) {
    const Geometry &src = labels.geometry();
    const Geometry dst = resampled_geometry(src, target_spacing);
    auto nearest = [&](int i, int a) {
        const double c = source_coord(i, src, dst, a);
        return std::clamp(static_cast<int>(std::floor(c + 0.5)), 0, src.dims[a] - 1);
    };
    std::vector<std::uint8_t> out(dst.voxel_count());
    std::size_t idx = 0;
    for (int z = 0; z < dst.dims[2]; ++z) {
        const int sz = nearest(z, 2);
        for (int y = 0; y < dst.dims[1]; ++y) {
            const int sy = nearest(y, 1);
            for (int x = 0; x < dst.dims[0]; ++x) {
                out[idx++] = labels.at(nearest(x, 0), sy, sz);
            }
        }
    }
    return LabelMap(dst, std::move(out));
}

}  // namespace cardiofeat
