#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "cardiofeat/error.hpp"

namespace cardiofeat {

using Index3 = std::array<int, 3>;
using Vec3 = std::array<double, 3>;

/// Lattice geometry shared by every voxel container. Data is stored x-fastest.
struct Geometry {
    Index3 dims{1, 1, 1};
    Vec3 spacing{1.0, 1.0, 1.0};  // mm per voxel
    Vec3 origin{0.0, 0.0, 0.0};   // world position (mm) of voxel (0,0,0)

    std::size_t voxel_count() const {
        return static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]) *
               static_cast<std::size_t>(dims[2]);
    }
    std::size_t index(int x, int y, int z) const {
        return static_cast<std::size_t>(x) +
               static_cast<std::size_t>(dims[0]) *
                   (static_cast<std::size_t>(y) + static_cast<std::size_t>(dims[1]) * static_cast<std::size_t>(z));
    }
    std::size_t index(const Index3 &p) const { return index(p[0], p[1], p[2]); }
    Index3 coords(std::size_t idx) const;
    bool contains(int x, int y, int z) const {
        return x >= 0 && y >= 0 && z >= 0 && x < dims[0] && y < dims[1] && z < dims[2];
    }
    bool contains(const Index3 &p) const { return contains(p[0], p[1], p[2]); }
    double voxel_volume() const { return spacing[0] * spacing[1] * spacing[2]; }

    /// Throws MalformedHeader / InvalidSpacing when dims or spacing are not positive.
    void validate() const;

    friend bool operator==(const Geometry &, const Geometry &) = default;
};

/// Same dims, spacing and origin up to float32 header round-off.
bool same_geometry(const Geometry &a, const Geometry &b);
void require_same_geometry(const Geometry &a, const Geometry &b, std::string_view context);

inline constexpr int kStructureCount = 7;

/// Fixed code table: 1=LV 2=MYO 3=RV 4=LA 5=RA 6=AO 7=PT.
std::string_view structure_abbrev(int code);
std::string_view structure_name(int code);

template <class T>
class VoxelArray {
public:
    using value_type = T;

    VoxelArray() = default;
    VoxelArray(Geometry geometry, std::vector<T> data) : geometry_(geometry), data_(std::move(data)) {
        geometry_.validate();
        if (data_.size() != geometry_.voxel_count()) {
            throw Error(ErrorCode::MalformedHeader, "voxel data length does not match dims");
        }
    }

    const Geometry &geometry() const noexcept { return geometry_; }
    const Index3 &dims() const noexcept { return geometry_.dims; }
    std::span<const T> data() const noexcept { return data_; }
    std::size_t size() const noexcept { return data_.size(); }
    const T &operator[](std::size_t i) const { return data_[i]; }
    const T &at(int x, int y, int z) const { return data_[geometry_.index(x, y, z)]; }

    friend bool operator==(const VoxelArray &, const VoxelArray &) = default;

protected:
    Geometry geometry_;
    std::vector<T> data_;
};

/// Scalar intensity volume (HU for CT), stored as float64.
class VolumeGrid : public VoxelArray<double> {
public:
    VolumeGrid() = default;
    VolumeGrid(Geometry geometry, std::vector<double> data);
    /// Constant-valued volume.
    static VolumeGrid filled(const Geometry &geometry, double value);
};

/// Integer labelmap with codes 0 (background) .. 7.
class LabelMap : public VoxelArray<std::uint8_t> {
public:
    LabelMap() = default;
    LabelMap(Geometry geometry, std::vector<std::uint8_t> data);
    static LabelMap filled(const Geometry &geometry, std::uint8_t code);
};

/// Binary occupancy for one structure code.
class StructureMask : public VoxelArray<std::uint8_t> {
public:
    StructureMask() = default;
    StructureMask(Geometry geometry, std::vector<std::uint8_t> occupancy, int structure_code);

    int structure_code() const noexcept { return code_; }
    std::size_t count() const noexcept { return count_; }
    bool empty() const noexcept { return count_ == 0; }
    bool contains(int x, int y, int z) const { return geometry_.contains(x, y, z) && at(x, y, z) != 0; }
    /// Lattice coordinates of occupied voxels in x-fastest lexicographic order.
    std::vector<Index3> voxels() const;

private:
    int code_ = 0;
    std::size_t count_ = 0;
};

StructureMask extract_structure_mask(const LabelMap &labels, int code);

/// Trilinear (VolumeGrid) or nearest-neighbour (LabelMap) resampling that keeps
/// the origin and the physical extent (to within one voxel).
VolumeGrid resample_to_spacing(const VolumeGrid &volume, const Vec3 &target_spacing);
LabelMap resample_to_spacing(const LabelMap &labels, const Vec3 &target_spacing);

/// Geometry produced by resample_to_spacing.
Geometry resampled_geometry(const Geometry &source, const Vec3 &target_spacing);

/// Trilinear sample of an x-fastest scalar array at a continuous lattice
/// position; coordinates are clamped to the grid.
double trilinear(std::span<const double> data, const Index3 &dims, double x, double y, double z);

inline double sample_trilinear(const VolumeGrid &volume, double x, double y, double z) {
    return trilinear(volume.data(), volume.dims(), x, y, z);
}

}  // namespace cardiofeat
