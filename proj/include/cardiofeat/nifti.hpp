#pragma once

#include <filesystem>
#include <vector>

#include "cardiofeat/volume.hpp"

namespace cardiofeat {

/// On-disk voxel type for scalar volumes.
enum class StorageType { UInt8, Int16, Int32, Float32, Float64 };

/// Reads a scalar NIfTI-1 volume (.nii or .nii.gz). Integer-stored data is
/// rescaled by scl_slope / scl_inter when the slope is non-zero.
VolumeGrid load_volume(const std::filesystem::path &path);

/// Reads a scalar NIfTI-1 volume whose values must be integer codes 0..7.
LabelMap load_labelmap(const std::filesystem::path &path);

/// Values are rounded for integer storage types.
void save_volume(const VolumeGrid &volume, const std::filesystem::path &path,
                 StorageType storage = StorageType::Float32);
void save_labelmap(const LabelMap &labels, const std::filesystem::path &path);

/// Multi-channel image (channel-major: all voxels of channel 0, then channel 1 ...).
/// Stored as a 5D NIfTI with dim[4]=1 and dim[5]=channels.
struct MultiChannelImage {
    Geometry geometry;
    int channels = 1;
    std::vector<double> data;
    short intent_code = 0;
};

inline constexpr short kNiftiIntentVector = 1007;

MultiChannelImage load_multichannel(const std::filesystem::path &path);
/// Always written as float32.
void save_multichannel(const MultiChannelImage &image, const std::filesystem::path &path);

}  // namespace cardiofeat
