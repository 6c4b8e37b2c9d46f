#pragma once

#include <array>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "cardiofeat/volume.hpp"

namespace cardiofeat::seg {

/// 2|A n B| / (|A| + |B|); 1 when both are empty. Throws GeometryMismatch.
double dice(const StructureMask &a, const StructureMask &b);

/// Mask voxels with at least one 6-neighbour outside the mask (grid borders count as outside).
std::vector<Index3> surface_voxels(const StructureMask &mask);

inline constexpr double kFar = std::numeric_limits<double>::infinity();

/// Exact squared Euclidean distance (mm^2) from every voxel to the nearest
/// voxel with seeds[i] != 0, using physical spacing (separable lower-envelope
/// transform). kFar everywhere when there are no seeds.
std::vector<double> squared_distance_transform(std::span<const std::uint8_t> seeds, const Geometry &geometry);

/// Linear interpolation between order statistics (q in [0,1]).
double percentile(std::vector<double> values, double q);

struct SurfaceDistances {
    double hd = 0.0;    // max of both directed maxima
    double hd95 = 0.0;  // 95th percentile of the pooled directed distances
    double asd = 0.0;   // mean of the pooled directed distances
};

/// Symmetric surface distances in mm. Throws EmptySurface when either mask is empty.
SurfaceDistances surface_distances(const StructureMask &a, const StructureMask &b);

struct StructureMetrics {
    int code = 0;
    double dsc = 0.0;
    double hd = 0.0;
    double hd95 = 0.0;
    double asd = 0.0;
    bool both_empty = false;
    bool pred_empty = false;
    bool gt_empty = false;
    /// False when exactly one side is empty; such rows are left out of the
    /// global distance means.
    bool distances_defined = true;

    std::string flags() const;
};

struct SegMetricsReport {
    std::array<StructureMetrics, kStructureCount> structures{};
    double global_dsc = 0.0;
    double global_hd = 0.0;
    double global_hd95 = 0.0;
    double global_asd = 0.0;
    int distance_structures = 0;  // rows contributing to the global distance means
};

SegMetricsReport evaluate_segmentation(const LabelMap &prediction, const LabelMap &ground_truth);

/// Rows = structures + "global"; columns structure,dsc,hd,hd95,asd,flags.
void write_report_csv(const SegMetricsReport &report, std::ostream &out);

}  // namespace cardiofeat::seg
