#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cardiofeat/volume.hpp"

namespace cardiofeat {

/// Axis-aligned ellipsoid in mm relative to the grid centre.
struct Ellipsoid {
    Vec3 center{0.0, 0.0, 0.0};
    Vec3 radii{1.0, 1.0, 1.0};
};

struct SyntheticCohortSpec {
    int n_healthy = 20;
    int n_diseased = 20;
    Index3 dims{32, 32, 32};
    Vec3 spacing{3.0, 3.0, 3.0};
    /// Indexed by code 1..7 (slot 0 unused). MYO is drawn as a shell of
    /// myo_thickness_mm around the LV ellipsoid.
    std::array<Ellipsoid, kStructureCount + 1> structures = default_structures();
    double myo_thickness_mm = 5.0;

    // healthy variability
    double position_jitter_mm = 0.8;
    double radius_jitter = 0.04;  // relative
    double smooth_noise_hu = 25.0;
    double white_noise_hu = 12.0;

    // disease effects, scaled per subject by a random severity split between shape and texture
    double shape_amplitude_mm = 6.0;  // displacement of the LV/MYO complex and the AO
    double texture_noise_hu = 90.0;   // high-frequency noise inside MYO and AO
    int calcification_blobs = 6;
    double calcification_hu = 700.0;
    std::uint64_t seed = 0;

    static std::array<Ellipsoid, kStructureCount + 1> default_structures();
    /// Throws ConfigError.
    void validate() const;
};

struct SyntheticSubject {
    std::string id;
    int label = 0;  // 1 diseased
    double shape_severity = 0.0;
    double texture_severity = 0.0;
    VolumeGrid image;
    LabelMap labels;
};

/// Subjects in id order sub000, sub001, ...; healthy first. Deterministic per seed.
std::vector<SyntheticSubject> generate_synthetic_cohort(const SyntheticCohortSpec &spec);

/// Writes images/<id>.nii.gz (int16 HU), labels/<id>.nii.gz and labels.csv
/// (subject_id,label,shape_severity,texture_severity). Throws IoError.
void write_synthetic_cohort(const std::vector<SyntheticSubject> &subjects, const std::filesystem::path &dir);

}  // namespace cardiofeat
