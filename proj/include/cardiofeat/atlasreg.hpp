#pragma once

// Classical labelmap registration and population atlas construction.
//
// Registration works on Gaussian-smoothed one-hot labelmaps (8 channels) with a
// demons-style scheme: SSD data term, Gaussian regularization of the update
// (fluid) and of the accumulated field (diffusion), a coarse-to-fine pyramid
// and a fixed step with backtracking halving so the energy never increases.
//
// Field convention: u is sampled on the moving (subject) grid and stores, for
// every subject voxel p, the displacement in mm to its corresponding point
// p + u(p) in fixed (atlas) space. warp(img, u)(p) = img(p + u(p)), so
// warp(fixed, u) approximates moving.

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cardiofeat/volume.hpp"

namespace cardiofeat::atlas {

inline constexpr int kChannels = kStructureCount + 1;

/// Per-voxel probabilities over background + 7 structures, channel-major.
class SoftLabelImage {
public:
    SoftLabelImage() = default;
    /// Validates values in [0,1] and per-voxel sums of 1 (+-1e-6).
    SoftLabelImage(Geometry geometry, std::vector<double> channel_major);

    const Geometry &geometry() const noexcept { return geometry_; }
    std::size_t voxel_count() const noexcept { return geometry_.voxel_count(); }
    std::span<const double> channel(int c) const {
        return std::span<const double>(data_).subspan(static_cast<std::size_t>(c) * voxel_count(), voxel_count());
    }
    double value(int c, std::size_t voxel) const { return data_[static_cast<std::size_t>(c) * voxel_count() + voxel]; }
    std::span<const double> data() const noexcept { return data_; }

    friend bool operator==(const SoftLabelImage &, const SoftLabelImage &) = default;

private:
    Geometry geometry_;
    std::vector<double> data_;
};

/// Dense displacement field in mm, world axes, one vector per voxel.
class DisplacementField {
public:
    DisplacementField() = default;
    explicit DisplacementField(Geometry geometry);  // zero field
    DisplacementField(Geometry geometry, std::vector<Vec3> vectors);

    const Geometry &geometry() const noexcept { return geometry_; }
    std::span<const Vec3> vectors() const noexcept { return vectors_; }
    const Vec3 &operator[](std::size_t i) const { return vectors_[i]; }
    std::size_t size() const noexcept { return vectors_.size(); }

    /// Largest vector length in voxel units (components divided by spacing).
    double max_magnitude_voxels() const;
    double mean_magnitude_mm() const;

    friend bool operator==(const DisplacementField &, const DisplacementField &) = default;

private:
    Geometry geometry_;
    std::vector<Vec3> vectors_;
};

/// One-hot encoding, per-channel Gaussian smoothing (sigma in mm, per-axis
/// converted to voxels, replicate boundary), then per-voxel renormalization.
SoftLabelImage to_soft_labels(const LabelMap &labels, double smoothing_sigma_mm);

/// Per-channel Gaussian smoothing (sigma in mm) and renormalization; sigma 0 copies.
SoftLabelImage smooth_soft_labels(const SoftLabelImage &soft, double smoothing_sigma_mm);
/// Per-voxel argmax over channels; ties go to the lowest code.
LabelMap hard_labels(const SoftLabelImage &soft);

/// Separable Gaussian smoothing of an x-fastest scalar array, in place.
void gaussian_smooth(std::span<double> data, const Index3 &dims, const Vec3 &sigma_voxels);

struct RegistrationParams {
    int levels = 3;
    int iterations_per_level = 100;
    double sigma_fluid = 1.0;      // voxels, applied to each update
    double sigma_diffusion = 1.5;  // voxels, applied to the accumulated field
    double step = 1.0;             // initial step multiplier for each iteration
    int max_halvings = 6;
    double energy_tol = 1e-6;      // relative decrease that counts as converged
    double regularization_weight = 0.01;  // weight of mean |grad u|^2 (voxel units) in the energy
};

struct RegistrationResult {
    DisplacementField field;
    double initial_energy = 0.0;
    double final_energy = 0.0;
    /// Energy after every accepted iteration, all levels concatenated.
    std::vector<double> energy_trace;
    /// Number of trace entries contributed by each pyramid level, coarse first.
    std::vector<int> level_iterations;
    /// Iteration budget ran out while the energy was still decreasing by more
    /// than energy_tol. The field is still usable.
    bool non_converged = false;
};

/// Registers moving onto fixed (shared geometry). Energy values are reported on
/// the finest level. Throws GeometryMismatch.
RegistrationResult register_labels(const SoftLabelImage &moving, const SoftLabelImage &fixed,
                                   const RegistrationParams &params = {});

/// Mean over voxels of sum_c (fixed_c(p + u(p)) - moving_c(p))^2 plus the
/// weighted field-gradient penalty.
double registration_energy(const SoftLabelImage &moving, const SoftLabelImage &fixed, const DisplacementField &field,
                           double regularization_weight);

/// Backward warping: trilinear + renormalization for soft labels, nearest
/// neighbour for hard labels. Throws GeometryMismatch.
SoftLabelImage warp(const SoftLabelImage &image, const DisplacementField &field);
LabelMap warp(const LabelMap &labels, const DisplacementField &field);

/// Fixed-point inverse: v(x) = -u(x + v(x)).
DisplacementField invert(const DisplacementField &field, int iterations = 20);

/// det(I + grad u) per voxel by central differences (one-sided at borders).
VolumeGrid jacobian_determinant(const DisplacementField &field);
/// Fraction (0..1) of voxels with determinant <= 0.
double folding_fraction(const VolumeGrid &jacobian);

struct Atlas {
    SoftLabelImage soft;
    LabelMap hard;
    int iterations = 0;
    int cohort_size = 0;
};

struct AtlasParams {
    int iterations = 3;
    double label_sigma_voxels = 1.0;  // in units of the smallest spacing
    RegistrationParams registration;
    unsigned workers = 1;

    double label_sigma_mm(const Geometry &g) const;
};

struct SubjectQc {
    double final_energy = 0.0;
    double mean_displacement_mm = 0.0;
    double folding_percent = 0.0;
    bool non_converged = false;
};

struct AtlasResult {
    Atlas atlas;
    std::vector<DisplacementField> fields;  // subject -> atlas, cohort order
    std::vector<SubjectQc> qc;
};

/// Iterative unbiased atlas. The atlas is the voxel-wise mean of the subjects'
/// one-hot labels, starting unwarped; each iteration registers every smoothed
/// subject to the smoothed atlas, removes the cohort-mean displacement from the
/// fields and re-averages the one-hot labels warped into atlas space.
/// Registration against a stored atlas should smooth it the same way
/// (smooth_soft_labels with label_sigma_mm). Throws EmptyCohort / GeometryMismatch.
AtlasResult build_atlas(std::span<const LabelMap> cohort, const AtlasParams &params = {});

SubjectQc quality_control(const RegistrationResult &result);

// 3-channel float32 NIfTI with vector intent.
void save_field(const DisplacementField &field, const std::filesystem::path &path);
DisplacementField load_field(const std::filesystem::path &path);
// 8-channel float32 NIfTI.
void save_soft_labels(const SoftLabelImage &soft, const std::filesystem::path &path);
SoftLabelImage load_soft_labels(const std::filesystem::path &path);

}  // namespace cardiofeat::atlas
