#include "cardiofeat/atlasreg.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cardiofeat/error.hpp"
#include "cardiofeat/nifti.hpp"
#include "cardiofeat/parallel.hpp"

namespace cardiofeat::atlas {
namespace {

using Channels = std::vector<double>;  // channel-major, kChannels * N

void renormalize(Channels &data, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (int c = 0; c < kChannels; ++c) s += data[static_cast<std::size_t>(c) * n + i];
        if (s > 0.0) {
            for (int c = 0; c < kChannels; ++c) data[static_cast<std::size_t>(c) * n + i] /= s;
        } else {
            data[i] = 1.0;  // all mass to background
        }
    }
}

std::vector<double> gaussian_kernel(double sigma) {
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
    double s = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        const double v = std::exp(-0.5 * i * i / (sigma * sigma));
        k[static_cast<std::size_t>(i + radius)] = v;
        s += v;
    }
    for (double &v : k) v /= s;
    return k;
}

// Continuous lattice position p + u(p)/spacing.
inline void displaced(const Geometry &g, std::size_t idx, const Vec3 &u, double &x, double &y, double &z) {
    const Index3 p = g.coords(idx);
    x = p[0] + u[0] / g.spacing[0];
    y = p[1] + u[1] / g.spacing[1];
    z = p[2] + u[2] / g.spacing[2];
}

Channels warp_channels(std::span<const double> image, const Geometry &g, std::span<const Vec3> field) {
    const std::size_t n = g.voxel_count();
    const auto nx = static_cast<std::size_t>(g.dims[0]);
    const auto nxy = nx * static_cast<std::size_t>(g.dims[1]);
    Channels out(image.size());
    for (std::size_t i = 0; i < n; ++i) {
        double q[3];
        displaced(g, i, field[i], q[0], q[1], q[2]);
        // one trilinear stencil shared by all channels
        std::size_t lo[3], hi[3];
        double f[3];
        for (int a = 0; a < 3; ++a) {
            const double c = std::clamp(q[a], 0.0, static_cast<double>(g.dims[a] - 1));
            const double fl = std::floor(c);
            lo[a] = static_cast<std::size_t>(fl);
            hi[a] = std::min(lo[a] + 1, static_cast<std::size_t>(g.dims[a] - 1));
            f[a] = c - fl;
        }
        const std::size_t idx[8] = {lo[0] + nx * lo[1] + nxy * lo[2], hi[0] + nx * lo[1] + nxy * lo[2],
                                    lo[0] + nx * hi[1] + nxy * lo[2], hi[0] + nx * hi[1] + nxy * lo[2],
                                    lo[0] + nx * lo[1] + nxy * hi[2], hi[0] + nx * lo[1] + nxy * hi[2],
                                    lo[0] + nx * hi[1] + nxy * hi[2], hi[0] + nx * hi[1] + nxy * hi[2]};
        const double gx = 1.0 - f[0], gy = 1.0 - f[1], gz = 1.0 - f[2];
        const double w[8] = {gx * gy * gz,     f[0] * gy * gz,     gx * f[1] * gz,     f[0] * f[1] * gz,
                             gx * gy * f[2],   f[0] * gy * f[2],   gx * f[1] * f[2],   f[0] * f[1] * f[2]};
        for (int c = 0; c < kChannels; ++c) {
            const double *src = image.data() + static_cast<std::size_t>(c) * n;
            double v = 0.0;
            for (int k = 0; k < 8; ++k) v += w[k] * src[idx[k]];
            out[static_cast<std::size_t>(c) * n + i] = v;
        }
    }
    return out;
}

// Central difference along axis a in voxel units, one-sided at the borders.
template <class Get>
double lattice_derivative(const Geometry &g, const Index3 &p, int a, Get &&get) {
    Index3 lo = p;
    Index3 hi = p;
    if (p[a] > 0) --lo[a];
    if (p[a] < g.dims[a] - 1) ++hi[a];
    const int span = hi[a] - lo[a];
    if (span == 0) return 0.0;
    return (get(g.index(hi)) - get(g.index(lo))) / span;
}

double gradient_penalty(const Geometry &g, std::span<const Vec3> field) {
    const std::size_t n = g.voxel_count();
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const Index3 p = g.coords(i);
        for (int comp = 0; comp < 3; ++comp) {
            for (int a = 0; a < 3; ++a) {
                const double d = lattice_derivative(g, p, a, [&](std::size_t j) { return field[j][comp] / g.spacing[comp]; });
                acc += d * d;
            }
        }
    }
    return acc / static_cast<double>(n);
}

double data_energy(std::span<const double> moving, const Channels &warped_fixed) {
    const std::size_t n = moving.size() / kChannels;
    double acc = 0.0;
    for (std::size_t i = 0; i < moving.size(); ++i) {
        const double d = warped_fixed[i] - moving[i];
        acc += d * d;
    }
    return acc / static_cast<double>(n);
}

double total_energy(std::span<const double> moving, std::span<const double> fixed, const Geometry &g,
                    std::span<const Vec3> field, double reg_weight) {
    const Channels w = warp_channels(fixed, g, field);
    double e = data_energy(moving, w);
    if (reg_weight > 0.0) e += reg_weight * gradient_penalty(g, field);
    return e;
}

void smooth_field(std::vector<Vec3> &field, const Index3 &dims, double sigma) {
    if (sigma <= 0.0) return;
    std::vector<double> comp(field.size());
    for (int c = 0; c < 3; ++c) {
        for (std::size_t i = 0; i < field.size(); ++i) comp[i] = field[i][c];
        gaussian_smooth(comp, dims, {sigma, sigma, sigma});
        for (std::size_t i = 0; i < field.size(); ++i) field[i][c] = comp[i];
    }
}

struct PyramidLevel {
    Geometry geometry;
    Channels moving;
    Channels fixed;
};

// Halves every axis with at least 8 voxels after a sigma=1 voxel Gaussian.
PyramidLevel downsample(const PyramidLevel &fine) {
    PyramidLevel coarse;
    const Geometry &gf = fine.geometry;
    Geometry gc = gf;
    Index3 factor{1, 1, 1};
    for (int a = 0; a < 3; ++a) {
        if (gf.dims[a] >= 8) {
            factor[a] = 2;
            gc.dims[a] = (gf.dims[a] + 1) / 2;
            gc.spacing[a] = gf.spacing[a] * 2.0;
        }
    }
    coarse.geometry = gc;
    const std::size_t nf = gf.voxel_count();
    const std::size_t nc = gc.voxel_count();
    const Vec3 sigma{factor[0] > 1 ? 1.0 : 0.0, factor[1] > 1 ? 1.0 : 0.0, factor[2] > 1 ? 1.0 : 0.0};
    auto reduce = [&](const Channels &src) {
        Channels out(kChannels * nc);
        std::vector<double> tmp(nf);
        for (int c = 0; c < kChannels; ++c) {
            std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(c * nf), nf, tmp.begin());
            gaussian_smooth(tmp, gf.dims, sigma);
            for (std::size_t i = 0; i < nc; ++i) {
                const Index3 p = gc.coords(i);
                out[static_cast<std::size_t>(c) * nc + i] =
                    tmp[gf.index(p[0] * factor[0], p[1] * factor[1], p[2] * factor[2])];
            }
        }
        return out;
    };
    coarse.moving = reduce(fine.moving);
    coarse.fixed = reduce(fine.fixed);
    return coarse;
}

std::vector<Vec3> upsample_field(const std::vector<Vec3> &coarse, const Geometry &gc, const Geometry &gf) {
    std::vector<Vec3> out(gf.voxel_count());
    std::vector<double> comp(coarse.size());
    for (int c = 0; c < 3; ++c) {
        for (std::size_t i = 0; i < coarse.size(); ++i) comp[i] = coarse[i][c];
        for (std::size_t i = 0; i < out.size(); ++i) {
            const Index3 p = gf.coords(i);
            out[i][c] = trilinear(comp, gc.dims, p[0] * gf.spacing[0] / gc.spacing[0], p[1] * gf.spacing[1] / gc.spacing[1],
                                  p[2] * gf.spacing[2] / gc.spacing[2]);
        }
    }
    return out;
}

struct LevelOutcome {
    std::vector<double> trace;
    bool non_converged = false;
};

LevelOutcome optimize_level(const PyramidLevel &level, std::vector<Vec3> &field, const RegistrationParams &params) {
    const Geometry &g = level.geometry;
    const std::size_t n = g.voxel_count();
    LevelOutcome outcome;
    double energy = total_energy(level.moving, level.fixed, g, field, params.regularization_weight);
    double last_rel = 0.0;
    bool converged = false;
    std::vector<Vec3> update(n);
    std::vector<Vec3> candidate(n);

    for (int it = 0; it < params.iterations_per_level; ++it) {
        const Channels warped = warp_channels(level.fixed, g, field);
        // Thirion-style force in voxel units, summed over channels.
        double max_update = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const Index3 p = g.coords(i);
            Vec3 num{0.0, 0.0, 0.0};
            double grad_sq = 0.0;
            double diff_sq = 0.0;
            for (int c = 0; c < kChannels; ++c) {
                const std::size_t off = static_cast<std::size_t>(c) * n;
                const double diff = level.moving[off + i] - warped[off + i];
                if (diff == 0.0) continue;
                for (int a = 0; a < 3; ++a) {
                    const double grad = lattice_derivative(g, p, a, [&](std::size_t j) { return warped[off + j]; });
                    num[a] += diff * grad;
                    grad_sq += grad * grad;
                }
                diff_sq += diff * diff;
            }
            const double den = grad_sq + diff_sq;
            for (int a = 0; a < 3; ++a) {
                update[i][a] = den > 1e-12 ? num[a] / den * g.spacing[a] : 0.0;
            }
            max_update = std::max(max_update, std::abs(update[i][0]) + std::abs(update[i][1]) + std::abs(update[i][2]));
        }
        if (max_update == 0.0) {
            converged = true;
            break;
        }
        smooth_field(update, g.dims, params.sigma_fluid);

        bool accepted = false;
        double step = params.step;
        double candidate_energy = energy;
        // smoothing is linear, so smooth(field + s*update) is formed from two smoothed terms
        std::vector<Vec3> smoothed_field = field;
        smooth_field(smoothed_field, g.dims, params.sigma_diffusion);
        smooth_field(update, g.dims, params.sigma_diffusion);
        for (int h = 0; h <= params.max_halvings; ++h, step *= 0.5) {
            for (std::size_t i = 0; i < n; ++i) {
                for (int a = 0; a < 3; ++a) candidate[i][a] = smoothed_field[i][a] + step * update[i][a];
            }
            candidate_energy = total_energy(level.moving, level.fixed, g, candidate, params.regularization_weight);
            if (candidate_energy < energy) {
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            converged = true;
            break;
        }
        field.swap(candidate);
        last_rel = (energy - candidate_energy) / std::max(energy, 1e-300);
        energy = candidate_energy;
        outcome.trace.push_back(energy);
        if (last_rel < params.energy_tol) {
            converged = true;
            break;
        }
    }
    outcome.non_converged = !converged && last_rel >= params.energy_tol;
    return outcome;
}

Geometry require_field_geometry(const Geometry &image, const DisplacementField &field, const char *context) {
    require_same_geometry(image, field.geometry(), context);
    return image;
}

}  // namespace

// ---------------------------------------------------------------- types

SoftLabelImage::SoftLabelImage(Geometry geometry, std::vector<double> channel_major)
    : geometry_(geometry), data_(std::move(channel_major)) {
    geometry_.validate();
    const std::size_t n = geometry_.voxel_count();
    if (data_.size() != n * kChannels) {
        throw Error(ErrorCode::DimensionMismatch, "soft labels need 8 channels of voxel_count values");
    }
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (int c = 0; c < kChannels; ++c) {
            const double v = data_[static_cast<std::size_t>(c) * n + i];
            if (!(v >= -1e-9 && v <= 1.0 + 1e-9)) {
                throw Error(ErrorCode::InvalidArgument, "soft label probability outside [0,1]");
            }
            s += v;
        }
        if (std::abs(s - 1.0) > 1e-6) {
            throw Error(ErrorCode::InvalidArgument, "soft label channels do not sum to 1");
        }
    }
}

DisplacementField::DisplacementField(Geometry geometry)
    : geometry_(geometry), vectors_(geometry.voxel_count(), Vec3{0.0, 0.0, 0.0}) {
    geometry_.validate();
}

DisplacementField::DisplacementField(Geometry geometry, std::vector<Vec3> vectors)
    : geometry_(geometry), vectors_(std::move(vectors)) {
    geometry_.validate();
    if (vectors_.size() != geometry_.voxel_count()) {
        throw Error(ErrorCode::DimensionMismatch, "field length does not match geometry");
    }
    for (const auto &v : vectors_) {
        if (!std::isfinite(v[0]) || !std::isfinite(v[1]) || !std::isfinite(v[2])) {
            throw Error(ErrorCode::InvalidArgument, "non-finite displacement");
        }
    }
}

double DisplacementField::max_magnitude_voxels() const {
    double m = 0.0;
    for (const auto &v : vectors_) {
        const double x = v[0] / geometry_.spacing[0];
        const double y = v[1] / geometry_.spacing[1];
        const double z = v[2] / geometry_.spacing[2];
        m = std::max(m, std::sqrt(x * x + y * y + z * z));
    }
    return m;
}

double DisplacementField::mean_magnitude_mm() const {
    if (vectors_.empty()) return 0.0;
    double s = 0.0;
    for (const auto &v : vectors_) s += std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    return s / static_cast<double>(vectors_.size());
}

// ---------------------------------------------------------------- smoothing / labels

void gaussian_smooth(std::span<double> data, const Index3 &dims, const Vec3 &sigma_voxels) {
    const int stride[3] = {1, dims[0], dims[0] * dims[1]};
    std::vector<double> line;
    std::vector<double> out;
    for (int a = 0; a < 3; ++a) {
        if (sigma_voxels[a] <= 0.0 || dims[a] == 1) continue;
        const std::vector<double> k = gaussian_kernel(sigma_voxels[a]);
        const int radius = static_cast<int>(k.size() / 2);
        const int len = dims[a];
        line.resize(static_cast<std::size_t>(len + 2 * radius));
        out.resize(static_cast<std::size_t>(len));
        const int b = (a + 1) % 3;
        const int c = (a + 2) % 3;
        for (int jc = 0; jc < dims[c]; ++jc) {
            for (int jb = 0; jb < dims[b]; ++jb) {
                const std::size_t base = static_cast<std::size_t>(jb) * static_cast<std::size_t>(stride[b]) +
                                         static_cast<std::size_t>(jc) * static_cast<std::size_t>(stride[c]);
                // replicate padding keeps the inner loop branch-free
                for (int i = 0; i < len + 2 * radius; ++i) {
                    const int j = std::clamp(i - radius, 0, len - 1);
                    line[static_cast<std::size_t>(i)] = data[base + static_cast<std::size_t>(j) * static_cast<std::size_t>(stride[a])];
                }
                for (int i = 0; i < len; ++i) {
                    const double *src = line.data() + i;
                    double acc = 0.0;
                    for (std::size_t t = 0; t < k.size(); ++t) acc += k[t] * src[t];
                    out[static_cast<std::size_t>(i)] = acc;
                }
                for (int i = 0; i < len; ++i) {
                    data[base + static_cast<std::size_t>(i) * static_cast<std::size_t>(stride[a])] = out[static_cast<std::size_t>(i)];
                }
            }
        }
    }
}

SoftLabelImage to_soft_labels(const LabelMap &labels, double smoothing_sigma_mm) {
    if (!(smoothing_sigma_mm >= 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "smoothing sigma must be >= 0");
    }
    const Geometry &g = labels.geometry();
    const std::size_t n = g.voxel_count();
    Channels data(kChannels * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) data[static_cast<std::size_t>(labels[i]) * n + i] = 1.0;
    if (smoothing_sigma_mm > 0.0) {
        const Vec3 sigma{smoothing_sigma_mm / g.spacing[0], smoothing_sigma_mm / g.spacing[1],
                         smoothing_sigma_mm / g.spacing[2]};
        for (int c = 0; c < kChannels; ++c) {
            gaussian_smooth(std::span<double>(data).subspan(static_cast<std::size_t>(c) * n, n), g.dims, sigma);
        }
        renormalize(data, n);
    }
    return SoftLabelImage(g, std::move(data));
}

SoftLabelImage smooth_soft_labels(const SoftLabelImage &soft, double smoothing_sigma_mm) {
    if (!(smoothing_sigma_mm >= 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "smoothing sigma must be >= 0");
    }
    if (smoothing_sigma_mm == 0.0) return soft;
    const Geometry &g = soft.geometry();
    const std::size_t n = g.voxel_count();
    Channels data(soft.data().begin(), soft.data().end());
    const Vec3 sigma{smoothing_sigma_mm / g.spacing[0], smoothing_sigma_mm / g.spacing[1],
                     smoothing_sigma_mm / g.spacing[2]};
    for (int c = 0; c < kChannels; ++c) {
        gaussian_smooth(std::span<double>(data).subspan(static_cast<std::size_t>(c) * n, n), g.dims, sigma);
    }
    renormalize(data, n);
    return SoftLabelImage(g, std::move(data));
}

LabelMap hard_labels(const SoftLabelImage &soft) {
    const std::size_t n = soft.voxel_count();
    std::vector<std::uint8_t> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        int best = 0;
        double best_v = soft.value(0, i);
        for (int c = 1; c < kChannels; ++c) {
            const double v = soft.value(c, i);
            if (v > best_v) {
                best = c;
                best_v = v;
            }
        }
        out[i] = static_cast<std::uint8_t>(best);
    }
    return LabelMap(soft.geometry(), std::move(out));
}

// ---------------------------------------------------------------- registration

double registration_energy(const SoftLabelImage &moving, const SoftLabelImage &fixed, const DisplacementField &field,
                           double regularization_weight) {
    require_same_geometry(moving.geometry(), fixed.geometry(), "registration_energy");
    require_field_geometry(moving.geometry(), field, "registration_energy");
    return total_energy(moving.data(), fixed.data(), moving.geometry(), field.vectors(), regularization_weight);
}

RegistrationResult register_labels(const SoftLabelImage &moving, const SoftLabelImage &fixed,
                                   const RegistrationParams &params) {
    require_same_geometry(moving.geometry(), fixed.geometry(), "register");
    std::vector<PyramidLevel> pyramid;
    pyramid.push_back({moving.geometry(), Channels(moving.data().begin(), moving.data().end()),
                       Channels(fixed.data().begin(), fixed.data().end())});
    for (int l = 1; l < std::max(1, params.levels); ++l) {
        const Geometry &g = pyramid.back().geometry;
        if (std::max({g.dims[0], g.dims[1], g.dims[2]}) < 8) break;
        pyramid.push_back(downsample(pyramid.back()));
    }

    RegistrationResult result;
    const PyramidLevel &finest = pyramid.front();
    result.initial_energy = total_energy(finest.moving, finest.fixed, finest.geometry,
                                         std::vector<Vec3>(finest.geometry.voxel_count(), Vec3{0, 0, 0}),
                                         params.regularization_weight);

    std::vector<Vec3> field(pyramid.back().geometry.voxel_count(), Vec3{0, 0, 0});
    for (std::size_t l = pyramid.size(); l-- > 0;) {
        if (l + 1 < pyramid.size()) {
            field = upsample_field(field, pyramid[l + 1].geometry, pyramid[l].geometry);
        }
        const LevelOutcome outcome = optimize_level(pyramid[l], field, params);
        result.energy_trace.insert(result.energy_trace.end(), outcome.trace.begin(), outcome.trace.end());
        result.level_iterations.push_back(static_cast<int>(outcome.trace.size()));
        result.non_converged = result.non_converged || outcome.non_converged;
    }
    result.final_energy = total_energy(finest.moving, finest.fixed, finest.geometry, field, params.regularization_weight);
    if (result.final_energy > result.initial_energy) {
        // Coarse-level gains can be lost after upsampling; never report a worse field.
        field.assign(field.size(), Vec3{0, 0, 0});
        result.final_energy = result.initial_energy;
    }
    result.field = DisplacementField(moving.geometry(), std::move(field));
    return result;
}

// ---------------------------------------------------------------- warping / fields

SoftLabelImage warp(const SoftLabelImage &image, const DisplacementField &field) {
    const Geometry g = require_field_geometry(image.geometry(), field, "warp");
    Channels out = warp_channels(image.data(), g, field.vectors());
    for (double &v : out) v = std::clamp(v, 0.0, 1.0);
    renormalize(out, g.voxel_count());
    return SoftLabelImage(g, std::move(out));
}

LabelMap warp(const LabelMap &labels, const DisplacementField &field) {
    const Geometry g = require_field_geometry(labels.geometry(), field, "warp");
    std::vector<std::uint8_t> out(g.voxel_count());
    for (std::size_t i = 0; i < out.size(); ++i) {
        double p[3];
        displaced(g, i, field[i], p[0], p[1], p[2]);
        int q[3];
        for (int a = 0; a < 3; ++a) q[a] = std::clamp(static_cast<int>(std::floor(p[a] + 0.5)), 0, g.dims[a] - 1);
        out[i] = labels.at(q[0], q[1], q[2]);
    }
    return LabelMap(g, std::move(out));
}

DisplacementField invert(const DisplacementField &field, int iterations) {
    const Geometry &g = field.geometry();
    const std::size_t n = g.voxel_count();
    std::array<std::vector<double>, 3> comp;
    for (int c = 0; c < 3; ++c) {
        comp[c].resize(n);
        for (std::size_t i = 0; i < n; ++i) comp[c][i] = field[i][c];
    }
    std::vector<Vec3> inv(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (int c = 0; c < 3; ++c) inv[i][c] = -field[i][c];
    }
    for (int it = 0; it < iterations; ++it) {
        for (std::size_t i = 0; i < n; ++i) {
            double x, y, z;
            displaced(g, i, inv[i], x, y, z);
            for (int c = 0; c < 3; ++c) inv[i][c] = -trilinear(comp[c], g.dims, x, y, z);
        }
    }
    return DisplacementField(g, std::move(inv));
}

VolumeGrid jacobian_determinant(const DisplacementField &field) {
    const Geometry &g = field.geometry();
    std::vector<double> det(g.voxel_count());
    for (std::size_t i = 0; i < det.size(); ++i) {
        const Index3 p = g.coords(i);
        double j[3][3];
        for (int c = 0; c < 3; ++c) {
            for (int a = 0; a < 3; ++a) {
                j[c][a] = lattice_derivative(g, p, a, [&](std::size_t k) { return field[k][c]; }) / g.spacing[a];
                if (a == c) j[c][a] += 1.0;
            }
        }
        det[i] = j[0][0] * (j[1][1] * j[2][2] - j[1][2] * j[2][1]) - j[0][1] * (j[1][0] * j[2][2] - j[1][2] * j[2][0]) +
                 j[0][2] * (j[1][0] * j[2][1] - j[1][1] * j[2][0]);
    }
    return VolumeGrid(g, std::move(det));
}

double folding_fraction(const VolumeGrid &jacobian) {
    if (jacobian.size() == 0) return 0.0;
    std::size_t folded = 0;
    for (double d : jacobian.data()) folded += d <= 0.0;
    return static_cast<double>(folded) / static_cast<double>(jacobian.size());
}

SubjectQc quality_control(const RegistrationResult &result) {
    SubjectQc qc;
    qc.final_energy = result.final_energy;
    qc.mean_displacement_mm = result.field.mean_magnitude_mm();
    qc.folding_percent = 100.0 * folding_fraction(jacobian_determinant(result.field));
    qc.non_converged = result.non_converged;
    return qc;
}

// ---------------------------------------------------------------- atlas

double AtlasParams::label_sigma_mm(const Geometry &g) const {
    return label_sigma_voxels * std::min({g.spacing[0], g.spacing[1], g.spacing[2]});
}

AtlasResult build_atlas(std::span<const LabelMap> cohort, const AtlasParams &params) {
    if (cohort.empty()) {
        throw Error(ErrorCode::EmptyCohort, "atlas construction needs at least one labelmap");
    }
    const Geometry &g = cohort.front().geometry();
    for (const auto &l : cohort) require_same_geometry(g, l.geometry(), "build_atlas");
    const std::size_t n = g.voxel_count();
    const std::size_t k = cohort.size();
    const double sigma_mm = params.label_sigma_mm(g);

    std::vector<SoftLabelImage> one_hot(k), soft(k);
    parallel_for(k, params.workers, [&](std::size_t i) {
        one_hot[i] = to_soft_labels(cohort[i], 0.0);
        soft[i] = smooth_soft_labels(one_hot[i], sigma_mm);
    });

    auto average = [&](const std::vector<SoftLabelImage> &images) {
        Channels mean(kChannels * n, 0.0);
        for (const auto &img : images) {
            const auto d = img.data();
            for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += d[i];
        }
        for (double &v : mean) v /= static_cast<double>(images.size());
        renormalize(mean, n);
        return SoftLabelImage(g, std::move(mean));
    };

    AtlasResult result;
    SoftLabelImage atlas_soft = average(one_hot);
    result.fields.assign(k, DisplacementField(g));
    result.qc.assign(k, SubjectQc{});

    for (int it = 0; it < params.iterations; ++it) {
        const SoftLabelImage fixed = smooth_soft_labels(atlas_soft, sigma_mm);
        std::vector<RegistrationResult> regs(k);
        parallel_for(k, params.workers,
                     [&](std::size_t i) { regs[i] = register_labels(soft[i], fixed, params.registration); });

        std::vector<Vec3> mean_field(n, Vec3{0, 0, 0});
        for (const auto &r : regs) {
            for (std::size_t v = 0; v < n; ++v) {
                for (int c = 0; c < 3; ++c) mean_field[v][c] += r.field[v][c];
            }
        }
        for (auto &m : mean_field) {
            for (double &c : m) c /= static_cast<double>(k);
        }
        std::vector<SoftLabelImage> warped(k);
        parallel_for(k, params.workers, [&](std::size_t i) {
            std::vector<Vec3> centred(regs[i].field.vectors().begin(), regs[i].field.vectors().end());
            for (std::size_t v = 0; v < n; ++v) {
                for (int c = 0; c < 3; ++c) centred[v][c] -= mean_field[v][c];
            }
            result.fields[i] = DisplacementField(g, std::move(centred));
            RegistrationResult summary = regs[i];
            summary.field = result.fields[i];
            result.qc[i] = quality_control(summary);
            warped[i] = warp(one_hot[i], invert(result.fields[i]));
        });
        atlas_soft = average(warped);
    }

    result.atlas.hard = hard_labels(atlas_soft);
    result.atlas.soft = std::move(atlas_soft);
    result.atlas.iterations = params.iterations;
    result.atlas.cohort_size = static_cast<int>(k);
    return result;
}

// ---------------------------------------------------------------- I/O

void save_field(const DisplacementField &field, const std::filesystem::path &path) {
    MultiChannelImage img;
    img.geometry = field.geometry();
    img.channels = 3;
    img.intent_code = kNiftiIntentVector;
    const std::size_t n = field.size();
    img.data.resize(3 * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (int c = 0; c < 3; ++c) img.data[static_cast<std::size_t>(c) * n + i] = field[i][c];
    }
    save_multichannel(img, path);
}

DisplacementField load_field(const std::filesystem::path &path) {
    const MultiChannelImage img = load_multichannel(path);
    if (img.channels != 3) {
        throw Error(ErrorCode::UnsupportedDatatype, "displacement field needs 3 channels: " + path.string());
    }
    const std::size_t n = img.geometry.voxel_count();
    std::vector<Vec3> v(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (int c = 0; c < 3; ++c) v[i][c] = img.data[static_cast<std::size_t>(c) * n + i];
    }
    return DisplacementField(img.geometry, std::move(v));
}

void save_soft_labels(const SoftLabelImage &soft, const std::filesystem::path &path) {
    MultiChannelImage img;
    img.geometry = soft.geometry();
    img.channels = kChannels;
    img.data.assign(soft.data().begin(), soft.data().end());
    save_multichannel(img, path);
}

SoftLabelImage load_soft_labels(const std::filesystem::path &path) {
    MultiChannelImage img = load_multichannel(path);
    if (img.channels != kChannels) {
        throw Error(ErrorCode::UnsupportedDatatype, "soft labels need 8 channels: " + path.string());
    }
    for (double &v : img.data) v = std::clamp(v, 0.0, 1.0);
    renormalize(img.data, img.geometry.voxel_count());
    return SoftLabelImage(img.geometry, std::move(img.data));
}

}  // namespace cardiofeat::atlas
