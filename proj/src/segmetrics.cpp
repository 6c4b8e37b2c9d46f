#include "cardiofeat/segmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "cardiofeat/csv.hpp"

namespace cardiofeat::seg {
namespace {

// 1D lower envelope of parabolas w^2 (p - q)^2 + f(q); kFar entries are skipped.
void edt_1d(const std::vector<double> &f, std::vector<double> &d, double w2, std::vector<int> &v, std::vector<double> &z) {
    const int n = static_cast<int>(f.size());
    int k = -1;
    v.resize(static_cast<std::size_t>(n));
    z.resize(static_cast<std::size_t>(n) + 1);
    for (int q = 0; q < n; ++q) {
        const double fq = f[static_cast<std::size_t>(q)];
        if (fq == kFar) continue;
        while (k >= 0) {
            const int vk = v[static_cast<std::size_t>(k)];
            const double fv = f[static_cast<std::size_t>(vk)];
            const double s = ((fq + w2 * q * q) - (fv + w2 * vk * vk)) / (2.0 * w2 * (q - vk));
            if (s <= z[static_cast<std::size_t>(k)]) {
                --k;
            } else {
                break;
            }
        }
        ++k;
        v[static_cast<std::size_t>(k)] = q;
        if (k == 0) {
            z[0] = -kFar;
        } else {
            const int vp = v[static_cast<std::size_t>(k - 1)];
            const double fv = f[static_cast<std::size_t>(vp)];
            z[static_cast<std::size_t>(k)] = ((fq + w2 * q * q) - (fv + w2 * vp * vp)) / (2.0 * w2 * (q - vp));
        }
        z[static_cast<std::size_t>(k) + 1] = kFar;
    }
    if (k < 0) {
        std::fill(d.begin(), d.end(), kFar);
        return;
    }
    int j = 0;
    for (int p = 0; p < n; ++p) {
        while (z[static_cast<std::size_t>(j) + 1] < p) ++j;
        const int vj = v[static_cast<std::size_t>(j)];
        d[static_cast<std::size_t>(p)] = w2 * (p - vj) * (p - vj) + f[static_cast<std::size_t>(vj)];
    }
}

std::vector<std::uint8_t> surface_seeds(const StructureMask &m) {
    std::vector<std::uint8_t> s(m.size(), 0);
    for (const auto &p : surface_voxels(m)) s[m.geometry().index(p)] = 1;
    return s;
}

}  // namespace

double dice(const StructureMask &a, const StructureMask &b) {
    require_same_geometry(a.geometry(), b.geometry(), "dice");
    if (a.empty() && b.empty()) return 1.0;
    std::size_t inter = 0;
    for (std::size_t i = 0; i < a.size(); ++i) inter += (a[i] && b[i]);
    return 2.0 * static_cast<double>(inter) / static_cast<double>(a.count() + b.count());
}

std::vector<Index3> surface_voxels(const StructureMask &mask) {
    static constexpr int nb[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
    std::vector<Index3> out;
    for (const auto &p : mask.voxels()) {
        for (const auto &d : nb) {
            if (!mask.contains(p[0] + d[0], p[1] + d[1], p[2] + d[2])) {
                out.push_back(p);
                break;
            }
        }
    }
    return out;
}

std::vector<double> squared_distance_transform(std::span<const std::uint8_t> seeds, const Geometry &g) {
    std::vector<double> dist(seeds.size());
    for (std::size_t i = 0; i < seeds.size(); ++i) dist[i] = seeds[i] ? 0.0 : kFar;
    const int stride[3] = {1, g.dims[0], g.dims[0] * g.dims[1]};
    std::vector<double> f, d;
    std::vector<int> v;
    std::vector<double> z;
    for (int a = 0; a < 3; ++a) {
        const int len = g.dims[a];
        const int b = (a + 1) % 3;
        const int c = (a + 2) % 3;
        const double w2 = g.spacing[a] * g.spacing[a];
        f.resize(static_cast<std::size_t>(len));
        d.resize(static_cast<std::size_t>(len));
        for (int jc = 0; jc < g.dims[c]; ++jc) {
            for (int jb = 0; jb < g.dims[b]; ++jb) {
                const std::size_t base = static_cast<std::size_t>(jb) * static_cast<std::size_t>(stride[b]) +
                                         static_cast<std::size_t>(jc) * static_cast<std::size_t>(stride[c]);
                for (int i = 0; i < len; ++i) f[static_cast<std::size_t>(i)] = dist[base + static_cast<std::size_t>(i) * static_cast<std::size_t>(stride[a])];
                edt_1d(f, d, w2, v, z);
                for (int i = 0; i < len; ++i) dist[base + static_cast<std::size_t>(i) * static_cast<std::size_t>(stride[a])] = d[static_cast<std::size_t>(i)];
            }
        }
    }
    return dist;
}

double percentile(std::vector<double> values, double q) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + (values[hi] - values[lo]) * frac;
}

SurfaceDistances surface_distances(const StructureMask &a, const StructureMask &b) {
    require_same_geometry(a.geometry(), b.geometry(), "surface_distances");
    if (a.empty() || b.empty()) {
        throw Error(ErrorCode::EmptySurface, "surface distances need two non-empty masks");
    }
    const Geometry &g = a.geometry();
    const auto surf_a = surface_voxels(a);
    const auto surf_b = surface_voxels(b);
    const auto dt_a = squared_distance_transform(surface_seeds(a), g);
    const auto dt_b = squared_distance_transform(surface_seeds(b), g);

    std::vector<double> pooled;
    pooled.reserve(surf_a.size() + surf_b.size());
    double max_ab = 0.0, max_ba = 0.0, sum = 0.0;
    for (const auto &p : surf_a) {
        const double d = std::sqrt(dt_b[g.index(p)]);
        pooled.push_back(d);
        max_ab = std::max(max_ab, d);
        sum += d;
    }
    for (const auto &p : surf_b) {
        const double d = std::sqrt(dt_a[g.index(p)]);
        pooled.push_back(d);
        max_ba = std::max(max_ba, d);
        sum += d;
    }
    SurfaceDistances out;
    out.hd = std::max(max_ab, max_ba);
    out.asd = sum / static_cast<double>(pooled.size());
    out.hd95 = std::min(percentile(std::move(pooled), 0.95), out.hd);
    return out;
}

std::string StructureMetrics::flags() const {
    if (both_empty) return "both_empty";
    if (pred_empty) return "pred_empty";
    if (gt_empty) return "gt_empty";
    return "";
}

SegMetricsReport evaluate_segmentation(const LabelMap &prediction, const LabelMap &ground_truth) {
    require_same_geometry(prediction.geometry(), ground_truth.geometry(), "evaluate_segmentation");
    SegMetricsReport r;
    double sum_hd = 0.0, sum_hd95 = 0.0, sum_asd = 0.0, sum_dsc = 0.0;
    for (int code = 1; code <= kStructureCount; ++code) {
        StructureMetrics &m = r.structures[static_cast<std::size_t>(code - 1)];
        m.code = code;
        const StructureMask p = extract_structure_mask(prediction, code);
        const StructureMask t = extract_structure_mask(ground_truth, code);
        m.dsc = dice(p, t);
        m.both_empty = p.empty() && t.empty();
        m.pred_empty = p.empty() && !t.empty();
        m.gt_empty = t.empty() && !p.empty();
        if (m.pred_empty || m.gt_empty) {
            m.distances_defined = false;
            m.hd = m.hd95 = m.asd = 0.0;
        } else if (!m.both_empty) {
            const SurfaceDistances d = surface_distances(p, t);
            m.hd = d.hd;
            m.hd95 = d.hd95;
            m.asd = d.asd;
        }
        sum_dsc += m.dsc;
        if (m.distances_defined) {
            sum_hd += m.hd;
            sum_hd95 += m.hd95;
            sum_asd += m.asd;
            ++r.distance_structures;
        }
    }
    r.global_dsc = sum_dsc / kStructureCount;
    if (r.distance_structures > 0) {
        r.global_hd = sum_hd / r.distance_structures;
        r.global_hd95 = sum_hd95 / r.distance_structures;
        r.global_asd = sum_asd / r.distance_structures;
    }
    return r;
}

void write_report_csv(const SegMetricsReport &report, std::ostream &out) {
    out << "structure,dsc,hd,hd95,asd,flags\n";
    for (const auto &m : report.structures) {
        out << structure_abbrev(m.code) << ',' << csv::format_double(m.dsc) << ',';
        if (m.distances_defined) {
            out << csv::format_double(m.hd) << ',' << csv::format_double(m.hd95) << ',' << csv::format_double(m.asd);
        } else {
            out << ",,";
        }
        out << ',' << m.flags() << '\n';
    }
    out << "global," << csv::format_double(report.global_dsc) << ',' << csv::format_double(report.global_hd) << ','
        << csv::format_double(report.global_hd95) << ',' << csv::format_double(report.global_asd) << ",\n";
}

}  // namespace cardiofeat::seg
