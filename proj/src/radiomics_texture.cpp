#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "cardiofeat/radiomics.hpp"

namespace cardiofeat::radiomics {
namespace {

std::string direction_tag(const Index3 &d) {
    return "distance=1 direction=(" + std::to_string(d[0]) + "," + std::to_string(d[1]) + "," + std::to_string(d[2]) +
           ")";
}

inline Index3 offset(const Index3 &p, const Index3 &d, int k = 1) {
    return {p[0] + k * d[0], p[1] + k * d[1], p[2] + k * d[2]};
}

// All 26 neighbour offsets.
const std::vector<Index3> &neighbourhood26() {
    static const std::vector<Index3> n = [] {
        std::vector<Index3> out;
        for (int dz = -1; dz <= 1; ++dz)
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx)
                    if (dx || dy || dz) out.push_back({dx, dy, dz});
        return out;
    }();
    return n;
}

double plogp_entropy(const TextureMatrix &m, double total) {
    double h = 0.0;
    for (double v : m.values) {
        if (v > 0.0) {
            const double p = v / total;
            h -= p * std::log2(p);
        }
    }
    return h;
}

// Row sums and column sums of a count matrix.
std::vector<double> row_sums(const TextureMatrix &m) {
    std::vector<double> out(static_cast<std::size_t>(m.rows), 0.0);
    for (int r = 0; r < m.rows; ++r)
        for (int c = 0; c < m.cols; ++c) out[static_cast<std::size_t>(r)] += m.at(r, c);
    return out;
}

std::vector<double> col_sums(const TextureMatrix &m) {
    std::vector<double> out(static_cast<std::size_t>(m.cols), 0.0);
    for (int r = 0; r < m.rows; ++r)
        for (int c = 0; c < m.cols; ++c) out[static_cast<std::size_t>(c)] += m.at(r, c);
    return out;
}

double sum_of_squares(const std::vector<double> &v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return s;
}

// Averages several FeatureVectors with identical names, in the given order.
FeatureVector average(const std::vector<FeatureVector> &parts) {
    FeatureVector out;
    const std::size_t k = parts.front().size();
    for (std::size_t i = 0; i < k; ++i) {
        double s = 0.0;
        for (const auto &p : parts) s += p[i].value;
        out.add(parts.front()[i].name, s / static_cast<double>(parts.size()));
    }
    return out;
}

// Disjoint-set forest for zone labelling.
struct DisjointSet {
    std::vector<std::size_t> parent;
    explicit DisjointSet(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), std::size_t{0}); }
    std::size_t find(std::size_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }
    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
};

}  // namespace

// ---------------------------------------------------------------- GLCM

TextureMatrix glcm_matrix(const DiscretizedRegion &region, const Index3 &direction) {
    const int ng = region.gray_levels;
    TextureMatrix m(Family::Glcm, ng, ng, direction_tag(direction) + " symmetric");
    for (std::size_t i = 0; i < region.voxel_count(); ++i) {
        const int a = region.levels[i];
        const int b = region.level_at(offset(region.voxels[i], direction));
        if (b == 0) continue;
        m.at(a - 1, b - 1) += 1.0;
        m.at(b - 1, a - 1) += 1.0;
    }
    return m;
}

FeatureVector glcm_features_from_matrix(const TextureMatrix &counts) {
    const TextureMatrix p = counts.normalized();
    const int ng = p.rows;
    double mu = 0.0;
    for (int i = 0; i < ng; ++i)
        for (int j = 0; j < ng; ++j) mu += (i + 1) * p.at(i, j);
    double var = 0.0;
    for (int i = 0; i < ng; ++i)
        for (int j = 0; j < ng; ++j) var += (i + 1 - mu) * (i + 1 - mu) * p.at(i, j);

    double contrast = 0.0, cov = 0.0, idm = 0.0, energy = 0.0, entropy = 0.0, shade = 0.0, prominence = 0.0;
    for (int i = 0; i < ng; ++i) {
        for (int j = 0; j < ng; ++j) {
            const double v = p.at(i, j);
            if (v == 0.0) continue;
            const double gi = i + 1;
            const double gj = j + 1;
            const double diff = gi - gj;
            contrast += diff * diff * v;
            cov += (gi - mu) * (gj - mu) * v;
            idm += v / (1.0 + diff * diff);
            energy += v * v;
            entropy -= v * std::log2(v);
            const double c = gi + gj - 2.0 * mu;
            shade += c * c * c * v;
            prominence += c * c * c * c * v;
        }
    }
    FeatureVector f;
    f.add("Contrast", contrast);
    f.add("Correlation", var > 0.0 ? cov / var : 1.0);
    f.add("Homogeneity", idm);
    f.add("Energy", energy);
    f.add("Entropy", entropy);
    f.add("ClusterShade", shade);
    f.add("ClusterProminence", prominence);
    return f;
}

FeatureVector glcm_features(const DiscretizedRegion &region) {
    std::vector<FeatureVector> parts;
    for (const auto &d : unique_directions()) {
        const TextureMatrix m = glcm_matrix(region, d);
        if (m.sum() > 0.0) parts.push_back(glcm_features_from_matrix(m));
    }
    if (parts.empty()) {
        // No in-mask pair in any direction (isolated voxels): treat as a
        // constant region, all mass on the diagonal.
        TextureMatrix m(Family::Glcm, region.gray_levels, region.gray_levels);
        m.at(region.levels.front() - 1, region.levels.front() - 1) = 1.0;
        parts.push_back(glcm_features_from_matrix(m));
    }
    return average(parts);
}

// ---------------------------------------------------------------- GLRLM

TextureMatrix glrlm_matrix(const DiscretizedRegion &region, const Index3 &direction) {
    std::vector<std::pair<int, int>> runs;  // (level, length)
    int max_len = 1;
    for (std::size_t i = 0; i < region.voxel_count(); ++i) {
        const int g = region.levels[i];
        const Index3 &p = region.voxels[i];
        if (region.level_at(offset(p, direction, -1)) == g) continue;  // not a run start
        int len = 1;
        while (region.level_at(offset(p, direction, len)) == g) ++len;
        runs.emplace_back(g, len);
        max_len = std::max(max_len, len);
    }
    TextureMatrix m(Family::Glrlm, region.gray_levels, max_len, direction_tag(direction));
    for (const auto &[g, len] : runs) m.at(g - 1, len - 1) += 1.0;
    return m;
}

FeatureVector glrlm_features_from_matrix(const TextureMatrix &runs, std::size_t voxel_count) {
    const double nr = runs.sum();
    double sre = 0.0, lre = 0.0;
    for (int i = 0; i < runs.rows; ++i) {
        for (int j = 0; j < runs.cols; ++j) {
            const double v = runs.at(i, j);
            if (v == 0.0) continue;
            const double len = j + 1;
            sre += v / (len * len);
            lre += v * len * len;
        }
    }
    FeatureVector f;
    f.add("ShortRunEmphasis", sre / nr);
    f.add("LongRunEmphasis", lre / nr);
    f.add("GrayLevelNonUniformity", sum_of_squares(row_sums(runs)) / nr);
    f.add("RunLengthNonUniformity", sum_of_squares(col_sums(runs)) / nr);
    f.add("RunPercentage", nr / static_cast<double>(voxel_count));
    return f;
}

FeatureVector glrlm_features(const DiscretizedRegion &region) {
    std::vector<FeatureVector> parts;
    for (const auto &d : unique_directions()) {
        parts.push_back(glrlm_features_from_matrix(glrlm_matrix(region, d), region.voxel_count()));
    }
    return average(parts);
}

// ---------------------------------------------------------------- GLSZM

TextureMatrix glszm_matrix(const DiscretizedRegion &region) {
    const std::size_t n = region.voxel_count();
    // Voxel indices are in lexicographic order, so neighbours can be located by
    // binary search over the coordinate list.
    auto index_of = [&](const Index3 &q) -> std::ptrdiff_t {
        auto key = [](const Index3 &v) { return std::array<int, 3>{v[2], v[1], v[0]}; };
        const auto target = key(q);
        auto it = std::lower_bound(region.voxels.begin(), region.voxels.end(), q,
                                   [&](const Index3 &a, const Index3 &) { return key(a) < target; });
        if (it == region.voxels.end() || *it != q) return -1;
        return it - region.voxels.begin();
    };
    DisjointSet ds(n);
    for (std::size_t i = 0; i < n; ++i) {
        const int g = region.levels[i];
        for (const auto &d : unique_directions()) {
            const Index3 q = offset(region.voxels[i], d);
            if (region.level_at(q) != g) continue;
            const auto j = index_of(q);
            if (j >= 0) ds.unite(i, static_cast<std::size_t>(j));
        }
    }
    std::vector<std::size_t> size(n, 0);
    for (std::size_t i = 0; i < n; ++i) ++size[ds.find(i)];
    int max_size = 1;
    for (std::size_t i = 0; i < n; ++i) {
        if (ds.find(i) == i) max_size = std::max(max_size, static_cast<int>(size[i]));
    }
    TextureMatrix m(Family::Glszm, region.gray_levels, max_size, "connectivity=26");
    for (std::size_t i = 0; i < n; ++i) {
        if (ds.find(i) == i) m.at(region.levels[i] - 1, static_cast<int>(size[i]) - 1) += 1.0;
    }
    return m;
}

FeatureVector glszm_features(const DiscretizedRegion &region) {
    const TextureMatrix m = glszm_matrix(region);
    const double nz = m.sum();
    double sae = 0.0, lae = 0.0;
    for (int i = 0; i < m.rows; ++i) {
        for (int j = 0; j < m.cols; ++j) {
            const double v = m.at(i, j);
            if (v == 0.0) continue;
            const double sz = j + 1;
            sae += v / (sz * sz);
            lae += v * sz * sz;
        }
    }
    FeatureVector f;
    f.add("SmallAreaEmphasis", sae / nz);
    f.add("LargeAreaEmphasis", lae / nz);
    f.add("ZoneEntropy", plogp_entropy(m, nz));
    f.add("GrayLevelNonUniformity", sum_of_squares(row_sums(m)) / nz);
    f.add("SizeZoneNonUniformity", sum_of_squares(col_sums(m)) / nz);
    return f;
}

// ---------------------------------------------------------------- NGTDM

TextureMatrix ngtdm_matrix(const DiscretizedRegion &region) {
    TextureMatrix m(Family::Ngtdm, region.gray_levels, 2, "neighbourhood=26 columns=[n_i,s_i]");
    const auto &nbh = neighbourhood26();
    for (std::size_t i = 0; i < region.voxel_count(); ++i) {
        const Index3 &p = region.voxels[i];
        double sum = 0.0;
        int count = 0;
        for (const auto &d : nbh) {
            const int l = region.level_at(offset(p, d));
            if (l > 0) {
                sum += l;
                ++count;
            }
        }
        if (count == 0) continue;
        const int g = region.levels[i];
        m.at(g - 1, 0) += 1.0;
        m.at(g - 1, 1) += std::abs(g - sum / count);
    }
    return m;
}

FeatureVector ngtdm_features(const DiscretizedRegion &region) {
    const TextureMatrix m = ngtdm_matrix(region);
    const int ng = m.rows;
    double nvp = 0.0;
    for (int i = 0; i < ng; ++i) nvp += m.at(i, 0);

    std::vector<double> p(static_cast<std::size_t>(ng), 0.0);
    std::vector<double> s(static_cast<std::size_t>(ng), 0.0);
    std::vector<int> present;
    for (int i = 0; i < ng; ++i) {
        s[static_cast<std::size_t>(i)] = m.at(i, 1);
        if (nvp > 0.0) p[static_cast<std::size_t>(i)] = m.at(i, 0) / nvp;
        if (p[static_cast<std::size_t>(i)] > 0.0) present.push_back(i);
    }
    const double ngp = static_cast<double>(present.size());

    double ps_sum = 0.0;
    double s_sum = 0.0;
    for (int i : present) {
        ps_sum += p[static_cast<std::size_t>(i)] * s[static_cast<std::size_t>(i)];
        s_sum += s[static_cast<std::size_t>(i)];
    }

    double pair_contrast = 0.0, busy_den = 0.0, complexity = 0.0, strength_num = 0.0;
    for (int i : present) {
        for (int j : present) {
            const double pi = p[static_cast<std::size_t>(i)];
            const double pj = p[static_cast<std::size_t>(j)];
            const double gi = i + 1;
            const double gj = j + 1;
            pair_contrast += pi * pj * (gi - gj) * (gi - gj);
            busy_den += std::abs(gi * pi - gj * pj);
            complexity += std::abs(gi - gj) * (pi * s[static_cast<std::size_t>(i)] + pj * s[static_cast<std::size_t>(j)]) /
                          (pi + pj);
            strength_num += (pi + pj) * (gi - gj) * (gi - gj);
        }
    }

    FeatureVector f;
    f.add("Coarseness", ps_sum > 0.0 ? std::min(1.0 / ps_sum, kCoarsenessCap) : kCoarsenessCap);
    f.add("Contrast", ngp > 1.0 && nvp > 0.0 ? pair_contrast / (ngp * (ngp - 1.0)) * s_sum / nvp : 0.0);
    f.add("Busyness", busy_den > 0.0 ? ps_sum / busy_den : 0.0);
    f.add("Complexity", nvp > 0.0 ? complexity / nvp : 0.0);
    f.add("Strength", s_sum > 0.0 ? strength_num / s_sum : 0.0);
    return f;
}

// ---------------------------------------------------------------- GLDM

TextureMatrix gldm_matrix(const DiscretizedRegion &region, int alpha) {
    TextureMatrix m(Family::Gldm, region.gray_levels, 27, "neighbourhood=26 alpha=" + std::to_string(alpha));
    const auto &nbh = neighbourhood26();
    for (std::size_t i = 0; i < region.voxel_count(); ++i) {
        const Index3 &p = region.voxels[i];
        const int g = region.levels[i];
        int dep = 0;
        for (const auto &d : nbh) {
            const int l = region.level_at(offset(p, d));
            if (l > 0 && std::abs(l - g) <= alpha) ++dep;
        }
        m.at(g - 1, dep) += 1.0;
    }
    return m;
}

FeatureVector gldm_features(const DiscretizedRegion &region, int alpha) {
    const TextureMatrix m = gldm_matrix(region, alpha);
    const double nz = m.sum();
    double sde = 0.0, lde = 0.0;
    for (int i = 0; i < m.rows; ++i) {
        for (int j = 0; j < m.cols; ++j) {
            const double v = m.at(i, j);
            if (v == 0.0) continue;
            const double dep = j + 1;
            sde += v / (dep * dep);
            lde += v * dep * dep;
        }
    }
    FeatureVector f;
    f.add("SmallDependenceEmphasis", sde / nz);
    f.add("LargeDependenceEmphasis", lde / nz);
    f.add("DependenceEntropy", plogp_entropy(m, nz));
    f.add("GrayLevelNonUniformity", sum_of_squares(row_sums(m)) / nz);
    return f;
}

}  // namespace cardiofeat::radiomics
