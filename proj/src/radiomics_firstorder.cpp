#include <algorithm>
#include <cmath>

#include "cardiofeat/radiomics.hpp"

namespace cardiofeat::radiomics {

FeatureVector first_order_features(const VolumeGrid &volume, const StructureMask &mask,
                                   const DiscretizedRegion &region) {
    require_same_geometry(volume.geometry(), mask.geometry(), "first_order_features");
    if (mask.empty() || region.voxel_count() == 0) {
        throw Error(ErrorCode::EmptyMask, "first-order features need a non-empty mask");
    }
    const std::vector<double> &x = region.intensities;
    const double n = static_cast<double>(x.size());

    double sum = 0.0;
    double sum_sq = 0.0;
    for (double v : x) {
        sum += v;
        sum_sq += v * v;
    }
    const double mean = sum / n;
    double m2 = 0.0;
    double m3 = 0.0;
    double m4 = 0.0;
    for (double v : x) {
        const double d = v - mean;
        const double d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    const double skewness = m2 > 0.0 ? m3 / std::pow(m2, 1.5) : 0.0;
    const double kurtosis = m2 > 0.0 ? m4 / (m2 * m2) - 3.0 : 0.0;

    std::vector<double> sorted = x;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t mid = sorted.size() / 2;
    const double median = sorted.size() % 2 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);

    std::vector<double> hist(static_cast<std::size_t>(region.gray_levels) + 1, 0.0);
    for (int level : region.levels) hist[static_cast<std::size_t>(level)] += 1.0;
    double entropy = 0.0;
    for (double c : hist) {
        if (c > 0.0) {
            const double p = c / n;
            entropy -= p * std::log2(p);
        }
    }

    FeatureVector f;
    f.add("Mean", mean);
    f.add("Variance", m2);
    f.add("Skewness", skewness);
    f.add("Kurtosis", kurtosis);
    f.add("Entropy", entropy);
    f.add("Minimum", sorted.front());
    f.add("Maximum", sorted.back());
    f.add("Median", median);
    f.add("Energy", sum_sq);
    f.add("RootMeanSquared", std::sqrt(sum_sq / n));
    return f;
}

}  // namespace cardiofeat::radiomics
