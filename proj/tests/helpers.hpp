#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "cardiofeat/volume.hpp"

namespace testing_util {

using namespace cardiofeat;

inline Geometry cube_geometry(int n, double spacing = 1.0) {
    Geometry g;
    g.dims = {n, n, n};
    g.spacing = {spacing, spacing, spacing};
    return g;
}

// Digital ball: voxel centres within `radius` (voxels) of `center` (lattice coords).
inline LabelMap ball_labels(const Geometry &g, const Vec3 &center, double radius, std::uint8_t code = 1) {
    std::vector<std::uint8_t> data(g.voxel_count(), 0);
    for (int z = 0; z < g.dims[2]; ++z)
        for (int y = 0; y < g.dims[1]; ++y)
            for (int x = 0; x < g.dims[0]; ++x) {
                const double dx = x - center[0], dy = y - center[1], dz = z - center[2];
                if (dx * dx + dy * dy + dz * dz <= radius * radius) data[g.index(x, y, z)] = code;
            }
    return LabelMap(g, std::move(data));
}

inline LabelMap box_labels(const Geometry &g, const Index3 &lo, const Index3 &hi, std::uint8_t code = 1) {
    std::vector<std::uint8_t> data(g.voxel_count(), 0);
    for (int z = lo[2]; z < hi[2]; ++z)
        for (int y = lo[1]; y < hi[1]; ++y)
            for (int x = lo[0]; x < hi[0]; ++x) data[g.index(x, y, z)] = code;
    return LabelMap(g, std::move(data));
}

inline Vec3 centroid(const LabelMap &labels, std::uint8_t code) {
    const Geometry &g = labels.geometry();
    Vec3 c{0, 0, 0};
    double n = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != code) continue;
        const Index3 p = g.coords(i);
        for (int a = 0; a < 3; ++a) c[a] += p[a];
        n += 1;
    }
    for (double &v : c) v /= n;
    return c;
}

class TempDir {
public:
    explicit TempDir(const std::string &tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("cardiofeat_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir &) = delete;
    TempDir &operator=(const TempDir &) = delete;
    const std::filesystem::path &path() const { return path_; }

private:
    std::filesystem::path path_;
};

class Stopwatch {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

}  // namespace testing_util
