#include "cardiofeat/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace cardiofeat::linalg {

std::array<double, 3> symmetric_eigenvalues(const Mat3 &input) {
    Mat3 a = input;
    for (int sweep = 0; sweep < 64; ++sweep) {
        const double off = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
        const double diag = a[0][0] * a[0][0] + a[1][1] * a[1][1] + a[2][2] * a[2][2];
        if (off <= 1e-30 * diag || off == 0.0) {
            break;
        }
        for (int p = 0; p < 2; ++p) {
            for (int q = p + 1; q < 3; ++q) {
                if (a[p][q] == 0.0) {
                    continue;
                }
                const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                // A <- J^T A J with J the (p,q) rotation.
                for (int k = 0; k < 3; ++k) {
                    const double akp = a[k][p];
                    const double akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for (int k = 0; k < 3; ++k) {
                    const double apk = a[p][k];
                    const double aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    std::array<double, 3> ev = {a[0][0], a[1][1], a[2][2]};
    std::sort(ev.begin(), ev.end(), std::greater<>());
    return ev;
}

std::array<double, 3> singular_values_kx3(std::span<const double> rows, std::size_t k) {
    // Column-major copy: col[j][i] = A(i, j).
    std::array<std::vector<double>, 3> col;
    for (int j = 0; j < 3; ++j) {
        col[j].resize(k);
        for (std::size_t i = 0; i < k; ++i) {
            col[j][i] = rows[3 * i + static_cast<std::size_t>(j)];
        }
    }
    auto dot = [k](const std::vector<double> &u, const std::vector<double> &v) {
        double s = 0.0;
        for (std::size_t i = 0; i < k; ++i) s += u[i] * v[i];
        return s;
    };
    constexpr double eps = 1e-15;
    for (int sweep = 0; sweep < 60; ++sweep) {
        bool rotated = false;
        for (int p = 0; p < 2; ++p) {
            for (int q = p + 1; q < 3; ++q) {
                const double alpha = dot(col[p], col[p]);
                const double beta = dot(col[q], col[q]);
                const double gamma = dot(col[p], col[q]);
                if (gamma == 0.0 || std::abs(gamma) <= eps * std::sqrt(alpha * beta)) {
                    continue;
                }
                rotated = true;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = (zeta >= 0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (std::size_t i = 0; i < k; ++i) {
                    const double up = col[p][i];
                    const double uq = col[q][i];
                    col[p][i] = c * up - s * uq;
                    col[q][i] = s * up + c * uq;
                }
            }
        }
        if (!rotated) {
            break;
        }
    }
    std::array<double, 3> sv{};
    for (int j = 0; j < 3; ++j) {
        sv[j] = std::sqrt(dot(col[j], col[j]));
    }
    std::sort(sv.begin(), sv.end(), std::greater<>());
    return sv;
}

}  // namespace cardiofeat::linalg
