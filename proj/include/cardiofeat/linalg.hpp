#pragma once

#include <array>
#include <cstddef>
#include <span>

namespace cardiofeat::linalg {

using Mat3 = std::array<std::array<double, 3>, 3>;

/// Eigenvalues of a symmetric 3x3 matrix by cyclic Jacobi rotations, sorted
/// descending. Negative round-off is not clamped.
std::array<double, 3> symmetric_eigenvalues(const Mat3 &a);

/// Singular values (descending) of a K x 3 row-major matrix by one-sided
/// Jacobi (Hestenes) orthogonalization of the columns. Works on a copy.
std::array<double, 3> singular_values_kx3(std::span<const double> rows, std::size_t k);

}  // namespace cardiofeat::linalg
