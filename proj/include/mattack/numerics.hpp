#pragma once

#include <cstddef>
#include <vector>

#include "mattack/matrix.hpp"

namespace mattack::numerics {

// Eigendecomposition of a symmetric matrix. Eigenvalues descending,
// eigenvector j stored in column j of `vectors`.
struct SymmetricEigen {
  std::vector<double> values;
  Matrix vectors;
};

// Euclidean projection of `offset` onto the l1 ball of the given radius.
// Sort-based soft-thresholding; exact.
std::vector<double> project_l1_ball(const std::vector<double>& offset, double radius);

// Maximizer of v^T g over the l1 ball of radius `step`. For k = 1 this is the
// exact solution step*sign(g_j)*e_j with j = argmax |g_j| (lowest index wins
// ties); for k > 1, step/k spread over the top-k coordinates. Zero gradient
// yields the zero vector.
std::vector<double> l1_steepest_step(const std::vector<double>& gradient, double step,
                                     std::size_t k = 1);

// Cyclic Jacobi with fixed sweep order; converges when the largest
// off-diagonal drops below 1e-12 * max|A|, capped at 100 sweeps.
SymmetricEigen sym_eigen(const Matrix& a);

std::vector<double> softmax(const std::vector<double>& logits);

double log_sum_exp(const std::vector<double>& values);

}  // namespace mattack::numerics
