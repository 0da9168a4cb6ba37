#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace fqv {

// Pairwise (cascade) summation with a fixed reduction order.  Used for the
// long reductions so results are deterministic and cancellation-friendly.
double pairwise_sum(std::span<const double> xs);

// Ordinary least squares y = a + b x.  r_squared is 1 when the points are
// collinear (including the degenerate zero-variance case).
struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 1.0;
  std::size_t points = 0;
};
LinearFit linear_fit(std::span<const double> x, std::span<const double> y);

// Lower-triangular Cholesky factor of a symmetric positive-definite d x d
// matrix in row-major order.  Throws ParameterError if not positive definite.
std::vector<double> cholesky_lower(std::span<const double> matrix, int dim);

// Eigenvalues of a symmetric d x d matrix (ascending), Jacobi sweeps.
// Intended for the small matrices that appear here (d <= 8 or so).
std::vector<double> symmetric_eigenvalues(std::span<const double> matrix, int dim);

}  // namespace fqv
