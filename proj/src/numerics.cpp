#include "fqv/numerics.hpp"

#include <cmath>
#include <cstddef>

#include "fqv/errors.hpp"

namespace fqv {

double pairwise_sum(std::span<const double> xs) {
  const std::size_t n = xs.size();
  if (n <= 32) {
    double acc = 0.0;
    for (double x : xs) acc += x;
    return acc;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

LinearFit linear_fit(std::span<const double> x, std::span<const double> y) {
  LinearFit fit;
  const std::size_t n = x.size();
  if (n != y.size() || n < 2) throw ParameterError("linear_fit: need >= 2 matched points");
  fit.points = n;
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx <= 0.0) throw ParameterError("linear_fit: abscissae are all equal");
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  if (syy <= 0.0) {
    fit.r_squared = 1.0;
  } else {
    double ss_res = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = y[i] - (fit.intercept + fit.slope * x[i]);
      ss_res += r * r;
    }
    fit.r_squared = 1.0 - ss_res / syy;
    if (fit.r_squared < 0.0) fit.r_squared = 0.0;
    if (fit.r_squared > 1.0) fit.r_squared = 1.0;
  }
  return fit;
}

std::vector<double> cholesky_lower(std::span<const double> matrix, int dim) {
  if (dim <= 0 || matrix.size() != static_cast<std::size_t>(dim) * dim)
    throw ParameterError("cholesky_lower: bad matrix size");
  std::vector<double> l(static_cast<std::size_t>(dim) * dim, 0.0);
  for (int i = 0; i < dim; ++i) {
    for (int j = 0; j <= i; ++j) {
      double s = matrix[static_cast<std::size_t>(i) * dim + j];
      for (int k = 0; k < j; ++k)
        s -= l[static_cast<std::size_t>(i) * dim + k] * l[static_cast<std::size_t>(j) * dim + k];
      if (i == j) {
        if (s <= 0.0) throw ParameterError("cholesky_lower: matrix is not positive definite");
        l[static_cast<std::size_t>(i) * dim + j] = std::sqrt(s);
      } else {
        l[static_cast<std::size_t>(i) * dim + j] = s / l[static_cast<std::size_t>(j) * dim + j];
      }
    }
  }
  return l;
}

std::vector<double> symmetric_eigenvalues(std::span<const double> matrix, int dim) {
  if (dim <= 0 || matrix.size() != static_cast<std::size_t>(dim) * dim)
    throw ParameterError("symmetric_eigenvalues: bad matrix size");
  std::vector<double> a(matrix.begin(), matrix.end());
  auto at = [&](int r, int c) -> double& { return a[static_cast<std::size_t>(r) * dim + c]; };
  for (int sweep = 0; sweep < 64; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < dim; ++p)
      for (int q = p + 1; q < dim; ++q) off += at(p, q) * at(p, q);
    if (off < 1e-30) break;
    for (int p = 0; p < dim; ++p) {
      for (int q = p + 1; q < dim; ++q) {
        const double apq = at(p, q);
        if (apq == 0.0) continue;
        const double theta = (at(q, q) - at(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < dim; ++k) {
          const double akp = at(k, p), akq = at(k, q);
          at(k, p) = c * akp - s * akq;
          at(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < dim; ++k) {
          const double apk = at(p, k), aqk = at(q, k);
          at(p, k) = c * apk - s * aqk;
          at(q, k) = s * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> eig(dim);
  for (int i = 0; i < dim; ++i) eig[i] = at(i, i);
  for (int i = 1; i < dim; ++i)
    for (int j = i; j > 0 && eig[j - 1] > eig[j]; --j) std::swap(eig[j - 1], eig[j]);
  return eig;
}

}  // namespace fqv
