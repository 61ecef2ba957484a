#include "mattack/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mattack/errors.hpp"

namespace mattack::numerics {

namespace {

void check_finite(const std::vector<double>& v, const char* where) {
  for (double x : v) {
    if (!std::isfinite(x)) throw NumericError(std::string("non-finite input in ") + where);
  }
}

}  // namespace

std::vector<double> project_l1_ball(const std::vector<double>& offset, double radius) {
  check_finite(offset, "project_l1_ball");
  if (radius <= 0.0) throw NumericError("project_l1_ball: radius must be > 0");

  double l1 = 0.0;
  for (double x : offset) l1 += std::fabs(x);
  if (l1 <= radius) return offset;

  // Duchi et al. soft-threshold: find theta from the sorted magnitudes.
  std::vector<double> mag(offset.size());
  for (std::size_t i = 0; i < offset.size(); ++i) mag[i] = std::fabs(offset[i]);
  std::sort(mag.begin(), mag.end(), std::greater<double>());

  double cumsum = 0.0;
  double theta = 0.0;
  for (std::size_t j = 0; j < mag.size(); ++j) {
    cumsum += mag[j];
    double t = (cumsum - radius) / static_cast<double>(j + 1);
    if (j + 1 == mag.size() || mag[j + 1] <= t) {
      theta = t;
      break;
    }
  }

  std::vector<double> out(offset.size());
  for (std::size_t i = 0; i < offset.size(); ++i) {
    double shrunk = std::fabs(offset[i]) - theta;
    out[i] = shrunk > 0.0 ? std::copysign(shrunk, offset[i]) : 0.0;
  }
  return out;
}

std::vector<double> l1_steepest_step(const std::vector<double>& gradient, double step,
                                     std::size_t k) {
  check_finite(gradient, "l1_steepest_step");
  std::vector<double> out(gradient.size(), 0.0);
  if (gradient.empty() || k == 0) return out;

  bool all_zero = std::all_of(gradient.begin(), gradient.end(),
                              [](double g) { return g == 0.0; });
  if (all_zero) return out;

  if (k == 1) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < gradient.size(); ++i) {
      if (std::fabs(gradient[i]) > std::fabs(gradient[best])) best = i;
    }
    out[best] = std::copysign(step, gradient[best]);
    return out;
  }

  std::vector<std::size_t> idx(gradient.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return std::fabs(gradient[a]) > std::fabs(gradient[b]);
  });
  std::size_t take = std::min(k, gradient.size());
  for (std::size_t j = 0; j < take; ++j) {
    std::size_t i = idx[j];
    if (gradient[i] != 0.0) out[i] = std::copysign(step / static_cast<double>(take), gradient[i]);
  }
  return out;
}

SymmetricEigen sym_eigen(const Matrix& a_in) {
  const std::size_t n = a_in.rows();
  if (a_in.cols() != n) throw NumericError("sym_eigen: matrix not square");

  // Symmetrize up front; callers may carry 1e-10-level asymmetry.
  Matrix a(n, n);
  double max_abs = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      a(i, j) = 0.5 * (a_in(i, j) + a_in(j, i));
      max_abs = std::max(max_abs, std::fabs(a(i, j)));
    }

  Matrix v(n, n);
  for (std::size_t i = 0; i < n; ++i) v(i, i) = 1.0;

  const double tol = 1e-12 * std::max(max_abs, 1e-300);
  const int max_sweeps = 100;
  bool converged = (n <= 1);
  double residual = 0.0;

  for (int sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
    double off_max = 0.0;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double apq = a(p, q);
        if (std::fabs(apq) <= tol) continue;
        double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        double t = std::copysign(1.0, theta) /
                   (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0);
        double s = t * c;

        double app = a(p, p), aqq = a(q, q);
        a(p, p) = app - t * apq;
        a(q, q) = aqq + t * apq;
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          if (i != p && i != q) {
            double aip = a(i, p), aiq = a(i, q);
            a(i, p) = c * aip - s * aiq;
            a(p, i) = a(i, p);
            a(i, q) = s * aip + c * aiq;
            a(q, i) = a(i, q);
          }
          double vip = v(i, p), viq = v(i, q);
          v(i, p) = c * vip - s * viq;
          v(i, q) = s * vip + c * viq;
        }
      }
    }
    for (std::size_t p = 0; p + 1 < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q)
        off_max = std::max(off_max, std::fabs(a(p, q)));
    residual = off_max;
    converged = off_max <= tol;
  }
  if (!converged) {
    throw NumericError("sym_eigen: no convergence after 100 sweeps, residual " +
                       std::to_string(residual));
  }

  // Sort eigenvalues descending, carrying columns along.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });

  SymmetricEigen out;
  out.values.resize(n);
  out.vectors = Matrix(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    out.values[j] = a(order[j], order[j]);
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, j) = v(i, order[j]);
  }
  return out;
}

std::vector<double> softmax(const std::vector<double>& logits) {
  double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - m);
    z += p[i];
  }
  for (double& x : p) x /= z;
  return p;
}

double log_sum_exp(const std::vector<double>& values) {
  double m = *std::max_element(values.begin(), values.end());
  if (!std::isfinite(m)) return m;
  double z = 0.0;
  for (double x : values) z += std::exp(x - m);
  return m + std::log(z);
}

}  // namespace mattack::numerics
