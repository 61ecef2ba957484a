#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "mattack/errors.hpp"
#include "mattack/numerics.hpp"
#include "mattack/rng.hpp"

using namespace mattack;
using namespace mattack::numerics;

namespace {

double l1_norm(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += std::fabs(x);
  return s;
}

// Independent oracle: bisection on the soft-threshold theta until the l1 norm
// of the shrunk vector hits the radius.
std::vector<double> project_l1_oracle(const std::vector<double>& v, double radius) {
  if (l1_norm(v) <= radius) return v;
  auto shrink = [&](double theta) {
    std::vector<double> w(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      double s = std::fabs(v[i]) - theta;
      w[i] = s > 0 ? std::copysign(s, v[i]) : 0.0;
    }
    return w;
  };
  double lo = 0.0, hi = *std::max_element(v.begin(), v.end(), [](double a, double b) {
    return std::fabs(a) < std::fabs(b);
  });
  hi = std::fabs(hi);
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    if (l1_norm(shrink(mid)) > radius)
      lo = mid;
    else
      hi = mid;
  }
  return shrink(hi);
}

}  // namespace

TEST_CASE("project_l1_ball basics") {
  CHECK(project_l1_ball({0.3, 0.1}, 1.0) == std::vector<double>{0.3, 0.1});
  auto w = project_l1_ball({2.0, 0.0}, 1.0);
  CHECK(w[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(w[1] == doctest::Approx(0.0).epsilon(1e-12));
  w = project_l1_ball({1.0, 1.0}, 1.0);
  CHECK(w[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(w[1] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("project_l1_ball rejects bad input") {
  CHECK_THROWS_AS(project_l1_ball({std::nan("")}, 1.0), NumericError);
  CHECK_THROWS_AS(project_l1_ball({1.0}, 0.0), NumericError);
}

TEST_CASE("project_l1_ball matches theta-scan oracle on random inputs") {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> v(10);
    for (double& x : v) x = rng.normal() * 2.0;
    double radius = 0.1 + 2.0 * rng.uniform();
    auto got = project_l1_ball(v, radius);
    auto want = project_l1_oracle(v, radius);
    CHECK(l1_norm(got) <= radius + 1e-12);
    for (std::size_t i = 0; i < v.size(); ++i)
      CHECK(std::fabs(got[i] - want[i]) <= 1e-9);
  }
}

TEST_CASE("project_l1_ball is a fixed point on feasible input") {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> v(5);
    for (double& x : v) x = rng.normal();
    double radius = l1_norm(v) + 0.1;
    CHECK(project_l1_ball(v, radius) == v);
  }
}

TEST_CASE("l1_steepest_step closed forms") {
  auto v = l1_steepest_step({0.1, -0.5, 0.2}, 0.3, 1);
  CHECK(v == std::vector<double>{0.0, -0.3, 0.0});
  CHECK(l1_steepest_step({0, 0, 0}, 0.3, 1) == std::vector<double>{0, 0, 0});
}

TEST_CASE("l1_steepest_step tie-break picks lowest index") {
  auto v = l1_steepest_step({0.5, -0.5}, 1.0, 1);
  CHECK(v == std::vector<double>{1.0, 0.0});
}

TEST_CASE("l1_steepest_step k=1 dominates all signed coordinate directions") {
  Rng rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    std::size_t dim = 2 + rng.below(31);
    std::vector<double> g(dim);
    for (double& x : g) x = rng.normal();
    double alpha = 0.5;
    auto v = l1_steepest_step(g, alpha, 1);
    double got = 0;
    for (std::size_t i = 0; i < dim; ++i) got += v[i] * g[i];
    for (std::size_t i = 0; i < dim; ++i) {
      CHECK(got >= alpha * g[i] - 1e-15);
      CHECK(got >= -alpha * g[i] - 1e-15);
    }
  }
}

TEST_CASE("l1_steepest_step top-k spreading") {
  auto v = l1_steepest_step({3.0, -2.0, 1.0}, 0.6, 2);
  CHECK(v[0] == doctest::Approx(0.3));
  CHECK(v[1] == doctest::Approx(-0.3));
  CHECK(v[2] == 0.0);
}

TEST_CASE("sym_eigen identity and diagonal") {
  Matrix eye(3, 3);
  for (int i = 0; i < 3; ++i) eye(i, i) = 1.0;
  auto e = sym_eigen(eye);
  for (double v : e.values) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));

  Matrix d(2, 2);
  d(0, 0) = 3.0;
  d(1, 1) = 1.0;
  e = sym_eigen(d);
  CHECK(e.values[0] == doctest::Approx(3.0));
  CHECK(e.values[1] == doctest::Approx(1.0));
  CHECK(std::fabs(e.vectors(0, 0)) == doctest::Approx(1.0));
  CHECK(std::fabs(e.vectors(1, 1)) == doctest::Approx(1.0));
}

TEST_CASE("sym_eigen reconstruction and orthonormality on random matrices") {
  Rng rng(10);
  for (int trial = 0; trial < 20; ++trial) {
    std::size_t n = 8;
    Matrix a(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i; j < n; ++j) a(i, j) = a(j, i) = rng.normal();
    auto e = sym_eigen(a);

    double max_a = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) max_a = std::max(max_a, std::fabs(a(i, j)));

    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double rec = 0, dot = 0;
        for (std::size_t k = 0; k < n; ++k) {
          rec += e.vectors(i, k) * e.values[k] * e.vectors(j, k);
          dot += e.vectors(k, i) * e.vectors(k, j);
        }
        CHECK(std::fabs(rec - a(i, j)) <= 1e-8 * std::max(1.0, max_a));
        CHECK(std::fabs(dot - (i == j ? 1.0 : 0.0)) <= 1e-8);
      }
  }
}

TEST_CASE("sym_eigen matches characteristic polynomial roots (2x2)") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    double a = rng.normal(), b = rng.normal(), c = rng.normal();
    Matrix m(2, 2);
    m(0, 0) = a;
    m(0, 1) = m(1, 0) = b;
    m(1, 1) = c;
    auto e = sym_eigen(m);
    double mean = 0.5 * (a + c);
    double disc = std::sqrt(0.25 * (a - c) * (a - c) + b * b);
    CHECK(e.values[0] == doctest::Approx(mean + disc).epsilon(1e-8));
    CHECK(e.values[1] == doctest::Approx(mean - disc).epsilon(1e-8));
  }
}

TEST_CASE("sym_eigen matches characteristic polynomial roots (3x3)") {
  // Trigonometric closed form for symmetric 3x3 eigenvalues.
  Rng rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    Matrix m(3, 3);
    for (int i = 0; i < 3; ++i)
      for (int j = i; j < 3; ++j) m(i, j) = m(j, i) = rng.normal();
    double q = (m(0, 0) + m(1, 1) + m(2, 2)) / 3.0;
    double p2 = 0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double v = m(i, j) - (i == j ? q : 0.0);
        p2 += v * v;
      }
    double p = std::sqrt(p2 / 6.0);
    Matrix b(3, 3);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) b(i, j) = (m(i, j) - (i == j ? q : 0.0)) / p;
    double detb = b(0, 0) * (b(1, 1) * b(2, 2) - b(1, 2) * b(2, 1)) -
                  b(0, 1) * (b(1, 0) * b(2, 2) - b(1, 2) * b(2, 0)) +
                  b(0, 2) * (b(1, 0) * b(2, 1) - b(1, 1) * b(2, 0));
    double r = std::clamp(detb / 2.0, -1.0, 1.0);
    double phi = std::acos(r) / 3.0;
    double l0 = q + 2.0 * p * std::cos(phi);
    double l2 = q + 2.0 * p * std::cos(phi + 2.0 * M_PI / 3.0);
    double l1 = 3.0 * q - l0 - l2;
    auto e = sym_eigen(m);
    CHECK(e.values[0] == doctest::Approx(l0).epsilon(1e-8));
    CHECK(e.values[1] == doctest::Approx(l1).epsilon(1e-8));
    CHECK(e.values[2] == doctest::Approx(l2).epsilon(1e-8));
  }
}

TEST_CASE("softmax and log_sum_exp") {
  auto p = softmax({0.0, 0.0});
  CHECK(p[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(log_sum_exp({3.25}) == doctest::Approx(3.25).epsilon(1e-15));

  Rng rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> x(6), shifted(6);
    for (std::size_t i = 0; i < 6; ++i) {
      x[i] = rng.normal() * 3.0;
      shifted[i] = x[i] + 7.0;
    }
    auto a = softmax(x);
    auto b = softmax(shifted);
    double sum = 0;
    for (std::size_t i = 0; i < 6; ++i) {
      CHECK(std::fabs(a[i] - b[i]) <= 1e-12);
      sum += a[i];
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}
