#include "mattack/mahalanobis.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>

#include "mattack/errors.hpp"
#include "mattack/numerics.hpp"

namespace mattack {

GeneralizedCovariance fit_covariance(const std::vector<std::vector<double>>& encoded_clean,
                                     std::size_t max_rank) {
  const std::size_t n = encoded_clean.size();
  if (n < 2) throw UsageError("fit_covariance: need at least 2 samples");
  const std::size_t d = encoded_clean[0].size();

  GeneralizedCovariance cov;
  cov.column_means.assign(d, 0.0);
  for (const auto& row : encoded_clean)
    for (std::size_t j = 0; j < d; ++j) cov.column_means[j] += row[j];
  for (double& m : cov.column_means) m /= static_cast<double>(n);

  cov.sigma = Matrix(d, d);
  for (const auto& row : encoded_clean) {
    for (std::size_t i = 0; i < d; ++i) {
      double ci = row[i] - cov.column_means[i];
      for (std::size_t j = i; j < d; ++j)
        cov.sigma(i, j) += ci * (row[j] - cov.column_means[j]);
    }
  }
  double inv = 1.0 / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i; j < d; ++j) {
      cov.sigma(i, j) *= inv;
      cov.sigma(j, i) = cov.sigma(i, j);
    }

  auto eig = numerics::sym_eigen(cov.sigma);
  cov.eigenvalues = eig.values;
  cov.eigenvectors = eig.vectors;

  double lambda_max = cov.eigenvalues.empty() ? 0.0 : std::max(cov.eigenvalues[0], 0.0);
  double cutoff = 1e-6 * lambda_max;
  std::size_t m = 0;
  while (m < cov.eigenvalues.size() && cov.eigenvalues[m] > cutoff) ++m;
  if (max_rank > 0) m = std::min(m, max_rank);
  cov.retained_rank = m;

  cov.pseudo_inverse = Matrix(d, d);
  for (std::size_t k = 0; k < m; ++k) {
    double w = 1.0 / cov.eigenvalues[k];
    for (std::size_t i = 0; i < d; ++i) {
      double vik = cov.eigenvectors(i, k) * w;
      for (std::size_t j = 0; j < d; ++j)
        cov.pseudo_inverse(i, j) += vik * cov.eigenvectors(j, k);
    }
  }
  return cov;
}

double closed_form_num_num(const std::vector<double>& xi, const std::vector<double>& xj) {
  const std::size_t n = xi.size();
  double mi = 0.0, mj = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    mi += xi[k];
    mj += xj[k];
  }
  mi /= static_cast<double>(n);
  mj /= static_cast<double>(n);
  double acc = 0.0;
  for (std::size_t k = 0; k < n; ++k) acc += (xi[k] - mi) * (xj[k] - mj);
  return acc / static_cast<double>(n - 1);
}

double closed_form_num_cat(const NumCatCounts& c, bool* degenerate) {
  if (degenerate) *degenerate = false;
  if (c.n0 == 0.0 || c.n1 == 0.0) {
    if (degenerate) *degenerate = true;
    return 0.0;
  }
  double n = c.n0 + c.n1;
  return c.n0 * c.n1 / (n * (n - 1.0)) * (c.mean0 - c.mean1);
}

double closed_form_cat_cat(const CatCatCounts& c, bool* degenerate) {
  if (degenerate) *degenerate = false;
  double n = c.n00 + c.n01 + c.n10 + c.n11;
  if (n < 2.0) {
    if (degenerate) *degenerate = true;
    return 0.0;
  }
  return (c.n10 * c.n01 - c.n00 * c.n11) / (n * (n - 1.0));
}

std::pair<double, std::vector<double>> m_distance(const GeneralizedCovariance& cov,
                                                  const std::vector<double>& x_prime,
                                                  const std::vector<double>& x) {
  const std::size_t d = x.size();
  std::vector<double> diff(d);
  for (std::size_t i = 0; i < d; ++i) diff[i] = x_prime[i] - x[i];
  std::vector<double> pd = cov.pseudo_inverse.mul(diff);
  double dist = 0.0;
  for (std::size_t i = 0; i < d; ++i) dist += diff[i] * pd[i];
  for (double& g : pd) g *= 2.0;
  return {dist, std::move(pd)};
}

double m_distance_value(const GeneralizedCovariance& cov, const std::vector<double>& x_prime,
                        const std::vector<double>& x) {
  return m_distance(cov, x_prime, x).first;
}

double population_distance(const GeneralizedCovariance& cov, const std::vector<double>& x) {
  return m_distance(cov, x, cov.column_means).first;
}

namespace {

constexpr std::uint32_t kMagic = 0x434f5631;  // "COV1"
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ofstream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
std::uint32_t read_u32(std::ifstream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!in) throw DataError("covariance file truncated");
  return v;
}
void write_block(std::ofstream& out, const double* p, std::size_t n) {
  out.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
}
void read_block(std::ifstream& in, double* p, std::size_t n) {
  in.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw DataError("covariance file truncated");
}

}  // namespace

void GeneralizedCovariance::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write covariance file: " + path);
  const std::size_t d = sigma.rows();
  write_u32(out, kMagic);
  write_u32(out, kVersion);
  write_u32(out, static_cast<std::uint32_t>(d));
  write_u32(out, static_cast<std::uint32_t>(retained_rank));
  write_block(out, sigma.data(), d * d);
  write_block(out, eigenvalues.data(), d);
  write_block(out, eigenvectors.data(), d * d);
  write_block(out, column_means.data(), d);
}

GeneralizedCovariance GeneralizedCovariance::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open covariance file: " + path);
  if (read_u32(in) != kMagic) throw DataError("covariance file: bad magic");
  if (read_u32(in) != kVersion) throw DataError("covariance file: unsupported version");
  std::size_t d = read_u32(in);
  GeneralizedCovariance cov;
  cov.retained_rank = read_u32(in);
  cov.sigma = Matrix(d, d);
  cov.eigenvalues.assign(d, 0.0);
  cov.eigenvectors = Matrix(d, d);
  cov.column_means.assign(d, 0.0);
  read_block(in, cov.sigma.data(), d * d);
  read_block(in, cov.eigenvalues.data(), d);
  read_block(in, cov.eigenvectors.data(), d * d);
  read_block(in, cov.column_means.data(), d);
  cov.pseudo_inverse = Matrix(d, d);
  for (std::size_t k = 0; k < cov.retained_rank; ++k) {
    double w = 1.0 / cov.eigenvalues[k];
    for (std::size_t i = 0; i < d; ++i) {
      double vik = cov.eigenvectors(i, k) * w;
      for (std::size_t j = 0; j < d; ++j)
        cov.pseudo_inverse(i, j) += vik * cov.eigenvectors(j, k);
    }
  }
  return cov;
}

}  // namespace mattack
