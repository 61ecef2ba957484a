#include "mattack/ood.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "mattack/errors.hpp"
#include "mattack/numerics.hpp"
#include "mattack/rng.hpp"

namespace mattack {

namespace {
constexpr double kBandwidthFloor = 1e-3;
constexpr double kLogTwoPi = 1.8378770664093453;
}  // namespace

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw UsageError("percentile: empty sample");
  std::sort(values.begin(), values.end());
  double pos = q * static_cast<double>(values.size() - 1);
  std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  std::size_t hi = std::min(lo + 1, values.size() - 1);
  double frac = pos - static_cast<double>(lo);
  return values[lo] * (1.0 - frac) + values[hi] * frac;
}

KdeModel KdeModel::fit(const std::vector<std::vector<double>>& encoded_train, std::size_t cap,
                       std::uint64_t seed) {
  if (encoded_train.size() < 2) throw UsageError("fit_kde: need at least 2 training points");
  const std::size_t n = encoded_train.size();
  const std::size_t d = encoded_train[0].size();

  // Seeded uniform subsample without replacement (partial Fisher-Yates).
  std::size_t m = std::min(cap, n);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  for (std::size_t i = 0; i < m; ++i)
    std::swap(idx[i], idx[i + rng.below(n - i)]);

  KdeModel kde;
  kde.references_ = Matrix(m, d);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < d; ++j) kde.references_(i, j) = encoded_train[idx[i]][j];

  // Scott's rule per dimension: h_j = sigma_j * M^(-1/(D+4)), floored.
  std::vector<double> mean(d, 0.0), var(d, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < d; ++j) mean[j] += kde.references_(i, j);
  for (double& v : mean) v /= static_cast<double>(m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      double diff = kde.references_(i, j) - mean[j];
      var[j] += diff * diff;
    }
  double scale = std::pow(static_cast<double>(m), -1.0 / (static_cast<double>(d) + 4.0));
  bool any_spread = false;
  kde.bandwidths_.resize(d);
  for (std::size_t j = 0; j < d; ++j) {
    double sigma = std::sqrt(var[j] / static_cast<double>(m > 1 ? m - 1 : 1));
    if (sigma > 0.0) any_spread = true;
    kde.bandwidths_[j] = std::max(sigma * scale, kBandwidthFloor);
  }
  if (!any_spread) throw UsageError("fit_kde: all training points are identical");
  return kde;
}

double KdeModel::log_likelihood(const std::vector<double>& x) const {
  const std::size_t m = references_.rows();
  const std::size_t d = references_.cols();
  double const_term = 0.0;
  for (std::size_t j = 0; j < d; ++j)
    const_term -= 0.5 * kLogTwoPi + std::log(bandwidths_[j]);

  std::vector<double> log_kernels(m);
  for (std::size_t i = 0; i < m; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      double z = (x[j] - references_(i, j)) / bandwidths_[j];
      acc -= 0.5 * z * z;
    }
    log_kernels[i] = acc + const_term;
  }
  return numerics::log_sum_exp(log_kernels) - std::log(static_cast<double>(m));
}

void KdeModel::calibrate(const std::vector<std::vector<double>>& encoded_clean_eval) {
  if (encoded_clean_eval.size() < 10)
    throw UsageError("calibrate_threshold: need at least 10 evaluation samples");
  std::vector<double> scores;
  scores.reserve(encoded_clean_eval.size());
  for (const auto& x : encoded_clean_eval) scores.push_back(log_likelihood(x));
  threshold_ = percentile(std::move(scores), 0.10);
  calibrated_ = true;
}

double KdeModel::threshold() const {
  if (!calibrated_) throw UsageError("kde threshold requested before calibration");
  return threshold_;
}

bool KdeModel::is_flagged(const std::vector<double>& x) const {
  if (!calibrated_) throw UsageError("is_flagged called before calibration");
  return log_likelihood(x) < threshold_;
}

namespace {

constexpr std::uint32_t kMagic = 0x4b444531;  // "KDE1"
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ofstream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
std::uint32_t read_u32(std::ifstream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!in) throw DataError("detector file truncated");
  return v;
}

}  // namespace

void KdeModel::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write detector file: " + path);
  write_u32(out, kMagic);
  write_u32(out, kVersion);
  write_u32(out, static_cast<std::uint32_t>(references_.rows()));
  write_u32(out, static_cast<std::uint32_t>(references_.cols()));
  write_u32(out, calibrated_ ? 1u : 0u);
  out.write(reinterpret_cast<const char*>(&threshold_), sizeof(threshold_));
  out.write(reinterpret_cast<const char*>(references_.data()),
            static_cast<std::streamsize>(references_.rows() * references_.cols() *
                                         sizeof(double)));
  out.write(reinterpret_cast<const char*>(bandwidths_.data()),
            static_cast<std::streamsize>(bandwidths_.size() * sizeof(double)));
}

KdeModel KdeModel::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open detector file: " + path);
  if (read_u32(in) != kMagic) throw DataError("detector file: bad magic");
  if (read_u32(in) != kVersion) throw DataError("detector file: unsupported version");
  std::size_t m = read_u32(in);
  std::size_t d = read_u32(in);
  KdeModel kde;
  kde.calibrated_ = read_u32(in) != 0;
  in.read(reinterpret_cast<char*>(&kde.threshold_), sizeof(kde.threshold_));
  kde.references_ = Matrix(m, d);
  kde.bandwidths_.assign(d, 0.0);
  in.read(reinterpret_cast<char*>(kde.references_.data()),
          static_cast<std::streamsize>(m * d * sizeof(double)));
  in.read(reinterpret_cast<char*>(kde.bandwidths_.data()),
          static_cast<std::streamsize>(d * sizeof(double)));
  if (!in) throw DataError("detector file truncated");
  return kde;
}

}  // namespace mattack
