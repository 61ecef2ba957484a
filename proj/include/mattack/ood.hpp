#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mattack/matrix.hpp"

namespace mattack {

// Product-Gaussian KDE over encoded samples with per-dimension Scott
// bandwidths, plus the 10th-percentile log-likelihood flagging rule.
class KdeModel {
 public:
  static KdeModel fit(const std::vector<std::vector<double>>& encoded_train,
                      std::size_t cap = 2000, std::uint64_t seed = 0);

  double log_likelihood(const std::vector<double>& x) const;

  // Threshold = empirical 10th percentile of clean evaluation scores.
  void calibrate(const std::vector<std::vector<double>>& encoded_clean_eval);

  bool is_flagged(const std::vector<double>& x) const;

  bool calibrated() const { return calibrated_; }
  double threshold() const;
  std::size_t num_references() const { return references_.rows(); }
  const std::vector<double>& bandwidths() const { return bandwidths_; }

  void save(const std::string& path) const;
  static KdeModel load(const std::string& path);

 private:
  Matrix references_;  // M x D
  std::vector<double> bandwidths_;
  double threshold_ = 0.0;
  bool calibrated_ = false;
};

// Linear-interpolation percentile of an unsorted sample, q in [0, 1].
double percentile(std::vector<double> values, double q);

}  // namespace mattack
