#pragma once

#include <cstdint>
#include <vector>

#include "mattack/m_attack.hpp"

namespace mattack {

struct BaselineConfig {
  double epsilon1 = 0.6;
  std::size_t epsilon2 = 3;
  double lambda = 0.0;
  double step_num = -1.0;  // < 0: epsilon1 / 10
  std::size_t steps = 200;
  std::size_t top_k = 1;
  std::uint64_t seed = 0;
  std::size_t max_search_combinations = 100000;

  double resolved_step_num() const;
  void validate() const;
};

// l1-PGD on the numerical coordinates of the (lambda-penalized) loss, with
// categoricals held at their originals. Returns the perturbed standardized
// numerics.
std::vector<double> l1_pgd(const MlpClassifier& model, const MixedSample& sample,
                           const MixedSchema& schema, const StandardizationStats& stats,
                           const BaselineConfig& config,
                           const GeneralizedCovariance* maha = nullptr);

struct RankedFeature {
  std::size_t feature = 0;
  double impact = 0;
};

// Impact of feature i = best penalized objective over its alternative
// categories, all else fixed. Sorted by impact descending, ties by index.
std::vector<RankedFeature> rank_categorical_features(
    const MlpClassifier& model, const std::vector<double>& x_n_prime,
    const MixedSample& sample, const MixedSchema& schema, const StandardizationStats& stats,
    double lambda, const GeneralizedCovariance* maha);

// "l1 PGD + Search": exhaustive enumeration over the top-eps2 features.
AttackResult search_attack(const MlpClassifier& model, const MixedSample& sample,
                           const MixedSchema& schema, const StandardizationStats& stats,
                           const BaselineConfig& config,
                           const GeneralizedCovariance* maha = nullptr);

// "l1 PGD + Greedy": one pass over the top-eps2 features in rank order.
AttackResult greedy_attack(const MlpClassifier& model, const MixedSample& sample,
                           const MixedSchema& schema, const StandardizationStats& stats,
                           const BaselineConfig& config,
                           const GeneralizedCovariance* maha = nullptr);

}  // namespace mattack
