#include "mattack/baselines.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "mattack/errors.hpp"
#include "mattack/numerics.hpp"

namespace mattack {

double BaselineConfig::resolved_step_num() const {
  return step_num > 0.0 ? step_num : epsilon1 / 10.0;
}

void BaselineConfig::validate() const {
  if (epsilon1 <= 0.0) throw UsageError("baseline: epsilon1 must be > 0");
  if (lambda < 0.0) throw UsageError("baseline: lambda must be >= 0");
  if (max_search_combinations < 1) throw UsageError("baseline: combination cap must be >= 1");
  if (top_k < 1) throw UsageError("baseline: top_k must be >= 1");
}

namespace {

std::vector<double> assemble(const std::vector<double>& x_n,
                             const std::vector<std::size_t>& cats, const MixedSchema& schema) {
  std::vector<double> x(schema.encoded_width(), 0.0);
  std::copy(x_n.begin(), x_n.end(), x.begin());
  std::size_t off = schema.num_numeric();
  for (std::size_t i = 0; i < cats.size(); ++i) {
    x[off + cats[i]] = 1.0;
    off += schema.categorical_specs[i].vocabulary.size();
  }
  return x;
}

double penalized_objective(const MlpClassifier& model, const std::vector<double>& x,
                           std::size_t y, double lambda, const GeneralizedCovariance* maha,
                           const std::vector<double>& x_clean) {
  double q = model.loss(x, y);
  if (maha != nullptr && lambda > 0.0) q -= lambda * m_distance_value(*maha, x, x_clean);
  return q;
}

AttackResult finish(const MlpClassifier& model, const MixedSample& sample,
                    const MixedSchema& schema, const StandardizationStats& stats,
                    const std::vector<double>& x_n, const std::vector<std::size_t>& cats,
                    const std::vector<double>& x_clean, const GeneralizedCovariance* maha,
                    std::chrono::steady_clock::time_point t0) {
  AttackResult result;
  result.adv_encoded = assemble(x_n, cats, schema);
  result.adv_sample = decode(result.adv_encoded, stats, schema);
  result.adv_sample.label = sample.label;
  result.loss = model.loss(result.adv_encoded, sample.label);
  if (maha != nullptr)
    result.m_distance = m_distance_value(*maha, result.adv_encoded, x_clean);
  for (std::size_t j = 0; j < schema.num_numeric(); ++j)
    result.l1_num_perturbation += std::fabs(result.adv_encoded[j] - x_clean[j]);
  for (std::size_t i = 0; i < cats.size(); ++i)
    if (cats[i] != sample.categoricals[i]) ++result.l0_cat_changes;
  result.success = model.predict(result.adv_encoded) != sample.label;
  result.wall_time_secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

}  // namespace

std::vector<double> l1_pgd(const MlpClassifier& model, const MixedSample& sample,
                           const MixedSchema& schema, const StandardizationStats& stats,
                           const BaselineConfig& config, const GeneralizedCovariance* maha) {
  config.validate();
  const std::size_t d_n = schema.num_numeric();
  const std::vector<double> x_clean = encode(sample, stats, schema);
  const std::vector<double> x_n_clean(x_clean.begin(), x_clean.begin() + d_n);
  const double step = config.resolved_step_num();

  std::vector<double> x_n = x_n_clean;
  if (d_n == 0) return x_n;

  for (std::size_t t = 0; t < config.steps; ++t) {
    std::vector<double> x = assemble(x_n, sample.categoricals, schema);
    auto [loss, dx] = model.loss_and_input_grad(x, sample.label);
    (void)loss;
    if (maha != nullptr && config.lambda > 0.0) {
      auto [dist, ddist] = m_distance(*maha, x, x_clean);
      (void)dist;
      for (std::size_t j = 0; j < dx.size(); ++j) dx[j] -= config.lambda * ddist[j];
    }
    std::vector<double> grad_num(dx.begin(), dx.begin() + d_n);
    std::vector<double> v = numerics::l1_steepest_step(grad_num, step, config.top_k);
    for (std::size_t j = 0; j < d_n; ++j) x_n[j] += v[j];

    std::vector<double> offset(d_n);
    for (std::size_t j = 0; j < d_n; ++j) offset[j] = x_n[j] - x_n_clean[j];
    offset = numerics::project_l1_ball(offset, config.epsilon1);
    for (std::size_t j = 0; j < d_n; ++j) x_n[j] = x_n_clean[j] + offset[j];
  }
  return x_n;
}

std::vector<RankedFeature> rank_categorical_features(
    const MlpClassifier& model, const std::vector<double>& x_n_prime, const MixedSample& sample,
    const MixedSchema& schema, const StandardizationStats& stats, double lambda,
    const GeneralizedCovariance* maha) {
  const std::vector<double> x_clean = encode(sample, stats, schema);
  const double base = penalized_objective(
      model, assemble(x_n_prime, sample.categoricals, schema), sample.label, lambda, maha,
      x_clean);

  std::vector<RankedFeature> ranked;
  for (std::size_t i = 0; i < schema.num_categorical(); ++i) {
    std::size_t k = schema.categorical_specs[i].vocabulary.size();
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
      if (c == sample.categoricals[i]) continue;
      std::vector<std::size_t> cats = sample.categoricals;
      cats[i] = c;
      best = std::max(best, penalized_objective(model, assemble(x_n_prime, cats, schema),
                                                sample.label, lambda, maha, x_clean));
    }
    ranked.push_back({i, best - base});
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const RankedFeature& a,
                                                    const RankedFeature& b) {
    return a.impact > b.impact;
  });
  return ranked;
}

AttackResult search_attack(const MlpClassifier& model, const MixedSample& sample,
                           const MixedSchema& schema, const StandardizationStats& stats,
                           const BaselineConfig& config, const GeneralizedCovariance* maha) {
  auto t0 = std::chrono::steady_clock::now();
  const std::vector<double> x_clean = encode(sample, stats, schema);
  std::vector<double> x_n = l1_pgd(model, sample, schema, stats, config, maha);

  std::size_t n_select = std::min(config.epsilon2, schema.num_categorical());
  std::vector<std::size_t> selected;
  if (n_select > 0) {
    auto ranked = rank_categorical_features(model, x_n, sample, schema, stats, config.lambda,
                                            maha);
    for (std::size_t i = 0; i < n_select; ++i) selected.push_back(ranked[i].feature);
  }

  double combos = 1.0;
  for (std::size_t f : selected)
    combos *= static_cast<double>(schema.categorical_specs[f].vocabulary.size());
  if (combos > static_cast<double>(config.max_search_combinations))
    throw UsageError("search_attack: " + std::to_string(static_cast<long long>(combos)) +
                     " combinations exceed the cap; use the greedy baseline");

  // Odometer enumeration over the selected features, originals included.
  std::vector<std::size_t> best_cats = sample.categoricals;
  double best_q = penalized_objective(model, assemble(x_n, best_cats, schema), sample.label,
                                      config.lambda, maha, x_clean);
  std::vector<std::size_t> counter(selected.size(), 0);
  while (!selected.empty()) {
    std::vector<std::size_t> cats = sample.categoricals;
    for (std::size_t i = 0; i < selected.size(); ++i) cats[selected[i]] = counter[i];
    double q = penalized_objective(model, assemble(x_n, cats, schema), sample.label,
                                   config.lambda, maha, x_clean);
    if (q > best_q) {
      best_q = q;
      best_cats = cats;
    }
    std::size_t pos = 0;
    while (pos < counter.size()) {
      if (++counter[pos] < schema.categorical_specs[selected[pos]].vocabulary.size()) break;
      counter[pos] = 0;
      ++pos;
    }
    if (pos == counter.size()) break;
  }
  return finish(model, sample, schema, stats, x_n, best_cats, x_clean, maha, t0);
}

AttackResult greedy_attack(const MlpClassifier& model, const MixedSample& sample,
                           const MixedSchema& schema, const StandardizationStats& stats,
                           const BaselineConfig& config, const GeneralizedCovariance* maha) {
  auto t0 = std::chrono::steady_clock::now();
  const std::vector<double> x_clean = encode(sample, stats, schema);
  std::vector<double> x_n = l1_pgd(model, sample, schema, stats, config, maha);

  std::size_t n_select = std::min(config.epsilon2, schema.num_categorical());
  std::vector<std::size_t> cats = sample.categoricals;
  if (n_select > 0) {
    auto ranked = rank_categorical_features(model, x_n, sample, schema, stats, config.lambda,
                                            maha);
    for (std::size_t r = 0; r < n_select; ++r) {
      std::size_t f = ranked[r].feature;
      std::size_t k = schema.categorical_specs[f].vocabulary.size();
      std::size_t best_c = cats[f];
      double best_q = -std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        std::vector<std::size_t> trial = cats;
        trial[f] = c;
        double q = penalized_objective(model, assemble(x_n, trial, schema), sample.label,
                                       config.lambda, maha, x_clean);
        if (q > best_q) {
          best_q = q;
          best_c = c;
        }
      }
      cats[f] = best_c;
    }
  }
  return finish(model, sample, schema, stats, x_n, cats, x_clean, maha, t0);
}

}  // namespace mattack
