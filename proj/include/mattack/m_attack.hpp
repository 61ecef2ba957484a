#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mattack/mahalanobis.hpp"
#include "mattack/mixed_data.hpp"
#include "mattack/mlp.hpp"
#include "mattack/rng.hpp"

namespace mattack {

// Per-feature categorical distributions parameterized by logits; membership in
// the simplex product is automatic under softmax. Logits clamped to |.| <= 30.
struct CategoricalDistribution {
  std::vector<std::vector<double>> logits;

  std::vector<double> probs(std::size_t feature) const;
  void clamp();

  // Probability ~ (1 - 1e-3) on the original category of each feature.
  static CategoricalDistribution near_one_hot(const std::vector<std::size_t>& original,
                                              const MixedSchema& schema);
};

struct AttackConfig {
  double epsilon1 = 0.6;
  std::size_t epsilon2 = 3;
  double lambda = 0.0;
  double alpha_ce = 1.0;
  double zeta = -1.0;      // < 0: defaults to epsilon2 * ln 2
  double step_num = -1.0;  // < 0: defaults to epsilon1 / 10
  double gamma = 0.1;      // 0 freezes categoricals at their originals
  std::size_t steps = 200;
  double tau = 0.5;
  std::size_t mc_samples = 4;
  std::size_t final_samples = 32;
  std::size_t top_k = 1;  // coordinates per numerical step
  std::uint64_t seed = 0;
  bool record_trace = false;

  double resolved_zeta() const;
  double resolved_step_num() const;
  void validate() const;
};

struct TraceStep {
  double q = 0;
  double loss = 0;
  double ce = 0;
  double distance = 0;
};

struct AttackResult {
  MixedSample adv_sample;
  std::vector<double> adv_encoded;
  double loss = 0;
  double m_distance = 0;
  double l1_num_perturbation = 0;
  std::size_t l0_cat_changes = 0;
  bool success = false;
  std::optional<bool> flagged_ood;
  double wall_time_secs = 0;
  std::vector<TraceStep> trace;
};

// [sum_i -log pi_{i, orig_i} - zeta]^+ with probabilities clamped to >= 1e-6
// inside the log.
double ce_surrogate(const CategoricalDistribution& pi, const std::vector<std::size_t>& original,
                    double zeta);

// Value plus gradient w.r.t. every logit.
std::pair<double, std::vector<std::vector<double>>> ce_surrogate_grad(
    const CategoricalDistribution& pi, const std::vector<std::size_t>& original, double zeta);

struct GumbelDraw {
  std::vector<std::vector<double>> relaxed;  // softmax((logits + g) / tau) per feature
  std::vector<std::size_t> hard;             // argmax per feature
};

// One noise vector per categorical feature entry; frozen for gradient checks.
using GumbelNoise = std::vector<std::vector<double>>;

GumbelNoise draw_gumbel_noise(const CategoricalDistribution& pi, Rng& rng);
GumbelDraw relax_with_noise(const CategoricalDistribution& pi, const GumbelNoise& noise,
                            double tau);
GumbelDraw gumbel_softmax_sample(const CategoricalDistribution& pi, double tau, Rng& rng);

struct QEval {
  double q = 0;
  std::vector<double> grad_xn;
  std::vector<std::vector<double>> grad_logits;
  double mean_loss = 0;
  double ce = 0;
  double mean_distance = 0;
};

// Q = mean_s [ L(F(x'_n, relaxed_s), y) - lambda * D ] - alpha * ce_surrogate.
// Gradients are analytic through the model, the relaxed blocks, the CE
// surrogate, and the distance term.
QEval objective_q(const MlpClassifier& model, const std::vector<double>& x_n_prime,
                  const CategoricalDistribution& pi, std::size_t y,
                  const std::vector<double>& x_clean_encoded,
                  const std::vector<std::size_t>& x_c_original, const MixedSchema& schema,
                  const AttackConfig& config, const GeneralizedCovariance* maha,
                  const std::vector<GumbelNoise>& noise);

AttackResult attack(const MlpClassifier& model, const MixedSample& sample,
                    const MixedSchema& schema, const StandardizationStats& stats,
                    const AttackConfig& config, const GeneralizedCovariance* maha = nullptr);

}  // namespace mattack
