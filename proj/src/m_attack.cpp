#include "mattack/m_attack.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "mattack/errors.hpp"
#include "mattack/numerics.hpp"

namespace mattack {

namespace {
constexpr double kLogitClamp = 30.0;
constexpr double kProbFloor = 1e-6;
}  // namespace

std::vector<double> CategoricalDistribution::probs(std::size_t feature) const {
  return numerics::softmax(logits[feature]);
}

void CategoricalDistribution::clamp() {
  for (auto& l : logits)
    for (double& v : l) v = std::clamp(v, -kLogitClamp, kLogitClamp);
}

CategoricalDistribution CategoricalDistribution::near_one_hot(
    const std::vector<std::size_t>& original, const MixedSchema& schema) {
  CategoricalDistribution pi;
  for (std::size_t i = 0; i < schema.num_categorical(); ++i) {
    std::size_t k = schema.categorical_specs[i].vocabulary.size();
    // softmax gives probability ~ 1 - 1e-3 on the original category.
    double l = std::log((1.0 - 1e-3) * static_cast<double>(k - 1) / 1e-3);
    std::vector<double> logits(k, 0.0);
    logits[original[i]] = std::min(l, kLogitClamp);
    pi.logits.push_back(std::move(logits));
  }
  return pi;
}

double AttackConfig::resolved_zeta() const {
  return zeta >= 0.0 ? zeta : static_cast<double>(epsilon2) * std::log(2.0);
}

double AttackConfig::resolved_step_num() const {
  return step_num > 0.0 ? step_num : epsilon1 / 10.0;
}

void AttackConfig::validate() const {
  if (epsilon1 <= 0.0) throw UsageError("attack: epsilon1 must be > 0");
  if (tau <= 0.0) throw UsageError("attack: tau must be > 0");
  if (gamma < 0.0) throw UsageError("attack: gamma must be >= 0");
  if (lambda < 0.0) throw UsageError("attack: lambda must be >= 0");
  if (mc_samples < 1 || final_samples < 1) throw UsageError("attack: sample counts must be >= 1");
  if (top_k < 1) throw UsageError("attack: top_k must be >= 1");
}

double ce_surrogate(const CategoricalDistribution& pi, const std::vector<std::size_t>& original,
                    double zeta) {
  double sum = 0.0;
  for (std::size_t i = 0; i < pi.logits.size(); ++i) {
    double p = pi.probs(i)[original[i]];
    sum += -std::log(std::max(p, kProbFloor));
  }
  return std::max(sum - zeta, 0.0);
}

std::pair<double, std::vector<std::vector<double>>> ce_surrogate_grad(
    const CategoricalDistribution& pi, const std::vector<std::size_t>& original, double zeta) {
  double sum = 0.0;
  std::vector<std::vector<double>> grads;
  for (std::size_t i = 0; i < pi.logits.size(); ++i) {
    std::vector<double> p = pi.probs(i);
    double p_orig = p[original[i]];
    sum += -std::log(std::max(p_orig, kProbFloor));
    std::vector<double> g(p.size(), 0.0);
    if (p_orig > kProbFloor) {
      // d(-log p_orig)/d logit_j = p_j - [j == orig]
      for (std::size_t j = 0; j < p.size(); ++j) g[j] = p[j];
      g[original[i]] -= 1.0;
    }
    grads.push_back(std::move(g));
  }
  bool active = sum - zeta > 0.0;
  if (!active) {
    for (auto& g : grads) std::fill(g.begin(), g.end(), 0.0);
  }
  return {std::max(sum - zeta, 0.0), std::move(grads)};
}

GumbelNoise draw_gumbel_noise(const CategoricalDistribution& pi, Rng& rng) {
  GumbelNoise noise;
  for (const auto& l : pi.logits) {
    std::vector<double> g(l.size());
    for (double& v : g) v = rng.gumbel();
    noise.push_back(std::move(g));
  }
  return noise;
}

GumbelDraw relax_with_noise(const CategoricalDistribution& pi, const GumbelNoise& noise,
                            double tau) {
  GumbelDraw draw;
  for (std::size_t i = 0; i < pi.logits.size(); ++i) {
    std::vector<double> scaled(pi.logits[i].size());
    for (std::size_t j = 0; j < scaled.size(); ++j)
      scaled[j] = (pi.logits[i][j] + noise[i][j]) / tau;
    std::vector<double> relaxed = numerics::softmax(scaled);
    std::size_t best = 0;
    for (std::size_t j = 1; j < relaxed.size(); ++j)
      if (relaxed[j] > relaxed[best]) best = j;
    draw.relaxed.push_back(std::move(relaxed));
    draw.hard.push_back(best);
  }
  return draw;
}

GumbelDraw gumbel_softmax_sample(const CategoricalDistribution& pi, double tau, Rng& rng) {
  return relax_with_noise(pi, draw_gumbel_noise(pi, rng), tau);
}

QEval objective_q(const MlpClassifier& model, const std::vector<double>& x_n_prime,
                  const CategoricalDistribution& pi, std::size_t y,
                  const std::vector<double>& x_clean_encoded,
                  const std::vector<std::size_t>& x_c_original, const MixedSchema& schema,
                  const AttackConfig& config, const GeneralizedCovariance* maha,
                  const std::vector<GumbelNoise>& noise) {
  const std::size_t d_n = schema.num_numeric();
  const std::size_t d_c = schema.num_categorical();
  const std::size_t width = schema.encoded_width();

  QEval eval;
  eval.grad_xn.assign(d_n, 0.0);
  for (std::size_t i = 0; i < d_c; ++i)
    eval.grad_logits.emplace_back(pi.logits[i].size(), 0.0);

  const double inv_s = 1.0 / static_cast<double>(noise.size());
  std::vector<double> x(width);
  std::copy(x_n_prime.begin(), x_n_prime.end(), x.begin());

  for (const GumbelNoise& g : noise) {
    GumbelDraw draw = relax_with_noise(pi, g, config.tau);
    std::size_t off = d_n;
    for (std::size_t i = 0; i < d_c; ++i) {
      std::copy(draw.relaxed[i].begin(), draw.relaxed[i].end(), x.begin() + off);
      off += draw.relaxed[i].size();
    }

    auto [loss, dx] = model.loss_and_input_grad(x, y);
    eval.mean_loss += loss * inv_s;
    double q_s = loss;

    if (maha != nullptr && config.lambda > 0.0) {
      auto [dist, ddist] = m_distance(*maha, x, x_clean_encoded);
      eval.mean_distance += dist * inv_s;
      q_s -= config.lambda * dist;
      for (std::size_t j = 0; j < width; ++j) dx[j] -= config.lambda * ddist[j];
    }
    eval.q += q_s * inv_s;

    for (std::size_t j = 0; j < d_n; ++j) eval.grad_xn[j] += dx[j] * inv_s;

    // Straight-through block gradient: pass the encoded-input gradient to the
    // logits directly, centered by its softmax-weighted mean so it is
    // invariant to per-block logit shifts. The exact softmax Jacobian factor
    // r_j / tau vanishes once a block concentrates, which would freeze the
    // categorical search at its near-one-hot initialization; the centered
    // straight-through direction keeps a nonnegative inner product with the
    // exact gradient (a softmax-weighted variance), so small steps still never
    // decrease the objective to first order.
    off = d_n;
    for (std::size_t i = 0; i < d_c; ++i) {
      const std::vector<double>& r = draw.relaxed[i];
      double dot = 0.0;
      for (std::size_t j = 0; j < r.size(); ++j) dot += r[j] * dx[off + j];
      for (std::size_t j = 0; j < r.size(); ++j)
        eval.grad_logits[i][j] += inv_s * (dx[off + j] - dot) / config.tau;
      off += r.size();
    }
  }

  auto [ce, ce_grads] = ce_surrogate_grad(pi, x_c_original, config.resolved_zeta());
  eval.ce = ce;
  eval.q -= config.alpha_ce * ce;
  for (std::size_t i = 0; i < d_c; ++i)
    for (std::size_t j = 0; j < eval.grad_logits[i].size(); ++j)
      eval.grad_logits[i][j] -= config.alpha_ce * ce_grads[i][j];

  if (!std::isfinite(eval.q)) throw NumericError("objective_q: non-finite objective value");
  return eval;
}

namespace {

std::vector<double> one_hot_blocks(const std::vector<std::size_t>& cats,
                                   const MixedSchema& schema) {
  std::vector<double> blocks(schema.encoded_width() - schema.num_numeric(), 0.0);
  std::size_t off = 0;
  for (std::size_t i = 0; i < cats.size(); ++i) {
    blocks[off + cats[i]] = 1.0;
    off += schema.categorical_specs[i].vocabulary.size();
  }
  return blocks;
}

std::vector<double> assemble(const std::vector<double>& x_n,
                             const std::vector<std::size_t>& cats, const MixedSchema& schema) {
  std::vector<double> x(x_n);
  std::vector<double> blocks = one_hot_blocks(cats, schema);
  x.insert(x.end(), blocks.begin(), blocks.end());
  return x;
}

double l1_norm_diff(const std::vector<double>& a, const std::vector<double>& b,
                    std::size_t count) {
  double acc = 0.0;
  for (std::size_t i = 0; i < count; ++i) acc += std::fabs(a[i] - b[i]);
  return acc;
}

std::size_t l0_changes(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) ++n;
  return n;
}

// Revert lowest-loss-contribution changes until at most eps2 remain.
void repair_budget(std::vector<std::size_t>& cats, const std::vector<std::size_t>& original,
                   const std::vector<double>& x_n, std::size_t eps2, const MlpClassifier& model,
                   std::size_t y, const MixedSchema& schema) {
  while (l0_changes(cats, original) > eps2) {
    double current = model.loss(assemble(x_n, cats, schema), y);
    std::size_t best = 0;
    double best_drop = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < cats.size(); ++i) {
      if (cats[i] == original[i]) continue;
      std::vector<std::size_t> reverted = cats;
      reverted[i] = original[i];
      double drop = current - model.loss(assemble(x_n, reverted, schema), y);
      if (drop < best_drop) {
        best_drop = drop;
        best = i;
      }
    }
    cats[best] = original[best];
  }
}

}  // namespace

AttackResult attack(const MlpClassifier& model, const MixedSample& sample,
                    const MixedSchema& schema, const StandardizationStats& stats,
                    const AttackConfig& config, const GeneralizedCovariance* maha) {
  config.validate();
  auto t0 = std::chrono::steady_clock::now();

  const std::size_t d_n = schema.num_numeric();
  const std::vector<double> x_clean = encode(sample, stats, schema);
  const std::vector<double> x_n_clean(x_clean.begin(), x_clean.begin() + d_n);
  const std::size_t y = sample.label;
  const double step = config.resolved_step_num();

  Rng rng(config.seed);
  std::vector<double> x_n = x_n_clean;
  const bool pinned = (config.gamma == 0.0) || schema.num_categorical() == 0;

  CategoricalDistribution pi;
  if (!pinned) pi = CategoricalDistribution::near_one_hot(sample.categoricals, schema);

  AttackResult result;

  auto project_back = [&]() {
    if (d_n == 0) return;
    std::vector<double> offset(d_n);
    for (std::size_t j = 0; j < d_n; ++j) offset[j] = x_n[j] - x_n_clean[j];
    offset = numerics::project_l1_ball(offset, config.epsilon1);
    for (std::size_t j = 0; j < d_n; ++j) x_n[j] = x_n_clean[j] + offset[j];
  };

  if (pinned) {
    for (std::size_t t = 0; t < config.steps; ++t) {
      std::vector<double> x = assemble(x_n, sample.categoricals, schema);
      auto [loss, dx] = model.loss_and_input_grad(x, y);
      if (maha != nullptr && config.lambda > 0.0) {
        auto [dist, ddist] = m_distance(*maha, x, x_clean);
        for (std::size_t j = 0; j < dx.size(); ++j) dx[j] -= config.lambda * ddist[j];
        loss -= config.lambda * dist;
      }
      std::vector<double> grad_num(dx.begin(), dx.begin() + d_n);
      std::vector<double> v = numerics::l1_steepest_step(grad_num, step, config.top_k);
      for (std::size_t j = 0; j < d_n; ++j) x_n[j] += v[j];
      project_back();
      if (config.record_trace) result.trace.push_back({loss, loss, 0.0, 0.0});
    }
    result.adv_encoded = assemble(x_n, sample.categoricals, schema);
    result.l0_cat_changes = 0;
  } else {
    for (std::size_t t = 0; t < config.steps; ++t) {
      std::vector<GumbelNoise> noise;
      noise.reserve(config.mc_samples);
      for (std::size_t s = 0; s < config.mc_samples; ++s)
        noise.push_back(draw_gumbel_noise(pi, rng));

      QEval eval = objective_q(model, x_n, pi, y, x_clean, sample.categoricals, schema, config,
                               maha, noise);
      if (d_n > 0) {
        std::vector<double> v = numerics::l1_steepest_step(eval.grad_xn, step, config.top_k);
        for (std::size_t j = 0; j < d_n; ++j) x_n[j] += v[j];
      }
      for (std::size_t i = 0; i < pi.logits.size(); ++i)
        for (std::size_t j = 0; j < pi.logits[i].size(); ++j)
          pi.logits[i][j] += config.gamma * eval.grad_logits[i][j];
      project_back();
      pi.clamp();
      if (config.record_trace)
        result.trace.push_back({eval.q, eval.mean_loss, eval.ce, eval.mean_distance});
    }

    // Final sampling: draw hard candidates, keep budget-feasible ones, repair
    // if none survive, then keep the candidate with the best objective.
    std::vector<std::vector<std::size_t>> candidates;
    if (config.steps == 0) {
      candidates.push_back(sample.categoricals);
    } else {
      std::vector<std::vector<std::size_t>> feasible;
      std::vector<std::size_t> smallest;
      std::size_t smallest_l0 = std::numeric_limits<std::size_t>::max();
      for (std::size_t s = 0; s < config.final_samples; ++s) {
        GumbelDraw draw = gumbel_softmax_sample(pi, config.tau, rng);
        std::size_t l0 = l0_changes(draw.hard, sample.categoricals);
        if (l0 <= config.epsilon2) {
          feasible.push_back(draw.hard);
        } else if (l0 < smallest_l0) {
          smallest_l0 = l0;
          smallest = draw.hard;
        }
      }
      if (feasible.empty()) {
        repair_budget(smallest, sample.categoricals, x_n, config.epsilon2, model, y, schema);
        feasible.push_back(std::move(smallest));
      }
      candidates = std::move(feasible);
    }

    double best_q = -std::numeric_limits<double>::infinity();
    std::vector<std::size_t> best_cats = sample.categoricals;
    for (const auto& cand : candidates) {
      std::vector<double> x = assemble(x_n, cand, schema);
      double q = model.loss(x, y);
      if (maha != nullptr && config.lambda > 0.0)
        q -= config.lambda * m_distance_value(*maha, x, x_clean);
      if (q > best_q) {
        best_q = q;
        best_cats = cand;
      }
    }
    result.adv_encoded = assemble(x_n, best_cats, schema);
    result.l0_cat_changes = l0_changes(best_cats, sample.categoricals);
  }

  result.adv_sample = decode(result.adv_encoded, stats, schema);
  result.adv_sample.label = sample.label;
  result.loss = model.loss(result.adv_encoded, y);
  if (maha != nullptr)
    result.m_distance = m_distance_value(*maha, result.adv_encoded, x_clean);
  result.l1_num_perturbation = l1_norm_diff(result.adv_encoded, x_clean, d_n);
  result.success = model.predict(result.adv_encoded) != y;
  result.wall_time_secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

}  // namespace mattack
