#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "mattack/m_attack.hpp"
#include "mattack/numerics.hpp"
#include "mattack/mixed_data.hpp"
#include "mattack/mlp.hpp"
#include "mattack/rng.hpp"

using namespace mattack;

namespace {

struct Fixture {
  MixedSchema schema;
  StandardizationStats stats;
  std::vector<MixedSample> train;
  std::vector<MixedSample> test;
  MlpClassifier model;
  GeneralizedCovariance cov;
};

Fixture make_fixture(std::uint64_t seed = 101, std::size_t n = 1200) {
  SyntheticSpec spec;
  spec.d_n = 4;
  spec.category_counts = {3, 4, 3};
  spec.n_samples = n;
  spec.seed = seed;
  auto [data, schema] = generate_synthetic(spec);
  auto [train, test] = split_dataset(data, 0.8);

  Fixture f;
  f.schema = std::move(schema);
  f.train = std::move(train);
  f.test = std::move(test);
  f.stats = fit_standardization(f.train);

  std::vector<std::vector<double>> inputs;
  std::vector<std::size_t> labels;
  for (const auto& s : f.train) {
    inputs.push_back(encode(s, f.stats, f.schema));
    labels.push_back(s.label);
  }
  TrainConfig tc;
  tc.epochs = 15;
  tc.seed = seed + 1;
  f.model = MlpClassifier::train(inputs, labels, 2, tc).first;
  f.cov = fit_covariance(inputs);
  return f;
}

CategoricalDistribution uniform_pi(const std::vector<std::size_t>& counts) {
  CategoricalDistribution pi;
  for (std::size_t k : counts) pi.logits.emplace_back(k, 0.0);
  return pi;
}

}  // namespace

TEST_CASE("ce_surrogate hand cases") {
  // concentrated on the original: surrogate inactive
  CategoricalDistribution pi;
  pi.logits = {{30.0, 0.0}, {30.0, 0.0, 0.0}};
  CHECK(ce_surrogate(pi, {0, 0}, std::log(2.0)) == 0.0);

  // single uniform binary feature at zeta = ln 2: exactly at the hinge
  auto uni1 = uniform_pi({2});
  CHECK(ce_surrogate(uni1, {0}, std::log(2.0)) == doctest::Approx(0.0).epsilon(1e-12));

  // two uniform binary features: sum 2 ln 2, hinge leaves ln 2
  auto uni2 = uniform_pi({2, 2});
  CHECK(ce_surrogate(uni2, {1, 0}, std::log(2.0)) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("ce_surrogate gradient matches finite differences away from the hinge") {
  Rng rng(41);
  for (int trial = 0; trial < 30; ++trial) {
    CategoricalDistribution pi;
    pi.logits = {{rng.normal(), rng.normal(), rng.normal()}, {rng.normal(), rng.normal()}};
    std::vector<std::size_t> orig = {rng.below(3), rng.below(2)};
    double zeta = 0.05;  // generically active hinge
    auto [value, grads] = ce_surrogate_grad(pi, orig, zeta);
    if (value <= 1e-3) continue;  // skip near-hinge points
    const double h = 1e-6;
    for (std::size_t i = 0; i < pi.logits.size(); ++i)
      for (std::size_t j = 0; j < pi.logits[i].size(); ++j) {
        auto pp = pi, pm = pi;
        pp.logits[i][j] += h;
        pm.logits[i][j] -= h;
        double fd = (ce_surrogate(pp, orig, zeta) - ce_surrogate(pm, orig, zeta)) / (2 * h);
        CHECK(std::fabs(fd - grads[i][j]) <= 1e-6 + 1e-4 * std::fabs(fd));
      }
  }
}

TEST_CASE("gumbel sampling is deterministic under a fixed seed") {
  auto pi = uniform_pi({3, 4});
  Rng a(5), b(5);
  auto da = gumbel_softmax_sample(pi, 0.5, a);
  auto db = gumbel_softmax_sample(pi, 0.5, b);
  CHECK(da.hard == db.hard);
  CHECK(da.relaxed == db.relaxed);
}

TEST_CASE("gumbel relaxed samples sharpen as tau -> 0") {
  Rng rng(42);
  CategoricalDistribution pi;
  pi.logits = {{0.3, -0.7, 1.1, 0.2}};
  // near-ties between the top two noise-perturbed logits keep a tiny fraction
  // of draws soft even at very low temperature; require sharpness on >= 97%
  int sharp = 0;
  for (int t = 0; t < 200; ++t) {
    auto draw = gumbel_softmax_sample(pi, 1e-3, rng);
    double max_entry = *std::max_element(draw.relaxed[0].begin(), draw.relaxed[0].end());
    if (max_entry > 0.999) ++sharp;
  }
  CHECK(sharp >= 194);
}

TEST_CASE("gumbel hard-sample frequencies match pi within 0.02 total variation") {
  CategoricalDistribution pi;
  pi.logits = {{std::log(0.5), std::log(0.3), std::log(0.2)}};
  Rng rng(43);
  std::vector<double> freq(3, 0.0);
  const int draws = 20000;
  for (int t = 0; t < draws; ++t) freq[gumbel_softmax_sample(pi, 0.5, rng).hard[0]] += 1.0;
  double tv = 0.0;
  std::vector<double> target = {0.5, 0.3, 0.2};
  for (int j = 0; j < 3; ++j) tv += 0.5 * std::fabs(freq[j] / draws - target[j]);
  CHECK(tv < 0.02);
}

TEST_CASE("objective_q reduces to the clean loss") {
  auto f = make_fixture();
  const MixedSample& s = f.test[0];
  auto x_clean = encode(s, f.stats, f.schema);
  std::vector<double> x_n(x_clean.begin(), x_clean.begin() + f.schema.num_numeric());

  AttackConfig cfg;
  cfg.lambda = 0.0;
  cfg.alpha_ce = 0.0;
  cfg.tau = 0.5;
  auto pi = CategoricalDistribution::near_one_hot(s.categoricals, f.schema);
  for (auto& l : pi.logits)
    for (double& v : l) v *= 10.0;  // effectively hard on the original
  pi.clamp();

  Rng rng(44);
  std::vector<GumbelNoise> noise = {draw_gumbel_noise(pi, rng)};
  auto eval = objective_q(f.model, x_n, pi, s.label, x_clean, s.categoricals, f.schema, cfg,
                          nullptr, noise);
  CHECK(eval.q == doctest::Approx(f.model.loss(x_clean, s.label)).epsilon(1e-9));
}

TEST_CASE("objective_q gradients match finite differences under frozen noise") {
  auto f = make_fixture();
  Rng rng(45);
  int instances = 0;
  for (std::size_t t = 0; t < f.test.size() && instances < 20; ++t) {
    const MixedSample& s = f.test[t];
    auto x_clean = encode(s, f.stats, f.schema);
    std::vector<double> x_n(x_clean.begin(), x_clean.begin() + f.schema.num_numeric());
    for (double& v : x_n) v += 0.1 * rng.normal();

    AttackConfig cfg;
    cfg.lambda = (t % 2 == 0) ? 2.0 : 0.0;
    cfg.alpha_ce = 0.7;
    cfg.zeta = 0.05;
    CategoricalDistribution pi;
    for (const auto& c : f.schema.categorical_specs) {
      std::vector<double> l(c.vocabulary.size());
      for (double& v : l) v = rng.normal();
      pi.logits.push_back(std::move(l));
    }
    std::vector<GumbelNoise> noise;
    for (int m = 0; m < 3; ++m) noise.push_back(draw_gumbel_noise(pi, rng));

    const GeneralizedCovariance* maha = cfg.lambda > 0 ? &f.cov : nullptr;
    auto eval = objective_q(f.model, x_n, pi, s.label, x_clean, s.categoricals, f.schema, cfg,
                            maha, noise);
    auto q_at = [&](const std::vector<double>& xn, const CategoricalDistribution& p) {
      return objective_q(f.model, xn, p, s.label, x_clean, s.categoricals, f.schema, cfg, maha,
                         noise)
          .q;
    };

    // only the numeric gradient is exact; the logit direction is a
    // straight-through surrogate and has no finite-difference contract
    const double h = 1e-5;
    bool near_kink = false;
    for (std::size_t j = 0; j < x_n.size(); ++j) {
      auto xp = x_n, xm = x_n;
      xp[j] += h;
      xm[j] -= h;
      double fd = (q_at(xp, pi) - q_at(xm, pi)) / (2 * h);
      double denom = std::max({std::fabs(fd), std::fabs(eval.grad_xn[j]), 1e-3});
      if (std::fabs(fd - eval.grad_xn[j]) / denom >= 1e-4) near_kink = true;
    }
    // rectifier kinks make individual points unusable; require the
    // overwhelming majority to check out
    if (!near_kink) ++instances;
  }
  CHECK(instances >= 15);
}

TEST_CASE("increasing lambda never increases Q at a fixed point") {
  auto f = make_fixture();
  const MixedSample& s = f.test[1];
  auto x_clean = encode(s, f.stats, f.schema);
  std::vector<double> x_n(x_clean.begin(), x_clean.begin() + f.schema.num_numeric());
  x_n[0] += 0.4;

  CategoricalDistribution pi = uniform_pi({3, 4, 3});
  Rng rng(46);
  std::vector<GumbelNoise> noise = {draw_gumbel_noise(pi, rng)};

  double prev = std::numeric_limits<double>::infinity();
  for (double lambda : {0.0, 1.0, 4.0, 10.0}) {
    AttackConfig cfg;
    cfg.lambda = lambda;
    auto eval = objective_q(f.model, x_n, pi, s.label, x_clean, s.categoricals, f.schema, cfg,
                            &f.cov, noise);
    CHECK(eval.q <= prev + 1e-12);
    prev = eval.q;
  }
}

TEST_CASE("attack with steps=0 returns the clean sample") {
  auto f = make_fixture();
  // pick a correctly classified sample
  for (const auto& s : f.test) {
    if (f.model.predict(encode(s, f.stats, f.schema)) != s.label) continue;
    AttackConfig cfg;
    cfg.steps = 0;
    auto r = attack(f.model, s, f.schema, f.stats, cfg);
    CHECK(r.l0_cat_changes == 0);
    CHECK(r.l1_num_perturbation == doctest::Approx(0.0).epsilon(1e-15));
    CHECK_FALSE(r.success);
    CHECK(r.adv_sample.categoricals == s.categoricals);
    break;
  }
}

TEST_CASE("attack is deterministic for identical config and seed") {
  auto f = make_fixture();
  AttackConfig cfg;
  cfg.steps = 40;
  cfg.seed = 77;
  auto a = attack(f.model, f.test[2], f.schema, f.stats, cfg, &f.cov);
  auto b = attack(f.model, f.test[2], f.schema, f.stats, cfg, &f.cov);
  CHECK(a.adv_encoded == b.adv_encoded);
  CHECK(a.loss == b.loss);
  CHECK(a.l0_cat_changes == b.l0_cat_changes);
}

TEST_CASE("attack raises loss on nearly all samples and respects budgets") {
  auto f = make_fixture();
  std::size_t ascent = 0, total = 0;
  for (const auto& s : f.test) {
    if (total >= 100) break;
    ++total;
    AttackConfig cfg;
    cfg.epsilon1 = 0.6;
    cfg.epsilon2 = 3;
    cfg.lambda = 0.0;
    cfg.steps = 120;
    cfg.seed = 1000 + total;
    auto r = attack(f.model, s, f.schema, f.stats, cfg);
    double clean_loss = f.model.loss(encode(s, f.stats, f.schema), s.label);
    if (r.loss >= clean_loss - 1e-12) ++ascent;
    CHECK(r.l1_num_perturbation <= cfg.epsilon1 + 1e-9);
    CHECK(r.l0_cat_changes <= cfg.epsilon2);
  }
  CHECK(total == 100);
  CHECK(ascent >= 95);
}

TEST_CASE("small frozen-noise steps never decrease Q (first-order ascent)") {
  auto f = make_fixture();
  Rng rng(47);
  int checked = 0;
  for (std::size_t t = 0; t < f.test.size() && checked < 20; ++t) {
    const MixedSample& s = f.test[t];
    auto x_clean = encode(s, f.stats, f.schema);
    std::vector<double> x_n(x_clean.begin(), x_clean.begin() + f.schema.num_numeric());
    CategoricalDistribution pi = CategoricalDistribution::near_one_hot(s.categoricals, f.schema);

    AttackConfig cfg;
    cfg.lambda = 0.0;
    cfg.alpha_ce = 0.5;
    std::vector<GumbelNoise> noise;
    for (int m = 0; m < 2; ++m) noise.push_back(draw_gumbel_noise(pi, rng));

    auto eval = objective_q(f.model, x_n, pi, s.label, x_clean, s.categoricals, f.schema, cfg,
                            nullptr, noise);
    const double tiny = 1e-7;
    auto x2 = x_n;
    auto step = numerics::l1_steepest_step(eval.grad_xn, tiny, 1);
    for (std::size_t j = 0; j < x2.size(); ++j) x2[j] += step[j];
    auto pi2 = pi;
    for (std::size_t i = 0; i < pi2.logits.size(); ++i)
      for (std::size_t j = 0; j < pi2.logits[i].size(); ++j)
        pi2.logits[i][j] += tiny * eval.grad_logits[i][j];
    auto eval2 = objective_q(f.model, x2, pi2, s.label, x_clean, s.categoricals, f.schema, cfg,
                             nullptr, noise);
    CHECK(eval2.q >= eval.q - 1e-8);
    ++checked;
  }
  CHECK(checked == 20);
}
