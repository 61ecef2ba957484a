#include "mattack/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "mattack/errors.hpp"
#include "mattack/numerics.hpp"
#include "mattack/rng.hpp"

namespace mattack {

MlpClassifier::MlpClassifier(std::size_t input_dim, std::size_t num_classes,
                             std::uint64_t seed) {
  Rng rng(seed);
  auto init = [&](Matrix& m, std::size_t fan_in, std::size_t fan_out) {
    double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (std::size_t i = 0; i < m.rows(); ++i)
      for (std::size_t j = 0; j < m.cols(); ++j) m(i, j) = rng.uniform(-bound, bound);
  };
  w1_ = Matrix(kHidden, input_dim);
  b1_.assign(kHidden, 0.0);
  w2_ = Matrix(num_classes, kHidden);
  b2_.assign(num_classes, 0.0);
  init(w1_, input_dim, kHidden);
  init(w2_, kHidden, num_classes);
}

std::vector<double> MlpClassifier::predict_proba(const std::vector<double>& x) const {
  std::vector<double> h = w1_.mul(x);
  for (std::size_t i = 0; i < h.size(); ++i) h[i] = std::max(0.0, h[i] + b1_[i]);
  std::vector<double> z = w2_.mul(h);
  for (std::size_t i = 0; i < z.size(); ++i) z[i] += b2_[i];
  return numerics::softmax(z);
}

std::size_t MlpClassifier::predict(const std::vector<double>& x) const {
  std::vector<double> p = predict_proba(x);
  std::size_t best = 0;
  for (std::size_t i = 1; i < p.size(); ++i)
    if (p[i] > p[best]) best = i;
  return best;
}

std::pair<double, std::vector<double>> MlpClassifier::loss_and_input_grad(
    const std::vector<double>& x, std::size_t y) const {
  const std::size_t hidden = w1_.rows();
  std::vector<double> pre(hidden), h(hidden);
  std::vector<double> z = b2_;
  for (std::size_t i = 0; i < hidden; ++i) {
    double acc = b1_[i];
    const double* row = w1_.data() + i * w1_.cols();
    for (std::size_t j = 0; j < x.size(); ++j) acc += row[j] * x[j];
    pre[i] = acc;
    h[i] = std::max(0.0, acc);
  }
  for (std::size_t c = 0; c < z.size(); ++c) {
    const double* row = w2_.data() + c * hidden;
    for (std::size_t i = 0; i < hidden; ++i) z[c] += row[i] * h[i];
  }
  double lse = numerics::log_sum_exp(z);
  double loss = lse - z[y];

  // dz = softmax(z) - e_y; backprop through w2, relu, w1.
  std::vector<double> dz(z.size());
  for (std::size_t c = 0; c < z.size(); ++c) dz[c] = std::exp(z[c] - lse);
  dz[y] -= 1.0;
  std::vector<double> dh = w2_.mul_transposed(dz);
  for (std::size_t i = 0; i < hidden; ++i)
    if (pre[i] <= 0.0) dh[i] = 0.0;
  std::vector<double> dx = w1_.mul_transposed(dh);
  return {loss, std::move(dx)};
}

double MlpClassifier::loss(const std::vector<double>& x, std::size_t y) const {
  std::vector<double> h = w1_.mul(x);
  for (std::size_t i = 0; i < h.size(); ++i) h[i] = std::max(0.0, h[i] + b1_[i]);
  std::vector<double> z = w2_.mul(h);
  for (std::size_t i = 0; i < z.size(); ++i) z[i] += b2_[i];
  return numerics::log_sum_exp(z) - z[y];
}

double MlpClassifier::accuracy(const std::vector<std::vector<double>>& inputs,
                               const std::vector<std::size_t>& labels) const {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < inputs.size(); ++i)
    if (predict(inputs[i]) == labels[i]) ++hits;
  return inputs.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(inputs.size());
}

struct MlpTrainer {
  static std::pair<MlpClassifier, TrainReport> run(
      const std::vector<std::vector<double>>& inputs, const std::vector<std::size_t>& labels,
      std::size_t num_classes, const TrainConfig& cfg) {
    if (inputs.empty()) throw UsageError("train: empty dataset");
    if (num_classes < 2) throw UsageError("train: need at least 2 classes");
    if (cfg.epochs < 1 || cfg.batch_size < 1) throw UsageError("train: bad config");

    const std::size_t d = inputs[0].size();
    const std::size_t hidden = MlpClassifier::kHidden;
    MlpClassifier model(d, num_classes, cfg.seed);

    // Flat parameter view for Adam bookkeeping.
    const std::size_t n_params = hidden * d + hidden + num_classes * hidden + num_classes;
    std::vector<double> m_t(n_params, 0.0), v_t(n_params, 0.0), grad(n_params, 0.0);

    auto param = [&](std::size_t p) -> double& {
      if (p < hidden * d) return model.w1_.data()[p];
      p -= hidden * d;
      if (p < hidden) return model.b1_[p];
      p -= hidden;
      if (p < num_classes * hidden) return model.w2_.data()[p];
      p -= num_classes * hidden;
      return model.b2_[p];
    };

    Rng rng(Rng::derive(cfg.seed, 1));
    std::vector<std::size_t> order(inputs.size());
    std::iota(order.begin(), order.end(), 0);

    TrainReport report;
    report.initial_train_loss = mean_loss(model, inputs, labels);

    std::size_t step = 0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
      // Fisher-Yates with our own RNG for determinism.
      for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[rng.below(i)]);

      for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
        std::size_t end = std::min(start + cfg.batch_size, order.size());
        std::fill(grad.begin(), grad.end(), 0.0);
        double inv_b = 1.0 / static_cast<double>(end - start);

        for (std::size_t b = start; b < end; ++b) {
          const auto& x = inputs[order[b]];
          std::size_t y = labels[order[b]];
          std::vector<double> pre(hidden), h(hidden);
          std::vector<double> z = model.b2_;
          for (std::size_t i = 0; i < hidden; ++i) {
            double acc = model.b1_[i];
            const double* row = model.w1_.data() + i * d;
            for (std::size_t j = 0; j < d; ++j) acc += row[j] * x[j];
            pre[i] = acc;
            h[i] = std::max(0.0, acc);
          }
          for (std::size_t c = 0; c < num_classes; ++c) {
            const double* row = model.w2_.data() + c * hidden;
            for (std::size_t i = 0; i < hidden; ++i) z[c] += row[i] * h[i];
          }
          double lse = numerics::log_sum_exp(z);
          std::vector<double> dz(num_classes);
          for (std::size_t c = 0; c < num_classes; ++c) dz[c] = std::exp(z[c] - lse) * inv_b;
          dz[y] -= inv_b;

          double* g_w2 = grad.data() + hidden * d + hidden;
          double* g_b2 = g_w2 + num_classes * hidden;
          for (std::size_t c = 0; c < num_classes; ++c) {
            g_b2[c] += dz[c];
            for (std::size_t i = 0; i < hidden; ++i) g_w2[c * hidden + i] += dz[c] * h[i];
          }
          std::vector<double> dh = model.w2_.mul_transposed(dz);
          double* g_w1 = grad.data();
          double* g_b1 = grad.data() + hidden * d;
          for (std::size_t i = 0; i < hidden; ++i) {
            if (pre[i] <= 0.0) continue;
            g_b1[i] += dh[i];
            for (std::size_t j = 0; j < d; ++j) g_w1[i * d + j] += dh[i] * x[j];
          }
        }

        ++step;
        double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
        double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
        for (std::size_t p = 0; p < n_params; ++p) {
          m_t[p] = cfg.beta1 * m_t[p] + (1.0 - cfg.beta1) * grad[p];
          v_t[p] = cfg.beta2 * v_t[p] + (1.0 - cfg.beta2) * grad[p] * grad[p];
          double update = cfg.learning_rate * (m_t[p] / bc1) /
                          (std::sqrt(v_t[p] / bc2) + cfg.adam_eps);
          double& value = param(p);
          value -= update;
          if (!std::isfinite(value))
            throw NumericError("train: parameters diverged; try a lower learning rate");
        }
      }
    }

    report.final_train_loss = mean_loss(model, inputs, labels);
    report.train_accuracy = model.accuracy(inputs, labels);
    return {std::move(model), report};
  }

  static double mean_loss(const MlpClassifier& model,
                          const std::vector<std::vector<double>>& inputs,
                          const std::vector<std::size_t>& labels) {
    double acc = 0.0;
    for (std::size_t i = 0; i < inputs.size(); ++i) acc += model.loss(inputs[i], labels[i]);
    return acc / static_cast<double>(inputs.size());
  }
};

std::pair<MlpClassifier, TrainReport> MlpClassifier::train(
    const std::vector<std::vector<double>>& inputs, const std::vector<std::size_t>& labels,
    std::size_t num_classes, const TrainConfig& config) {
  return MlpTrainer::run(inputs, labels, num_classes, config);
}

namespace {

constexpr std::uint32_t kMagic = 0x4d4c5031;  // "MLP1"
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ofstream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
std::uint32_t read_u32(std::ifstream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!in) throw DataError("model file truncated");
  return v;
}
void write_f64(std::ofstream& out, const double* p, std::size_t n) {
  out.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
}
void read_f64(std::ifstream& in, double* p, std::size_t n) {
  in.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw DataError("model file truncated");
}

}  // namespace

void MlpClassifier::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write model file: " + path);
  write_u32(out, kMagic);
  write_u32(out, kVersion);
  write_u32(out, static_cast<std::uint32_t>(input_dim()));
  write_u32(out, static_cast<std::uint32_t>(kHidden));
  write_u32(out, static_cast<std::uint32_t>(num_classes()));
  write_f64(out, w1_.data(), w1_.rows() * w1_.cols());
  write_f64(out, b1_.data(), b1_.size());
  write_f64(out, w2_.data(), w2_.rows() * w2_.cols());
  write_f64(out, b2_.data(), b2_.size());
}

MlpClassifier MlpClassifier::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model file: " + path);
  if (read_u32(in) != kMagic) throw DataError("model file: bad magic");
  if (read_u32(in) != kVersion) throw DataError("model file: unsupported version");
  std::uint32_t d = read_u32(in);
  std::uint32_t hidden = read_u32(in);
  std::uint32_t classes = read_u32(in);
  if (hidden != kHidden) throw DataError("model file: unexpected hidden width");
  MlpClassifier model;
  model.w1_ = Matrix(hidden, d);
  model.b1_.assign(hidden, 0.0);
  model.w2_ = Matrix(classes, hidden);
  model.b2_.assign(classes, 0.0);
  read_f64(in, model.w1_.data(), static_cast<std::size_t>(hidden) * d);
  read_f64(in, model.b1_.data(), hidden);
  read_f64(in, model.w2_.data(), static_cast<std::size_t>(classes) * hidden);
  read_f64(in, model.b2_.data(), classes);
  return model;
}

}  // namespace mattack
