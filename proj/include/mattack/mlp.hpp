#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mattack/matrix.hpp"

namespace mattack {

struct TrainConfig {
  std::size_t epochs = 60;
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
};

struct TrainReport {
  double final_train_loss = 0.0;
  double initial_train_loss = 0.0;
  double train_accuracy = 0.0;
};

// Input -> 64 rectified hidden units -> softmax over classes.
class MlpClassifier {
 public:
  static constexpr std::size_t kHidden = 64;

  MlpClassifier() = default;
  MlpClassifier(std::size_t input_dim, std::size_t num_classes, std::uint64_t seed);

  std::size_t input_dim() const { return w1_.cols(); }
  std::size_t num_classes() const { return w2_.rows(); }

  std::vector<double> predict_proba(const std::vector<double>& x) const;
  std::size_t predict(const std::vector<double>& x) const;

  // Cross-entropy of softmax output against class y, plus d(loss)/dx.
  // Accepts relaxed (non-binary) one-hot blocks.
  std::pair<double, std::vector<double>> loss_and_input_grad(const std::vector<double>& x,
                                                             std::size_t y) const;
  double loss(const std::vector<double>& x, std::size_t y) const;

  static std::pair<MlpClassifier, TrainReport> train(const std::vector<std::vector<double>>& inputs,
                                                     const std::vector<std::size_t>& labels,
                                                     std::size_t num_classes,
                                                     const TrainConfig& config);

  double accuracy(const std::vector<std::vector<double>>& inputs,
                  const std::vector<std::size_t>& labels) const;

  void save(const std::string& path) const;
  static MlpClassifier load(const std::string& path);

  const Matrix& w1() const { return w1_; }
  const Matrix& w2() const { return w2_; }
  const std::vector<double>& b1() const { return b1_; }
  const std::vector<double>& b2() const { return b2_; }

 private:
  Matrix w1_;               // hidden x D
  std::vector<double> b1_;  // hidden
  Matrix w2_;               // classes x hidden
  std::vector<double> b2_;  // classes

  friend struct MlpTrainer;
};

}  // namespace mattack
