#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lorasim/errors.hpp"

namespace lorasim {

// One labeled sliding window: normalized access counts (most recent last)
// plus the adapter whose identity embedding accompanies every timestep.
struct TrainingExample {
  std::uint32_t adapter = 0;
  std::vector<double> window;  // length = configured window
  double label = 0.0;          // 1 if accessed in the next interval
};

struct PredictorConfig {
  std::uint32_t window = 30;
  std::uint32_t hidden = 64;
  std::uint32_t layers = 2;
  std::uint32_t embedding_dim = 8;
  std::uint32_t num_adapters = 0;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const;
};

// Binary cross-entropy, summed over the batch. Probabilities are clamped to
// [1e-7, 1 - 1e-7] so exact 0/1 inputs stay finite.
double cross_entropy(const std::vector<double>& probabilities,
                     const std::vector<double>& labels);

// Stacked LSTM over count windows with a learned per-adapter embedding
// concatenated to each timestep, followed by an affine head and sigmoid.
// All trainable parameters live in one flat vector; gradients come from
// backpropagation through time and updates from Adam.
class PredictorModel {
 public:
  PredictorModel(PredictorConfig cfg, std::uint64_t seed);

  // Probability per example. Throws ValidationError on window length mismatch.
  Eigen::VectorXd forward(const std::vector<TrainingExample>& batch) const;
  double predict(std::uint32_t adapter, const std::vector<double>& window) const;

  // Mean clamped cross-entropy over the batch (the objective train_step descends).
  double loss_on(const std::vector<TrainingExample>& batch) const;

  // d(mean cross-entropy)/d(theta), analytic.
  Eigen::VectorXd gradient(const std::vector<TrainingExample>& batch) const;

  // One Adam step; returns the pre-update mean loss.
  double train_step(const std::vector<TrainingExample>& batch);

  const PredictorConfig& config() const { return cfg_; }
  Eigen::VectorXd& parameters() { return theta_; }
  const Eigen::VectorXd& parameters() const { return theta_; }
  std::size_t parameter_count() const { return static_cast<std::size_t>(theta_.size()); }

  // Flat little-endian float64 weight file with a shape header.
  void save(const std::string& path) const;
  static PredictorModel load(const std::string& path);

 private:
  struct Cache;
  Eigen::VectorXd logits(const std::vector<TrainingExample>& batch, Cache* cache) const;

  PredictorConfig cfg_;
  std::uint32_t input_dim_;  // 1 + embedding_dim
  // Parameter layout: per layer W(4H x in), U(4H x H), b(4H); head w(H), b;
  // embeddings (E x A).
  std::vector<std::size_t> w_off_, u_off_, b_off_;
  std::size_t head_w_off_ = 0, head_b_off_ = 0, emb_off_ = 0;
  Eigen::VectorXd theta_;

  // Adam state.
  Eigen::VectorXd adam_m_, adam_v_;
  std::uint64_t adam_t_ = 0;
};

}  // namespace lorasim
