#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <random>
#include <vector>

#include "lorasim/lstm.hpp"

namespace lorasim {

struct FeatureWindow {
  std::uint32_t adapter = 0;
  std::vector<double> counts;  // normalized, most recent last
  double interval_s = 1.0;
};

struct Prediction {
  std::uint32_t adapter = 0;
  double probability = 0.5;  // strictly inside (0, 1)
  double issued_at_ms = 0.0;
};

// Bounded ring of recent training examples; eviction is strictly oldest-first.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {}

  void push(TrainingExample ex);
  std::size_t size() const { return buf_.size(); }
  std::size_t capacity() const { return capacity_; }
  const TrainingExample& at(std::size_t i) const { return buf_[i]; }

  // Uniform sample of `n`: without replacement when the buffer holds at
  // least n examples, with replacement otherwise.
  std::vector<TrainingExample> sample(std::size_t n, std::mt19937_64& rng) const;

 private:
  std::size_t capacity_;
  std::deque<TrainingExample> buf_;
};

struct OnlinePredictorConfig {
  PredictorConfig model;
  double interval_ms = 1000.0;       // count-bucket width
  std::uint32_t train_every = 100;   // observations per incremental step
  std::uint32_t batch_size = 64;
  std::uint32_t replay_capacity = 10000;
};

// Online demand forecaster: accumulates per-adapter access counts into
// fixed intervals, labels each closed interval against the previous window,
// and trains incrementally from a replay buffer every `train_every` requests.
class OnlinePredictor {
 public:
  OnlinePredictor(OnlinePredictorConfig cfg, std::uint64_t seed);

  // Records one access; may trigger one incremental train step.
  void observe(std::uint32_t adapter, double t_ms);

  // Closes every interval that ends at or before t_ms.
  void roll_to(double t_ms);

  // One prediction per known (observed at least once) adapter, adapter order.
  // Windows only change when an interval closes, so results are cached.
  std::vector<Prediction> predict_all(double now_ms);

  // Manual step; std::nullopt when the buffer is empty ("not trained").
  std::optional<double> train_step();

  FeatureWindow window_for(std::uint32_t adapter) const;
  bool known(std::uint32_t adapter) const { return series_[adapter].seen; }
  std::size_t known_count() const { return known_count_; }
  std::uint64_t observed() const { return observed_; }
  std::uint64_t train_steps() const { return train_steps_; }
  double last_loss() const { return last_loss_; }
  std::int64_t current_interval() const { return current_interval_; }

  PredictorModel& model() { return model_; }
  const PredictorModel& model() const { return model_; }
  ReplayBuffer& buffer() { return buffer_; }

 private:
  struct Series {
    std::deque<std::uint32_t> ring;  // raw counts of the last `window` intervals
    double run_max = 0.0;
    std::uint32_t current = 0;  // count in the open interval
    bool seen = false;
  };

  std::vector<double> normalized_window(const Series& s) const;
  void close_interval();

  OnlinePredictorConfig cfg_;
  PredictorModel model_;
  std::vector<Series> series_;
  std::int64_t current_interval_ = 0;
  std::uint64_t observed_ = 0;
  std::uint64_t train_steps_ = 0;
  double last_loss_ = 0.0;
  std::size_t known_count_ = 0;
  ReplayBuffer buffer_;
  std::mt19937_64 rng_;

  std::int64_t cache_interval_ = -1;
  std::size_t cache_known_ = 0;
  std::vector<Prediction> cache_;
};

}  // namespace lorasim
