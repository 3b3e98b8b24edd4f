#include "lorasim/predictor.hpp"

#include <algorithm>
#include <cmath>

namespace lorasim {

namespace {
// Predictions are clamped strictly inside (0, 1); sigmoid saturates to
// exactly 1.0 in double beyond ~logit 37.
constexpr double kProbEps = 1e-12;
}  // namespace

void ReplayBuffer::push(TrainingExample ex) {
  if (capacity_ == 0) return;
  if (buf_.size() == capacity_) buf_.pop_front();
  buf_.push_back(std::move(ex));
}

std::vector<TrainingExample> ReplayBuffer::sample(std::size_t n,
                                                  std::mt19937_64& rng) const {
  std::vector<TrainingExample> out;
  if (buf_.empty() || n == 0) return out;
  out.reserve(n);
  if (buf_.size() >= n) {
    // Partial Fisher-Yates over indices: uniform without replacement.
    std::vector<std::size_t> idx(buf_.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    for (std::size_t i = 0; i < n; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
      std::swap(idx[i], idx[pick(rng)]);
      out.push_back(buf_[idx[i]]);
    }
  } else {
    std::uniform_int_distribution<std::size_t> pick(0, buf_.size() - 1);
    for (std::size_t i = 0; i < n; ++i) out.push_back(buf_[pick(rng)]);
  }
  return out;
}

OnlinePredictor::OnlinePredictor(OnlinePredictorConfig cfg, std::uint64_t seed)
    : cfg_(cfg),
      model_(cfg.model, seed),
      series_(cfg.model.num_adapters),
      buffer_(cfg.replay_capacity),
      rng_(seed ^ 0xA5A5A5A5ull) {
  if (cfg_.interval_ms <= 0) throw ValidationError("interval_ms must be positive");
  if (cfg_.train_every == 0) throw ValidationError("train_every must be >= 1");
  if (cfg_.batch_size == 0) throw ValidationError("batch_size must be >= 1");
}

std::vector<double> OnlinePredictor::normalized_window(const Series& s) const {
  const std::size_t w = cfg_.model.window;
  std::vector<double> out(w, 0.0);
  const double denom = std::max(1.0, s.run_max);
  std::size_t pad = w - s.ring.size();
  for (std::size_t i = 0; i < s.ring.size(); ++i)
    out[pad + i] = static_cast<double>(s.ring[i]) / denom;
  return out;
}

void OnlinePredictor::close_interval() {
  const std::size_t w = cfg_.model.window;
  for (std::uint32_t a = 0; a < series_.size(); ++a) {
    Series& s = series_[a];
    if (!s.seen) continue;
    TrainingExample ex;
    ex.adapter = a;
    ex.window = normalized_window(s);  // history before this interval
    ex.label = s.current > 0 ? 1.0 : 0.0;
    buffer_.push(std::move(ex));

    s.ring.push_back(s.current);
    if (s.ring.size() > w) s.ring.pop_front();
    s.run_max = std::max(s.run_max, static_cast<double>(s.current));
    s.current = 0;
  }
  ++current_interval_;
}

void OnlinePredictor::roll_to(double t_ms) {
  auto target = static_cast<std::int64_t>(std::floor(t_ms / cfg_.interval_ms));
  while (current_interval_ < target) close_interval();
}

void OnlinePredictor::observe(std::uint32_t adapter, double t_ms) {
  if (adapter >= series_.size())
    throw ValidationError("adapter index out of range in observe()");
  roll_to(t_ms);
  Series& s = series_[adapter];
  if (!s.seen) {
    s.seen = true;  // new series starts with zero history
    ++known_count_;
  }
  ++s.current;
  ++observed_;
  if (observed_ % cfg_.train_every == 0) train_step();
}

std::optional<double> OnlinePredictor::train_step() {
  if (buffer_.size() == 0) return std::nullopt;
  auto batch = buffer_.sample(cfg_.batch_size, rng_);
  last_loss_ = model_.train_step(batch);
  ++train_steps_;
  cache_interval_ = -1;  // weights changed
  return last_loss_;
}

std::vector<Prediction> OnlinePredictor::predict_all(double now_ms) {
  roll_to(now_ms);
  if (known_count_ == 0) return {};
  if (cache_interval_ == current_interval_ && cache_known_ == known_count_) {
    auto out = cache_;
    for (auto& p : out) p.issued_at_ms = now_ms;
    return out;
  }

  std::vector<TrainingExample> batch;
  batch.reserve(known_count_);
  std::vector<std::uint32_t> ids;
  ids.reserve(known_count_);
  for (std::uint32_t a = 0; a < series_.size(); ++a) {
    if (!series_[a].seen) continue;
    TrainingExample ex;
    ex.adapter = a;
    ex.window = normalized_window(series_[a]);
    batch.push_back(std::move(ex));
    ids.push_back(a);
  }
  Eigen::VectorXd probs = model_.forward(batch);

  std::vector<Prediction> out(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out[i].adapter = ids[i];
    out[i].probability =
        std::min(1.0 - kProbEps, std::max(kProbEps, probs[static_cast<Eigen::Index>(i)]));
    out[i].issued_at_ms = now_ms;
  }
  cache_ = out;
  cache_interval_ = current_interval_;
  cache_known_ = known_count_;
  return out;
}

FeatureWindow OnlinePredictor::window_for(std::uint32_t adapter) const {
  if (adapter >= series_.size())
    throw ValidationError("adapter index out of range in window_for()");
  FeatureWindow fw;
  fw.adapter = adapter;
  fw.counts = normalized_window(series_[adapter]);
  fw.interval_s = cfg_.interval_ms / 1000.0;
  return fw;
}

}  // namespace lorasim
