#include "lorasim/lstm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

namespace lorasim {

namespace {

constexpr double kClamp = 1e-7;

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

Eigen::MatrixXd sigmoid_mat(const Eigen::MatrixXd& x) {
  return x.unaryExpr([](double v) { return sigmoid(v); });
}

double clamped_ce(double p, double y) {
  double q = std::min(1.0 - kClamp, std::max(kClamp, p));
  return -(y * std::log(q) + (1.0 - y) * std::log(1.0 - q));
}

}  // namespace

void PredictorConfig::validate() const {
  if (window < 1) throw ValidationError("predictor window must be >= 1");
  if (hidden < 1) throw ValidationError("hidden units must be >= 1");
  if (layers < 1) throw ValidationError("layers must be >= 1");
  if (num_adapters < 1) throw ValidationError("predictor needs >= 1 adapter");
  if (learning_rate <= 0) throw ValidationError("learning rate must be positive");
}

double cross_entropy(const std::vector<double>& probabilities,
                     const std::vector<double>& labels) {
  if (probabilities.size() != labels.size())
    throw ValidationError("predictions and labels differ in length");
  double total = 0.0;
  for (std::size_t i = 0; i < probabilities.size(); ++i)
    total += clamped_ce(probabilities[i], labels[i]);
  return total;
}

struct PredictorModel::Cache {
  // Per layer, per timestep, H x B.
  std::vector<std::vector<Eigen::MatrixXd>> gi, gf, gg, go, c, tanh_c, h;
  std::vector<Eigen::MatrixXd> x0;  // input_dim x B per timestep
  Eigen::VectorXd probs;
};

PredictorModel::PredictorModel(PredictorConfig cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  input_dim_ = 1 + cfg_.embedding_dim;

  const std::size_t H = cfg_.hidden;
  std::size_t off = 0;
  for (std::uint32_t l = 0; l < cfg_.layers; ++l) {
    std::size_t in = l == 0 ? input_dim_ : H;
    w_off_.push_back(off);
    off += 4 * H * in;
    u_off_.push_back(off);
    off += 4 * H * H;
    b_off_.push_back(off);
    off += 4 * H;
  }
  head_w_off_ = off;
  off += H;
  head_b_off_ = off;
  off += 1;
  emb_off_ = off;
  off += static_cast<std::size_t>(cfg_.embedding_dim) * cfg_.num_adapters;

  theta_.resize(static_cast<Eigen::Index>(off));
  std::mt19937_64 rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(H));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Eigen::Index i = 0; i < theta_.size(); ++i) theta_[i] = dist(rng);

  adam_m_ = Eigen::VectorXd::Zero(theta_.size());
  adam_v_ = Eigen::VectorXd::Zero(theta_.size());
}

Eigen::VectorXd PredictorModel::logits(const std::vector<TrainingExample>& batch,
                                       Cache* cache) const {
  if (batch.empty()) throw ValidationError("empty batch");
  const std::size_t B = batch.size();
  const std::size_t T = cfg_.window;
  const std::size_t H = cfg_.hidden;
  const std::size_t E = cfg_.embedding_dim;

  for (const auto& ex : batch) {
    if (ex.window.size() != T)
      throw ValidationError("window length " + std::to_string(ex.window.size()) +
                            " does not match configured window " + std::to_string(T));
    if (ex.adapter >= cfg_.num_adapters)
      throw ValidationError("adapter index out of range");
  }

  Eigen::Map<const Eigen::MatrixXd> emb(theta_.data() + emb_off_, E, cfg_.num_adapters);

  // Embedding columns are constant across timesteps.
  Eigen::MatrixXd emb_cols(E, B);
  for (std::size_t b = 0; b < B; ++b) emb_cols.col(b) = emb.col(batch[b].adapter);

  if (cache) {
    cache->gi.assign(cfg_.layers, {});
    cache->gf.assign(cfg_.layers, {});
    cache->gg.assign(cfg_.layers, {});
    cache->go.assign(cfg_.layers, {});
    cache->c.assign(cfg_.layers, {});
    cache->tanh_c.assign(cfg_.layers, {});
    cache->h.assign(cfg_.layers, {});
    cache->x0.clear();
  }

  std::vector<Eigen::MatrixXd> layer_in(T);
  for (std::size_t t = 0; t < T; ++t) {
    Eigen::MatrixXd x(input_dim_, B);
    for (std::size_t b = 0; b < B; ++b) x(0, b) = batch[b].window[t];
    x.bottomRows(E) = emb_cols;
    if (cache) cache->x0.push_back(x);
    layer_in[t] = std::move(x);
  }

  for (std::uint32_t l = 0; l < cfg_.layers; ++l) {
    const std::size_t in = l == 0 ? input_dim_ : H;
    Eigen::Map<const Eigen::MatrixXd> W(theta_.data() + w_off_[l], 4 * H, in);
    Eigen::Map<const Eigen::MatrixXd> U(theta_.data() + u_off_[l], 4 * H, H);
    Eigen::Map<const Eigen::VectorXd> bias(theta_.data() + b_off_[l], 4 * H);

    Eigen::MatrixXd h_prev = Eigen::MatrixXd::Zero(H, B);
    Eigen::MatrixXd c_prev = Eigen::MatrixXd::Zero(H, B);
    for (std::size_t t = 0; t < T; ++t) {
      Eigen::MatrixXd z = W * layer_in[t] + U * h_prev;
      z.colwise() += bias;
      Eigen::MatrixXd i = sigmoid_mat(z.middleRows(0, H));
      Eigen::MatrixXd f = sigmoid_mat(z.middleRows(H, H));
      Eigen::MatrixXd g = z.middleRows(2 * H, H).array().tanh().matrix();
      Eigen::MatrixXd o = sigmoid_mat(z.middleRows(3 * H, H));
      Eigen::MatrixXd c_t = f.cwiseProduct(c_prev) + i.cwiseProduct(g);
      Eigen::MatrixXd tc = c_t.array().tanh().matrix();
      Eigen::MatrixXd h_t = o.cwiseProduct(tc);
      if (cache) {
        cache->gi[l].push_back(i);
        cache->gf[l].push_back(f);
        cache->gg[l].push_back(g);
        cache->go[l].push_back(o);
        cache->c[l].push_back(c_t);
        cache->tanh_c[l].push_back(tc);
        cache->h[l].push_back(h_t);
      }
      c_prev = std::move(c_t);
      h_prev = std::move(h_t);
      layer_in[t] = h_prev;  // feeds the next layer
    }
  }

  Eigen::Map<const Eigen::VectorXd> head_w(theta_.data() + head_w_off_, H);
  double head_b = theta_[static_cast<Eigen::Index>(head_b_off_)];
  // layer_in[T-1] now holds the top layer's final hidden state.
  Eigen::VectorXd out = (head_w.transpose() * layer_in[T - 1]).transpose();
  out.array() += head_b;
  return out;
}

Eigen::VectorXd PredictorModel::forward(const std::vector<TrainingExample>& batch) const {
  Eigen::VectorXd z = logits(batch, nullptr);
  return z.unaryExpr([](double v) { return sigmoid(v); });
}

double PredictorModel::predict(std::uint32_t adapter,
                               const std::vector<double>& window) const {
  TrainingExample ex;
  ex.adapter = adapter;
  ex.window = window;
  return forward({ex})[0];
}

double PredictorModel::loss_on(const std::vector<TrainingExample>& batch) const {
  Eigen::VectorXd p = forward(batch);
  double total = 0.0;
  for (std::size_t b = 0; b < batch.size(); ++b) total += clamped_ce(p[b], batch[b].label);
  return total / static_cast<double>(batch.size());
}

Eigen::VectorXd PredictorModel::gradient(const std::vector<TrainingExample>& batch) const {
  const std::size_t B = batch.size();
  const std::size_t T = cfg_.window;
  const std::size_t H = cfg_.hidden;
  const std::size_t E = cfg_.embedding_dim;

  Cache cache;
  Eigen::VectorXd z = logits(batch, &cache);

  Eigen::VectorXd grad = Eigen::VectorXd::Zero(theta_.size());

  // d(mean CE)/dlogit = (p - y) / B.
  Eigen::VectorXd dlogit(B);
  for (std::size_t b = 0; b < B; ++b)
    dlogit[b] = (sigmoid(z[b]) - batch[b].label) / static_cast<double>(B);

  Eigen::Map<const Eigen::VectorXd> head_w(theta_.data() + head_w_off_, H);
  Eigen::Map<Eigen::VectorXd> g_head_w(grad.data() + head_w_off_, H);

  const Eigen::MatrixXd& h_top_last = cache.h[cfg_.layers - 1][T - 1];
  g_head_w = h_top_last * dlogit;
  grad[static_cast<Eigen::Index>(head_b_off_)] = dlogit.sum();

  // dh_ext[t]: gradient arriving at layer l's hidden output from above.
  std::vector<Eigen::MatrixXd> dh_ext(T, Eigen::MatrixXd::Zero(H, B));
  dh_ext[T - 1] = head_w * dlogit.transpose();

  for (int l = static_cast<int>(cfg_.layers) - 1; l >= 0; --l) {
    const std::size_t in = l == 0 ? input_dim_ : H;
    Eigen::Map<const Eigen::MatrixXd> W(theta_.data() + w_off_[l], 4 * H, in);
    Eigen::Map<const Eigen::MatrixXd> U(theta_.data() + u_off_[l], 4 * H, H);
    Eigen::Map<Eigen::MatrixXd> gW(grad.data() + w_off_[l], 4 * H, in);
    Eigen::Map<Eigen::MatrixXd> gU(grad.data() + u_off_[l], 4 * H, H);
    Eigen::Map<Eigen::VectorXd> gb(grad.data() + b_off_[l], 4 * H);

    std::vector<Eigen::MatrixXd> dx_below(T);  // becomes dh_ext of layer l-1

    Eigen::MatrixXd dc_next = Eigen::MatrixXd::Zero(H, B);
    Eigen::MatrixXd dh_carry = Eigen::MatrixXd::Zero(H, B);
    for (int t = static_cast<int>(T) - 1; t >= 0; --t) {
      const auto& i = cache.gi[l][t];
      const auto& f = cache.gf[l][t];
      const auto& g = cache.gg[l][t];
      const auto& o = cache.go[l][t];
      const auto& tc = cache.tanh_c[l][t];

      Eigen::MatrixXd dh = dh_ext[t] + dh_carry;
      Eigen::MatrixXd dO = dh.cwiseProduct(tc);
      Eigen::MatrixXd dc =
          dc_next + dh.cwiseProduct(o).cwiseProduct(
                        (1.0 - tc.array().square()).matrix());
      Eigen::MatrixXd di = dc.cwiseProduct(g);
      Eigen::MatrixXd dg = dc.cwiseProduct(i);
      Eigen::MatrixXd c_prev =
          t > 0 ? cache.c[l][t - 1] : Eigen::MatrixXd::Zero(H, B);
      Eigen::MatrixXd df = dc.cwiseProduct(c_prev);
      dc_next = dc.cwiseProduct(f);

      Eigen::MatrixXd dz(4 * H, B);
      dz.middleRows(0, H) =
          di.cwiseProduct(i).cwiseProduct((1.0 - i.array()).matrix());
      dz.middleRows(H, H) =
          df.cwiseProduct(f).cwiseProduct((1.0 - f.array()).matrix());
      dz.middleRows(2 * H, H) = dg.cwiseProduct((1.0 - g.array().square()).matrix());
      dz.middleRows(3 * H, H) =
          dO.cwiseProduct(o).cwiseProduct((1.0 - o.array()).matrix());

      const Eigen::MatrixXd& x_t =
          l == 0 ? cache.x0[t] : cache.h[l - 1][t];
      Eigen::MatrixXd h_prev =
          t > 0 ? cache.h[l][t - 1] : Eigen::MatrixXd::Zero(H, B);

      gW.noalias() += dz * x_t.transpose();
      gU.noalias() += dz * h_prev.transpose();
      gb.noalias() += dz.rowwise().sum();

      dh_carry = U.transpose() * dz;
      dx_below[t] = W.transpose() * dz;
    }
    if (l > 0) {
      dh_ext = std::move(dx_below);
    } else {
      // Rows 1..E of the input gradient flow into the adapter embeddings.
      Eigen::Map<Eigen::MatrixXd> g_emb(grad.data() + emb_off_, E, cfg_.num_adapters);
      for (std::size_t t = 0; t < T; ++t)
        for (std::size_t b = 0; b < B; ++b)
          g_emb.col(batch[b].adapter) += dx_below[t].block(1, b, E, 1);
    }
  }
  return grad;
}

double PredictorModel::train_step(const std::vector<TrainingExample>& batch) {
  double loss = loss_on(batch);
  Eigen::VectorXd g = gradient(batch);

  ++adam_t_;
  const double b1 = cfg_.adam_beta1, b2 = cfg_.adam_beta2;
  adam_m_ = b1 * adam_m_ + (1.0 - b1) * g;
  adam_v_.array() = b2 * adam_v_.array() + (1.0 - b2) * g.array().square();
  const double mc = 1.0 - std::pow(b1, static_cast<double>(adam_t_));
  const double vc = 1.0 - std::pow(b2, static_cast<double>(adam_t_));
  theta_.array() -= cfg_.learning_rate * (adam_m_.array() / mc) /
                    ((adam_v_.array() / vc).sqrt() + cfg_.adam_eps);
  return loss;
}

void PredictorModel::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write model file: " + path);
  const char magic[4] = {'L', 'S', 'W', '1'};
  out.write(magic, 4);
  std::uint32_t dims[5] = {cfg_.window, cfg_.hidden, cfg_.layers,
                           cfg_.embedding_dim, cfg_.num_adapters};
  out.write(reinterpret_cast<const char*>(dims), sizeof(dims));
  out.write(reinterpret_cast<const char*>(theta_.data()),
            static_cast<std::streamsize>(theta_.size() * sizeof(double)));
}

PredictorModel PredictorModel::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open model file: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || magic[0] != 'L' || magic[1] != 'S' || magic[2] != 'W' || magic[3] != '1')
    throw ParseError("bad model file magic in " + path);
  std::uint32_t dims[5];
  in.read(reinterpret_cast<char*>(dims), sizeof(dims));
  if (!in) throw ParseError("truncated model header in " + path);
  PredictorConfig cfg;
  cfg.window = dims[0];
  cfg.hidden = dims[1];
  cfg.layers = dims[2];
  cfg.embedding_dim = dims[3];
  cfg.num_adapters = dims[4];
  PredictorModel model(cfg, 0);
  in.read(reinterpret_cast<char*>(model.theta_.data()),
          static_cast<std::streamsize>(model.theta_.size() * sizeof(double)));
  if (!in) throw ParseError("truncated model weights in " + path);
  return model;
}

}  // namespace lorasim
