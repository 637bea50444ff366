#include "vnca/training.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>

namespace vnca {

Adam::Adam(const std::vector<NamedParam>& params, AdamConfig cfg)
    : cfg_(cfg) {
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const auto& p : params) {
    m_.emplace_back(size_t(p.tensor.size()), 0.0f);
    v_.emplace_back(size_t(p.tensor.size()), 0.0f);
  }
}

void Adam::step(const std::vector<NamedParam>& params) {
  if (params.size() != m_.size())
    throw ContractError("Adam: parameter list changed size");
  ++t_;
  float bc1 = float(1.0 - std::pow(double(cfg_.beta1), double(t_)));
  float bc2 = float(1.0 - std::pow(double(cfg_.beta2), double(t_)));
  for (size_t i = 0; i < params.size(); ++i) {
    auto node = params[i].tensor.node();
    if (node->value.size() != m_[i].size())
      throw ContractError("Adam: slot " + std::to_string(i) +
                          " size mismatch");
    float* w = node->value.data();
    const float* g = node->grad.empty() ? nullptr : node->grad.data();
    float* m = m_[i].data();
    float* v = v_[i].data();
    for (size_t j = 0; j < m_[i].size(); ++j) {
      float gj = g ? g[j] : 0.0f;
      m[j] = cfg_.beta1 * m[j] + (1.0f - cfg_.beta1) * gj;
      v[j] = cfg_.beta2 * v[j] + (1.0f - cfg_.beta2) * gj * gj;
      float mhat = m[j] / bc1;
      float vhat = v[j] / bc2;
      w[j] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

float clip_global_norm(const std::vector<NamedParam>& params, float max_norm) {
  if (max_norm <= 0.0f) throw ContractError("clip_global_norm: max_norm <= 0");
  double sq = 0.0;
  for (const auto& p : params) {
    const auto* g = p.tensor.grad();
    if (!g) continue;
    for (float v : *g) sq += double(v) * double(v);
  }
  float norm = float(std::sqrt(sq));
  if (norm > max_norm) {
    float scale = max_norm / norm;
    for (const auto& p : params) {
      auto node = p.tensor.node();
      for (float& v : node->grad) v *= scale;
    }
  }
  return norm;
}

std::string format_metrics(const StepMetrics& m) {
  char buf[192];
  std::snprintf(buf, sizeof buf,
                "step=%lld loss=%.9g logpx=%.9g kl=%.9g grad_norm=%.9g",
                (long long)m.step, m.loss, m.logpx, m.kl, m.grad_norm);
  return buf;
}

namespace {

Tensor batch_tensor(const VncaModel& model, const std::vector<float>& data,
                    int batch) {
  const auto& c = model.cfg;
  Shape shape{batch, c.img_c, c.img_h, c.img_w};
  if (std::int64_t(data.size()) != numel(shape))
    throw DimensionError("batch buffer has " + std::to_string(data.size()) +
                         " values, expected " + shape_str(shape));
  return Tensor::from_data(shape, data);
}

// Shared tail of both step flavors: loss, backward, clip, Adam. Returns true
// when the update was applied.
bool apply_update(VncaModel& model, const Tensor& x, const Tensor& logpx_t,
                  const Tensor& kl_t, Adam& opt, const TrainConfig& cfg,
                  StepMetrics& m) {
  ElboParts parts = elbo(logpx_t, kl_t, cfg.beta);
  Tensor loss = neg(parts.elbo);
  m.loss = loss.item();
  m.logpx = parts.logpx.item();
  m.kl = parts.kl.item();
  auto params = model.parameters();
  if (!std::isfinite(m.loss)) {
    m.skipped = true;
    return false;
  }
  for (auto& p : params) p.tensor.zero_grad();
  backward(loss);
  m.grad_norm = clip_global_norm(params, cfg.clip);
  if (!std::isfinite(m.grad_norm)) {
    m.skipped = true;
    return false;
  }
  opt.step(params);
  return true;
}

void damage_one(float* state, int channels, int h, int w, Rng& rng) {
  int y0 = int(rng.uniform_int(0, h / 2));
  int x0 = int(rng.uniform_int(0, w / 2));
  for (int c = 0; c < channels; ++c) {
    float* plane = state + std::int64_t(c) * h * w;
    for (int y = y0; y < y0 + h / 2; ++y)
      std::memset(plane + std::int64_t(y) * w + x0, 0,
                  size_t(w / 2) * sizeof(float));
  }
}

}  // namespace

StepMetrics train_step(VncaModel& model, const std::vector<float>& batch_x,
                       int batch, Adam& opt, const TrainConfig& cfg,
                       Rng& rng) {
  StepMetrics m;
  Tensor x = batch_tensor(model, batch_x, batch);
  auto recon = model.reconstruct(x, rng);
  Tensor logpx_t = model.logpx(x, recon.params);
  Tensor kl_t = kl_std_normal(recon.q);
  apply_update(model, x, logpx_t, kl_t, opt, cfg, m);
  return m;
}

StepMetrics pool_damage_step(VncaModel& model, std::vector<float> batch_x,
                             int batch, Pool& pool, Adam& opt,
                             const TrainConfig& cfg, Rng& rng) {
  if (model.cfg.variant != Variant::nondoubling)
    throw ContractError("pool training requires the nondoubling variant");
  if (batch % 4 != 0)
    throw ContractError("pool training needs batch divisible by 4, got " +
                        std::to_string(batch));
  StepMetrics m;
  const auto& mc = model.cfg;
  std::int64_t img = mc.img_c * std::int64_t(mc.img_h) * mc.img_w;
  std::int64_t cell = mc.latent * std::int64_t(mc.img_h) * mc.img_w;

  // Pick k pool entries without replacement; copy them so damage never
  // touches the stored originals.
  int k = int(std::min<std::int64_t>(batch / 2,
                                     std::int64_t(pool.entries.size())));
  std::vector<PoolEntry> picked;
  if (k > 0) {
    std::vector<std::int64_t> avail(pool.entries.size());
    for (size_t i = 0; i < avail.size(); ++i) avail[i] = std::int64_t(i);
    for (int i = 0; i < k; ++i) {
      std::int64_t j =
          rng.uniform_int(i, std::int64_t(avail.size()) - 1);
      std::swap(avail[size_t(i)], avail[size_t(j)]);
      picked.push_back(pool.entries[size_t(avail[size_t(i)])]);
    }
    // Replace the last k batch rows with the pooled inputs.
    for (int i = 0; i < k; ++i)
      std::memcpy(batch_x.data() + (batch - k + i) * img,
                  picked[size_t(i)].x.data(), size_t(img) * sizeof(float));
    // Damage the first k/2 of the pooled states.
    for (int i = 0; i < k / 2; ++i)
      damage_one(picked[size_t(i)].state.data(), mc.latent, mc.img_h,
                 mc.img_w, rng);
  }

  Tensor x = batch_tensor(model, batch_x, batch);
  GaussianPosterior q = model.encode(x);
  Tensor z = reparameterize(q, rng);
  int T = int(rng.uniform_int(mc.t_min, mc.t_max));

  // Fresh rows grow from their sampled z; pooled rows continue from their
  // stored states (gradients do not flow into earlier growth).
  Tensor state0;
  if (k > 0) {
    Tensor fresh = broadcast_spatial(slice_dim0(z, 0, batch - k), mc.img_h,
                                     mc.img_w);
    std::vector<float> pooled(size_t(std::int64_t(k) * cell));
    for (int i = 0; i < k; ++i)
      std::memcpy(pooled.data() + std::int64_t(i) * cell,
                  picked[size_t(i)].state.data(),
                  size_t(cell) * sizeof(float));
    Tensor pooled_t = Tensor::from_data(
        {k, mc.latent, mc.img_h, mc.img_w}, std::move(pooled));
    state0 = concat_dim0({fresh, pooled_t});
  } else {
    state0 = broadcast_spatial(z, mc.img_h, mc.img_w);
  }

  CellGrid grid = model.decode_from_state({state0, 0}, T);
  Tensor logpx_t = model.logpx(x, model.likelihood_params(grid.state));
  Tensor kl_t = kl_std_normal(q);
  bool applied = apply_update(model, x, logpx_t, kl_t, opt, cfg, m);
  if (!applied) return m;  // skip side effects along with the update

  // Append every sample's final state, shuffle, truncate.
  const auto& final_state = grid.state.data();
  for (int i = 0; i < batch; ++i) {
    PoolEntry e;
    e.x.assign(batch_x.begin() + i * img, batch_x.begin() + (i + 1) * img);
    e.state.assign(final_state.begin() + std::int64_t(i) * cell,
                   final_state.begin() + std::int64_t(i + 1) * cell);
    pool.entries.push_back(std::move(e));
  }
  for (std::int64_t i = std::int64_t(pool.entries.size()) - 1; i > 0; --i) {
    std::int64_t j = rng.uniform_int(0, i);
    std::swap(pool.entries[size_t(i)], pool.entries[size_t(j)]);
  }
  if (std::int64_t(pool.entries.size()) > pool.capacity)
    pool.entries.resize(size_t(pool.capacity));
  return m;
}

CellGrid damage_square(const CellGrid& grid, Rng& rng) {
  const Tensor& s = grid.state;
  if (s.ndim() != 4)
    throw DimensionError("damage_square: state must be [B,Z,H,W], got " +
                         shape_str(s.shape()));
  Tensor out = s.detach();
  int B = s.dim(0), Z = s.dim(1), H = s.dim(2), W = s.dim(3);
  for (int b = 0; b < B; ++b)
    damage_one(out.mutable_data().data() + std::int64_t(b) * Z * H * W, Z, H,
               W, rng);
  return {out, grid.steps_done};
}

Trainer::Trainer(VncaModel& model, const Dataset& data, TrainConfig cfg,
                 std::uint64_t seed, bool use_pool)
    : model_(model),
      data_(data),
      cfg_(cfg),
      use_pool_(use_pool),
      rng_(seed, "train"),
      batcher_(data.count(), cfg.batch, seed),
      opt_(model.parameters(), cfg.adam) {
  pool_.capacity = cfg.pool_capacity;
  if (use_pool_ && model.cfg.variant != Variant::nondoubling)
    throw ContractError("pool training requires the nondoubling variant");
  if (data.c != model.cfg.img_c || data.h != model.cfg.img_h ||
      data.w != model.cfg.img_w)
    throw ContractError("dataset is " + std::to_string(data.c) + "x" +
                        std::to_string(data.h) + "x" + std::to_string(data.w) +
                        " but the model expects " +
                        std::to_string(model.cfg.img_c) + "x" +
                        std::to_string(model.cfg.img_h) + "x" +
                        std::to_string(model.cfg.img_w));
}

StepMetrics Trainer::step() {
  auto idx = batcher_.next();
  auto xbuf = gather(data_, idx);
  StepMetrics m =
      use_pool_
          ? pool_damage_step(model_, std::move(xbuf), cfg_.batch, pool_, opt_,
                             cfg_, rng_)
          : train_step(model_, xbuf, cfg_.batch, opt_, cfg_, rng_);
  m.step = ++global_step_;
  return m;
}

void Trainer::restore(std::int64_t global_step, std::uint64_t rng_counter) {
  global_step_ = global_step;
  rng_.set_counter(rng_counter);
  batcher_.skip_to(global_step);
  // The checkpoint stores no separate update count; a resumed run counts the
  // completed steps as applied updates (skipped steps are rare and benign).
  opt_.set_t(global_step);
}

}  // namespace vnca
