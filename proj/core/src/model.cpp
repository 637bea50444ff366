#include "vnca/model.hpp"

namespace vnca {

std::string to_string(Variant v) {
  return v == Variant::doubling ? "doubling" : "nondoubling";
}

std::string to_string(Likelihood l) {
  return l == Likelihood::bernoulli ? "bernoulli" : "logistic_mixture";
}

Variant variant_from_string(const std::string& s) {
  if (s == "doubling") return Variant::doubling;
  if (s == "nondoubling") return Variant::nondoubling;
  throw ContractError("unknown variant '" + s + "'");
}

Likelihood likelihood_from_string(const std::string& s) {
  if (s == "bernoulli") return Likelihood::bernoulli;
  if (s == "logistic_mixture") return Likelihood::logistic_mixture;
  throw ContractError("unknown likelihood '" + s + "'");
}

void ModelConfig::validate() const {
  if (latent < 1) throw ContractError("latent must be >= 1");
  if (img_h < 1 || img_w < 1 || img_c < 1)
    throw ContractError("image dimensions must be positive");
  if (likelihood == Likelihood::bernoulli && img_c != 1)
    throw ContractError("bernoulli likelihood needs 1 image channel, got " +
                        std::to_string(img_c));
  if (likelihood == Likelihood::logistic_mixture && img_c != 3)
    throw ContractError("logistic mixture needs 3 image channels, got " +
                        std::to_string(img_c));
  if (n_mix < 1) throw ContractError("n_mix must be >= 1");
  if (likelihood_channels() > latent)
    throw ContractError("state has " + std::to_string(latent) +
                        " channels but the likelihood reads " +
                        std::to_string(likelihood_channels()));
  if (variant == Variant::doubling) {
    if (k_doublings < 1 || steps_per_phase < 1)
      throw ContractError("doubling variant needs k_doublings >= 1 and "
                          "steps_per_phase >= 1");
    int grown = 2 << k_doublings;  // 2 * 2^K
    if (grown != img_h || grown != img_w)
      throw ContractError("doubling variant grows to " +
                          std::to_string(grown) + "x" + std::to_string(grown) +
                          " but images are " + std::to_string(img_h) + "x" +
                          std::to_string(img_w));
  } else {
    if (t_min < 1 || t_max < t_min)
      throw ContractError("need 1 <= t_min <= t_max");
  }
}

// ---- UpdateNet ----

UpdateNet UpdateNet::create(Kind kind, int channels, int hidden, Rng& rng) {
  UpdateNet u;
  u.kind = kind;
  u.pre = Conv2dLayer::create(channels, hidden, 3, 1, 1, /*bias=*/true, rng);
  if (kind == Kind::residual) {
    for (int i = 0; i < 4; ++i) {
      // Biasless: the surrounding convs carry biases and the skip keeps the
      // block centered, so per-conv offsets add parameters without effect.
      auto c0 = Conv2dLayer::create(hidden, hidden, 1, 1, 0, false, rng);
      auto c1 = Conv2dLayer::create(hidden, hidden, 1, 1, 0, false, rng);
      u.blocks.emplace_back(std::move(c0), std::move(c1));
    }
  }
  u.post = Conv2dLayer::create_zero(hidden, channels, 1, 1, 0, /*bias=*/true);
  return u;
}

Tensor UpdateNet::forward(const Tensor& state) const {
  Tensor h = pre.forward(state);
  if (kind == Kind::residual) {
    for (const auto& [c0, c1] : blocks) {
      h = h + c1.forward(elu(c0.forward(h)));
    }
  } else {
    h = elu(h);
  }
  return post.forward(h);
}

void UpdateNet::collect(std::vector<NamedParam>& out) const {
  pre.collect("update.pre", out);
  for (size_t i = 0; i < blocks.size(); ++i) {
    blocks[i].first.collect("update.block" + std::to_string(i) + ".c0", out);
    blocks[i].second.collect("update.block" + std::to_string(i) + ".c1", out);
  }
  post.collect("update.post", out);
}

std::int64_t UpdateNet::param_count() const {
  std::int64_t n = pre.param_count() + post.param_count();
  for (const auto& [c0, c1] : blocks) n += c0.param_count() + c1.param_count();
  return n;
}

// ---- Encoder ----

Encoder Encoder::create(int img_c, int img_h, int img_w, int latent,
                        Rng& rng) {
  Encoder e;
  e.latent = latent;
  int channels[6] = {img_c, 32, 64, 128, 256, 512};
  int h = img_h, w = img_w;
  for (int i = 0; i < 5; ++i) {
    int stride = i == 0 ? 1 : 2;
    e.convs.push_back(Conv2dLayer::create(channels[i], channels[i + 1], 5,
                                          stride, 2, /*bias=*/true, rng));
    h = (h + 4 - 5) / stride + 1;
    w = (w + 4 - 5) / stride + 1;
    if (h < 1 || w < 1)
      throw ContractError("encoder input " + std::to_string(img_h) + "x" +
                          std::to_string(img_w) + " too small");
  }
  e.fc = LinearLayer::create(512 * h * w, 2 * latent, rng);
  return e;
}

GaussianPosterior Encoder::forward(const Tensor& x) const {
  Tensor h = x;
  for (const auto& c : convs) h = elu(c.forward(h));
  int B = h.dim(0);
  h = reshape(h, {B, int(h.size() / B)});
  Tensor out = fc.forward(h);
  return {slice_dim1(out, 0, latent), slice_dim1(out, latent, latent)};
}

void Encoder::collect(std::vector<NamedParam>& out) const {
  for (size_t i = 0; i < convs.size(); ++i)
    convs[i].collect("encoder.conv" + std::to_string(i), out);
  fc.collect("encoder.fc", out);
}

std::int64_t Encoder::param_count() const {
  std::int64_t n = fc.param_count();
  for (const auto& c : convs) n += c.param_count();
  return n;
}

// ---- VncaModel ----

VncaModel VncaModel::create(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed, "init");
  VncaModel m;
  m.cfg = cfg;
  m.encoder = Encoder::create(cfg.img_c, cfg.img_h, cfg.img_w, cfg.latent, rng);
  auto kind = cfg.variant == Variant::doubling ? UpdateNet::Kind::residual
                                               : UpdateNet::Kind::small;
  m.update = UpdateNet::create(kind, cfg.latent, cfg.update_hidden(), rng);
  return m;
}

std::vector<NamedParam> VncaModel::parameters() const {
  std::vector<NamedParam> out;
  encoder.collect(out);
  update.collect(out);
  return out;
}

std::int64_t VncaModel::param_count() const {
  return encoder.param_count() + update.param_count();
}

GaussianPosterior VncaModel::encode(const Tensor& x) const {
  if (x.ndim() != 4 || x.dim(1) != cfg.img_c || x.dim(2) != cfg.img_h ||
      x.dim(3) != cfg.img_w)
    throw DimensionError("encode: expected [B," + std::to_string(cfg.img_c) +
                         "," + std::to_string(cfg.img_h) + "," +
                         std::to_string(cfg.img_w) + "], got " +
                         shape_str(x.shape()));
  return encoder.forward(x);
}

Tensor VncaModel::nca_step(const Tensor& state) const {
  return state + update.forward(state);
}

namespace {

// Applies the callback; a defined return value replaces the state.
Tensor emit(const GrowthCallback& cb, GrowthEvent ev, int steps_done,
            Tensor state) {
  if (!cb) return state;
  Tensor repl = cb(ev, steps_done, state);
  return repl.defined() ? repl : state;
}

}  // namespace

CellGrid VncaModel::decode_doubling(const Tensor& z,
                                    const GrowthCallback& cb) const {
  if (z.ndim() != 2 || z.dim(1) != cfg.latent)
    throw DimensionError("decode_doubling: z must be [B," +
                         std::to_string(cfg.latent) + "], got " +
                         shape_str(z.shape()));
  int B = z.dim(0);
  // Seed: the sample repeated over a 2x2 grid.
  Tensor state = nearest_double(reshape(z, {B, cfg.latent, 1, 1}));
  int steps_done = 0;
  state = emit(cb, GrowthEvent::seed, steps_done, state);
  for (int phase = 0; phase <= cfg.k_doublings; ++phase) {
    for (int m = 0; m < cfg.steps_per_phase; ++m) {
      state = nca_step(state);
      ++steps_done;
      state = emit(cb, GrowthEvent::step, steps_done, state);
    }
    if (phase < cfg.k_doublings) {
      state = nearest_double(state);
      state = emit(cb, GrowthEvent::doubled, steps_done, state);
    }
  }
  return {state, steps_done};
}

CellGrid VncaModel::decode_nondoubling(const Tensor& z, int steps,
                                       const GrowthCallback& cb) const {
  if (z.ndim() != 2 || z.dim(1) != cfg.latent)
    throw DimensionError("decode_nondoubling: z must be [B," +
                         std::to_string(cfg.latent) + "], got " +
                         shape_str(z.shape()));
  Tensor state = broadcast_spatial(z, cfg.img_h, cfg.img_w);
  state = emit(cb, GrowthEvent::seed, 0, state);
  return decode_from_state({state, 0}, steps, cb);
}

CellGrid VncaModel::decode_from_state(const CellGrid& start, int steps,
                                      const GrowthCallback& cb) const {
  if (steps < 0) throw ContractError("decode_from_state: negative steps");
  Tensor state = start.state;
  int steps_done = start.steps_done;
  for (int t = 0; t < steps; ++t) {
    state = nca_step(state);
    ++steps_done;
    state = emit(cb, GrowthEvent::step, steps_done, state);
  }
  return {state, steps_done};
}

CellGrid VncaModel::decode(const Tensor& z, int steps) const {
  if (cfg.variant == Variant::doubling) return decode_doubling(z);
  if (steps < 0)
    throw ContractError("decode: nondoubling variant needs a step count");
  return decode_nondoubling(z, steps);
}

Tensor VncaModel::likelihood_params(const Tensor& state) const {
  return slice_dim1(state, 0, cfg.likelihood_channels());
}

Tensor VncaModel::logpx(const Tensor& x, const Tensor& params) const {
  if (cfg.likelihood == Likelihood::bernoulli)
    return bernoulli_logpx(x, params);
  return logistic_mixture_logpx(x, params, cfg.n_mix);
}

VncaModel::Recon VncaModel::reconstruct(const Tensor& x, Rng& rng,
                                        int steps) const {
  Recon r;
  r.q = encode(x);
  r.z = reparameterize(r.q, rng);
  if (cfg.variant == Variant::doubling) {
    r.grid = decode_doubling(r.z);
    r.steps = r.grid.steps_done;
  } else {
    int T = steps >= 0 ? steps
                       : int(rng.uniform_int(cfg.t_min, cfg.t_max));
    r.grid = decode_nondoubling(r.z, T);
    r.steps = T;
  }
  r.params = likelihood_params(r.grid.state);
  return r;
}

}  // namespace vnca
