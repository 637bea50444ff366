#include "vnca/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>

#include "vnca/distributions.hpp"
#include "vnca/training.hpp"

namespace vnca {

namespace {

// [B,...] replicated `times` along the batch axis; plain data.
Tensor repeat0(const Tensor& t, int times) {
  Shape shape = t.shape();
  shape[0] *= times;
  std::vector<float> v;
  v.reserve(size_t(t.size()) * size_t(times));
  for (int i = 0; i < times; ++i)
    v.insert(v.end(), t.data().begin(), t.data().end());
  return Tensor::from_data(std::move(shape), std::move(v));
}

Tensor mixture_mean(const Tensor& params, int L) {
  int B = params.dim(0), H = params.dim(2), W = params.dim(3);
  // Mixture weights.
  std::vector<Tensor> logits(static_cast<size_t>(L));
  for (int l = 0; l < L; ++l) logits[size_t(l)] = slice_dim1(params, l, 1);
  std::vector<Tensor> wts(static_cast<size_t>(L));
  if (L == 1) {
    wts[0] = Tensor::full({B, 1, H, W}, 1.0f);
  } else {
    Tensor pivot = max_elem(logits);
    Tensor se = exp(logits[0] - pivot);
    for (int l = 1; l < L; ++l) se = se + exp(logits[size_t(l)] - pivot);
    for (int l = 0; l < L; ++l) wts[size_t(l)] = exp(logits[size_t(l)] - pivot) / se;
  }
  // Per-component channel means with the coupling chained through them.
  Tensor ec[3];
  for (int l = 0; l < L; ++l) {
    Tensor mr = slice_dim1(params, L + 0 * L + l, 1);
    Tensor mg = slice_dim1(params, L + 1 * L + l, 1);
    Tensor mb = slice_dim1(params, L + 2 * L + l, 1);
    Tensor c0 = tanh(slice_dim1(params, 7 * L + 0 * L + l, 1));
    Tensor c1 = tanh(slice_dim1(params, 7 * L + 1 * L + l, 1));
    Tensor c2 = tanh(slice_dim1(params, 7 * L + 2 * L + l, 1));
    mg = mg + c0 * mr;
    mb = mb + c1 * mr + c2 * mg;
    Tensor comp[3] = {mr, mg, mb};
    for (int c = 0; c < 3; ++c) {
      Tensor term = wts[size_t(l)] * comp[c];
      ec[c] = ec[c].defined() ? ec[c] + term : term;
    }
  }
  // Assemble [B,3,H,W], clamped to the displayable range.
  std::vector<float> out(size_t(std::int64_t(B) * 3 * H * W));
  std::int64_t plane = std::int64_t(H) * W;
  for (int b = 0; b < B; ++b)
    for (int c = 0; c < 3; ++c) {
      const float* src = ec[c].data().data() + std::int64_t(b) * plane;
      float* dst = out.data() + (std::int64_t(b) * 3 + c) * plane;
      for (std::int64_t i = 0; i < plane; ++i)
        dst[i] = std::clamp(src[i], -1.0f, 1.0f);
    }
  return Tensor::from_data({B, 3, H, W}, std::move(out));
}

}  // namespace

Tensor likelihood_mean(const Tensor& params, Likelihood lik, int n_mix) {
  NoGradGuard ng;
  if (lik == Likelihood::bernoulli) return sigmoid(params).detach();
  return mixture_mean(params, n_mix);
}

Tensor likelihood_sample(const Tensor& params, Likelihood lik, int n_mix,
                         Rng& rng) {
  NoGradGuard ng;
  if (lik == Likelihood::bernoulli) {
    Tensor probs = sigmoid(params);
    Tensor out = Tensor::zeros(probs.shape());
    auto& v = out.mutable_data();
    const auto& p = probs.data();
    for (size_t i = 0; i < v.size(); ++i)
      v[i] = rng.uniform() < double(p[i]) ? 1.0f : 0.0f;
    return out;
  }
  int L = n_mix;
  int B = params.dim(0), H = params.dim(2), W = params.dim(3);
  std::int64_t plane = std::int64_t(H) * W;
  const float* pd = params.data().data();
  auto at = [&](int b, int ch, std::int64_t i) {
    return double(pd[(std::int64_t(b) * params.dim(1) + ch) * plane + i]);
  };
  std::vector<float> out(size_t(std::int64_t(B) * 3 * plane));
  for (int b = 0; b < B; ++b) {
    for (std::int64_t i = 0; i < plane; ++i) {
      int pick = 0;
      if (L == 1) {
        rng.uniform();  // keep per-pixel draw count independent of logits
      } else {
        double best = -1e300;
        for (int l = 0; l < L; ++l) {
          double u = std::max(rng.uniform(), 1e-12);
          double g = at(b, l, i) - std::log(-std::log(u));
          if (g > best) {
            best = g;
            pick = l;
          }
        }
      }
      double mu[3], s[3], coef[3];
      for (int c = 0; c < 3; ++c) {
        mu[c] = at(b, L + c * L + pick, i);
        s[c] = std::exp(std::max(at(b, 4 * L + c * L + pick, i), -7.0));
        coef[c] = std::tanh(at(b, 7 * L + c * L + pick, i));
      }
      double px[3];
      for (int c = 0; c < 3; ++c) {
        double m = mu[c];
        if (c == 1) m += coef[0] * px[0];
        if (c == 2) m += coef[1] * px[0] + coef[2] * px[1];
        double u = std::min(std::max(rng.uniform(), 1e-12), 1.0 - 1e-12);
        px[c] = std::clamp(m + s[c] * (std::log(u) - std::log1p(-u)), -1.0,
                           1.0);
      }
      for (int c = 0; c < 3; ++c)
        out[size_t((std::int64_t(b) * 3 + c) * plane + i)] = float(px[c]);
    }
  }
  return Tensor::from_data({B, 3, H, W}, std::move(out));
}

namespace {

const char* event_name(GrowthEvent e) {
  switch (e) {
    case GrowthEvent::seed:
      return "seed";
    case GrowthEvent::step:
      return "step";
    default:
      return "double";
  }
}

void record(GrowthTrace& trace, const char* event, int steps_done,
            const Tensor& state) {
  trace.frames.push_back(
      {event, steps_done, state.shape(), state.data()});
}

// Returns a copy with columns W/2.. of every channel zeroed.
Tensor zero_right_half(const Tensor& state) {
  Tensor out = state.detach();
  int B = out.dim(0), C = out.dim(1), H = out.dim(2), W = out.dim(3);
  int x0 = W / 2;
  float* d = out.mutable_data().data();
  for (std::int64_t bc = 0; bc < std::int64_t(B) * C; ++bc)
    for (int y = 0; y < H; ++y)
      std::memset(d + (bc * H + y) * W + x0, 0,
                  size_t(W - x0) * sizeof(float));
  return out;
}

}  // namespace

GrowthTrace grow(const VncaModel& model, const Tensor& z, int steps) {
  NoGradGuard ng;
  GrowthTrace trace;
  auto cb = [&](GrowthEvent ev, int steps_done, const Tensor& state) {
    record(trace, event_name(ev), steps_done, state);
    return Tensor();
  };
  if (model.cfg.variant == Variant::doubling) {
    model.decode_doubling(z, cb);
  } else {
    model.decode_nondoubling(z, steps < 0 ? model.cfg.t_max : steps, cb);
  }
  return trace;
}

DamageSweep damage_during_growth(const VncaModel& model, const Tensor& z,
                                 std::vector<int> t_list) {
  if (model.cfg.variant != Variant::doubling)
    throw ContractError("damage_during_growth needs the doubling variant");
  if (z.ndim() != 2 || z.dim(0) != 1)
    throw ContractError("damage_during_growth wants a single z row, got " +
                        shape_str(z.shape()));
  NoGradGuard ng;
  if (t_list.empty()) {
    for (int t = 0; t <= model.cfg.total_growth_steps();
         t += model.cfg.steps_per_phase)
      t_list.push_back(t);
  }
  std::set<int> uniq(t_list.begin(), t_list.end());
  for (int t : uniq)
    if (t < 0 || t > model.cfg.total_growth_steps())
      throw ContractError("damage step " + std::to_string(t) +
                          " outside [0," +
                          std::to_string(model.cfg.total_growth_steps()) + "]");
  DamageSweep sweep;
  sweep.t_list.assign(uniq.begin(), uniq.end());
  sweep.c = model.cfg.img_c;
  sweep.h = model.cfg.img_h;
  sweep.w = model.cfg.img_w;
  auto final_image = [&](int damage_t) {
    // Doubling events repeat the current step count, so damage fires on the
    // seed (t = 0) or on a step event, never on the post-double copy.
    auto cb = [&](GrowthEvent ev, int steps_done, const Tensor& state) {
      if (damage_t >= 0 && ev != GrowthEvent::doubled && steps_done == damage_t)
        return zero_right_half(state);
      return Tensor();
    };
    CellGrid grid = model.decode_doubling(z, cb);
    return likelihood_mean(model.likelihood_params(grid.state),
                           model.cfg.likelihood, model.cfg.n_mix);
  };
  Tensor ref = final_image(-1);
  sweep.images = ref.data();
  for (int t : sweep.t_list) {
    Tensor img = final_image(t);
    sweep.images.insert(sweep.images.end(), img.data().begin(),
                        img.data().end());
  }
  return sweep;
}

DamageRecoveryReport damage_recovery(const VncaModel& model, int n, Rng& rng) {
  if (model.cfg.variant != Variant::nondoubling)
    throw ContractError("damage_recovery needs the nondoubling variant");
  if (n < 1) throw ContractError("damage_recovery: n < 1");
  NoGradGuard ng;
  const auto& mc = model.cfg;
  Tensor z = randn({n, mc.latent}, rng);
  CellGrid grown = model.decode_nondoubling(z, mc.t_max);
  CellGrid wounded = damage_square(grown, rng);
  CellGrid healed = model.decode_from_state(wounded, mc.t_max);

  DamageRecoveryReport r;
  r.n = n;
  r.c = mc.img_c;
  r.h = mc.img_h;
  r.w = mc.img_w;
  auto img_of = [&](const CellGrid& g) {
    return likelihood_mean(model.likelihood_params(g.state), mc.likelihood,
                           mc.n_mix);
  };
  Tensor orig = img_of(grown), dmg = img_of(wounded), rec = img_of(healed);
  r.original = orig.data();
  r.damaged = dmg.data();
  r.recovered = rec.data();
  std::int64_t img = std::int64_t(r.c) * r.h * r.w;
  int improved = 0;
  for (int i = 0; i < n; ++i) {
    double sd = 0.0, sr = 0.0;
    for (std::int64_t j = 0; j < img; ++j) {
      double o = r.original[size_t(i * img + j)];
      double d = r.damaged[size_t(i * img + j)] - o;
      double e = r.recovered[size_t(i * img + j)] - o;
      sd += d * d;
      sr += e * e;
    }
    r.mse_damaged.push_back(sd / double(img));
    r.mse_recovered.push_back(sr / double(img));
    if (r.mse_recovered.back() < r.mse_damaged.back()) ++improved;
  }
  r.fraction_recovered = double(improved) / double(n);
  return r;
}

EvalReport evaluate(const VncaModel& model, const Dataset& data, int k,
                    Rng& rng, int chunk, std::int64_t limit) {
  if (k < 1) throw ContractError("evaluate: k < 1");
  if (chunk < 1) chunk = k;
  NoGradGuard ng;
  const auto& mc = model.cfg;
  std::int64_t n = data.count();
  if (limit >= 0) n = std::min(n, limit);
  if (n < 1) throw ContractError("evaluate: empty dataset");

  EvalReport rep;
  rep.n = n;
  rep.k = k;
  double total = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    Tensor x1 = Tensor::from_data({1, mc.img_c, mc.img_h, mc.img_w},
                                  std::vector<float>(
                                      data.image(i),
                                      data.image(i) + data.image_size()));
    GaussianPosterior q1 = model.encode(x1);
    std::vector<double> log_w;
    log_w.reserve(size_t(k));
    int done = 0;
    while (done < k) {
      int c = std::min(chunk, k - done);
      GaussianPosterior qc{repeat0(q1.mu, c), repeat0(q1.logvar, c)};
      Tensor z = reparameterize(qc, rng);
      CellGrid grid = model.cfg.variant == Variant::doubling
                          ? model.decode_doubling(z)
                          : model.decode_nondoubling(z, mc.t_max);
      Tensor xc = repeat0(x1, c);
      Tensor lp = model.logpx(xc, model.likelihood_params(grid.state));
      Tensor prior = log_prior(z);
      Tensor post = log_posterior(z, qc);
      for (int j = 0; j < c; ++j)
        log_w.push_back(double(lp.data()[size_t(j)]) +
                        double(prior.data()[size_t(j)]) -
                        double(post.data()[size_t(j)]));
      done += c;
    }
    double nats = iwae_bound(log_w);
    rep.per_image_nats.push_back(nats);
    total += nats;
  }
  rep.nats = total / double(n);
  rep.bpd = nats_to_bpd(rep.nats, mc.img_h, mc.img_w, mc.img_c);
  return rep;
}

std::vector<float> sample_prior(const VncaModel& model, int n, Rng& rng,
                                SampleMode mode) {
  if (n < 1) throw ContractError("sample_prior: n < 1");
  NoGradGuard ng;
  const auto& mc = model.cfg;
  Tensor z = randn({n, mc.latent}, rng);
  CellGrid grid = model.decode(z, mc.variant == Variant::nondoubling
                                      ? mc.t_max
                                      : -1);
  Tensor params = model.likelihood_params(grid.state);
  Tensor img = mode == SampleMode::mean
                   ? likelihood_mean(params, mc.likelihood, mc.n_mix)
                   : likelihood_sample(params, mc.likelihood, mc.n_mix, rng);
  return img.data();
}

std::vector<float> interpolate(const VncaModel& model, const Tensor& xa,
                               const Tensor& xb, int steps) {
  if (steps < 2) throw ContractError("interpolate: need at least 2 steps");
  NoGradGuard ng;
  const auto& mc = model.cfg;
  Tensor za = model.encode(xa).mu;
  Tensor zb = model.encode(xb).mu;
  std::vector<float> out;
  for (int i = 0; i < steps; ++i) {
    float a = float(i) / float(steps - 1);
    std::vector<float> zv(size_t(mc.latent));
    for (int j = 0; j < mc.latent; ++j)
      zv[size_t(j)] = (1.0f - a) * za.data()[size_t(j)] +
                      a * zb.data()[size_t(j)];
    Tensor z = Tensor::from_data({1, mc.latent}, std::move(zv));
    CellGrid grid = model.decode(z, mc.variant == Variant::nondoubling
                                        ? mc.t_max
                                        : -1);
    Tensor img = likelihood_mean(model.likelihood_params(grid.state),
                                 mc.likelihood, mc.n_mix);
    out.insert(out.end(), img.data().begin(), img.data().end());
  }
  return out;
}

void export_latents(const VncaModel& model, const Dataset& data,
                    const std::string& path, std::int64_t max_rows,
                    std::uint64_t seed) {
  NoGradGuard ng;
  std::int64_t n = data.count();
  if (n < 1) throw ContractError("export_latents: empty dataset");
  std::vector<std::int64_t> pick(static_cast<size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) pick[size_t(i)] = i;
  std::int64_t rows = std::min(max_rows, n);
  if (rows < n) {
    Rng rng(seed, "export");
    for (std::int64_t i = 0; i < rows; ++i) {
      std::int64_t j = rng.uniform_int(i, n - 1);
      std::swap(pick[size_t(i)], pick[size_t(j)]);
    }
    pick.resize(size_t(rows));
    std::sort(pick.begin(), pick.end());
  }

  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path);
  const auto& mc = model.cfg;
  out << "index,label";
  for (int j = 0; j < mc.latent; ++j) out << ",z" << j;
  out << "\n";
  const int batch = 64;
  char buf[32];
  for (std::int64_t lo = 0; lo < std::int64_t(pick.size()); lo += batch) {
    std::int64_t hi = std::min<std::int64_t>(pick.size(), lo + batch);
    int b = int(hi - lo);
    std::vector<float> xs;
    xs.reserve(size_t(b * data.image_size()));
    for (std::int64_t i = lo; i < hi; ++i) {
      const float* p = data.image(pick[size_t(i)]);
      xs.insert(xs.end(), p, p + data.image_size());
    }
    Tensor x = Tensor::from_data({b, mc.img_c, mc.img_h, mc.img_w},
                                 std::move(xs));
    Tensor mu = model.encode(x).mu;
    for (int r = 0; r < b; ++r) {
      std::int64_t idx = pick[size_t(lo + r)];
      int label = data.labels.empty() ? -1 : data.labels[size_t(idx)];
      out << idx << "," << label;
      for (int j = 0; j < mc.latent; ++j) {
        std::snprintf(buf, sizeof buf, "%.6g",
                      double(mu.data()[size_t(r * mc.latent + j)]));
        out << "," << buf;
      }
      out << "\n";
    }
  }
  if (!out) throw FormatError("short write to " + path);
}

}  // namespace vnca
