#include "vnca/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace vnca {

namespace {

constexpr float kLn2Pi = 1.8378770664093453f;  // log(2*pi)

void check_posterior(const GaussianPosterior& q) {
  if (q.mu.shape() != q.logvar.shape() || q.mu.ndim() != 2)
    throw DimensionError("posterior mu/logvar must both be [B,Z], got " +
                         shape_str(q.mu.shape()) + " and " +
                         shape_str(q.logvar.shape()));
}

}  // namespace

Tensor kl_std_normal(const GaussianPosterior& q) {
  check_posterior(q);
  Tensor t = square(q.mu) + exp(q.logvar) - q.logvar - 1.0f;
  return mul_scalar(sum_samplewise(t), 0.5f);
}

Tensor reparameterize(const GaussianPosterior& q, Rng& rng) {
  check_posterior(q);
  Tensor eps = randn(q.mu.shape(), rng);
  return q.mu + exp(mul_scalar(q.logvar, 0.5f)) * eps;
}

Tensor bernoulli_logpx(const Tensor& x, const Tensor& logits) {
  if (x.shape() != logits.shape())
    throw DimensionError("bernoulli_logpx: x " + shape_str(x.shape()) +
                         " vs logits " + shape_str(logits.shape()));
  for (float v : x.data())
    if (v != 0.0f && v != 1.0f)
      throw ContractError("bernoulli_logpx: x contains non-binary value " +
                          std::to_string(v));
  // log p = x*l - log(1 + e^l), summed per sample
  return sum_samplewise(x * logits - softplus(logits));
}

Tensor logistic_mixture_logpx(const Tensor& x, const Tensor& params,
                              int n_mix) {
  if (x.ndim() != 4 || x.dim(1) != 3)
    throw DimensionError("logistic_mixture_logpx: x must be [B,3,H,W], got " +
                         shape_str(x.shape()));
  if (n_mix < 1) throw ContractError("logistic_mixture_logpx: n_mix < 1");
  int L = n_mix;
  if (params.ndim() != 4 || params.dim(1) != 10 * L ||
      params.dim(0) != x.dim(0) || params.dim(2) != x.dim(2) ||
      params.dim(3) != x.dim(3))
    throw DimensionError("logistic_mixture_logpx: params must be [B," +
                         std::to_string(10 * L) + ",H,W], got " +
                         shape_str(params.shape()));
  for (float v : x.data())
    if (v < -1.0001f || v > 1.0001f)
      throw ContractError("logistic_mixture_logpx: x value " +
                          std::to_string(v) + " outside [-1,1]");

  const float half_bin = 1.0f / 255.0f;
  const float log_half_range = std::log(127.5f);

  // Observed channels as constants; coupling uses the data, not the model.
  Tensor xs[3];
  for (int c = 0; c < 3; ++c) xs[c] = slice_dim1(x, c, 1).detach();
  Tensor low_mask[3], high_mask[3];
  for (int c = 0; c < 3; ++c) {
    low_mask[c] = gt_mask(neg(xs[c]), 0.999f);
    high_mask[c] = gt_mask(xs[c], 0.999f);
  }

  // Component log weights: log softmax over the first L channels.
  std::vector<Tensor> logits(static_cast<size_t>(L));
  for (int l = 0; l < L; ++l) logits[size_t(l)] = slice_dim1(params, l, 1);
  std::vector<Tensor> log_w(static_cast<size_t>(L));
  if (L == 1) {
    log_w[0] = Tensor();  // weight 1
  } else {
    Tensor pivot = max_elem(logits);
    Tensor se = exp(logits[0] - pivot);
    for (int l = 1; l < L; ++l) se = se + exp(logits[size_t(l)] - pivot);
    Tensor log_norm = log(se) + pivot;
    for (int l = 0; l < L; ++l) log_w[size_t(l)] = logits[size_t(l)] - log_norm;
  }

  std::vector<Tensor> comp_terms(static_cast<size_t>(L));
  for (int l = 0; l < L; ++l) {
    // Means with autoregressive shifts from the observed redder channels.
    Tensor mean[3];
    for (int c = 0; c < 3; ++c)
      mean[c] = slice_dim1(params, L + c * L + l, 1);
    Tensor c0 = tanh(slice_dim1(params, 7 * L + 0 * L + l, 1));
    Tensor c1 = tanh(slice_dim1(params, 7 * L + 1 * L + l, 1));
    Tensor c2 = tanh(slice_dim1(params, 7 * L + 2 * L + l, 1));
    mean[1] = mean[1] + c0 * xs[0];
    mean[2] = mean[2] + c1 * xs[0] + c2 * xs[1];

    Tensor lp;
    for (int c = 0; c < 3; ++c) {
      Tensor log_scale = clamp_min(slice_dim1(params, 4 * L + c * L + l, 1),
                                   -7.0f);
      Tensor inv_s = exp(neg(log_scale));
      Tensor centered = xs[c] - mean[c];
      Tensor plus_in = (centered + half_bin) * inv_s;
      Tensor minus_in = (centered - half_bin) * inv_s;
      Tensor cdf_delta = sigmoid(plus_in) - sigmoid(minus_in);
      // Bottom bin integrates (-inf, -1 + 1/255]; top bin [1 - 1/255, inf).
      Tensor log_cdf_low = neg(softplus(neg(plus_in)));
      Tensor log_sf_high = neg(softplus(minus_in));
      // When the bin mass underflows, fall back to density * bin width.
      Tensor mid_in = centered * inv_s;
      Tensor log_pdf_mid =
          mid_in - log_scale - mul_scalar(softplus(mid_in), 2.0f);
      Tensor interior =
          where(gt_mask(cdf_delta, 1e-5f), log(clamp_min(cdf_delta, 1e-12f)),
                log_pdf_mid - log_half_range);
      Tensor lp_c = where(high_mask[c], log_sf_high,
                          where(low_mask[c], log_cdf_low, interior));
      lp = lp.defined() ? lp + lp_c : lp_c;
    }
    comp_terms[size_t(l)] =
        log_w[size_t(l)].defined() ? log_w[size_t(l)] + lp : lp;
  }

  Tensor total;
  if (L == 1) {
    total = comp_terms[0];
  } else {
    Tensor pivot = max_elem(comp_terms);
    Tensor se = exp(comp_terms[0] - pivot);
    for (int l = 1; l < L; ++l) se = se + exp(comp_terms[size_t(l)] - pivot);
    total = log(se) + pivot;
  }
  return sum_samplewise(total);
}

ElboParts elbo(const Tensor& logpx, const Tensor& kl, float beta) {
  if (logpx.shape() != kl.shape() || logpx.ndim() != 1)
    throw DimensionError("elbo: logpx " + shape_str(logpx.shape()) +
                         " vs kl " + shape_str(kl.shape()));
  ElboParts parts;
  parts.logpx = mean_all(logpx);
  parts.kl = mean_all(kl);
  parts.elbo = parts.logpx - mul_scalar(parts.kl, beta);
  return parts;
}

Tensor log_prior(const Tensor& z) {
  if (z.ndim() != 2)
    throw DimensionError("log_prior: z must be [B,Z], got " +
                         shape_str(z.shape()));
  return mul_scalar(sum_samplewise(square(z) + kLn2Pi), -0.5f);
}

Tensor log_posterior(const Tensor& z, const GaussianPosterior& q) {
  check_posterior(q);
  if (z.shape() != q.mu.shape())
    throw DimensionError("log_posterior: z " + shape_str(z.shape()) +
                         " vs mu " + shape_str(q.mu.shape()));
  Tensor centered = z - q.mu;
  Tensor t = square(centered) * exp(neg(q.logvar)) + q.logvar + kLn2Pi;
  return mul_scalar(sum_samplewise(t), -0.5f);
}

double iwae_bound(const std::vector<double>& log_w) {
  if (log_w.empty()) throw ContractError("iwae_bound: no weights");
  double m = *std::max_element(log_w.begin(), log_w.end());
  double se = 0.0;
  for (double w : log_w) se += std::exp(w - m);
  return m + std::log(se) - std::log(double(log_w.size()));
}

double nats_to_bpd(double nats, int h, int w, int c) {
  if (h <= 0 || w <= 0 || c <= 0)
    throw ContractError("nats_to_bpd: non-positive dimensions");
  return -nats / (double(h) * w * c * std::numbers::ln2);
}

}  // namespace vnca
