#pragma once

#include <vector>

#include "vnca/rng.hpp"
#include "vnca/tensor.hpp"

namespace vnca {

// Diagonal Gaussian q(z|x) parameterized by mean and log variance, each [B,Z].
struct GaussianPosterior {
  Tensor mu;
  Tensor logvar;
};

// KL(q || N(0,I)) per sample: 0.5 * sum(mu^2 + exp(logvar) - 1 - logvar).
// Returns [B].
Tensor kl_std_normal(const GaussianPosterior& q);

// z = mu + exp(logvar/2) * eps, eps ~ N(0,I). Consumes exactly B*Z normal
// draws from rng in row-major order. Returns [B,Z].
Tensor reparameterize(const GaussianPosterior& q, Rng& rng);

// log p(x|logits) for binary x under independent Bernoullis, summed per
// sample: sum(x*l - softplus(l)). x must contain only 0 and 1. Returns [B].
Tensor bernoulli_logpx(const Tensor& x, const Tensor& logits);

// Discretized logistic mixture over 8-bit RGB mapped to the 256-level grid in
// [-1,1]. x is [B,3,H,W] on that grid; params is [B,10*n_mix,H,W] laid out as
// [mixture logits | means (3 per comp) | log scales | RGB coupling coeffs].
// Edge bins integrate to the open tails; log scales are clamped at -7; the
// green/blue means are shifted by tanh-squashed coefficients times the
// observed redder channels. Returns [B].
Tensor logistic_mixture_logpx(const Tensor& x, const Tensor& params,
                              int n_mix);

// Per-batch training objective. All three results are single-element graph
// tensors: elbo = mean(logpx - beta*kl), plus the two means themselves.
struct ElboParts {
  Tensor elbo;
  Tensor logpx;  // mean over batch
  Tensor kl;     // mean over batch
};
ElboParts elbo(const Tensor& logpx, const Tensor& kl, float beta = 1.0f);

// log N(z; 0, I) per sample. Returns [B].
Tensor log_prior(const Tensor& z);

// log q(z) under the given diagonal Gaussian, per sample. Returns [B].
Tensor log_posterior(const Tensor& z, const GaussianPosterior& q);

// Importance-weighted bound from K log weights of one image:
// log(1/K) + logsumexp(log_w). Stable via max subtraction.
double iwae_bound(const std::vector<double>& log_w);

// Negative log likelihood in nats to bits per dimension.
double nats_to_bpd(double nats, int h, int w, int c);

}  // namespace vnca
