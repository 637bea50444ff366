#pragma once

#include <string>
#include <vector>

#include "vnca/dataset.hpp"
#include "vnca/model.hpp"

namespace vnca {

// Expected image under the likelihood, in closed form: sigmoid of the logits
// for Bernoulli; mixture-weighted component means (with the coupled shifts
// chained through the component means) for the logistic mixture, clamped to
// [-1,1]. Returns [B,img_c,H,W] data, no graph.
Tensor likelihood_mean(const Tensor& params, Likelihood lik, int n_mix);

// One draw per pixel. Bernoulli consumes one uniform per pixel; the mixture
// consumes n_mix + 3 uniforms per pixel (component choice via Gumbel argmax,
// then red, green, blue).
Tensor likelihood_sample(const Tensor& params, Likelihood lik, int n_mix,
                         Rng& rng);

struct GrowthFrame {
  std::string event;  // "seed" | "step" | "double" | "damage"
  int steps_done = 0;
  Shape shape;
  std::vector<float> state;
};
struct GrowthTrace {
  std::vector<GrowthFrame> frames;
};

// Decode under no-grad, recording one frame per event. For the nondoubling
// variant, `steps` overrides the default t_max.
GrowthTrace grow(const VncaModel& model, const Tensor& z, int steps = -1);

struct DamageSweep {
  std::vector<int> t_list;  // damage times actually used, sorted unique
  int c = 0, h = 0, w = 0;
  // Planar [1 + len(t_list), C, H, W] expected images: the undamaged decode
  // first, then one decode per t.
  std::vector<float> images;
};
// Doubling only, z [1,Z]. For each t, reruns the decode zeroing the right
// half of every state channel once, at the step event where the completed
// step count equals t (the seed for t = 0; doublings replicate the damage
// but never trigger it). Defaults to the phase boundaries
// {0, M, 2M, ..., M*(K+1)}.
DamageSweep damage_during_growth(const VncaModel& model, const Tensor& z,
                                 std::vector<int> t_list = {});

struct DamageRecoveryReport {
  int n = 0;
  int c = 0, h = 0, w = 0;
  // Planar [n,C,H,W] expected images.
  std::vector<float> original, damaged, recovered;
  std::vector<double> mse_damaged;    // damaged vs original, per sample
  std::vector<double> mse_recovered;  // recovered vs original, per sample
  double fraction_recovered = 0.0;    // share with mse_recovered < mse_damaged
};
// Nondoubling: decode n prior samples for t_max steps, stamp a random zero
// square into each grid, run t_max further steps, and compare images.
DamageRecoveryReport damage_recovery(const VncaModel& model, int n, Rng& rng);

struct EvalReport {
  std::int64_t n = 0;
  int k = 0;
  std::vector<double> per_image_nats;
  double nats = 0.0;  // mean importance-weighted bound
  double bpd = 0.0;
};
// K-importance-sample bound per image, decoding `chunk` draws at a time.
// Nondoubling decodes run t_max steps. limit < 0 evaluates the whole set.
EvalReport evaluate(const VncaModel& model, const Dataset& data, int k,
                    Rng& rng, int chunk = 16, std::int64_t limit = -1);

enum class SampleMode { mean, draw };
// Decode n prior draws to images, planar [n,C,H,W].
std::vector<float> sample_prior(const VncaModel& model, int n, Rng& rng,
                                SampleMode mode);

// Decode along the straight line between the posterior means of two images;
// alpha = i/(steps-1). Returns planar [steps,C,H,W] expected images.
std::vector<float> interpolate(const VncaModel& model, const Tensor& xa,
                               const Tensor& xb, int steps);

// CSV "index,label,z0,...,z{Z-1}" of posterior means, 6 significant digits,
// for min(max_rows, N) images sampled without replacement from
// Rng(seed, "export") and written in ascending index order. Unlabeled
// datasets get label -1.
void export_latents(const VncaModel& model, const Dataset& data,
                    const std::string& path, std::int64_t max_rows,
                    std::uint64_t seed);

}  // namespace vnca
