#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vnca/dataset.hpp"
#include "vnca/model.hpp"

namespace vnca {

struct AdamConfig {
  float lr = 1e-4f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
};

// Adam with single-precision moment buffers (so optimizer state checkpoints
// bit-exactly). Slot order is the parameter list order given at construction.
class Adam {
 public:
  Adam(const std::vector<NamedParam>& params, AdamConfig cfg = {});

  // One update from the gradients currently stored on the parameters.
  // Parameters with no gradient this step are treated as zero-gradient.
  void step(const std::vector<NamedParam>& params);

  std::int64_t t() const { return t_; }
  void set_t(std::int64_t t) { t_ = t; }
  size_t slots() const { return m_.size(); }
  std::vector<float>& m_slot(size_t i) { return m_[i]; }
  std::vector<float>& v_slot(size_t i) { return v_[i]; }
  const std::vector<float>& m_slot(size_t i) const { return m_[i]; }
  const std::vector<float>& v_slot(size_t i) const { return v_[i]; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  std::int64_t t_ = 0;
  std::vector<std::vector<float>> m_, v_;
};

// Scales all gradients so their joint L2 norm is at most max_norm.
// Returns the pre-clip norm.
float clip_global_norm(const std::vector<NamedParam>& params, float max_norm);

struct TrainConfig {
  int batch = 32;
  float beta = 1.0f;       // KL weight in the training objective
  float clip = 10.0f;      // global gradient norm ceiling
  AdamConfig adam;
  std::int64_t pool_capacity = 1024;
};

struct StepMetrics {
  std::int64_t step = 0;
  double loss = 0.0;       // -elbo
  double logpx = 0.0;      // batch mean
  double kl = 0.0;         // batch mean
  double grad_norm = 0.0;  // pre-clip
  bool skipped = false;    // non-finite loss/grad: parameters untouched
};

// "step=<int> loss=<float> logpx=<float> kl=<float> grad_norm=<float>"
std::string format_metrics(const StepMetrics& m);

// Single-sample ELBO step: encode, one z per image, decode, -elbo backward,
// global-norm clip, Adam. batch_x is [B,C,H,W] data. Consumes from rng: B*Z
// normal pairs, then one step-count draw (nondoubling only). A non-finite
// loss or gradient norm skips the update entirely.
StepMetrics train_step(VncaModel& model, const std::vector<float>& batch_x,
                       int batch, Adam& opt, const TrainConfig& cfg, Rng& rng);

// Replay pool for damage-recovery training. Entries hold an input image and
// the detached final cell state it produced.
struct PoolEntry {
  std::vector<float> x;      // [C,H,W]
  std::vector<float> state;  // [Z,H,W]
};
struct Pool {
  std::int64_t capacity = 1024;
  std::vector<PoolEntry> entries;
};

// Pool training step (nondoubling variant): the last k = min(B/2, |pool|)
// batch rows are replaced by sampled pool entries, the first k/2 of those get
// a random zero square stamped into their stored states, and those states
// (not fresh z broadcasts) seed the decode, truncating backprop through
// earlier growth. The KL term uses the fresh posterior of the whole batch.
// Afterwards all B final states are appended, the pool is shuffled and
// truncated to capacity. Draw order from rng: k pool picks, damage corners,
// B*Z normal pairs, step count, pool shuffle.
StepMetrics pool_damage_step(VncaModel& model, std::vector<float> batch_x,
                             int batch, Pool& pool, Adam& opt,
                             const TrainConfig& cfg, Rng& rng);

// Zeroes one random (H/2)x(W/2) square per sample; corner drawn uniformly
// from [0, H/2] x [0, W/2] inclusive (two draws per sample, row then column).
// The result is detached data.
CellGrid damage_square(const CellGrid& grid, Rng& rng);

// Drives training with reproducible sequencing shared by the CLI and tests:
// one master Rng(seed, "train") stream for all stochastic choices inside
// steps, and a Batcher whose position is a pure function of the step count,
// so (seed, step, rng counter) fully describe progress.
class Trainer {
 public:
  Trainer(VncaModel& model, const Dataset& data, TrainConfig cfg,
          std::uint64_t seed, bool use_pool);

  StepMetrics step();
  std::int64_t global_step() const { return global_step_; }
  std::uint64_t rng_counter() const { return rng_.counter(); }
  Adam& opt() { return opt_; }
  Pool& pool() { return pool_; }

  // Resume: repositions the batcher and restores the RNG counter. The pool
  // is not checkpointed and restarts empty.
  void restore(std::int64_t global_step, std::uint64_t rng_counter);

 private:
  VncaModel& model_;
  const Dataset& data_;
  TrainConfig cfg_;
  bool use_pool_;
  Rng rng_;
  Batcher batcher_;
  Adam opt_;
  Pool pool_;
  std::int64_t global_step_ = 0;
};

}  // namespace vnca
