#pragma once

#include <functional>
#include <string>
#include <vector>

#include "vnca/distributions.hpp"
#include "vnca/nn.hpp"
#include "vnca/rng.hpp"
#include "vnca/tensor.hpp"

namespace vnca {

enum class Variant { doubling, nondoubling };
enum class Likelihood { bernoulli, logistic_mixture };

std::string to_string(Variant v);
std::string to_string(Likelihood l);
Variant variant_from_string(const std::string& s);
Likelihood likelihood_from_string(const std::string& s);

struct ModelConfig {
  Variant variant = Variant::doubling;
  Likelihood likelihood = Likelihood::bernoulli;
  int latent = 256;         // state channels |Z|
  int width = 0;            // update-net hidden width; 0 means same as latent
  int k_doublings = 4;      // doubling variant: number of 2x upsamples
  int steps_per_phase = 8;  // doubling variant: NCA steps between upsamples
  int t_min = 32;           // nondoubling variant: step-count range,
  int t_max = 64;           //   sampled uniformly once per batch
  int n_mix = 1;            // logistic mixture components
  int img_h = 32, img_w = 32, img_c = 1;

  int update_hidden() const { return width > 0 ? width : latent; }
  // Channels of the final state read as likelihood parameters.
  int likelihood_channels() const {
    return likelihood == Likelihood::bernoulli ? img_c : 10 * n_mix;
  }
  // Doubling growth: M steps per phase, K+1 phases.
  int total_growth_steps() const {
    return steps_per_phase * (k_doublings + 1);
  }
  void validate() const;
};

// NCA transition network. The residual kind is a 3x3 conv, four residual
// blocks of two biasless 1x1 convs around an ELU, and a final 1x1 conv; the
// small kind is 3x3 conv, ELU, 1x1 conv. The final conv starts at zero in
// both, so an untrained net is the identity update.
struct UpdateNet {
  enum class Kind { residual, small };
  Kind kind = Kind::residual;
  Conv2dLayer pre;
  std::vector<std::pair<Conv2dLayer, Conv2dLayer>> blocks;
  Conv2dLayer post;

  static UpdateNet create(Kind kind, int channels, int hidden, Rng& rng);
  Tensor forward(const Tensor& state) const;
  void collect(std::vector<NamedParam>& out) const;
  std::int64_t param_count() const;
};

// Five 5x5 convolutions (stride 1 then four stride 2, channels 32 doubling
// to 512), each followed by ELU, then a dense layer producing mean and log
// variance of q(z|x).
struct Encoder {
  std::vector<Conv2dLayer> convs;
  LinearLayer fc;
  int latent = 0;

  static Encoder create(int img_c, int img_h, int img_w, int latent, Rng& rng);
  GaussianPosterior forward(const Tensor& x) const;
  void collect(std::vector<NamedParam>& out) const;
  std::int64_t param_count() const;
};

// A grid of NCA cell states, [B,Z,H,W], plus how many update steps built it.
struct CellGrid {
  Tensor state;
  int steps_done = 0;
};

enum class GrowthEvent { seed, step, doubled };

// Observes (and may replace) the state as decoding progresses. steps_done is
// the number of NCA updates applied so far. Returning a defined tensor
// substitutes it for the current state; the replacement enters the graph as a
// constant, so callers that need gradients must not replace.
using GrowthCallback =
    std::function<Tensor(GrowthEvent, int steps_done, const Tensor& state)>;

struct VncaModel {
  ModelConfig cfg;
  Encoder encoder;
  UpdateNet update;

  // Parameters are drawn from Rng(seed, "init") in registration order.
  static VncaModel create(const ModelConfig& cfg, std::uint64_t seed);

  std::vector<NamedParam> parameters() const;
  std::int64_t param_count() const;

  GaussianPosterior encode(const Tensor& x) const;

  // One NCA update: state + u(state). Shape preserved.
  Tensor nca_step(const Tensor& state) const;

  // z [B,Z] seeds a 2x2 grid; each of K+1 phases runs M steps, with a
  // nearest-neighbour 2x upsample after every phase but the last.
  // Final grid is [B, Z, 2^(K+1), 2^(K+1)].
  CellGrid decode_doubling(const Tensor& z,
                           const GrowthCallback& cb = nullptr) const;

  // z [B,Z] broadcast to the full [B,Z,img_h,img_w] grid, then T steps.
  CellGrid decode_nondoubling(const Tensor& z, int steps,
                              const GrowthCallback& cb = nullptr) const;

  // Nondoubling decode continuing from an existing grid (pool training,
  // damage recovery). Runs `steps` further updates.
  CellGrid decode_from_state(const CellGrid& start, int steps,
                             const GrowthCallback& cb = nullptr) const;

  // Dispatch on cfg.variant; steps is ignored by the doubling variant.
  CellGrid decode(const Tensor& z, int steps = -1) const;

  // First likelihood_channels() channels of the final state.
  Tensor likelihood_params(const Tensor& state) const;

  // log p(x|state-derived params), [B].
  Tensor logpx(const Tensor& x, const Tensor& params) const;

  struct Recon {
    GaussianPosterior q;
    Tensor z;        // [B,Z]
    CellGrid grid;   // final state
    Tensor params;   // likelihood parameters
    int steps = 0;   // T actually run (nondoubling)
  };
  // Encode, sample z, decode. RNG order: B*Z normal draws for z, then one
  // uniform draw for T (nondoubling only, when steps < 0).
  Recon reconstruct(const Tensor& x, Rng& rng, int steps = -1) const;
};

}  // namespace vnca
