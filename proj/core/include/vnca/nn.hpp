#pragma once

#include <string>
#include <vector>

#include "vnca/rng.hpp"
#include "vnca/tensor.hpp"

namespace vnca {

// Stable (name, tensor) pair used by the optimizer and the checkpoint codec.
// Names double as serialization keys, so they must not change between runs.
struct NamedParam {
  std::string name;
  Tensor tensor;
};

// Parameters are initialized uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)]
// (weights and biases alike), drawn in registration order from a dedicated
// "init" stream so construction is reproducible from the seed alone.

struct Conv2dLayer {
  Tensor w;  // [Cout,Cin,k,k]
  Tensor b;  // [Cout]; undefined for biasless layers
  int stride = 1;
  int pad = 0;

  static Conv2dLayer create(int cin, int cout, int k, int stride, int pad,
                            bool bias, Rng& rng);
  // Zero weights (and bias); used for the final update-net layer so a fresh
  // model starts as the identity mapping.
  static Conv2dLayer create_zero(int cin, int cout, int k, int stride, int pad,
                                 bool bias);

  Tensor forward(const Tensor& x) const { return conv2d(x, w, b, stride, pad); }
  void collect(const std::string& prefix, std::vector<NamedParam>& out) const;
  std::int64_t param_count() const;
};

struct LinearLayer {
  Tensor w;  // [m,n]
  Tensor b;  // [m]

  static LinearLayer create(int n_in, int n_out, Rng& rng);

  Tensor forward(const Tensor& x) const { return linear(x, w, b); }
  void collect(const std::string& prefix, std::vector<NamedParam>& out) const;
  std::int64_t param_count() const;
};

}  // namespace vnca
