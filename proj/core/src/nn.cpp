#include "vnca/nn.hpp"

#include <cmath>

namespace vnca {

Conv2dLayer Conv2dLayer::create(int cin, int cout, int k, int stride, int pad,
                                bool bias, Rng& rng) {
  Conv2dLayer l;
  float bound = 1.0f / std::sqrt(float(cin) * float(k) * float(k));
  l.w = rand_uniform({cout, cin, k, k}, bound, rng, /*requires_grad=*/true);
  if (bias) l.b = rand_uniform({cout}, bound, rng, /*requires_grad=*/true);
  l.stride = stride;
  l.pad = pad;
  return l;
}

Conv2dLayer Conv2dLayer::create_zero(int cin, int cout, int k, int stride,
                                     int pad, bool bias) {
  Conv2dLayer l;
  l.w = Tensor::zeros({cout, cin, k, k}, /*requires_grad=*/true);
  if (bias) l.b = Tensor::zeros({cout}, /*requires_grad=*/true);
  l.stride = stride;
  l.pad = pad;
  return l;
}

void Conv2dLayer::collect(const std::string& prefix,
                          std::vector<NamedParam>& out) const {
  out.push_back({prefix + ".w", w});
  if (b.defined()) out.push_back({prefix + ".b", b});
}

std::int64_t Conv2dLayer::param_count() const {
  return w.size() + (b.defined() ? b.size() : 0);
}

LinearLayer LinearLayer::create(int n_in, int n_out, Rng& rng) {
  LinearLayer l;
  float bound = 1.0f / std::sqrt(float(n_in));
  l.w = rand_uniform({n_out, n_in}, bound, rng, /*requires_grad=*/true);
  l.b = rand_uniform({n_out}, bound, rng, /*requires_grad=*/true);
  return l;
}

void LinearLayer::collect(const std::string& prefix,
                          std::vector<NamedParam>& out) const {
  out.push_back({prefix + ".w", w});
  out.push_back({prefix + ".b", b});
}

std::int64_t LinearLayer::param_count() const { return w.size() + b.size(); }

}  // namespace vnca
