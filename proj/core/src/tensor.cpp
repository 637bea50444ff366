#include "vnca/tensor.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <unordered_set>

#include "op_common.hpp"

namespace vnca {

using detail::Node;
using detail::bare_node;
using detail::make_op;

std::int64_t numel(const Shape& s) {
  std::int64_t n = 1;
  for (int d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

namespace {

thread_local bool g_grad_enabled = true;

void check_shape(const Shape& s) {
  if (s.empty()) throw DimensionError("tensor rank must be >= 1");
  for (int d : s)
    if (d <= 0) throw DimensionError("non-positive dimension in " + shape_str(s));
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

float guarded_log_arg(float x) {
#ifndef NDEBUG
  if (!(x > 0.0f))
    throw NumericDomainError("log of non-positive value " + std::to_string(x));
#endif
  return x < 1e-12f ? 1e-12f : x;
}

float guarded_den(float x) {
#ifndef NDEBUG
  if (std::fabs(x) < 1e-12f)
    throw NumericDomainError("division by near-zero value " + std::to_string(x));
#endif
  if (std::fabs(x) < 1e-12f) return std::copysign(1e-12f, x);
  return x;
}

float stable_sigmoid(float x) {
  if (x >= 0.0f) {
    return 1.0f / (1.0f + std::exp(-x));
  }
  float e = std::exp(x);
  return e / (1.0f + e);
}

float stable_softplus(float x) {
  return std::fmax(x, 0.0f) + std::log1p(std::exp(-std::fabs(x)));
}

}  // namespace

namespace detail {

std::shared_ptr<Node> bare_node(Shape shape, std::vector<float> value) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  return n;
}

Tensor make_op(Shape shape, std::vector<float> value,
               std::vector<std::shared_ptr<Node>> parents,
               std::function<void(Node&)> bwd) {
  auto n = bare_node(std::move(shape), std::move(value));
  if (g_grad_enabled) {
    bool any = false;
    for (const auto& p : parents) any = any || (p && p->requires_grad);
    if (any) {
      n->requires_grad = true;
      n->parents = std::move(parents);
      n->backward_fn = std::move(bwd);
    }
  }
  return Tensor(std::move(n));
}

}  // namespace detail

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  check_shape(shape);
  std::int64_t n = numel(shape);
  auto node = bare_node(std::move(shape), std::vector<float>(size_t(n), 0.0f));
  node->requires_grad = requires_grad && g_grad_enabled;
  return Tensor(std::move(node));
}

Tensor Tensor::full(Shape shape, float v, bool requires_grad) {
  Tensor t = zeros(std::move(shape), requires_grad);
  std::fill(t.node()->value.begin(), t.node()->value.end(), v);
  return t;
}

Tensor Tensor::from_data(Shape shape, std::vector<float> data,
                         bool requires_grad) {
  check_shape(shape);
  if (numel(shape) != std::int64_t(data.size()))
    throw DimensionError("from_data: " + std::to_string(data.size()) +
                         " values for shape " + shape_str(shape));
  auto node = bare_node(std::move(shape), std::move(data));
  node->requires_grad = requires_grad && g_grad_enabled;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(float v) { return from_data({1}, {v}); }

float Tensor::item() const {
  if (size() != 1)
    throw ContractError("item() on tensor of shape " + shape_str(shape()));
  return node_->value[0];
}

Tensor Tensor::detach() const {
  return Tensor(bare_node(node_->shape, node_->value));
}

Tensor randn(Shape shape, Rng& rng, bool requires_grad) {
  Tensor t = Tensor::zeros(std::move(shape), requires_grad);
  for (float& v : t.mutable_data()) v = rng.normal();
  return t;
}

Tensor rand_uniform(Shape shape, float bound, Rng& rng, bool requires_grad) {
  Tensor t = Tensor::zeros(std::move(shape), requires_grad);
  for (float& v : t.mutable_data())
    v = float((rng.uniform() * 2.0 - 1.0) * bound);
  return t;
}

// ---- backward ----

void backward(const Tensor& loss) {
  if (!loss.defined()) throw ContractError("backward: undefined tensor");
  auto root = loss.node();
  if (root->size() != 1)
    throw ContractError("backward: loss must be a single element, got " +
                        shape_str(root->shape));
  if (!root->requires_grad)
    throw ContractError("backward: loss does not require grad");

  // Iterative postorder DFS; recursion would overflow on long NCA unrolls.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  struct Frame {
    Node* n;
    size_t next;
  };
  std::vector<Frame> stack;
  stack.push_back({root.get(), 0});
  visited.insert(root.get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next < f.n->parents.size()) {
      Node* p = f.n->parents[f.next++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(f.n);
      stack.pop_back();
    }
  }

  root->ensure_grad();
  root->grad[0] += 1.0f;

  // Reverse topological order: every consumer runs before its producers, so
  // each node's gradient is complete when its backward_fn fires and can be
  // released immediately afterwards (interior nodes only).
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->grad.empty()) continue;
    if (n->backward_fn) n->backward_fn(*n);
    if (!n->parents.empty() && !n->retain_grad) {
      std::vector<float>().swap(n->grad);
    }
  }
}

// ---- elementwise ----

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  auto an = a.node(), bn = b.node();
  std::vector<float> v(an->value.size());
  for (size_t i = 0; i < v.size(); ++i) v[i] = an->value[i] + bn->value[i];
  return make_op(an->shape, std::move(v), {an, bn}, [an, bn](Node& out) {
    if (an->requires_grad) {
      an->ensure_grad();
      for (size_t i = 0; i < out.grad.size(); ++i) an->grad[i] += out.grad[i];
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (size_t i = 0; i < out.grad.size(); ++i) bn->grad[i] += out.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  auto an = a.node(), bn = b.node();
  std::vector<float> v(an->value.size());
  for (size_t i = 0; i < v.size(); ++i) v[i] = an->value[i] - bn->value[i];
  return make_op(an->shape, std::move(v), {an, bn}, [an, bn](Node& out) {
    if (an->requires_grad) {
      an->ensure_grad();
      for (size_t i = 0; i < out.grad.size(); ++i) an->grad[i] += out.grad[i];
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (size_t i = 0; i < out.grad.size(); ++i) bn->grad[i] -= out.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  auto an = a.node(), bn = b.node();
  std::vector<float> v(an->value.size());
  for (size_t i = 0; i < v.size(); ++i) v[i] = an->value[i] * bn->value[i];
  return make_op(an->shape, std::move(v), {an, bn}, [an, bn](Node& out) {
    if (an->requires_grad) {
      an->ensure_grad();
      for (size_t i = 0; i < out.grad.size(); ++i)
        an->grad[i] += out.grad[i] * bn->value[i];
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (size_t i = 0; i < out.grad.size(); ++i)
        bn->grad[i] += out.grad[i] * an->value[i];
    }
  });
}

Tensor div(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "div");
  auto an = a.node(), bn = b.node();
  std::vector<float> v(an->value.size());
  for (size_t i = 0; i < v.size(); ++i)
    v[i] = an->value[i] / guarded_den(bn->value[i]);
  return make_op(an->shape, std::move(v), {an, bn}, [an, bn](Node& out) {
    if (an->requires_grad) {
      an->ensure_grad();
      for (size_t i = 0; i < out.grad.size(); ++i)
        an->grad[i] += out.grad[i] / guarded_den(bn->value[i]);
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (size_t i = 0; i < out.grad.size(); ++i) {
        float den = guarded_den(bn->value[i]);
        bn->grad[i] -= out.grad[i] * out.value[i] / den;
      }
    }
  });
}

Tensor add_scalar(const Tensor& a, float s) {
  auto an = a.node();
  std::vector<float> v(an->value.size());
  for (size_t i = 0; i < v.size(); ++i) v[i] = an->value[i] + s;
  return make_op(an->shape, std::move(v), {an}, [an](Node& out) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    for (size_t i = 0; i < out.grad.size(); ++i) an->grad[i] += out.grad[i];
  });
}

Tensor mul_scalar(const Tensor& a, float s) {
  auto an = a.node();
  std::vector<float> v(an->value.size());
  for (size_t i = 0; i < v.size(); ++i) v[i] = an->value[i] * s;
  return make_op(an->shape, std::move(v), {an}, [an, s](Node& out) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    for (size_t i = 0; i < out.grad.size(); ++i) an->grad[i] += out.grad[i] * s;
  });
}

Tensor neg(const Tensor& x) { return mul_scalar(x, -1.0f); }

Tensor exp(const Tensor& x) {
  auto xn = x.node();
  std::vector<float> v(xn->value.size());
  for (size_t i = 0; i < v.size(); ++i) v[i] = std::exp(xn->value[i]);
  return make_op(xn->shape, std::move(v), {xn}, [xn](Node& out) {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
    for (size_t i = 0; i < out.grad.size(); ++i)
      xn->grad[i] += out.grad[i] * out.value[i];
  });
}

Tensor log(const Tensor& x) {
  auto xn = x.node();
  std::vector<float> v(xn->value.size());
  for (size_t i = 0; i < v.size(); ++i)
    v[i] = std::log(guarded_log_arg(xn->value[i]));
  return make_op(xn->shape, std::move(v), {xn}, [xn](Node& out) {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
    for (size_t i = 0; i < out.grad.size(); ++i)
      xn->grad[i] += out.grad[i] / guarded_log_arg(xn->value[i]);
  });
}

Tensor sigmoid(const Tensor& x) {
  auto xn = x.node();
  std::vector<float> v(xn->value.size());
  for (size_t i = 0; i < v.size(); ++i) v[i] = stable_sigmoid(xn->value[i]);
  return make_op(xn->shape, std::move(v), {xn}, [xn](Node& out) {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
    for (size_t i = 0; i < out.grad.size(); ++i) {
      float s = out.value[i];
      xn->grad[i] += out.grad[i] * s * (1.0f - s);
    }
  });
}

Tensor softplus(const Tensor& x) {
  auto xn = x.node();
  std::vector<float> v(xn->value.size());
  for (size_t i = 0; i < v.size(); ++i) v[i] = stable_softplus(xn->value[i]);
  return make_op(xn->shape, std::move(v), {xn}, [xn](Node& out) {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
    for (size_t i = 0; i < out.grad.size(); ++i)
      xn->grad[i] += out.grad[i] * stable_sigmoid(xn->value[i]);
  });
}

Tensor tanh(const Tensor& x) {
  auto xn = x.node();
  std::vector<float> v(xn->value.size());
  for (size_t i = 0; i < v.size(); ++i) v[i] = std::tanh(xn->value[i]);
  return make_op(xn->shape, std::move(v), {xn}, [xn](Node& out) {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
    for (size_t i = 0; i < out.grad.size(); ++i) {
      float t = out.value[i];
      xn->grad[i] += out.grad[i] * (1.0f - t * t);
    }
  });
}

Tensor square(const Tensor& x) {
  auto xn = x.node();
  std::vector<float> v(xn->value.size());
  for (size_t i = 0; i < v.size(); ++i) v[i] = xn->value[i] * xn->value[i];
  return make_op(xn->shape, std::move(v), {xn}, [xn](Node& out) {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
    for (size_t i = 0; i < out.grad.size(); ++i)
      xn->grad[i] += out.grad[i] * 2.0f * xn->value[i];
  });
}

// e^x - 1 for x <= 0, branchless so the elu loop vectorizes. Range-reduced
// Cephes polynomial; the two_n*(e^r-1) + (two_n-1) form avoids the
// cancellation of computing e^x first. Safe (clamped) for any input lane.
static inline float expm1_neg(float x) {
  x = std::min(std::max(x, -87.0f), 0.0f);
  float n = std::floor(x * 1.44269504f + 0.5f);
  float r = x - n * 0.693359375f - n * -2.12194440e-4f;
  float y = 1.9875691500e-4f;
  y = y * r + 1.3981999507e-3f;
  y = y * r + 8.3334519073e-3f;
  y = y * r + 4.1665795894e-2f;
  y = y * r + 1.6666665459e-1f;
  y = y * r + 5.0000001201e-1f;
  float p = y * r * r + r;  // e^r - 1
  float two_n = std::bit_cast<float>(std::uint32_t(std::int32_t(n) + 127)
                                     << 23);
  return two_n * p + (two_n - 1.0f);
}

Tensor elu(const Tensor& x) {
  auto xn = x.node();
  std::vector<float> v(xn->value.size());
  const float* src = xn->value.data();
  float* dst = v.data();
  size_t count = v.size();
  for (size_t i = 0; i < count; ++i) {
    float xv = src[i];
    dst[i] = xv > 0.0f ? xv : expm1_neg(xv);
  }
  return make_op(xn->shape, std::move(v), {xn}, [xn](Node& out) {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
    for (size_t i = 0; i < out.grad.size(); ++i) {
      // d/dx elu = 1 for x > 0, exp(x) = value + 1 otherwise
      float d = xn->value[i] > 0.0f ? 1.0f : out.value[i] + 1.0f;
      xn->grad[i] += out.grad[i] * d;
    }
  });
}

Tensor clamp_min(const Tensor& x, float lo) {
  auto xn = x.node();
  std::vector<float> v(xn->value.size());
  for (size_t i = 0; i < v.size(); ++i) v[i] = std::fmax(xn->value[i], lo);
  return make_op(xn->shape, std::move(v), {xn}, [xn, lo](Node& out) {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
    for (size_t i = 0; i < out.grad.size(); ++i)
      if (xn->value[i] >= lo) xn->grad[i] += out.grad[i];
  });
}

Tensor where(const Tensor& mask, const Tensor& a, const Tensor& b) {
  check_same_shape(mask, a, "where");
  check_same_shape(a, b, "where");
  auto mn = mask.node();
  auto an = a.node(), bn = b.node();
  std::vector<float> v(an->value.size());
  for (size_t i = 0; i < v.size(); ++i)
    v[i] = mn->value[i] != 0.0f ? an->value[i] : bn->value[i];
  return make_op(an->shape, std::move(v), {an, bn}, [mn, an, bn](Node& out) {
    if (an->requires_grad) {
      an->ensure_grad();
      for (size_t i = 0; i < out.grad.size(); ++i)
        if (mn->value[i] != 0.0f) an->grad[i] += out.grad[i];
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (size_t i = 0; i < out.grad.size(); ++i)
        if (mn->value[i] == 0.0f) bn->grad[i] += out.grad[i];
    }
  });
}

Tensor gt_mask(const Tensor& x, float thresh) {
  auto xn = x.node();
  std::vector<float> v(xn->value.size());
  for (size_t i = 0; i < v.size(); ++i)
    v[i] = xn->value[i] > thresh ? 1.0f : 0.0f;
  return Tensor(bare_node(xn->shape, std::move(v)));
}

Tensor max_elem(const std::vector<Tensor>& xs) {
  if (xs.empty()) throw ContractError("max_elem: empty list");
  auto first = xs[0].node();
  std::vector<float> v = first->value;
  for (size_t k = 1; k < xs.size(); ++k) {
    check_same_shape(xs[0], xs[k], "max_elem");
    const auto& other = xs[k].node()->value;
    for (size_t i = 0; i < v.size(); ++i) v[i] = std::fmax(v[i], other[i]);
  }
  return Tensor(bare_node(first->shape, std::move(v)));
}

// ---- reductions ----

Tensor sum_all(const Tensor& x) {
  auto xn = x.node();
  double acc = 0.0;
  for (float v : xn->value) acc += v;
  return make_op({1}, {float(acc)}, {xn}, [xn](Node& out) {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
    float g = out.grad[0];
    for (size_t i = 0; i < xn->grad.size(); ++i) xn->grad[i] += g;
  });
}

Tensor mean_all(const Tensor& x) {
  auto xn = x.node();
  double acc = 0.0;
  for (float v : xn->value) acc += v;
  float inv = 1.0f / float(xn->size());
  return make_op({1}, {float(acc / double(xn->size()))}, {xn},
                 [xn, inv](Node& out) {
                   if (!xn->requires_grad) return;
                   xn->ensure_grad();
                   float g = out.grad[0] * inv;
                   for (size_t i = 0; i < xn->grad.size(); ++i)
                     xn->grad[i] += g;
                 });
}

Tensor sum_samplewise(const Tensor& x) {
  auto xn = x.node();
  int B = xn->shape[0];
  std::int64_t rest = xn->size() / B;
  std::vector<float> v(static_cast<size_t>(B));
  for (int b = 0; b < B; ++b) {
    double acc = 0.0;
    const float* p = xn->value.data() + std::int64_t(b) * rest;
    for (std::int64_t i = 0; i < rest; ++i) acc += p[i];
    v[size_t(b)] = float(acc);
  }
  return make_op({B}, std::move(v), {xn}, [xn, B, rest](Node& out) {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
    for (int b = 0; b < B; ++b) {
      float g = out.grad[size_t(b)];
      float* p = xn->grad.data() + std::int64_t(b) * rest;
      for (std::int64_t i = 0; i < rest; ++i) p[i] += g;
    }
  });
}

// ---- shape ops ----

Tensor reshape(const Tensor& x, Shape shape) {
  check_shape(shape);
  auto xn = x.node();
  if (numel(shape) != xn->size())
    throw DimensionError("reshape: " + shape_str(xn->shape) + " -> " +
                         shape_str(shape) + " changes element count");
  std::vector<float> v = xn->value;
  return make_op(std::move(shape), std::move(v), {xn}, [xn](Node& out) {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
    for (size_t i = 0; i < out.grad.size(); ++i) xn->grad[i] += out.grad[i];
  });
}

Tensor slice_dim1(const Tensor& x, int start, int len) {
  auto xn = x.node();
  if (xn->shape.size() < 2)
    throw DimensionError("slice_dim1 needs rank >= 2, got " +
                         shape_str(xn->shape));
  int B = xn->shape[0], C = xn->shape[1];
  if (start < 0 || len <= 0 || start + len > C)
    throw DimensionError("slice_dim1: [" + std::to_string(start) + "," +
                         std::to_string(start + len) + ") out of " +
                         std::to_string(C) + " channels");
  std::int64_t inner = 1;
  for (size_t i = 2; i < xn->shape.size(); ++i) inner *= xn->shape[i];
  Shape out_shape = xn->shape;
  out_shape[1] = len;
  std::vector<float> v(size_t(std::int64_t(B) * len * inner));
  for (int b = 0; b < B; ++b) {
    const float* src = xn->value.data() + (std::int64_t(b) * C + start) * inner;
    float* dst = v.data() + std::int64_t(b) * len * inner;
    std::memcpy(dst, src, size_t(len * inner) * sizeof(float));
  }
  return make_op(std::move(out_shape), std::move(v), {xn},
                 [xn, B, C, start, len, inner](Node& out) {
                   if (!xn->requires_grad) return;
                   xn->ensure_grad();
                   for (int b = 0; b < B; ++b) {
                     float* dst =
                         xn->grad.data() + (std::int64_t(b) * C + start) * inner;
                     const float* src =
                         out.grad.data() + std::int64_t(b) * len * inner;
                     for (std::int64_t i = 0; i < len * inner; ++i)
                       dst[i] += src[i];
                   }
                 });
}

Tensor slice_dim0(const Tensor& x, int start, int len) {
  auto xn = x.node();
  int B = xn->shape[0];
  if (start < 0 || len <= 0 || start + len > B)
    throw DimensionError("slice_dim0: [" + std::to_string(start) + "," +
                         std::to_string(start + len) + ") out of " +
                         std::to_string(B) + " rows");
  std::int64_t inner = xn->size() / B;
  Shape out_shape = xn->shape;
  out_shape[0] = len;
  std::vector<float> v(size_t(len * inner));
  std::memcpy(v.data(), xn->value.data() + std::int64_t(start) * inner,
              v.size() * sizeof(float));
  return make_op(std::move(out_shape), std::move(v), {xn},
                 [xn, start, inner](Node& out) {
                   if (!xn->requires_grad) return;
                   xn->ensure_grad();
                   float* dst = xn->grad.data() + std::int64_t(start) * inner;
                   for (size_t i = 0; i < out.grad.size(); ++i)
                     dst[i] += out.grad[i];
                 });
}

Tensor concat_dim0(const std::vector<Tensor>& xs) {
  if (xs.empty()) throw ContractError("concat_dim0: empty list");
  Shape rest = xs[0].shape();
  rest.erase(rest.begin());
  int B = 0;
  std::int64_t inner = numel(rest);
  for (const auto& t : xs) {
    Shape r = t.shape();
    r.erase(r.begin());
    if (r != rest)
      throw DimensionError("concat_dim0: mismatched trailing shape " +
                           shape_str(t.shape()));
    B += t.dim(0);
  }
  Shape out_shape = xs[0].shape();
  out_shape[0] = B;
  std::vector<float> v(size_t(B * inner));
  std::vector<std::shared_ptr<Node>> parents;
  std::int64_t off = 0;
  for (const auto& t : xs) {
    auto n = t.node();
    std::memcpy(v.data() + off, n->value.data(),
                n->value.size() * sizeof(float));
    off += n->size();
    parents.push_back(n);
  }
  auto parents_copy = parents;
  return make_op(std::move(out_shape), std::move(v), std::move(parents),
                 [ps = std::move(parents_copy)](Node& out) {
                   std::int64_t off = 0;
                   for (const auto& p : ps) {
                     if (p->requires_grad) {
                       p->ensure_grad();
                       const float* src = out.grad.data() + off;
                       for (std::int64_t i = 0; i < p->size(); ++i)
                         p->grad[size_t(i)] += src[i];
                     }
                     off += p->size();
                   }
                 });
}

Tensor broadcast_spatial(const Tensor& z, int H, int W) {
  auto zn = z.node();
  if (zn->shape.size() != 2)
    throw DimensionError("broadcast_spatial needs [B,C], got " +
                         shape_str(zn->shape));
  int B = zn->shape[0], C = zn->shape[1];
  std::int64_t hw = std::int64_t(H) * W;
  std::vector<float> v(size_t(std::int64_t(B) * C * hw));
  for (std::int64_t bc = 0; bc < std::int64_t(B) * C; ++bc) {
    float s = zn->value[size_t(bc)];
    float* dst = v.data() + bc * hw;
    for (std::int64_t i = 0; i < hw; ++i) dst[i] = s;
  }
  return make_op({B, C, H, W}, std::move(v), {zn}, [zn, B, C, hw](Node& out) {
    if (!zn->requires_grad) return;
    zn->ensure_grad();
    for (std::int64_t bc = 0; bc < std::int64_t(B) * C; ++bc) {
      const float* src = out.grad.data() + bc * hw;
      double acc = 0.0;
      for (std::int64_t i = 0; i < hw; ++i) acc += src[i];
      zn->grad[size_t(bc)] += float(acc);
    }
  });
}

Tensor nearest_double(const Tensor& x) {
  auto xn = x.node();
  if (xn->shape.size() != 4)
    throw DimensionError("nearest_double needs [B,C,H,W], got " +
                         shape_str(xn->shape));
  int B = xn->shape[0], C = xn->shape[1], H = xn->shape[2], W = xn->shape[3];
  int H2 = 2 * H, W2 = 2 * W;
  std::vector<float> v(size_t(std::int64_t(B) * C * H2 * W2));
  for (std::int64_t bc = 0; bc < std::int64_t(B) * C; ++bc) {
    const float* src = xn->value.data() + bc * H * W;
    float* dst = v.data() + bc * H2 * W2;
    for (int y = 0; y < H; ++y) {
      float* row0 = dst + std::int64_t(2 * y) * W2;
      float* row1 = row0 + W2;
      const float* s = src + std::int64_t(y) * W;
      for (int xcol = 0; xcol < W; ++xcol) {
        float val = s[xcol];
        row0[2 * xcol] = val;
        row0[2 * xcol + 1] = val;
        row1[2 * xcol] = val;
        row1[2 * xcol + 1] = val;
      }
    }
  }
  return make_op({B, C, H2, W2}, std::move(v), {xn},
                 [xn, B, C, H, W, H2, W2](Node& out) {
                   if (!xn->requires_grad) return;
                   xn->ensure_grad();
                   for (std::int64_t bc = 0; bc < std::int64_t(B) * C; ++bc) {
                     float* dst = xn->grad.data() + bc * H * W;
                     const float* src = out.grad.data() + bc * H2 * W2;
                     for (int y = 0; y < H; ++y) {
                       const float* row0 = src + std::int64_t(2 * y) * W2;
                       const float* row1 = row0 + W2;
                       float* d = dst + std::int64_t(y) * W;
                       for (int xcol = 0; xcol < W; ++xcol) {
                         d[xcol] += row0[2 * xcol] + row0[2 * xcol + 1] +
                                    row1[2 * xcol] + row1[2 * xcol + 1];
                       }
                     }
                   }
                 });
}

}  // namespace vnca
