#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "vnca/rng.hpp"

namespace vnca {

using Shape = std::vector<int>;

std::int64_t numel(const Shape& s);
std::string shape_str(const Shape& s);

// Error taxonomy. DimensionError for shape/axis mismatches, ContractError for
// violated API preconditions, NumericDomainError for log/div at invalid
// arguments (raised in debug builds; release clamps instead), FormatError for
// malformed files.
struct DimensionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ContractError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericDomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

// One vertex of the dynamically built computation graph. Ops create a node
// per result; backward() walks the DAG once in reverse topological order.
struct Node {
  Shape shape;
  std::vector<float> value;
  std::vector<float> grad;  // allocated lazily when gradient first arrives
  bool requires_grad = false;
  bool retain_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  std::int64_t size() const { return std::int64_t(value.size()); }
  void ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), 0.0f);
  }
};

}  // namespace detail

// Value-semantics handle to a graph node. Copies share the node.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, float v, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<float> data,
                          bool requires_grad = false);
  static Tensor scalar(float v);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int ndim() const { return int(node_->shape.size()); }
  int dim(int i) const { return node_->shape[size_t(i)]; }
  std::int64_t size() const { return node_->size(); }

  const std::vector<float>& data() const { return node_->value; }
  // In-place access; only meaningful for leaves (parameters, buffers).
  std::vector<float>& mutable_data() { return node_->value; }

  float item() const;

  bool requires_grad() const { return node_->requires_grad; }
  // Null until backward() has deposited a gradient here.
  const std::vector<float>* grad() const {
    return node_->grad.empty() ? nullptr : &node_->grad;
  }
  void zero_grad() { node_->grad.clear(); }
  // Keep this node's gradient after backward() even though it is not a leaf.
  void retain_grad() { node_->retain_grad = true; }

  Tensor detach() const;

  std::shared_ptr<detail::Node> node() const { return node_; }

 private:
  std::shared_ptr<detail::Node> node_;
};

// While a guard is alive, ops record no graph edges: results are plain
// buffers with requires_grad=false. Nestable; thread-local.
struct NoGradGuard {
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};
bool grad_enabled();

// Accumulates d(loss)/d(node) into every reachable node that requires grad.
// loss must be a single-element tensor. Gradients of interior nodes are
// dropped as soon as they have been consumed unless retain_grad() was set.
void backward(const Tensor& loss);

// ---- elementwise and scalar ops ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, float s);
Tensor mul_scalar(const Tensor& a, float s);
Tensor neg(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor softplus(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor square(const Tensor& x);
Tensor elu(const Tensor& x);  // alpha = 1
Tensor clamp_min(const Tensor& x, float lo);

// Elementwise select: mask holds 0/1 and carries no gradient.
Tensor where(const Tensor& mask, const Tensor& a, const Tensor& b);
// 0/1 indicator of x > thresh; never carries gradient.
Tensor gt_mask(const Tensor& x, float thresh);
// Elementwise max over a list, gradient-free (logsumexp pivot).
Tensor max_elem(const std::vector<Tensor>& xs);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator+(const Tensor& a, float s) { return add_scalar(a, s); }
inline Tensor operator-(const Tensor& a, float s) { return add_scalar(a, -s); }
inline Tensor operator*(const Tensor& a, float s) { return mul_scalar(a, s); }
inline Tensor operator+(float s, const Tensor& a) { return add_scalar(a, s); }
inline Tensor operator*(float s, const Tensor& a) { return mul_scalar(a, s); }
inline Tensor operator-(const Tensor& a) { return neg(a); }
inline Tensor operator-(float s, const Tensor& a) {
  return add_scalar(neg(a), s);
}

// ---- reductions ----
Tensor sum_all(const Tensor& x);   // -> [1]
Tensor mean_all(const Tensor& x);  // -> [1]
// [B, ...] -> [B], summing every non-batch axis.
Tensor sum_samplewise(const Tensor& x);

// ---- shape ops ----
Tensor reshape(const Tensor& x, Shape shape);
// Channel-axis slice of an NCHW tensor: [B,C,H,W] -> [B,len,H,W].
// Also accepts rank-2 [B,C] -> [B,len].
Tensor slice_dim1(const Tensor& x, int start, int len);
// Batch-axis slice: rows [start, start+len).
Tensor slice_dim0(const Tensor& x, int start, int len);
Tensor concat_dim0(const std::vector<Tensor>& xs);
// [B,C] -> [B,C,H,W], repeating each feature across the grid.
Tensor broadcast_spatial(const Tensor& z, int H, int W);
// Nearest-neighbour 2x upsample: [B,C,H,W] -> [B,C,2H,2W].
Tensor nearest_double(const Tensor& x);

// ---- dense / convolution ----
// x [B,Cin,H,W], w [Cout,Cin,kh,kw], optional bias [Cout]; zero padding.
// Output spatial size floor((H + 2*pad - kh)/stride) + 1.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride,
              int padding);
// x [B,n], w [m,n], b [m] -> [B,m]
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

// ---- random fills ----
Tensor randn(Shape shape, Rng& rng, bool requires_grad = false);
// Uniform in [-bound, bound].
Tensor rand_uniform(Shape shape, float bound, Rng& rng,
                    bool requires_grad = false);

}  // namespace vnca
