#pragma once

// Internal construction helpers shared by the op implementation files.
// Not installed; everything here is an implementation detail.

#include <functional>
#include <memory>
#include <vector>

#include "vnca/tensor.hpp"

namespace vnca::detail {

std::shared_ptr<Node> bare_node(Shape shape, std::vector<float> value);

// Builds the result node of an op. Graph edges (parents + backward_fn) are
// recorded only when grad mode is on and some parent requires a gradient.
Tensor make_op(Shape shape, std::vector<float> value,
               std::vector<std::shared_ptr<Node>> parents,
               std::function<void(Node&)> bwd);

}  // namespace vnca::detail
