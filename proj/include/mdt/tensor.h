#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace mdt {

using Shape = std::vector<int64_t>;

int64_t shapeSize(const Shape& shape);
std::string shapeString(const Shape& shape);

// One record of the define-by-run graph. A node owns its forward value, the
// accumulated gradient (allocated on demand) and the rule that pushes its
// gradient into its inputs.
struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requiresGrad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backwardFn;

  void ensureGrad();
};

// Handle to a graph node with value semantics on the handle (copies alias the
// same node). Leaves created with requiresGrad=true act as trainable
// parameters; every other tensor is produced by an operation below.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Tensor zeros(Shape shape, bool requiresGrad = false);
  static Tensor full(Shape shape, double value, bool requiresGrad = false);
  static Tensor fromData(Shape shape, std::vector<double> data, bool requiresGrad = false);

  [[nodiscard]] bool defined() const {
    return node_ != nullptr;
  }
  [[nodiscard]] const Shape& shape() const;
  [[nodiscard]] int64_t size() const;
  [[nodiscard]] int64_t dim(size_t axis) const;
  // Leading dimensions flattened; the last dimension is the column count.
  [[nodiscard]] int64_t rows() const;
  [[nodiscard]] int64_t cols() const;

  [[nodiscard]] std::span<const double> data() const;
  [[nodiscard]] std::span<double> mutableData();
  [[nodiscard]] std::span<const double> grad() const;
  [[nodiscard]] std::span<double> mutableGrad();
  [[nodiscard]] double item() const;
  [[nodiscard]] double at(int64_t row, int64_t col) const;

  [[nodiscard]] bool requiresGrad() const;
  void zeroGrad();

  [[nodiscard]] Node& node() const {
    return *node_;
  }
  [[nodiscard]] const std::shared_ptr<Node>& nodePtr() const {
    return node_;
  }

 private:
  std::shared_ptr<Node> node_;
};

// While alive, operations on this thread record no graph (inference mode).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool gradEnabled();

// ---- differentiable primitives (2-D unless stated otherwise) ----

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
// a (r×c) plus a 1×c (or c) row vector broadcast over rows.
Tensor addRow(const Tensor& a, const Tensor& row);
Tensor tanh(const Tensor& a);
// Exact erf-based GELU.
Tensor gelu(const Tensor& a);
// Numerically stable softmax along any axis of an N-d tensor.
Tensor softmax(const Tensor& x, int axis);
// Normalizes each row over the last dimension (epsilon 1e-5), then applies gain and bias.
Tensor layerNorm(const Tensor& x, const Tensor& gain, const Tensor& bias);
Tensor concatRows(std::span<const Tensor> parts);
Tensor concatCols(std::span<const Tensor> parts);
Tensor sliceRows(const Tensor& a, int64_t begin, int64_t count);
Tensor sliceCols(const Tensor& a, int64_t begin, int64_t count);
// Gathers rows of an embedding table.
Tensor embedding(const Tensor& table, std::span<const int32_t> ids);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
// Mean of squared differences over all entries.
Tensor mse(const Tensor& a, const Tensor& b);

// Reverse-mode sweep from a scalar loss. Every node reachable from the loss
// is visited once, in reverse topological order. Gradients accumulate into
// leaves; call zeroGrad on parameters between steps.
void backward(const Tensor& loss);

// Nodes reachable from `root`, inputs before consumers.
std::vector<Node*> topologicalOrder(const Tensor& root);

} // namespace mdt
