#include "mdt/tensor.h"

#include "mdt/errors.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <unordered_set>

namespace mdt {

int64_t shapeSize(const Shape& shape) {
  int64_t n = 1;
  for (const auto d : shape) {
    n *= d;
  }
  return n;
}

std::string shapeString(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < shape.size(); ++i) {
    os << (i ? "x" : "") << shape[i];
  }
  os << ']';
  return os.str();
}

void Node::ensureGrad() {
  if (grad.empty()) {
    grad.assign(value.size(), 0.0);
  }
}

namespace {

thread_local bool tGradEnabled = true;

} // namespace

NoGradGuard::NoGradGuard() : previous_(tGradEnabled) {
  tGradEnabled = false;
}

NoGradGuard::~NoGradGuard() {
  tGradEnabled = previous_;
}

bool gradEnabled() {
  return tGradEnabled;
}

namespace {

void validateShape(const Shape& shape) {
  if (shape.empty()) {
    throw DimensionError("tensor shape must have at least one dimension");
  }
  for (const auto d : shape) {
    if (d <= 0) {
      throw DimensionError("tensor dimensions must be positive, got " + shapeString(shape));
    }
  }
}

// Builds an op output. The backward rule and inputs are kept only when some
// input participates in differentiation.
Tensor makeResult(
    Shape shape,
    std::vector<double> value,
    std::vector<std::shared_ptr<Node>> inputs,
    std::function<void(Node&)> backwardFn) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  const bool needs = tGradEnabled && std::any_of(
      inputs.begin(), inputs.end(), [](const auto& in) { return in->requiresGrad; });
  if (needs) {
    node->requiresGrad = true;
    node->inputs = std::move(inputs);
    node->backwardFn = std::move(backwardFn);
  }
  return Tensor(std::move(node));
}

void require2d(const Tensor& t, const char* op) {
  if (t.shape().size() != 2) {
    throw DimensionError(std::string(op) + ": expected a 2-D tensor, got " + shapeString(t.shape()));
  }
}

void requireSameShape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(
        std::string(op) + ": shape mismatch " + shapeString(a.shape()) + " vs " +
        shapeString(b.shape()));
  }
}

} // namespace

Tensor Tensor::zeros(Shape shape, bool requiresGrad) {
  return full(std::move(shape), 0.0, requiresGrad);
}

Tensor Tensor::full(Shape shape, double value, bool requiresGrad) {
  validateShape(shape);
  const auto n = shapeSize(shape);
  return fromData(std::move(shape), std::vector<double>(static_cast<size_t>(n), value), requiresGrad);
}

Tensor Tensor::fromData(Shape shape, std::vector<double> data, bool requiresGrad) {
  validateShape(shape);
  if (shapeSize(shape) != static_cast<int64_t>(data.size())) {
    throw DimensionError(
        "data length " + std::to_string(data.size()) + " does not match shape " +
        shapeString(shape));
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(data);
  node->requiresGrad = requiresGrad;
  return Tensor(std::move(node));
}

const Shape& Tensor::shape() const {
  return node_->shape;
}

int64_t Tensor::size() const {
  return static_cast<int64_t>(node_->value.size());
}

int64_t Tensor::dim(size_t axis) const {
  return node_->shape.at(axis);
}

int64_t Tensor::rows() const {
  return size() / cols();
}

int64_t Tensor::cols() const {
  return node_->shape.back();
}

std::span<const double> Tensor::data() const {
  return node_->value;
}

std::span<double> Tensor::mutableData() {
  return node_->value;
}

std::span<const double> Tensor::grad() const {
  node_->ensureGrad();
  return node_->grad;
}

std::span<double> Tensor::mutableGrad() {
  node_->ensureGrad();
  return node_->grad;
}

double Tensor::item() const {
  if (size() != 1) {
    throw DimensionError("item() on non-scalar tensor " + shapeString(shape()));
  }
  return node_->value[0];
}

double Tensor::at(int64_t row, int64_t col) const {
  return node_->value[static_cast<size_t>(row * cols() + col)];
}

bool Tensor::requiresGrad() const {
  return node_->requiresGrad;
}

void Tensor::zeroGrad() {
  node_->grad.assign(node_->value.size(), 0.0);
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require2d(a, "matmul");
  require2d(b, "matmul");
  const int64_t m = a.dim(0);
  const int64_t k = a.dim(1);
  const int64_t n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError(
        "matmul: inner dimensions differ " + shapeString(a.shape()) + " * " +
        shapeString(b.shape()));
  }
  std::vector<double> out(static_cast<size_t>(m * n), 0.0);
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  for (int64_t i = 0; i < m; ++i) {
    double* row = out.data() + i * n;
    for (int64_t p = 0; p < k; ++p) {
      const double s = pa[i * k + p];
      const double* brow = pb + p * n;
      for (int64_t j = 0; j < n; ++j) {
        row[j] += s * brow[j];
      }
    }
  }
  return makeResult({m, n}, std::move(out), {a.nodePtr(), b.nodePtr()}, [m, k, n](Node& self) {
    Node& na = *self.inputs[0];
    Node& nb = *self.inputs[1];
    const double* dc = self.grad.data();
    if (na.requiresGrad) {
      na.ensureGrad();
      for (int64_t i = 0; i < m; ++i) {
        for (int64_t p = 0; p < k; ++p) {
          double acc = 0.0;
          const double* brow = nb.value.data() + p * n;
          const double* drow = dc + i * n;
          for (int64_t j = 0; j < n; ++j) {
            acc += drow[j] * brow[j];
          }
          na.grad[i * k + p] += acc;
        }
      }
    }
    if (nb.requiresGrad) {
      nb.ensureGrad();
      for (int64_t i = 0; i < m; ++i) {
        const double* drow = dc + i * n;
        for (int64_t p = 0; p < k; ++p) {
          const double s = na.value[i * k + p];
          double* grow = nb.grad.data() + p * n;
          for (int64_t j = 0; j < n; ++j) {
            grow[j] += s * drow[j];
          }
        }
      }
    }
  });
}

Tensor transpose(const Tensor& a) {
  require2d(a, "transpose");
  const int64_t r = a.dim(0);
  const int64_t c = a.dim(1);
  std::vector<double> out(static_cast<size_t>(r * c));
  const auto src = a.data();
  for (int64_t i = 0; i < r; ++i) {
    for (int64_t j = 0; j < c; ++j) {
      out[j * r + i] = src[i * c + j];
    }
  }
  return makeResult({c, r}, std::move(out), {a.nodePtr()}, [r, c](Node& self) {
    Node& na = *self.inputs[0];
    na.ensureGrad();
    for (int64_t i = 0; i < r; ++i) {
      for (int64_t j = 0; j < c; ++j) {
        na.grad[i * c + j] += self.grad[j * r + i];
      }
    }
  });
}

namespace {

template <typename Fwd, typename GradA, typename GradB>
Tensor elementwise(const Tensor& a, const Tensor& b, const char* op, Fwd fwd, GradA ga, GradB gb) {
  requireSameShape(a, b, op);
  const auto pa = a.data();
  const auto pb = b.data();
  std::vector<double> out(pa.size());
  for (size_t i = 0; i < out.size(); ++i) {
    out[i] = fwd(pa[i], pb[i]);
  }
  return makeResult(a.shape(), std::move(out), {a.nodePtr(), b.nodePtr()}, [ga, gb](Node& self) {
    Node& na = *self.inputs[0];
    Node& nb = *self.inputs[1];
    if (na.requiresGrad) {
      na.ensureGrad();
      for (size_t i = 0; i < self.grad.size(); ++i) {
        na.grad[i] += self.grad[i] * ga(na.value[i], nb.value[i]);
      }
    }
    if (nb.requiresGrad) {
      nb.ensureGrad();
      for (size_t i = 0; i < self.grad.size(); ++i) {
        nb.grad[i] += self.grad[i] * gb(na.value[i], nb.value[i]);
      }
    }
  });
}

template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& a, Fwd fwd, Deriv deriv) {
  const auto pa = a.data();
  std::vector<double> out(pa.size());
  for (size_t i = 0; i < out.size(); ++i) {
    out[i] = fwd(pa[i]);
  }
  return makeResult(a.shape(), std::move(out), {a.nodePtr()}, [deriv](Node& self) {
    Node& na = *self.inputs[0];
    na.ensureGrad();
    for (size_t i = 0; i < self.grad.size(); ++i) {
      na.grad[i] += self.grad[i] * deriv(na.value[i], self.value[i]);
    }
  });
}

} // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return elementwise(
      a,
      b,
      "add",
      [](double x, double y) { return x + y; },
      [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return elementwise(
      a,
      b,
      "sub",
      [](double x, double y) { return x - y; },
      [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return elementwise(
      a,
      b,
      "mul",
      [](double x, double y) { return x * y; },
      [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Tensor scale(const Tensor& a, double factor) {
  return unary(
      a, [factor](double x) { return factor * x; }, [factor](double, double) { return factor; });
}

Tensor addRow(const Tensor& a, const Tensor& row) {
  const int64_t c = a.cols();
  if (row.size() != c) {
    throw DimensionError(
        "addRow: row of shape " + shapeString(row.shape()) + " cannot broadcast over " +
        shapeString(a.shape()));
  }
  const int64_t r = a.rows();
  std::vector<double> out(a.data().begin(), a.data().end());
  const auto pr = row.data();
  for (int64_t i = 0; i < r; ++i) {
    for (int64_t j = 0; j < c; ++j) {
      out[i * c + j] += pr[j];
    }
  }
  return makeResult(a.shape(), std::move(out), {a.nodePtr(), row.nodePtr()}, [r, c](Node& self) {
    Node& na = *self.inputs[0];
    Node& nr = *self.inputs[1];
    if (na.requiresGrad) {
      na.ensureGrad();
      for (size_t i = 0; i < self.grad.size(); ++i) {
        na.grad[i] += self.grad[i];
      }
    }
    if (nr.requiresGrad) {
      nr.ensureGrad();
      for (int64_t i = 0; i < r; ++i) {
        for (int64_t j = 0; j < c; ++j) {
          nr.grad[j] += self.grad[i * c + j];
        }
      }
    }
  });
}

Tensor tanh(const Tensor& a) {
  return unary(
      a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor gelu(const Tensor& a) {
  constexpr double invSqrt2 = 0.70710678118654752440;
  const double invSqrt2Pi = 0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2;
  return unary(
      a,
      [](double x) { return 0.5 * x * (1.0 + std::erf(x * invSqrt2)); },
      [invSqrt2Pi](double x, double) {
        return 0.5 * (1.0 + std::erf(x * invSqrt2)) + x * invSqrt2Pi * std::exp(-0.5 * x * x);
      });
}

Tensor softmax(const Tensor& x, int axis) {
  const auto& shape = x.shape();
  const int rank = static_cast<int>(shape.size());
  if (axis < 0) {
    axis += rank;
  }
  if (axis < 0 || axis >= rank) {
    throw DimensionError(
        "softmax: axis " + std::to_string(axis) + " invalid for " + shapeString(shape));
  }
  int64_t outer = 1;
  int64_t inner = 1;
  for (int i = 0; i < axis; ++i) {
    outer *= shape[i];
  }
  for (int i = axis + 1; i < rank; ++i) {
    inner *= shape[i];
  }
  const int64_t n = shape[axis];
  const auto src = x.data();
  std::vector<double> out(src.size());
  for (int64_t o = 0; o < outer; ++o) {
    for (int64_t in = 0; in < inner; ++in) {
      const int64_t base = o * n * inner + in;
      double mx = src[base];
      for (int64_t i = 1; i < n; ++i) {
        mx = std::max(mx, src[base + i * inner]);
      }
      double total = 0.0;
      for (int64_t i = 0; i < n; ++i) {
        const double e = std::exp(src[base + i * inner] - mx);
        out[base + i * inner] = e;
        total += e;
      }
      for (int64_t i = 0; i < n; ++i) {
        out[base + i * inner] /= total;
      }
    }
  }
  return makeResult(shape, std::move(out), {x.nodePtr()}, [outer, inner, n](Node& self) {
    Node& nx = *self.inputs[0];
    nx.ensureGrad();
    for (int64_t o = 0; o < outer; ++o) {
      for (int64_t in = 0; in < inner; ++in) {
        const int64_t base = o * n * inner + in;
        double dot = 0.0;
        for (int64_t i = 0; i < n; ++i) {
          dot += self.grad[base + i * inner] * self.value[base + i * inner];
        }
        for (int64_t i = 0; i < n; ++i) {
          const int64_t idx = base + i * inner;
          nx.grad[idx] += self.value[idx] * (self.grad[idx] - dot);
        }
      }
    }
  });
}

Tensor layerNorm(const Tensor& x, const Tensor& gain, const Tensor& bias) {
  constexpr double eps = 1e-5;
  const int64_t d = x.cols();
  if (gain.size() != d || bias.size() != d) {
    throw DimensionError(
        "layerNorm: gain/bias must have " + std::to_string(d) + " entries for input " +
        shapeString(x.shape()));
  }
  const int64_t r = x.rows();
  const auto src = x.data();
  const auto g = gain.data();
  const auto b = bias.data();
  std::vector<double> normalized(src.size());
  std::vector<double> rstd(static_cast<size_t>(r));
  std::vector<double> out(src.size());
  for (int64_t i = 0; i < r; ++i) {
    const double* row = src.data() + i * d;
    double mu = 0.0;
    for (int64_t j = 0; j < d; ++j) {
      mu += row[j];
    }
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (int64_t j = 0; j < d; ++j) {
      var += (row[j] - mu) * (row[j] - mu);
    }
    var /= static_cast<double>(d);
    rstd[i] = 1.0 / std::sqrt(var + eps);
    for (int64_t j = 0; j < d; ++j) {
      const double xh = (row[j] - mu) * rstd[i];
      normalized[i * d + j] = xh;
      out[i * d + j] = xh * g[j] + b[j];
    }
  }
  return makeResult(
      x.shape(),
      std::move(out),
      {x.nodePtr(), gain.nodePtr(), bias.nodePtr()},
      [r, d, normalized = std::move(normalized), rstd = std::move(rstd)](Node& self) {
        Node& nx = *self.inputs[0];
        Node& ng = *self.inputs[1];
        Node& nb = *self.inputs[2];
        if (ng.requiresGrad) {
          ng.ensureGrad();
        }
        if (nb.requiresGrad) {
          nb.ensureGrad();
        }
        if (nx.requiresGrad) {
          nx.ensureGrad();
        }
        for (int64_t i = 0; i < r; ++i) {
          const double* dy = self.grad.data() + i * d;
          const double* xh = normalized.data() + i * d;
          double meanDxh = 0.0;
          double meanDxhXh = 0.0;
          for (int64_t j = 0; j < d; ++j) {
            if (ng.requiresGrad) {
              ng.grad[j] += dy[j] * xh[j];
            }
            if (nb.requiresGrad) {
              nb.grad[j] += dy[j];
            }
            const double dxh = dy[j] * ng.value[j];
            meanDxh += dxh;
            meanDxhXh += dxh * xh[j];
          }
          if (!nx.requiresGrad) {
            continue;
          }
          meanDxh /= static_cast<double>(d);
          meanDxhXh /= static_cast<double>(d);
          for (int64_t j = 0; j < d; ++j) {
            const double dxh = dy[j] * ng.value[j];
            nx.grad[i * d + j] += rstd[i] * (dxh - meanDxh - xh[j] * meanDxhXh);
          }
        }
      });
}

Tensor concatRows(std::span<const Tensor> parts) {
  if (parts.empty()) {
    throw DimensionError("concatRows: no inputs");
  }
  const int64_t c = parts.front().cols();
  int64_t r = 0;
  std::vector<double> out;
  std::vector<std::shared_ptr<Node>> inputs;
  for (const auto& p : parts) {
    if (p.cols() != c) {
      throw DimensionError("concatRows: column counts differ");
    }
    r += p.rows();
    out.insert(out.end(), p.data().begin(), p.data().end());
    inputs.push_back(p.nodePtr());
  }
  return makeResult({r, c}, std::move(out), std::move(inputs), [](Node& self) {
    size_t offset = 0;
    for (auto& in : self.inputs) {
      if (in->requiresGrad) {
        in->ensureGrad();
        for (size_t i = 0; i < in->value.size(); ++i) {
          in->grad[i] += self.grad[offset + i];
        }
      }
      offset += in->value.size();
    }
  });
}

Tensor concatCols(std::span<const Tensor> parts) {
  if (parts.empty()) {
    throw DimensionError("concatCols: no inputs");
  }
  const int64_t r = parts.front().rows();
  int64_t c = 0;
  std::vector<int64_t> widths;
  std::vector<std::shared_ptr<Node>> inputs;
  for (const auto& p : parts) {
    if (p.rows() != r) {
      throw DimensionError("concatCols: row counts differ");
    }
    widths.push_back(p.cols());
    c += p.cols();
    inputs.push_back(p.nodePtr());
  }
  std::vector<double> out(static_cast<size_t>(r * c));
  int64_t colOffset = 0;
  for (const auto& p : parts) {
    const int64_t w = p.cols();
    const auto src = p.data();
    for (int64_t i = 0; i < r; ++i) {
      std::copy_n(src.data() + i * w, w, out.data() + i * c + colOffset);
    }
    colOffset += w;
  }
  return makeResult(
      {r, c}, std::move(out), std::move(inputs), [r, c, widths = std::move(widths)](Node& self) {
        int64_t offset = 0;
        for (size_t k = 0; k < self.inputs.size(); ++k) {
          Node& in = *self.inputs[k];
          const int64_t w = widths[k];
          if (in.requiresGrad) {
            in.ensureGrad();
            for (int64_t i = 0; i < r; ++i) {
              for (int64_t j = 0; j < w; ++j) {
                in.grad[i * w + j] += self.grad[i * c + offset + j];
              }
            }
          }
          offset += w;
        }
      });
}

Tensor sliceRows(const Tensor& a, int64_t begin, int64_t count) {
  const int64_t c = a.cols();
  if (begin < 0 || count <= 0 || begin + count > a.rows()) {
    throw DimensionError("sliceRows: range out of bounds for " + shapeString(a.shape()));
  }
  std::vector<double> out(a.data().begin() + begin * c, a.data().begin() + (begin + count) * c);
  return makeResult({count, c}, std::move(out), {a.nodePtr()}, [begin, c](Node& self) {
    Node& na = *self.inputs[0];
    na.ensureGrad();
    for (size_t i = 0; i < self.grad.size(); ++i) {
      na.grad[begin * c + i] += self.grad[i];
    }
  });
}

Tensor sliceCols(const Tensor& a, int64_t begin, int64_t count) {
  const int64_t c = a.cols();
  const int64_t r = a.rows();
  if (begin < 0 || count <= 0 || begin + count > c) {
    throw DimensionError("sliceCols: range out of bounds for " + shapeString(a.shape()));
  }
  std::vector<double> out(static_cast<size_t>(r * count));
  const auto src = a.data();
  for (int64_t i = 0; i < r; ++i) {
    std::copy_n(src.data() + i * c + begin, count, out.data() + i * count);
  }
  return makeResult({r, count}, std::move(out), {a.nodePtr()}, [r, c, begin, count](Node& self) {
    Node& na = *self.inputs[0];
    na.ensureGrad();
    for (int64_t i = 0; i < r; ++i) {
      for (int64_t j = 0; j < count; ++j) {
        na.grad[i * c + begin + j] += self.grad[i * count + j];
      }
    }
  });
}

Tensor embedding(const Tensor& table, std::span<const int32_t> ids) {
  require2d(table, "embedding");
  const int64_t vocab = table.dim(0);
  const int64_t h = table.dim(1);
  if (ids.empty()) {
    throw DimensionError("embedding: empty id sequence");
  }
  std::vector<int32_t> idCopy(ids.begin(), ids.end());
  std::vector<double> out;
  out.reserve(ids.size() * static_cast<size_t>(h));
  const auto src = table.data();
  for (const auto id : idCopy) {
    if (id < 0 || id >= vocab) {
      throw ContractError(
          "embedding: token id " + std::to_string(id) + " outside vocabulary of " +
          std::to_string(vocab));
    }
    out.insert(out.end(), src.begin() + id * h, src.begin() + (id + 1) * h);
  }
  const auto n = static_cast<int64_t>(idCopy.size());
  return makeResult({n, h}, std::move(out), {table.nodePtr()}, [h, idCopy = std::move(idCopy)](Node& self) {
    Node& nt = *self.inputs[0];
    nt.ensureGrad();
    for (size_t i = 0; i < idCopy.size(); ++i) {
      for (int64_t j = 0; j < h; ++j) {
        nt.grad[idCopy[i] * h + j] += self.grad[i * h + j];
      }
    }
  });
}

Tensor sum(const Tensor& a) {
  double total = 0.0;
  for (const auto v : a.data()) {
    total += v;
  }
  return makeResult({1}, {total}, {a.nodePtr()}, [](Node& self) {
    Node& na = *self.inputs[0];
    na.ensureGrad();
    for (auto& g : na.grad) {
      g += self.grad[0];
    }
  });
}

Tensor mean(const Tensor& a) {
  return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

Tensor mse(const Tensor& a, const Tensor& b) {
  const auto diff = sub(a, b);
  return mean(mul(diff, diff));
}

std::vector<Node*> topologicalOrder(const Tensor& root) {
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  // Iterative post-order DFS; pairs of (node, next input index).
  std::vector<std::pair<Node*, size_t>> stack;
  stack.emplace_back(root.nodePtr().get(), 0);
  visited.insert(root.nodePtr().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requiresGrad && visited.insert(child).second) {
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;
}

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw ContractError("backward: loss must be a scalar tensor");
  }
  if (!loss.requiresGrad()) {
    return;
  }
  const auto order = topologicalOrder(loss);
  Node& root = loss.node();
  root.ensureGrad();
  root.grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backwardFn && !node->grad.empty()) {
      node->backwardFn(*node);
      // Intermediate gradients are consumed exactly once.
      if (node != &root) {
        node->grad.clear();
        node->grad.shrink_to_fit();
      }
    }
  }
}

} // namespace mdt
