#include "mdt/layers.h"

#include "mdt/errors.h"

#include <cmath>
#include <vector>

namespace mdt {

Tensor efficientAttention(const Tensor& queries, const Tensor& keys, const Tensor& values) {
  if (queries.shape().size() != 2 || keys.shape().size() != 2 || values.shape().size() != 2) {
    throw DimensionError("efficientAttention: expected 2-D inputs");
  }
  if (queries.dim(1) != keys.dim(1)) {
    throw DimensionError("efficientAttention: query and key widths differ");
  }
  if (keys.dim(0) != values.dim(0)) {
    throw DimensionError("efficientAttention: key and value position counts differ");
  }
  const Tensor q = softmax(queries, 1);
  const Tensor k = softmax(keys, 0);
  const Tensor context = matmul(transpose(k), values);
  return matmul(q, context);
}

Tensor sinusoidalPositions(int64_t positions, int64_t width) {
  std::vector<double> data(static_cast<size_t>(positions * width));
  for (int64_t p = 0; p < positions; ++p) {
    for (int64_t j = 0; j < width; ++j) {
      const int64_t pair = j / 2;
      const double freq = std::pow(10000.0, -2.0 * static_cast<double>(pair) / static_cast<double>(width));
      const double angle = static_cast<double>(p) * freq;
      data[p * width + j] = (j % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  }
  return Tensor::fromData({positions, width}, std::move(data));
}

Tensor timestepEncoding(int step, int64_t width) {
  std::vector<double> data(static_cast<size_t>(width));
  for (int64_t j = 0; j < width; ++j) {
    const int64_t pair = j / 2;
    const double freq = std::pow(10000.0, -2.0 * static_cast<double>(pair) / static_cast<double>(width));
    const double angle = static_cast<double>(step) * freq;
    data[j] = (j % 2 == 0) ? std::sin(angle) : std::cos(angle);
  }
  return Tensor::fromData({1, width}, std::move(data));
}

void registerLinear(ParameterStore& store, const std::string& prefix, int64_t in, int64_t out, Rng& rng, bool zeroInit) {
  if (zeroInit) {
    store.addConstant(prefix + ".weight", {in, out}, 0.0);
  } else {
    store.addUniform(prefix + ".weight", {in, out}, in, rng);
  }
  store.addConstant(prefix + ".bias", {1, out}, 0.0);
}

Tensor linear(const Tensor& x, const ParameterStore& store, const std::string& prefix) {
  return addRow(matmul(x, store.get(prefix + ".weight")), store.get(prefix + ".bias"));
}

void registerLayerNorm(ParameterStore& store, const std::string& prefix, int64_t width) {
  store.addConstant(prefix + ".gain", {width}, 1.0);
  store.addConstant(prefix + ".bias", {width}, 0.0);
}

Tensor layerNorm(const Tensor& x, const ParameterStore& store, const std::string& prefix) {
  return layerNorm(x, store.get(prefix + ".gain"), store.get(prefix + ".bias"));
}

void registerAttention(ParameterStore& store, const std::string& prefix, int64_t width, Rng& rng) {
  store.addUniform(prefix + ".query", {width, width}, width, rng);
  store.addUniform(prefix + ".key", {width, width}, width, rng);
  store.addUniform(prefix + ".value", {width, width}, width, rng);
  registerLinear(store, prefix + ".out", width, width, rng);
}

Tensor multiHeadAttention(
    const Tensor& x,
    const Tensor& memory,
    const ParameterStore& store,
    const std::string& prefix,
    int heads) {
  const int64_t width = x.cols();
  if (heads < 1 || width % heads != 0) {
    throw DimensionError("attention: width must be divisible by the head count");
  }
  const Tensor q = matmul(x, store.get(prefix + ".query"));
  const Tensor k = matmul(memory, store.get(prefix + ".key"));
  const Tensor v = matmul(memory, store.get(prefix + ".value"));
  if (heads == 1) {
    return linear(efficientAttention(q, k, v), store, prefix + ".out");
  }
  const int64_t headWidth = width / heads;
  std::vector<Tensor> outputs;
  outputs.reserve(static_cast<size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    const int64_t begin = h * headWidth;
    outputs.push_back(efficientAttention(
        sliceCols(q, begin, headWidth), sliceCols(k, begin, headWidth), sliceCols(v, begin, headWidth)));
  }
  return linear(concatCols(outputs), store, prefix + ".out");
}

void registerFeedForward(ParameterStore& store, const std::string& prefix, int64_t width, Rng& rng) {
  registerLinear(store, prefix + ".fc1", width, 4 * width, rng);
  registerLinear(store, prefix + ".fc2", 4 * width, width, rng);
}

Tensor feedForward(const Tensor& x, const ParameterStore& store, const std::string& prefix) {
  return linear(gelu(linear(x, store, prefix + ".fc1")), store, prefix + ".fc2");
}

void registerEncoderBlock(ParameterStore& store, const std::string& prefix, int64_t width, Rng& rng) {
  registerLayerNorm(store, prefix + ".ln1", width);
  registerAttention(store, prefix + ".self", width, rng);
  registerLayerNorm(store, prefix + ".ln2", width);
  registerFeedForward(store, prefix + ".ff", width, rng);
}

Tensor encoderBlock(const Tensor& x, const ParameterStore& store, const std::string& prefix, int heads) {
  const Tensor h = layerNorm(x, store, prefix + ".ln1");
  const Tensor y = add(x, multiHeadAttention(h, h, store, prefix + ".self", heads));
  return add(y, feedForward(layerNorm(y, store, prefix + ".ln2"), store, prefix + ".ff"));
}

void registerDecoderBlock(ParameterStore& store, const std::string& prefix, int64_t width, Rng& rng) {
  registerLayerNorm(store, prefix + ".ln1", width);
  registerAttention(store, prefix + ".self", width, rng);
  registerLayerNorm(store, prefix + ".ln2", width);
  registerAttention(store, prefix + ".cross", width, rng);
  registerLayerNorm(store, prefix + ".ln3", width);
  registerFeedForward(store, prefix + ".ff", width, rng);
}

Tensor decoderBlock(
    const Tensor& x,
    const Tensor& memory,
    const ParameterStore& store,
    const std::string& prefix,
    int heads) {
  const Tensor h = layerNorm(x, store, prefix + ".ln1");
  Tensor y = add(x, multiHeadAttention(h, h, store, prefix + ".self", heads));
  y = add(y, multiHeadAttention(layerNorm(y, store, prefix + ".ln2"), memory, store, prefix + ".cross", heads));
  return add(y, feedForward(layerNorm(y, store, prefix + ".ln3"), store, prefix + ".ff"));
}

} // namespace mdt
