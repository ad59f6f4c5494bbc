#pragma once

#include "mdt/parameters.h"
#include "mdt/tensor.h"

#include <string>

namespace mdt {

// Factorized attention: softmax over the feature axis of each query row,
// softmax over the position axis of each key column, then
//   out = softmax_row(Q) · (softmax_col(K)ᵀ · V).
// Cost is O((n + m)·d_k·d_v); no n×m matrix is ever formed.
Tensor efficientAttention(const Tensor& queries, const Tensor& keys, const Tensor& values);

// Sinusoidal table of shape positions×width (sin on even, cos on odd columns).
Tensor sinusoidalPositions(int64_t positions, int64_t width);
// Sinusoidal encoding of a single diffusion step, shape 1×width.
Tensor timestepEncoding(int step, int64_t width);

void registerLinear(ParameterStore& store, const std::string& prefix, int64_t in, int64_t out, Rng& rng, bool zeroInit = false);
Tensor linear(const Tensor& x, const ParameterStore& store, const std::string& prefix);

void registerLayerNorm(ParameterStore& store, const std::string& prefix, int64_t width);
Tensor layerNorm(const Tensor& x, const ParameterStore& store, const std::string& prefix);

// Multi-head efficient attention: Q from `x`, K/V from `memory`, heads split
// the width evenly and are concatenated before the output projection.
void registerAttention(ParameterStore& store, const std::string& prefix, int64_t width, Rng& rng);
Tensor multiHeadAttention(
    const Tensor& x,
    const Tensor& memory,
    const ParameterStore& store,
    const std::string& prefix,
    int heads);

// GELU MLP of hidden width 4·width.
void registerFeedForward(ParameterStore& store, const std::string& prefix, int64_t width, Rng& rng);
Tensor feedForward(const Tensor& x, const ParameterStore& store, const std::string& prefix);

// Pre-norm residual block: self-attention, then feed-forward.
void registerEncoderBlock(ParameterStore& store, const std::string& prefix, int64_t width, Rng& rng);
Tensor encoderBlock(const Tensor& x, const ParameterStore& store, const std::string& prefix, int heads);

// Pre-norm residual block: self-attention, cross-attention to memory, feed-forward.
void registerDecoderBlock(ParameterStore& store, const std::string& prefix, int64_t width, Rng& rng);
Tensor decoderBlock(
    const Tensor& x,
    const Tensor& memory,
    const ParameterStore& store,
    const std::string& prefix,
    int heads);

} // namespace mdt
