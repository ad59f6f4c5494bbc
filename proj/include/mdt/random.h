#pragma once

#include "mdt/motion.h"

#include <cstdint>
#include <random>

namespace mdt {

using Rng = std::mt19937_64;

// Independent stream derived from a base seed and a stream id.
Rng makeRng(uint64_t seed, uint64_t stream = 0);

RowMatrix gaussianMatrix(Eigen::Index rows, Eigen::Index cols, Rng& rng);
double gaussian(Rng& rng);
// Uniform integer in [lo, hi].
int64_t uniformInt(Rng& rng, int64_t lo, int64_t hi);
double uniformReal(Rng& rng, double lo, double hi);

} // namespace mdt
