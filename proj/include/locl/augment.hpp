#pragma once

#include <cstdint>
#include <vector>

#include "locl/common.hpp"

namespace locl {

struct MaskBatch {
    std::vector<std::uint8_t> m;  // n x width, row-major
    std::size_t n = 0;
    std::size_t width = 0;
    double p = 0.0;
    std::uint64_t seed = 0;

    std::uint8_t at(std::size_t r, std::size_t c) const { return m[r * width + c]; }
};

enum class CorruptMode { MarginalShuffle, ZeroFill };

MaskBatch sample_mask(std::size_t n, std::size_t width, double p, std::uint64_t seed);

// x_tilde = x .* (1 - m) + x_bar .* m. Under MarginalShuffle, x_bar[i,j] is
// x[pi_j(i), j] for an independent per-column permutation pi_j drawn from
// shuffle_seed, so masked cells are resampled from the batch marginal of the
// feature. ZeroFill substitutes 0.
Matrix corrupt(const Matrix& x, const MaskBatch& mask, CorruptMode mode,
               std::uint64_t shuffle_seed);

}  // namespace locl
