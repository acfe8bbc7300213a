#include "locl/augment.hpp"

#include <numeric>

namespace locl {

MaskBatch sample_mask(std::size_t n, std::size_t width, double p, std::uint64_t seed) {
    if (p < 0.0 || p >= 1.0) throw LoclError("mask rate p must lie in [0, 1)");
    MaskBatch mask;
    mask.n = n;
    mask.width = width;
    mask.p = p;
    mask.seed = seed;
    mask.m.resize(n * width);
    Rng rng(Rng::derive(seed, 0x3a5c));
    for (auto& bit : mask.m) bit = rng.next_double() < p ? 1 : 0;
    return mask;
}

Matrix corrupt(const Matrix& x, const MaskBatch& mask, CorruptMode mode,
               std::uint64_t shuffle_seed) {
    if (x.rows != mask.n || x.cols != mask.width)
        throw LoclError("corrupt: mask shape does not match batch shape");

    Matrix out = x;
    if (mode == CorruptMode::ZeroFill) {
        for (std::size_t r = 0; r < x.rows; ++r)
            for (std::size_t c = 0; c < x.cols; ++c)
                if (mask.at(r, c)) out.at(r, c) = 0.0;
        return out;
    }

    std::vector<std::size_t> perm(x.rows);
    for (std::size_t c = 0; c < x.cols; ++c) {
        std::iota(perm.begin(), perm.end(), 0);
        Rng rng(Rng::derive(shuffle_seed, 0xc0f7, c));
        rng.shuffle(perm);
        for (std::size_t r = 0; r < x.rows; ++r)
            if (mask.at(r, c)) out.at(r, c) = x.at(perm[r], c);
    }
    return out;
}

}  // namespace locl
