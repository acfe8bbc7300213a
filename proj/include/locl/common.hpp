#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace locl {

// Dense row-major matrix of doubles.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    bool empty() const { return data.empty(); }
};

// Deterministic 64-bit RNG. std::mt19937_64 output is fully specified by the
// standard; derived doubles below avoid std::uniform_* distributions, whose
// streams differ between standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(split_mix(seed)), inc_(split_mix(seed ^ 0x9e3779b97f4a7c15ull) | 1) {}

    std::uint64_t next_u64() {
        // xorshift128+ style step over two splitmix-derived words
        std::uint64_t x = state_;
        std::uint64_t y = inc_;
        state_ = y;
        x ^= x << 23;
        inc_ = x ^ y ^ (x >> 17) ^ (y >> 26);
        return inc_ + y;
    }

    // uniform in [0,1)
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // uniform integer in [0, n)
    std::uint64_t next_below(std::uint64_t n) {
        // modulo bias is negligible for n << 2^64 but reject anyway
        std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v = next_u64();
        while (v >= limit) v = next_u64();
        return v % n;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(next_below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    static std::uint64_t split_mix(std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ull;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
        return x ^ (x >> 31);
    }

    // stable seed derivation for sub-streams (fold ids, epoch/batch/branch)
    static std::uint64_t derive(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) {
        std::uint64_t h = split_mix(seed);
        h = split_mix(h ^ (a + 0x100000001b3ull));
        h = split_mix(h ^ (b + 0xcbf29ce484222325ull));
        h = split_mix(h ^ (c + 0x100000001b3ull));
        return h;
    }

private:
    std::uint64_t state_;
    std::uint64_t inc_;
};

// FNV-1a 64-bit, used for content fingerprints.
inline std::uint64_t fnv1a(const void* bytes, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string hex64(std::uint64_t v);
std::uint64_t fingerprint_file(const std::string& path);

struct LoclError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace locl
