#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "locl/common.hpp"
#include "locl/data.hpp"

namespace locl {

struct CorrelationMatrix {
    Matrix M;  // symmetric m x m, unit diagonal
    std::size_t size() const { return M.rows; }
};

struct MstEdge {
    std::size_t i = 0;
    std::size_t j = 0;
    double weight = 0.0;  // |Pearson|
};

enum class OrderingVariant { Mst, Random, Original, Interleaved };

std::string to_string(OrderingVariant v);
OrderingVariant ordering_variant_from_string(const std::string& s);

struct FeatureOrdering {
    std::vector<std::size_t> permutation;
    std::vector<MstEdge> mst_edges;  // empty for non-MST variants
    OrderingVariant variant = OrderingVariant::Mst;
};

struct SplitPlan {
    std::vector<std::size_t> subset1;
    std::vector<std::size_t> subset2;
    double overlap_fraction = 0.0;
};

CorrelationMatrix pearson_matrix(const Matrix& X);
CorrelationMatrix pearson_matrix(const TabularDataset& d);

// Maximum spanning tree over |M|; ties prefer the lexicographically smaller
// (min(i,j), max(i,j)) pair.
std::vector<MstEdge> build_mst(const CorrelationMatrix& c);

FeatureOrdering dfs_order(const std::vector<MstEdge>& edges, const CorrelationMatrix& c);

FeatureOrdering alternative_order(std::size_t m, OrderingVariant variant, std::uint64_t seed);

SplitPlan split_features(const FeatureOrdering& o, double overlap_fraction);

// Convenience: full ordering pipeline for a data matrix.
FeatureOrdering compute_ordering(const Matrix& X, OrderingVariant variant, std::uint64_t seed);

}  // namespace locl
