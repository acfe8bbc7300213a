#include "locl/ordering.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace locl {

std::string to_string(OrderingVariant v) {
    switch (v) {
        case OrderingVariant::Mst: return "mst";
        case OrderingVariant::Random: return "random";
        case OrderingVariant::Original: return "original";
        case OrderingVariant::Interleaved: return "interleaved";
    }
    return "mst";
}

OrderingVariant ordering_variant_from_string(const std::string& s) {
    if (s == "mst") return OrderingVariant::Mst;
    if (s == "random") return OrderingVariant::Random;
    if (s == "original") return OrderingVariant::Original;
    if (s == "interleaved") return OrderingVariant::Interleaved;
    throw LoclError("unknown ordering variant: " + s);
}

CorrelationMatrix pearson_matrix(const Matrix& X) {
    const std::size_t n = X.rows, m = X.cols;
    if (n < 2) throw LoclError("pearson_matrix requires at least 2 rows");

    std::vector<double> mean(m, 0.0), sd(m, 0.0);
    for (std::size_t j = 0; j < m; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += X.at(i, j);
        mean[j] = s / static_cast<double>(n);
    }
    for (std::size_t j = 0; j < m; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = X.at(i, j) - mean[j];
            s += d * d;
        }
        sd[j] = std::sqrt(s / static_cast<double>(n));
        if (sd[j] == 0.0) throw LoclError("feature " + std::to_string(j) + " has zero standard deviation");
    }

    CorrelationMatrix c;
    c.M = Matrix(m, m);
    for (std::size_t i = 0; i < m; ++i) {
        c.M.at(i, i) = 1.0;
        for (std::size_t j = i + 1; j < m; ++j) {
            double cov = 0.0;
            for (std::size_t r = 0; r < n; ++r)
                cov += (X.at(r, i) - mean[i]) * (X.at(r, j) - mean[j]);
            cov /= static_cast<double>(n);
            double v = cov / (sd[i] * sd[j]);
            v = std::clamp(v, -1.0, 1.0);
            c.M.at(i, j) = v;
            c.M.at(j, i) = v;
        }
    }
    return c;
}

CorrelationMatrix pearson_matrix(const TabularDataset& d) { return pearson_matrix(d.X); }

std::vector<MstEdge> build_mst(const CorrelationMatrix& c) {
    const std::size_t m = c.size();
    if (m < 2) throw LoclError("build_mst requires at least 2 features");

    struct Cand { std::size_t i, j; double w; };
    std::vector<Cand> cands;
    cands.reserve(m * (m - 1) / 2);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i + 1; j < m; ++j)
            cands.push_back({i, j, std::fabs(c.M.at(i, j))});
    // Kruskal on descending |weight|; equal weights resolved by the
    // lexicographically smaller (i, j) pair.
    std::stable_sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
        if (a.w != b.w) return a.w > b.w;
        if (a.i != b.i) return a.i < b.i;
        return a.j < b.j;
    });

    std::vector<std::size_t> parent(m);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::size_t x) {
        while (parent[x] != x) { parent[x] = parent[parent[x]]; x = parent[x]; }
        return x;
    };

    std::vector<MstEdge> edges;
    for (const auto& e : cands) {
        const std::size_t a = find(e.i), b = find(e.j);
        if (a == b) continue;
        parent[a] = b;
        edges.push_back({e.i, e.j, e.w});
        if (edges.size() == m - 1) break;
    }
    return edges;
}

FeatureOrdering dfs_order(const std::vector<MstEdge>& edges, const CorrelationMatrix& c) {
    const std::size_t m = c.size();
    if (edges.size() != m - 1) throw LoclError("dfs_order: edge list is not a spanning tree");

    std::vector<std::vector<std::pair<std::size_t, double>>> adj(m);
    for (const auto& e : edges) {
        adj[e.i].emplace_back(e.j, e.weight);
        adj[e.j].emplace_back(e.i, e.weight);
    }

    // Root: endpoint of the max-weight edge with the larger sum of incident
    // tree-edge weights; ties to the lower index.
    const MstEdge* best = &edges[0];
    for (const auto& e : edges) {
        if (e.weight > best->weight) {
            best = &e;
        } else if (e.weight == best->weight) {
            auto key = [](const MstEdge& x) {
                return std::make_pair(std::min(x.i, x.j), std::max(x.i, x.j));
            };
            if (key(e) < key(*best)) best = &e;
        }
    }
    auto incident_sum = [&](std::size_t v) {
        double s = 0.0;
        for (const auto& [u, w] : adj[v]) s += w;
        return s;
    };
    const std::size_t lo = std::min(best->i, best->j), hi = std::max(best->i, best->j);
    const double slo = incident_sum(lo), shi = incident_sum(hi);
    std::size_t root = (shi > slo) ? hi : lo;

    // children visited in descending edge weight, ties to lower index
    for (auto& nbrs : adj)
        std::sort(nbrs.begin(), nbrs.end(), [](const auto& a, const auto& b) {
            if (a.second != b.second) return a.second > b.second;
            return a.first < b.first;
        });

    FeatureOrdering o;
    o.variant = OrderingVariant::Mst;
    o.mst_edges = edges;
    std::vector<bool> visited(m, false);
    std::vector<std::size_t> stack{root};
    while (!stack.empty()) {
        const std::size_t v = stack.back();
        stack.pop_back();
        if (visited[v]) continue;
        visited[v] = true;
        o.permutation.push_back(v);
        // push in reverse so the heaviest child pops first
        for (auto it = adj[v].rbegin(); it != adj[v].rend(); ++it)
            if (!visited[it->first]) stack.push_back(it->first);
    }
    if (o.permutation.size() != m) throw LoclError("dfs_order: edge list is disconnected");
    return o;
}

FeatureOrdering alternative_order(std::size_t m, OrderingVariant variant, std::uint64_t seed) {
    if (m < 2) throw LoclError("alternative_order requires at least 2 features");
    FeatureOrdering o;
    o.variant = variant;
    switch (variant) {
        case OrderingVariant::Original:
            o.permutation.resize(m);
            std::iota(o.permutation.begin(), o.permutation.end(), 0);
            break;
        case OrderingVariant::Interleaved:
            for (std::size_t i = 0; i < m; i += 2) o.permutation.push_back(i);
            for (std::size_t i = 1; i < m; i += 2) o.permutation.push_back(i);
            break;
        case OrderingVariant::Random: {
            o.permutation.resize(m);
            std::iota(o.permutation.begin(), o.permutation.end(), 0);
            Rng rng(Rng::derive(seed, 0x0cde, 0));
            rng.shuffle(o.permutation);
            break;
        }
        case OrderingVariant::Mst:
            throw LoclError("alternative_order does not produce the mst variant");
    }
    return o;
}

SplitPlan split_features(const FeatureOrdering& o, double overlap_fraction) {
    const std::size_t m = o.permutation.size();
    if (m < 2) throw LoclError("split_features requires at least 2 features");
    if (overlap_fraction < 0.0 || overlap_fraction > 0.5)
        throw LoclError("overlap_fraction must lie in [0, 0.5]");

    const std::size_t half1 = (m + 1) / 2;
    const std::size_t half2 = m / 2;
    const std::size_t extra = static_cast<std::size_t>(std::floor(overlap_fraction * static_cast<double>(m)));
    const std::size_t n1 = half1 + extra;
    const std::size_t n2 = half2 + extra;
    if (n1 >= m || n2 >= m)
        throw LoclError("overlap_fraction too large: a subset would cover all features");

    SplitPlan plan;
    plan.overlap_fraction = overlap_fraction;
    plan.subset1.assign(o.permutation.begin(), o.permutation.begin() + static_cast<std::ptrdiff_t>(n1));
    plan.subset2.assign(o.permutation.end() - static_cast<std::ptrdiff_t>(n2), o.permutation.end());
    return plan;
}

FeatureOrdering compute_ordering(const Matrix& X, OrderingVariant variant, std::uint64_t seed) {
    if (variant == OrderingVariant::Mst) {
        CorrelationMatrix c = pearson_matrix(X);
        return dfs_order(build_mst(c), c);
    }
    return alternative_order(X.cols, variant, seed);
}

}  // namespace locl
