#include "maskgae/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <unordered_set>

#include "maskgae/rng.hpp"

namespace maskgae {

namespace {

// Precomputed k-hop node sets (sorted) and induced edge counts for every node
// of a host graph. Per-edge overlap queries then reduce to sorted
// intersection plus one pass over the host's canonical edges.
struct NeighborhoodIndex {
    const Graph& g;
    int k;
    std::vector<std::vector<NodeId>> node_sets;
    std::vector<std::int64_t> edge_counts;

    NeighborhoodIndex(const Graph& graph, int hops) : g(graph), k(hops) {
        const NodeId n = g.n_nodes();
        node_sets.resize(static_cast<std::size_t>(n));
        edge_counts.assign(static_cast<std::size_t>(n), 0);
        std::vector<std::int32_t> stamp(static_cast<std::size_t>(n), -1);
        std::vector<NodeId> frontier, next;
        for (NodeId v = 0; v < n; ++v) {
            frontier.assign(1, v);
            stamp[static_cast<std::size_t>(v)] = v;
            auto& set = node_sets[static_cast<std::size_t>(v)];
            set.push_back(v);
            for (int hop = 0; hop < k && !frontier.empty(); ++hop) {
                next.clear();
                for (NodeId u : frontier) {
                    for (NodeId w : g.neighbors(u)) {
                        if (stamp[static_cast<std::size_t>(w)] != v) {
                            stamp[static_cast<std::size_t>(w)] = v;
                            next.push_back(w);
                            set.push_back(w);
                        }
                    }
                }
                frontier.swap(next);
            }
            std::sort(set.begin(), set.end());
            // Induced edge count: neighbors inside the set, counted once.
            std::int64_t count = 0;
            for (NodeId u : set)
                for (NodeId w : g.neighbors(u))
                    if (u < w && std::binary_search(set.begin(), set.end(), w)) ++count;
            edge_counts[static_cast<std::size_t>(v)] = count;
        }
    }
};

std::int64_t sorted_intersection_size(const std::vector<NodeId>& a, const std::vector<NodeId>& b,
                                      std::vector<NodeId>* out = nullptr) {
    std::int64_t count = 0;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] < b[j])
            ++i;
        else if (b[j] < a[i])
            ++j;
        else {
            ++count;
            if (out) out->push_back(a[i]);
            ++i;
            ++j;
        }
    }
    return count;
}

OverlapReport overlap_impl(const NeighborhoodIndex& index, std::span<const Edge> pairs,
                           const std::string& regime) {
    if (pairs.empty()) throw std::invalid_argument("overlap: empty positive edge set");
    const Graph& g = index.g;
    std::vector<bool> in_intersection(static_cast<std::size_t>(g.n_nodes()), false);
    std::vector<NodeId> intersection;

    double o_node_sum = 0.0, o_edge_sum = 0.0;
    for (const Edge& e : pairs) {
        const auto& su = index.node_sets[static_cast<std::size_t>(e.u)];
        const auto& sv = index.node_sets[static_cast<std::size_t>(e.v)];
        intersection.clear();
        const std::int64_t n_common = sorted_intersection_size(su, sv, &intersection);
        o_node_sum += 0.5 * (static_cast<double>(n_common) / static_cast<double>(su.size()) +
                             static_cast<double>(n_common) / static_cast<double>(sv.size()));

        // Edges of both induced subgraphs = edges induced on the intersection.
        for (NodeId x : intersection) in_intersection[static_cast<std::size_t>(x)] = true;
        std::int64_t e_common = 0;
        for (NodeId x : intersection)
            for (NodeId w : g.neighbors(x))
                if (x < w && in_intersection[static_cast<std::size_t>(w)]) ++e_common;
        for (NodeId x : intersection) in_intersection[static_cast<std::size_t>(x)] = false;

        const std::int64_t eu = index.edge_counts[static_cast<std::size_t>(e.u)];
        const std::int64_t ev = index.edge_counts[static_cast<std::size_t>(e.v)];
        const double ru = eu > 0 ? static_cast<double>(e_common) / static_cast<double>(eu) : 0.0;
        const double rv = ev > 0 ? static_cast<double>(e_common) / static_cast<double>(ev) : 0.0;
        o_edge_sum += 0.5 * (ru + rv);
    }

    OverlapReport report;
    report.regime = regime;
    report.k = index.k;
    report.o_node = o_node_sum / static_cast<double>(pairs.size());
    report.o_edge = o_edge_sum / static_cast<double>(pairs.size());
    report.sample_count = static_cast<int>(pairs.size());
    return report;
}

} // namespace

OverlapReport overlap_stats(const Graph& g, std::span<const Edge> positive_edges, int k) {
    if (k < 1) throw std::invalid_argument("overlap_stats: k must be >= 1");
    if (positive_edges.empty()) throw std::invalid_argument("overlap_stats: empty positive edge set");
    std::unordered_set<std::uint64_t> keys;
    for (const Edge& e : g.canonical_edges()) keys.insert(edge_key(e));
    for (const Edge& e : positive_edges)
        if (!keys.count(edge_key(e)))
            throw std::invalid_argument("overlap_stats: positive edge (" + std::to_string(e.u) +
                                        "," + std::to_string(e.v) + ") is not an edge of the graph");
    NeighborhoodIndex index(g, k);
    return overlap_impl(index, positive_edges, "none");
}

OverlapReport overlap_over_pairs(const Graph& host, std::span<const Edge> pairs, int k,
                                 const std::string& regime) {
    if (k < 1) throw std::invalid_argument("overlap_over_pairs: k must be >= 1");
    NeighborhoodIndex index(host, k);
    return overlap_impl(index, pairs, regime);
}

std::vector<OverlapReport> masked_overlap_sweep(const Graph& g, int k,
                                                std::span<const MaskRegimeConfig> regimes,
                                                int n_seeds, std::uint64_t base_seed) {
    if (n_seeds < 1) throw std::invalid_argument("masked_overlap_sweep: n_seeds must be >= 1");
    std::vector<OverlapReport> out;
    for (const MaskRegimeConfig& cfg : regimes) {
        if (cfg.regime == "none") {
            OverlapReport r = overlap_stats(g, g.canonical_edges(), k);
            r.sample_count = 1;
            out.push_back(r);
            continue;
        }
        double o_node = 0.0, o_edge = 0.0;
        for (int s = 0; s < n_seeds; ++s) {
            const std::uint64_t seed = derive_seed(base_seed, static_cast<std::uint64_t>(s));
            MaskSplit mask;
            if (cfg.regime == "edge") {
                mask = mask_edges_bernoulli(g, cfg.mask_rate, seed);
            } else if (cfg.regime == "path") {
                mask = mask_edges_path(g, sample_roots(g, cfg.root_fraction, derive_seed(seed, 1)),
                                       cfg.n_walk, cfg.l_walk, derive_seed(seed, 2));
            } else {
                throw std::invalid_argument("masked_overlap_sweep: unknown regime " + cfg.regime);
            }
            OverlapReport r = overlap_over_pairs(mask.visible_graph, mask.masked_edges, k, cfg.regime);
            o_node += r.o_node;
            o_edge += r.o_edge;
        }
        OverlapReport report;
        report.regime = cfg.regime;
        report.k = k;
        report.o_node = o_node / static_cast<double>(n_seeds);
        report.o_edge = o_edge / static_cast<double>(n_seeds);
        report.sample_count = n_seeds;
        out.push_back(report);
    }
    return out;
}

double prop1_bound(double mean_overlap_size, double subgraph_cap, double gamma) {
    if (subgraph_cap <= 0.0) throw std::invalid_argument("prop1_bound: N_k must be > 0");
    if (gamma < 0.0) throw std::invalid_argument("prop1_bound: gamma must be >= 0");
    if (mean_overlap_size < 0.0)
        throw std::invalid_argument("prop1_bound: E[N_uv] must be >= 0");
    return mean_overlap_size * mean_overlap_size / subgraph_cap * gamma * gamma;
}

BoundInputs estimate_bound_inputs(const Graph& g, std::span<const Edge> edges, int k) {
    if (k < 1) throw std::invalid_argument("estimate_bound_inputs: k must be >= 1");
    if (edges.empty()) throw std::invalid_argument("estimate_bound_inputs: empty edge set");
    if (!g.features())
        throw std::invalid_argument("estimate_bound_inputs: features required for gamma");

    NeighborhoodIndex index(g, k);
    double mean_overlap = 0.0;
    for (const Edge& e : edges)
        mean_overlap += static_cast<double>(
            sorted_intersection_size(index.node_sets[static_cast<std::size_t>(e.u)],
                                     index.node_sets[static_cast<std::size_t>(e.v)]));
    mean_overlap /= static_cast<double>(edges.size());

    std::int64_t cap = 0;
    for (const auto& set : index.node_sets)
        cap = std::max(cap, static_cast<std::int64_t>(set.size()));

    const num::DenseMatrix& x = *g.features();
    double gamma = 0.0;
    if (x.rows > 1) {
        for (std::int64_t j = 0; j < x.cols; ++j) {
            double mean = 0.0;
            for (std::int64_t i = 0; i < x.rows; ++i) mean += static_cast<double>(x(i, j));
            mean /= static_cast<double>(x.rows);
            double ss = 0.0;
            for (std::int64_t i = 0; i < x.rows; ++i) {
                const double d = static_cast<double>(x(i, j)) - mean;
                ss += d * d;
            }
            gamma += ss / static_cast<double>(x.rows - 1);
        }
        gamma /= static_cast<double>(x.cols);
    }

    return BoundInputs{mean_overlap, cap, gamma};
}

void save_overlap_csv(const std::string& path, std::span<const OverlapReport> reports) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << "regime,k,o_node,o_edge,n_seeds\n";
    for (const OverlapReport& r : reports) {
        char line[128];
        std::snprintf(line, sizeof(line), "%s,%d,%.6f,%.6f,%d", r.regime.c_str(), r.k, r.o_node,
                      r.o_edge, r.sample_count);
        out << line << "\n";
    }
}

} // namespace maskgae
