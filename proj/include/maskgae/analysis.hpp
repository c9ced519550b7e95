#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "maskgae/graph.hpp"
#include "maskgae/trainer.hpp"

namespace maskgae {

// Average k-hop subgraph overlap of the paired views of positive edges.
struct OverlapReport {
    std::string regime; // none | edge | path
    int k{0};
    double o_node{0.0};
    double o_edge{0.0};
    int sample_count{0}; // edges averaged (single run) or seeds (sweep)
};

// For each (u,v) in positive_edges, the node sets V^k(u), V^k(v) and induced
// edge sets of the k-hop subgraphs are intersected; each edge contributes the
// symmetric mean of the two containment ratios. Edge ratios with an empty
// denominator contribute 0. positive_edges must be edges of g.
OverlapReport overlap_stats(const Graph& g, std::span<const Edge> positive_edges, int k);

// Same statistic but with the subgraphs hosted by an arbitrary graph while
// the pairs come from elsewhere (the masked edges are not edges of the
// visible graph).
OverlapReport overlap_over_pairs(const Graph& host, std::span<const Edge> pairs, int k,
                                 const std::string& regime);

struct MaskRegimeConfig {
    std::string regime;        // "none" | "edge" | "path"
    double mask_rate{0.7};     // edge regime
    double root_fraction{0.5}; // path regime
    int n_walk{2};
    int l_walk{4};
};

// Per regime: subgraphs are computed in the visible graph while the positive
// pairs are the masked edges; results are averaged over n_seeds mask draws.
// The "none" regime is deterministic (all edges, full graph).
std::vector<OverlapReport> masked_overlap_sweep(const Graph& g, int k,
                                                std::span<const MaskRegimeConfig> regimes,
                                                int n_seeds, std::uint64_t base_seed = 1);

// (E[N_uv])^2 / N_k * gamma^2.
double prop1_bound(double mean_overlap_size, double subgraph_cap, double gamma);

struct BoundInputs {
    double mean_overlap_size{0.0}; // E[N_uv]
    std::int64_t subgraph_cap{0};  // N_k = max_v |V^k(v)|
    double gamma{0.0};             // mean per-coordinate feature variance (unbiased)
};

BoundInputs estimate_bound_inputs(const Graph& g, std::span<const Edge> edges, int k);

// CSV rows: regime,k,o_node,o_edge,n_seeds
void save_overlap_csv(const std::string& path, std::span<const OverlapReport> reports);

} // namespace maskgae
