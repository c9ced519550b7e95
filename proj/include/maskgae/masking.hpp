#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "maskgae/graph.hpp"

namespace maskgae {

// Partition of a training graph's edges into a masked set (the reconstruction
// target) and the visible remainder the encoder is allowed to see.
struct MaskSplit {
    std::vector<Edge> masked_edges;  // sorted canonical
    std::vector<Edge> visible_edges; // sorted canonical
    Graph visible_graph;             // visible edges over the same node set, no payloads
};

// Each canonical edge lands in the masked set independently with probability p.
MaskSplit mask_edges_bernoulli(const Graph& g, double p, std::uint64_t seed);

// Samples ceil(fraction * n_nodes) distinct root nodes, weighted by degree,
// without replacement. Zero-degree nodes are never sampled; if fewer
// candidates exist than requested the count is clipped with a warning on
// stderr.
std::vector<NodeId> sample_roots(const Graph& g, double fraction, std::uint64_t seed);

// For each root, n_walk uniform random walks of l_walk steps on the full
// graph; every traversed edge joins the masked set (deduplicated). Walks stop
// early at degree-0 nodes.
MaskSplit mask_edges_path(const Graph& g, std::span<const NodeId> roots, int n_walk, int l_walk,
                          std::uint64_t seed);

// Debug serialization: {"masked": [[u,v],...], "visible": [[u,v],...]}.
void save_mask_split(const std::string& path, const MaskSplit& split);

} // namespace maskgae
