#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "maskgae/dense.hpp"

namespace maskgae {

using NodeId = std::int32_t;

// Undirected edge stored once in canonical order u < v.
struct Edge {
    NodeId u{0};
    NodeId v{0};

    friend bool operator==(const Edge&, const Edge&) = default;
    friend auto operator<=>(const Edge&, const Edge&) = default;
};

inline Edge make_canonical(NodeId a, NodeId b) {
    return a < b ? Edge{a, b} : Edge{b, a};
}

// Packs a canonical edge into one key for hash-set membership.
inline std::uint64_t edge_key(const Edge& e) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(e.u)) << 32) |
           static_cast<std::uint32_t>(e.v);
}

// Immutable undirected graph in CSR form with optional node features and
// labels. Safe for concurrent reads after construction.
class Graph {
public:
    Graph() = default;

    // Builds a graph from edges over [0, n_nodes). Edges are canonicalized,
    // sorted, and deduplicated; self-loops are rejected.
    static Graph from_edges(NodeId n_nodes, std::vector<Edge> edges,
                            std::optional<num::DenseMatrix> features = std::nullopt,
                            std::optional<std::vector<std::int32_t>> labels = std::nullopt);

    NodeId n_nodes() const { return n_nodes_; }
    const std::vector<Edge>& canonical_edges() const { return edges_; }
    std::int64_t n_edges() const { return static_cast<std::int64_t>(edges_.size()); }

    const std::vector<std::int64_t>& csr_offsets() const { return offsets_; }
    const std::vector<NodeId>& csr_neighbors() const { return neighbors_; }

    std::span<const NodeId> neighbors(NodeId v) const {
        return {neighbors_.data() + offsets_[static_cast<std::size_t>(v)],
                neighbors_.data() + offsets_[static_cast<std::size_t>(v) + 1]};
    }
    std::int64_t degree(NodeId v) const {
        return offsets_[static_cast<std::size_t>(v) + 1] - offsets_[static_cast<std::size_t>(v)];
    }

    bool has_edge(NodeId a, NodeId b) const;

    const std::optional<num::DenseMatrix>& features() const { return features_; }
    const std::optional<std::vector<std::int32_t>>& labels() const { return labels_; }

    // Same structure with different payloads attached.
    Graph with_payload(std::optional<num::DenseMatrix> features,
                       std::optional<std::vector<std::int32_t>> labels) const;

private:
    NodeId n_nodes_{0};
    std::vector<Edge> edges_;
    std::vector<std::int64_t> offsets_;
    std::vector<NodeId> neighbors_;
    std::optional<num::DenseMatrix> features_;
    std::optional<std::vector<std::int32_t>> labels_;
};

// Partition of a graph's edges for link-prediction evaluation. Positive
// splits partition the original canonical edges; negative lists contain only
// non-edges of the original graph.
struct EdgeSplit {
    Graph train_graph;
    std::vector<Edge> val_pos, val_neg, test_pos, test_neg;
};

// Text-format loaders (see README for the file grammar).
Graph load_graph(const std::string& edge_path,
                 const std::optional<std::string>& feature_path = std::nullopt,
                 const std::optional<std::string>& label_path = std::nullopt);

num::DenseMatrix load_feature_file(const std::string& path);
std::vector<std::int32_t> load_label_file(const std::string& path);

std::vector<std::int64_t> degrees(const Graph& g);

struct KHopResult {
    std::vector<NodeId> nodes; // sorted ascending, BFS distance <= k
    std::vector<Edge> edges;   // canonical edges induced on `nodes`
};
KHopResult k_hop_subgraph(const Graph& g, NodeId v, int k);

EdgeSplit split_edges(const Graph& g, double val_frac, double test_frac, std::uint64_t seed);

// D^{-1/2} (A [+ I]) D^{-1/2} over the symmetric adjacency. With self-loops
// every node keeps a diagonal entry, so isolated nodes still receive their
// own message.
num::SparseMatrix normalized_adjacency(const Graph& g, bool add_self_loops = true);

// JSON persistence: {"train": [[u,v],...], "val_pos": ..., "val_neg": ...,
// "test_pos": ..., "test_neg": ...}
void save_edge_split(const std::string& path, const EdgeSplit& split);
// Reassembles the split against the original graph (node count + payloads).
EdgeSplit load_edge_split(const std::string& path, const Graph& original);

} // namespace maskgae
