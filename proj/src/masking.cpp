#include "maskgae/masking.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <stdexcept>
#include <unordered_set>

#include <json.hpp>

#include "maskgae/rng.hpp"

namespace maskgae {

namespace {

MaskSplit finish_split(const Graph& g, std::vector<Edge> masked, std::vector<Edge> visible) {
    std::sort(masked.begin(), masked.end());
    std::sort(visible.begin(), visible.end());
    MaskSplit out;
    out.visible_graph = Graph::from_edges(g.n_nodes(), visible);
    out.masked_edges = std::move(masked);
    out.visible_edges = std::move(visible);
    return out;
}

} // namespace

MaskSplit mask_edges_bernoulli(const Graph& g, double p, std::uint64_t seed) {
    if (p < 0.0 || p > 1.0) throw std::invalid_argument("mask_edges_bernoulli: p must be in [0,1]");
    Rng rng(seed);
    std::vector<Edge> masked, visible;
    for (const Edge& e : g.canonical_edges()) {
        if (rng.uniform_real() < p)
            masked.push_back(e);
        else
            visible.push_back(e);
    }
    return finish_split(g, std::move(masked), std::move(visible));
}

std::vector<NodeId> sample_roots(const Graph& g, double fraction, std::uint64_t seed) {
    if (fraction <= 0.0 || fraction > 1.0)
        throw std::invalid_argument("sample_roots: fraction must be in (0,1]");

    std::vector<NodeId> candidates;
    std::vector<double> weights;
    for (NodeId v = 0; v < g.n_nodes(); ++v) {
        if (g.degree(v) > 0) {
            candidates.push_back(v);
            weights.push_back(static_cast<double>(g.degree(v)));
        }
    }
    std::size_t want = static_cast<std::size_t>(
        std::ceil(fraction * static_cast<double>(g.n_nodes())));
    if (want > candidates.size()) {
        std::cerr << "sample_roots: requested " << want << " roots but only "
                  << candidates.size() << " nodes have positive degree; clipping\n";
        want = candidates.size();
    }

    // Sequential weighted sampling without replacement: draw, swap-remove.
    Rng rng(seed);
    double total = 0.0;
    for (double w : weights) total += w;
    std::vector<NodeId> roots;
    roots.reserve(want);
    for (std::size_t k = 0; k < want; ++k) {
        const double r = rng.uniform_real() * total;
        double acc = 0.0;
        std::size_t pick = candidates.size() - 1;
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            acc += weights[i];
            if (r < acc) {
                pick = i;
                break;
            }
        }
        roots.push_back(candidates[pick]);
        total -= weights[pick];
        candidates[pick] = candidates.back();
        weights[pick] = weights.back();
        candidates.pop_back();
        weights.pop_back();
    }
    std::sort(roots.begin(), roots.end());
    return roots;
}

MaskSplit mask_edges_path(const Graph& g, std::span<const NodeId> roots, int n_walk, int l_walk,
                          std::uint64_t seed) {
    if (n_walk < 1 || l_walk < 1)
        throw std::invalid_argument("mask_edges_path: n_walk and l_walk must be >= 1");
    for (NodeId r : roots)
        if (r < 0 || r >= g.n_nodes())
            throw std::out_of_range("mask_edges_path: root " + std::to_string(r) + " out of range");

    Rng rng(seed);
    std::unordered_set<std::uint64_t> masked_keys;
    for (NodeId root : roots) {
        for (int w = 0; w < n_walk; ++w) {
            NodeId cur = root;
            for (int step = 0; step < l_walk; ++step) {
                const auto nb = g.neighbors(cur);
                if (nb.empty()) break; // dead end
                const NodeId next =
                    nb[static_cast<std::size_t>(rng.uniform_index(static_cast<std::uint64_t>(nb.size())))];
                masked_keys.insert(edge_key(make_canonical(cur, next)));
                cur = next;
            }
        }
    }

    std::vector<Edge> masked, visible;
    for (const Edge& e : g.canonical_edges()) {
        if (masked_keys.count(edge_key(e)))
            masked.push_back(e);
        else
            visible.push_back(e);
    }
    return finish_split(g, std::move(masked), std::move(visible));
}

void save_mask_split(const std::string& path, const MaskSplit& split) {
    nlohmann::ordered_json j;
    auto to_json = [](const std::vector<Edge>& edges) {
        nlohmann::json arr = nlohmann::json::array();
        for (const Edge& e : edges) arr.push_back({e.u, e.v});
        return arr;
    };
    j["masked"] = to_json(split.masked_edges);
    j["visible"] = to_json(split.visible_edges);
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << j.dump(0) << "\n";
}

} // namespace maskgae
