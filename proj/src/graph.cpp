#include "maskgae/graph.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include <json.hpp>

#include "maskgae/rng.hpp"

namespace maskgae {

namespace {

[[noreturn]] void parse_fail(const std::string& path, std::int64_t line_no, const std::string& what) {
    throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + what);
}

bool is_comment_or_blank(const std::string& line) {
    for (char c : line) {
        if (c == '#') return true;
        if (!std::isspace(static_cast<unsigned char>(c))) return false;
    }
    return true;
}

} // namespace

Graph Graph::from_edges(NodeId n_nodes, std::vector<Edge> edges,
                        std::optional<num::DenseMatrix> features,
                        std::optional<std::vector<std::int32_t>> labels) {
    if (n_nodes < 0) throw std::invalid_argument("Graph: negative node count");
    for (Edge& e : edges) {
        if (e.u > e.v) std::swap(e.u, e.v);
        if (e.u == e.v) throw std::invalid_argument("Graph: self-loop at node " + std::to_string(e.u));
        if (e.u < 0 || e.v >= n_nodes)
            throw std::invalid_argument("Graph: edge (" + std::to_string(e.u) + "," +
                                        std::to_string(e.v) + ") out of range for n_nodes=" +
                                        std::to_string(n_nodes));
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

    if (features && features->rows != n_nodes)
        throw std::invalid_argument("Graph: feature row count " + std::to_string(features->rows) +
                                    " != n_nodes " + std::to_string(n_nodes));
    if (labels && static_cast<NodeId>(labels->size()) != n_nodes)
        throw std::invalid_argument("Graph: label count " + std::to_string(labels->size()) +
                                    " != n_nodes " + std::to_string(n_nodes));

    Graph g;
    g.n_nodes_ = n_nodes;
    g.edges_ = std::move(edges);
    g.features_ = std::move(features);
    g.labels_ = std::move(labels);

    // Symmetric CSR: count, prefix-sum, fill, then sort each neighbor list.
    g.offsets_.assign(static_cast<std::size_t>(n_nodes) + 1, 0);
    for (const Edge& e : g.edges_) {
        ++g.offsets_[static_cast<std::size_t>(e.u) + 1];
        ++g.offsets_[static_cast<std::size_t>(e.v) + 1];
    }
    for (std::size_t i = 1; i < g.offsets_.size(); ++i) g.offsets_[i] += g.offsets_[i - 1];
    g.neighbors_.resize(static_cast<std::size_t>(g.offsets_.back()));
    std::vector<std::int64_t> cursor(g.offsets_.begin(), g.offsets_.end() - 1);
    for (const Edge& e : g.edges_) {
        g.neighbors_[static_cast<std::size_t>(cursor[static_cast<std::size_t>(e.u)]++)] = e.v;
        g.neighbors_[static_cast<std::size_t>(cursor[static_cast<std::size_t>(e.v)]++)] = e.u;
    }
    for (NodeId v = 0; v < n_nodes; ++v) {
        auto begin = g.neighbors_.begin() + g.offsets_[static_cast<std::size_t>(v)];
        auto end = g.neighbors_.begin() + g.offsets_[static_cast<std::size_t>(v) + 1];
        std::sort(begin, end);
    }
    return g;
}

bool Graph::has_edge(NodeId a, NodeId b) const {
    if (a == b) return false;
    if (degree(a) > degree(b)) std::swap(a, b);
    auto nb = neighbors(a);
    return std::binary_search(nb.begin(), nb.end(), b);
}

Graph Graph::with_payload(std::optional<num::DenseMatrix> features,
                          std::optional<std::vector<std::int32_t>> labels) const {
    return Graph::from_edges(n_nodes_, edges_, std::move(features), std::move(labels));
}

num::DenseMatrix load_feature_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open feature file: " + path);
    std::string line;
    std::int64_t line_no = 0;

    if (!std::getline(in, line)) parse_fail(path, 1, "missing header line \"n d\"");
    ++line_no;
    std::istringstream header(line);
    std::int64_t n = -1, d = -1;
    if (!(header >> n >> d) || n < 0 || d < 0) parse_fail(path, line_no, "bad header, expected \"n d\"");
    std::string extra;
    if (header >> extra) parse_fail(path, line_no, "trailing tokens after header");

    num::DenseMatrix m(n, d);
    for (std::int64_t i = 0; i < n; ++i) {
        if (!std::getline(in, line)) parse_fail(path, line_no + 1, "expected " + std::to_string(n) + " feature rows");
        ++line_no;
        std::istringstream row(line);
        for (std::int64_t j = 0; j < d; ++j) {
            float x;
            if (!(row >> x)) parse_fail(path, line_no, "expected " + std::to_string(d) + " floats");
            m(i, j) = x;
        }
        if (row >> extra) parse_fail(path, line_no, "trailing tokens in feature row");
    }
    return m;
}

std::vector<std::int32_t> load_label_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open label file: " + path);
    std::vector<std::int32_t> labels;
    std::string line;
    std::int64_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (is_comment_or_blank(line)) continue;
        std::istringstream row(line);
        std::int64_t y;
        if (!(row >> y) || y < 0) parse_fail(path, line_no, "expected a non-negative integer label");
        std::string extra;
        if (row >> extra) parse_fail(path, line_no, "trailing tokens in label line");
        labels.push_back(static_cast<std::int32_t>(y));
    }
    return labels;
}

Graph load_graph(const std::string& edge_path, const std::optional<std::string>& feature_path,
                 const std::optional<std::string>& label_path) {
    std::ifstream in(edge_path);
    if (!in) throw std::runtime_error("cannot open edge file: " + edge_path);

    std::vector<Edge> edges;
    NodeId max_id = -1;
    std::string line;
    std::int64_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (is_comment_or_blank(line)) continue;
        std::istringstream row(line);
        std::int64_t a, b;
        if (!(row >> a >> b)) parse_fail(edge_path, line_no, "expected two node ids");
        std::string extra;
        if (row >> extra) parse_fail(edge_path, line_no, "trailing tokens in edge line");
        if (a < 0 || b < 0) parse_fail(edge_path, line_no, "negative node id");
        if (a == b) parse_fail(edge_path, line_no, "self-loop rejected");
        max_id = std::max({max_id, static_cast<NodeId>(a), static_cast<NodeId>(b)});
        edges.push_back(make_canonical(static_cast<NodeId>(a), static_cast<NodeId>(b)));
    }

    std::optional<num::DenseMatrix> features;
    if (feature_path) features = load_feature_file(*feature_path);

    const NodeId n_nodes = features ? static_cast<NodeId>(features->rows) : max_id + 1;
    if (features && max_id >= n_nodes)
        throw std::runtime_error(edge_path + ": node id " + std::to_string(max_id) +
                                 " out of range of feature matrix (" + std::to_string(n_nodes) +
                                 " rows)");

    std::optional<std::vector<std::int32_t>> labels;
    if (label_path) {
        labels = load_label_file(*label_path);
        if (static_cast<NodeId>(labels->size()) != n_nodes)
            throw std::runtime_error(*label_path + ": label count " +
                                     std::to_string(labels->size()) + " != node count " +
                                     std::to_string(n_nodes));
    }

    return Graph::from_edges(n_nodes, std::move(edges), std::move(features), std::move(labels));
}

std::vector<std::int64_t> degrees(const Graph& g) {
    std::vector<std::int64_t> d(static_cast<std::size_t>(g.n_nodes()));
    for (NodeId v = 0; v < g.n_nodes(); ++v) d[static_cast<std::size_t>(v)] = g.degree(v);
    return d;
}

KHopResult k_hop_subgraph(const Graph& g, NodeId v, int k) {
    if (v < 0 || v >= g.n_nodes())
        throw std::out_of_range("k_hop_subgraph: node " + std::to_string(v) + " out of range");
    if (k < 0) throw std::invalid_argument("k_hop_subgraph: negative hop count");

    std::vector<bool> seen(static_cast<std::size_t>(g.n_nodes()), false);
    std::vector<NodeId> frontier{v}, next;
    seen[static_cast<std::size_t>(v)] = true;
    KHopResult res;
    res.nodes.push_back(v);
    for (int hop = 0; hop < k && !frontier.empty(); ++hop) {
        next.clear();
        for (NodeId u : frontier) {
            for (NodeId w : g.neighbors(u)) {
                if (!seen[static_cast<std::size_t>(w)]) {
                    seen[static_cast<std::size_t>(w)] = true;
                    next.push_back(w);
                    res.nodes.push_back(w);
                }
            }
        }
        frontier.swap(next);
    }
    std::sort(res.nodes.begin(), res.nodes.end());
    for (const Edge& e : g.canonical_edges())
        if (seen[static_cast<std::size_t>(e.u)] && seen[static_cast<std::size_t>(e.v)])
            res.edges.push_back(e);
    return res;
}

EdgeSplit split_edges(const Graph& g, double val_frac, double test_frac, std::uint64_t seed) {
    if (val_frac < 0.0 || val_frac >= 1.0 || test_frac < 0.0 || test_frac >= 1.0 ||
        val_frac + test_frac >= 1.0)
        throw std::invalid_argument("split_edges: fractions must be in [0,1) with val+test < 1");

    const auto& edges = g.canonical_edges();
    const std::int64_t m = static_cast<std::int64_t>(edges.size());
    const auto n_val = static_cast<std::int64_t>(std::llround(val_frac * static_cast<double>(m)));
    const auto n_test = static_cast<std::int64_t>(std::llround(test_frac * static_cast<double>(m)));

    Rng rng(seed);
    std::vector<std::int64_t> order(static_cast<std::size_t>(m));
    for (std::int64_t i = 0; i < m; ++i) order[static_cast<std::size_t>(i)] = i;
    for (std::int64_t i = m - 1; i > 0; --i) {
        const auto j = static_cast<std::int64_t>(rng.uniform_index(static_cast<std::uint64_t>(i + 1)));
        std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
    }

    EdgeSplit split;
    std::vector<Edge> train_edges;
    train_edges.reserve(static_cast<std::size_t>(m - n_val - n_test));
    for (std::int64_t i = 0; i < m; ++i) {
        const Edge& e = edges[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
        if (i < n_val)
            split.val_pos.push_back(e);
        else if (i < n_val + n_test)
            split.test_pos.push_back(e);
        else
            train_edges.push_back(e);
    }
    std::sort(split.val_pos.begin(), split.val_pos.end());
    std::sort(split.test_pos.begin(), split.test_pos.end());

    // Negatives are non-edges of the ORIGINAL graph so a held-out positive is
    // never labeled negative. Unique within each list.
    const std::int64_t n = g.n_nodes();
    const std::int64_t max_edges = n * (n - 1) / 2;
    auto sample_negatives = [&](std::int64_t count) {
        if (max_edges - m < count)
            throw std::runtime_error("split_edges: not enough non-edges to sample " +
                                     std::to_string(count) + " negatives");
        std::unordered_set<std::uint64_t> used;
        std::vector<Edge> out;
        out.reserve(static_cast<std::size_t>(count));
        std::int64_t attempts = 0;
        const std::int64_t max_attempts = 1000 * (count + 10);
        while (static_cast<std::int64_t>(out.size()) < count) {
            if (++attempts > max_attempts)
                throw std::runtime_error("split_edges: negative sampling did not converge "
                                         "(graph too dense)");
            const auto a = static_cast<NodeId>(rng.uniform_index(static_cast<std::uint64_t>(n)));
            const auto b = static_cast<NodeId>(rng.uniform_index(static_cast<std::uint64_t>(n)));
            if (a == b) continue;
            const Edge e = make_canonical(a, b);
            if (g.has_edge(e.u, e.v)) continue;
            if (!used.insert(edge_key(e)).second) continue;
            out.push_back(e);
        }
        std::sort(out.begin(), out.end());
        return out;
    };
    split.val_neg = sample_negatives(n_val);
    split.test_neg = sample_negatives(n_test);

    split.train_graph = Graph::from_edges(g.n_nodes(), std::move(train_edges), g.features(), g.labels());
    return split;
}

num::SparseMatrix normalized_adjacency(const Graph& g, bool add_self_loops) {
    const NodeId n = g.n_nodes();
    std::vector<double> inv_sqrt(static_cast<std::size_t>(n));
    for (NodeId v = 0; v < n; ++v) {
        const double d = static_cast<double>(g.degree(v)) + (add_self_loops ? 1.0 : 0.0);
        inv_sqrt[static_cast<std::size_t>(v)] = d > 0.0 ? 1.0 / std::sqrt(d) : 0.0;
    }

    num::SparseMatrix s;
    s.rows = n;
    s.cols = n;
    s.offsets.assign(static_cast<std::size_t>(n) + 1, 0);
    for (NodeId v = 0; v < n; ++v)
        s.offsets[static_cast<std::size_t>(v) + 1] =
            s.offsets[static_cast<std::size_t>(v)] + g.degree(v) + (add_self_loops ? 1 : 0);
    s.col_idx.resize(static_cast<std::size_t>(s.offsets.back()));
    s.values.resize(static_cast<std::size_t>(s.offsets.back()));

    for (NodeId v = 0; v < n; ++v) {
        std::int64_t p = s.offsets[static_cast<std::size_t>(v)];
        bool diag_written = false;
        const double iv = inv_sqrt[static_cast<std::size_t>(v)];
        for (NodeId w : g.neighbors(v)) {
            if (add_self_loops && !diag_written && w > v) {
                s.col_idx[static_cast<std::size_t>(p)] = v;
                s.values[static_cast<std::size_t>(p)] = static_cast<float>(iv * iv);
                ++p;
                diag_written = true;
            }
            s.col_idx[static_cast<std::size_t>(p)] = w;
            s.values[static_cast<std::size_t>(p)] =
                static_cast<float>(iv * inv_sqrt[static_cast<std::size_t>(w)]);
            ++p;
        }
        if (add_self_loops && !diag_written) {
            s.col_idx[static_cast<std::size_t>(p)] = v;
            s.values[static_cast<std::size_t>(p)] = static_cast<float>(iv * iv);
            ++p;
        }
    }
    return s;
}

namespace {

nlohmann::json edges_to_json(const std::vector<Edge>& edges) {
    nlohmann::json arr = nlohmann::json::array();
    for (const Edge& e : edges) arr.push_back({e.u, e.v});
    return arr;
}

std::vector<Edge> edges_from_json(const nlohmann::json& arr, const std::string& key) {
    if (!arr.is_array()) throw std::runtime_error("edge split JSON: \"" + key + "\" must be an array");
    std::vector<Edge> edges;
    edges.reserve(arr.size());
    for (const auto& item : arr) {
        if (!item.is_array() || item.size() != 2)
            throw std::runtime_error("edge split JSON: \"" + key + "\" entries must be [u,v]");
        edges.push_back(make_canonical(item[0].get<NodeId>(), item[1].get<NodeId>()));
    }
    return edges;
}

} // namespace

void save_edge_split(const std::string& path, const EdgeSplit& split) {
    nlohmann::ordered_json j;
    j["train"] = edges_to_json(split.train_graph.canonical_edges());
    j["val_pos"] = edges_to_json(split.val_pos);
    j["val_neg"] = edges_to_json(split.val_neg);
    j["test_pos"] = edges_to_json(split.test_pos);
    j["test_neg"] = edges_to_json(split.test_neg);
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << j.dump(0) << "\n";
}

EdgeSplit load_edge_split(const std::string& path, const Graph& original) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open edge split: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(path + ": invalid JSON: " + e.what());
    }
    EdgeSplit split;
    split.train_graph = Graph::from_edges(original.n_nodes(), edges_from_json(j.at("train"), "train"),
                                          original.features(), original.labels());
    split.val_pos = edges_from_json(j.at("val_pos"), "val_pos");
    split.val_neg = edges_from_json(j.at("val_neg"), "val_neg");
    split.test_pos = edges_from_json(j.at("test_pos"), "test_pos");
    split.test_neg = edges_from_json(j.at("test_neg"), "test_neg");
    return split;
}

} // namespace maskgae
