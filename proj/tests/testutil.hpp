#pragma once

// Shared test helpers: random graph generators, a synthetic clustered dataset,
// double-precision reference kernels, and finite-difference gradient checks.
// Everything here is independent of the library's forward/backward paths it
// is used to verify.

#include <algorithm>
#include <cmath>
#include <functional>
#include <unordered_set>
#include <vector>

#include "maskgae/graph.hpp"
#include "maskgae/rng.hpp"
#include "maskgae/tape.hpp"

namespace testutil {

using maskgae::Edge;
using maskgae::Graph;
using maskgae::NodeId;
using maskgae::Rng;
using maskgae::num::DenseMatrix;
using maskgae::num::SparseMatrix;

// --- graph generators ---------------------------------------------------------

inline std::vector<Edge> random_edges(NodeId n, std::int64_t m, Rng& rng) {
    const std::int64_t max_edges = static_cast<std::int64_t>(n) * (n - 1) / 2;
    if (m > max_edges) m = max_edges;
    std::unordered_set<std::uint64_t> used;
    std::vector<Edge> edges;
    while (static_cast<std::int64_t>(edges.size()) < m) {
        const auto a = static_cast<NodeId>(rng.uniform_index(static_cast<std::uint64_t>(n)));
        const auto b = static_cast<NodeId>(rng.uniform_index(static_cast<std::uint64_t>(n)));
        if (a == b) continue;
        const Edge e = maskgae::make_canonical(a, b);
        if (used.insert(maskgae::edge_key(e)).second) edges.push_back(e);
    }
    return edges;
}

inline Graph random_graph(NodeId n, std::int64_t m, std::uint64_t seed) {
    Rng rng(seed);
    return Graph::from_edges(n, random_edges(n, m, rng));
}

inline Graph path_graph(NodeId n) {
    std::vector<Edge> edges;
    for (NodeId v = 0; v + 1 < n; ++v) edges.push_back({v, static_cast<NodeId>(v + 1)});
    return Graph::from_edges(n, std::move(edges));
}

inline Graph triangle_graph() { return Graph::from_edges(3, {{0, 1}, {0, 2}, {1, 2}}); }

// Stochastic block model with homophilous features: nodes in the same block
// link densely, and features are a noisy copy of the block's one-hot pattern.
struct SyntheticDataset {
    Graph graph; // carries features and labels
};

inline SyntheticDataset synthetic_clustered(NodeId n, int n_blocks, double p_in, double p_out,
                                            int feat_dim, double noise, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::int32_t> labels(static_cast<std::size_t>(n));
    for (NodeId v = 0; v < n; ++v)
        labels[static_cast<std::size_t>(v)] = static_cast<std::int32_t>(v % n_blocks);

    std::vector<Edge> edges;
    for (NodeId u = 0; u < n; ++u) {
        for (NodeId v = u + 1; v < n; ++v) {
            const double p = labels[static_cast<std::size_t>(u)] == labels[static_cast<std::size_t>(v)]
                                 ? p_in
                                 : p_out;
            if (rng.uniform_real() < p) edges.push_back({u, v});
        }
    }

    DenseMatrix features(n, feat_dim);
    for (NodeId v = 0; v < n; ++v) {
        const int block = labels[static_cast<std::size_t>(v)];
        for (int j = 0; j < feat_dim; ++j) {
            const float base = (j % n_blocks) == block ? 1.0f : 0.0f;
            features(v, j) = base + rng.uniform_float(-static_cast<float>(noise),
                                                      static_cast<float>(noise));
        }
    }
    return SyntheticDataset{Graph::from_edges(n, std::move(edges), std::move(features),
                                              std::move(labels))};
}

// --- double-precision reference kernels ----------------------------------------

using Mat = std::vector<std::vector<double>>;

inline Mat to_ref(const DenseMatrix& m) {
    Mat out(static_cast<std::size_t>(m.rows), std::vector<double>(static_cast<std::size_t>(m.cols)));
    for (std::int64_t i = 0; i < m.rows; ++i)
        for (std::int64_t j = 0; j < m.cols; ++j)
            out[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = m(i, j);
    return out;
}

inline Mat ref_matmul(const Mat& a, const Mat& b) {
    Mat y(a.size(), std::vector<double>(b[0].size(), 0.0));
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t k = 0; k < b.size(); ++k)
            for (std::size_t j = 0; j < b[0].size(); ++j) y[i][j] += a[i][k] * b[k][j];
    return y;
}

inline Mat ref_spmm(const SparseMatrix& s, const Mat& x) {
    Mat y(static_cast<std::size_t>(s.rows), std::vector<double>(x[0].size(), 0.0));
    for (std::int64_t i = 0; i < s.rows; ++i)
        for (std::int64_t p = s.offsets[i]; p < s.offsets[i + 1]; ++p)
            for (std::size_t j = 0; j < x[0].size(); ++j)
                y[static_cast<std::size_t>(i)][j] +=
                    static_cast<double>(s.values[p]) *
                    x[static_cast<std::size_t>(s.col_idx[p])][j];
    return y;
}

inline Mat ref_elu(const Mat& x) {
    Mat y = x;
    for (auto& row : y)
        for (double& v : row) v = v >= 0.0 ? v : std::expm1(v);
    return y;
}

inline Mat ref_sigmoid(const Mat& x) {
    Mat y = x;
    for (auto& row : y)
        for (double& v : row) v = 1.0 / (1.0 + std::exp(-v));
    return y;
}

inline Mat ref_batchnorm(const Mat& x, const std::vector<double>& gamma,
                         const std::vector<double>& beta, double eps) {
    const std::size_t n = x.size(), c = x[0].size();
    Mat y(n, std::vector<double>(c));
    for (std::size_t j = 0; j < c; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += x[i][j];
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t i = 0; i < n; ++i) var += (x[i][j] - mean) * (x[i][j] - mean);
        var /= static_cast<double>(n);
        const double inv = 1.0 / std::sqrt(var + eps);
        for (std::size_t i = 0; i < n; ++i) y[i][j] = gamma[j] * (x[i][j] - mean) * inv + beta[j];
    }
    return y;
}

inline double ref_softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

// --- finite differences ---------------------------------------------------------

// Central finite-difference gradient of a scalar double-precision function of
// flat parameters. The function must be deterministic.
inline std::vector<double> central_fd(const std::function<double(const std::vector<double>&)>& f,
                                      std::vector<double> theta, double h = 1e-5) {
    std::vector<double> grad(theta.size());
    for (std::size_t i = 0; i < theta.size(); ++i) {
        const double orig = theta[i];
        theta[i] = orig + h;
        const double fp = f(theta);
        theta[i] = orig - h;
        const double fm = f(theta);
        theta[i] = orig;
        grad[i] = (fp - fm) / (2.0 * h);
    }
    return grad;
}

// Scale-relative max error between two gradient vectors.
inline double grad_rel_error(const std::vector<double>& a, const std::vector<double>& b) {
    double max_abs = 1e-6, max_diff = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        max_abs = std::max({max_abs, std::abs(a[i]), std::abs(b[i])});
        max_diff = std::max(max_diff, std::abs(a[i] - b[i]));
    }
    return max_diff / max_abs;
}

inline std::vector<double> flatten(const DenseMatrix& m) {
    return std::vector<double>(m.data.begin(), m.data.end());
}

inline DenseMatrix unflatten(const std::vector<double>& v, std::int64_t rows, std::int64_t cols) {
    DenseMatrix m(rows, cols);
    for (std::int64_t i = 0; i < m.size(); ++i)
        m.data[static_cast<std::size_t>(i)] = static_cast<float>(v[static_cast<std::size_t>(i)]);
    return m;
}

inline DenseMatrix random_dense(std::int64_t rows, std::int64_t cols, Rng& rng, float scale = 1.0f) {
    DenseMatrix m(rows, cols);
    for (auto& x : m.data) x = rng.uniform_float(-scale, scale);
    return m;
}

// --- brute-force metric references ----------------------------------------------

// AUC by O(n^2) pair counting with ties worth one half.
inline double brute_force_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    double wins = 0.0;
    std::int64_t pairs = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] == 0) continue;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (labels[j] != 0) continue;
            ++pairs;
            if (scores[i] > scores[j])
                wins += 1.0;
            else if (scores[i] == scores[j])
                wins += 0.5;
        }
    }
    return wins / static_cast<double>(pairs);
}

// AP evaluated literally as sum_k (R_k - R_{k-1}) * P_k over the descending
// ranking (stable on the original index), with explicit precision/recall
// sequences.
inline double brute_force_ap(const std::vector<double>& scores, const std::vector<int>& labels) {
    std::vector<std::size_t> order(scores.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    std::int64_t total_pos = 0;
    for (int l : labels) total_pos += l != 0;

    double ap = 0.0;
    double recall_prev = 0.0;
    std::int64_t tp = 0;
    for (std::size_t k = 0; k < order.size(); ++k) {
        if (labels[order[k]] != 0) ++tp;
        const double precision = static_cast<double>(tp) / static_cast<double>(k + 1);
        const double recall = static_cast<double>(tp) / static_cast<double>(total_pos);
        ap += (recall - recall_prev) * precision;
        recall_prev = recall;
    }
    return ap;
}

} // namespace testutil
