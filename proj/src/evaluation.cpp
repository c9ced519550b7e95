#include "maskgae/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <unordered_set>

#include <json.hpp>

#include "maskgae/adam.hpp"

namespace maskgae {

using num::DenseMatrix;
using num::Tape;
using num::ValueRef;

double MetricsReport::metric(const std::string& name) const {
    for (const auto& [k, v] : metrics)
        if (k == name) return v;
    throw std::out_of_range("MetricsReport: no metric named " + name);
}

double auc(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size())
        throw std::invalid_argument("auc: scores/labels length mismatch");
    std::int64_t n_pos = 0, n_neg = 0;
    for (int l : labels) (l != 0 ? n_pos : n_neg)++;
    if (n_pos == 0 || n_neg == 0)
        throw std::invalid_argument("auc: needs at least one positive and one negative label");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Rank sum of positives with average ranks over tie groups.
    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t k = i; k <= j; ++k)
            if (labels[order[k]] != 0) rank_sum_pos += avg_rank;
        i = j + 1;
    }
    const double u = rank_sum_pos - static_cast<double>(n_pos) * (static_cast<double>(n_pos) + 1.0) / 2.0;
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double average_precision(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size())
        throw std::invalid_argument("average_precision: scores/labels length mismatch");
    std::int64_t n_pos = 0;
    for (int l : labels) n_pos += l != 0;
    if (n_pos == 0) throw std::invalid_argument("average_precision: no positive labels");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    double ap = 0.0;
    std::int64_t hits = 0;
    for (std::size_t k = 0; k < order.size(); ++k) {
        if (labels[order[k]] != 0) {
            ++hits;
            ap += static_cast<double>(hits) / static_cast<double>(k + 1);
        }
    }
    return ap / static_cast<double>(n_pos);
}

MetricsReport eval_link_prediction(const ModelParams& params, const Graph& train_graph,
                                   std::span<const Edge> pos_edges, std::span<const Edge> neg_edges,
                                   std::uint64_t seed, const std::string& config_digest) {
    const auto t0 = std::chrono::steady_clock::now();
    if (pos_edges.empty() || neg_edges.empty())
        throw std::invalid_argument("eval_link_prediction: empty candidate lists");
    {
        std::unordered_set<std::uint64_t> pos_keys;
        for (const Edge& e : pos_edges) pos_keys.insert(edge_key(e));
        for (const Edge& e : neg_edges)
            if (pos_keys.count(edge_key(e)))
                throw std::invalid_argument("eval_link_prediction: positive/negative lists overlap");
    }

    const num::SparseMatrix adj = normalized_adjacency(train_graph, true);
    InferenceResult inf = encode_infer(params, train_graph, adj);

    std::vector<Edge> candidates(pos_edges.begin(), pos_edges.end());
    candidates.insert(candidates.end(), neg_edges.begin(), neg_edges.end());
    const std::vector<double> scores = score_edges(params, inf.final, candidates);
    std::vector<int> labels(pos_edges.size(), 1);
    labels.resize(scores.size(), 0);

    MetricsReport report;
    report.task = "linkpred";
    report.metrics = {{"auc", auc(scores, labels)}, {"ap", average_precision(scores, labels)}};
    report.seed = seed;
    report.config_digest = config_digest;
    report.runtime_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

DenseMatrix build_probe_embeddings(const ModelParams& params, const Graph& train_graph) {
    const num::SparseMatrix adj = normalized_adjacency(train_graph, true);
    InferenceResult inf = encode_infer(params, train_graph, adj);
    std::int64_t total = 0;
    for (const DenseMatrix& m : inf.layer_outputs) total += m.cols;
    DenseMatrix out(inf.final.rows, total);
    std::int64_t off = 0;
    for (const DenseMatrix& m : inf.layer_outputs) {
        for (std::int64_t i = 0; i < m.rows; ++i)
            for (std::int64_t j = 0; j < m.cols; ++j) out(i, off + j) = m(i, j);
        off += m.cols;
    }
    return out;
}

void ProbeConfig::validate(std::int64_t n_rows) const {
    if (lr <= 0.0) throw std::invalid_argument("ProbeConfig: lr must be > 0");
    if (epochs < 1) throw std::invalid_argument("ProbeConfig: epochs must be >= 1");
    if (weight_decay < 0.0) throw std::invalid_argument("ProbeConfig: weight_decay must be >= 0");
    if (train_idx.empty() || val_idx.empty() || test_idx.empty())
        throw std::invalid_argument("ProbeConfig: empty split");
    std::unordered_set<std::int32_t> seen;
    for (const auto* split : {&train_idx, &val_idx, &test_idx}) {
        for (std::int32_t i : *split) {
            if (i < 0 || i >= n_rows)
                throw std::out_of_range("ProbeConfig: node index " + std::to_string(i) +
                                        " out of range");
            if (!seen.insert(i).second)
                throw std::invalid_argument("ProbeConfig: splits are not disjoint (node " +
                                            std::to_string(i) + ")");
        }
    }
}

namespace {

DenseMatrix gather_matrix_rows(const DenseMatrix& m, std::span<const std::int32_t> idx) {
    DenseMatrix out(static_cast<std::int64_t>(idx.size()), m.cols);
    for (std::size_t e = 0; e < idx.size(); ++e)
        for (std::int64_t j = 0; j < m.cols; ++j)
            out(static_cast<std::int64_t>(e), j) = m(idx[e], j);
    return out;
}

// logits = X W + b evaluated without a tape; returns accuracy of argmax
// against labels (lowest index wins ties).
double subset_accuracy(const DenseMatrix& x, std::span<const std::int32_t> idx,
                       std::span<const std::int32_t> labels, const DenseMatrix& w,
                       const DenseMatrix& b) {
    std::int64_t correct = 0;
    std::vector<double> logit(static_cast<std::size_t>(w.cols));
    for (std::int32_t i : idx) {
        for (std::int64_t c = 0; c < w.cols; ++c) {
            double acc = static_cast<double>(b(0, c));
            for (std::int64_t j = 0; j < x.cols; ++j)
                acc += static_cast<double>(x(i, j)) * static_cast<double>(w(j, c));
            logit[static_cast<std::size_t>(c)] = acc;
        }
        std::int64_t arg = 0;
        for (std::int64_t c = 1; c < w.cols; ++c)
            if (logit[static_cast<std::size_t>(c)] > logit[static_cast<std::size_t>(arg)]) arg = c;
        correct += arg == labels[static_cast<std::size_t>(i)];
    }
    return static_cast<double>(correct) / static_cast<double>(idx.size());
}

} // namespace

MetricsReport linear_probe(const DenseMatrix& embeddings, std::span<const std::int32_t> labels,
                           const ProbeConfig& config, std::uint64_t seed) {
    const auto t0 = std::chrono::steady_clock::now();
    if (static_cast<std::int64_t>(labels.size()) != embeddings.rows)
        throw std::invalid_argument("linear_probe: label count must equal embedding rows");
    config.validate(embeddings.rows);

    std::int32_t n_classes = 0;
    for (std::int32_t y : labels) {
        if (y < 0) throw std::invalid_argument("linear_probe: negative label");
        n_classes = std::max(n_classes, y + 1);
    }

    DenseMatrix x = embeddings;
    if (config.standardize) {
        for (std::int64_t j = 0; j < x.cols; ++j) {
            double mean = 0.0;
            for (std::int64_t i = 0; i < x.rows; ++i) mean += static_cast<double>(x(i, j));
            mean /= static_cast<double>(x.rows);
            double var = 0.0;
            for (std::int64_t i = 0; i < x.rows; ++i) {
                const double d = static_cast<double>(x(i, j)) - mean;
                var += d * d;
            }
            var /= static_cast<double>(x.rows);
            const double inv = 1.0 / std::sqrt(var + 1e-12);
            for (std::int64_t i = 0; i < x.rows; ++i)
                x(i, j) = static_cast<float>((static_cast<double>(x(i, j)) - mean) * inv);
        }
    }

    const DenseMatrix x_train = gather_matrix_rows(x, config.train_idx);
    std::vector<std::int32_t> y_train;
    y_train.reserve(config.train_idx.size());
    for (std::int32_t i : config.train_idx) y_train.push_back(labels[static_cast<std::size_t>(i)]);

    Rng rng(seed);
    const float bound =
        static_cast<float>(std::sqrt(6.0 / static_cast<double>(x.cols + n_classes)));
    DenseMatrix w(x.cols, n_classes);
    for (auto& v : w.data) v = rng.uniform_float(-bound, bound);
    DenseMatrix b = DenseMatrix::zeros(1, n_classes);

    num::Adam optimizer({.lr = config.lr, .weight_decay = config.weight_decay});
    double best_val = -1.0;
    DenseMatrix best_w = w, best_b = b;

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        Tape tape;
        ValueRef xr = tape.leaf(x_train, false);
        ValueRef wr = tape.leaf(w, true);
        ValueRef br = tape.leaf(b, true);
        ValueRef logits = tape.add_row_bias(tape.matmul(xr, wr), br);
        ValueRef loss = tape.softmax_cross_entropy_mean(logits, y_train);
        tape.backward(loss);
        const DenseMatrix gw = tape.grad_or_zeros(wr);
        const DenseMatrix gb = tape.grad_or_zeros(br);
        DenseMatrix* tensors[] = {&w, &b};
        const DenseMatrix* grads[] = {&gw, &gb};
        optimizer.step(tensors, grads);

        const double val_acc = subset_accuracy(x, config.val_idx, labels, w, b);
        if (val_acc > best_val) {
            best_val = val_acc;
            best_w = w;
            best_b = b;
        }
    }

    MetricsReport report;
    report.task = "nodeclf";
    report.metrics = {{"accuracy", subset_accuracy(x, config.test_idx, labels, best_w, best_b)},
                      {"val_accuracy", best_val}};
    report.seed = seed;
    report.runtime_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

void save_metrics(const std::string& path, const MetricsReport& report) {
    nlohmann::ordered_json j;
    j["task"] = report.task;
    nlohmann::ordered_json m;
    for (const auto& [k, v] : report.metrics) m[k] = v;
    j["metrics"] = m;
    j["seed"] = report.seed;
    j["config_digest"] = report.config_digest;
    j["runtime_s"] = report.runtime_s;
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << j.dump(0) << "\n";
}

void save_metrics_summary(const std::string& path, const std::string& task,
                          std::span<const MetricsReport> reports) {
    if (reports.empty()) throw std::invalid_argument("save_metrics_summary: no reports");
    nlohmann::ordered_json j;
    j["task"] = task;
    j["n_seeds"] = reports.size();
    nlohmann::json seeds = nlohmann::json::array();
    for (const MetricsReport& r : reports) seeds.push_back(r.seed);
    j["seeds"] = seeds;

    nlohmann::ordered_json mean_j, std_j;
    for (const auto& [name, first_v] : reports.front().metrics) {
        double mean = 0.0;
        for (const MetricsReport& r : reports) mean += r.metric(name);
        mean /= static_cast<double>(reports.size());
        double var = 0.0;
        for (const MetricsReport& r : reports) {
            const double d = r.metric(name) - mean;
            var += d * d;
        }
        const double sstd =
            reports.size() > 1 ? std::sqrt(var / static_cast<double>(reports.size() - 1)) : 0.0;
        mean_j[name] = mean;
        std_j[name] = sstd;
    }
    j["metrics_mean"] = mean_j;
    j["metrics_std"] = std_j;
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << j.dump(0) << "\n";
}

} // namespace maskgae
