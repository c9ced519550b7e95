#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "maskgae/graph.hpp"
#include "maskgae/models.hpp"

namespace maskgae {

// Serializable record of an evaluation run.
struct MetricsReport {
    std::string task;
    std::vector<std::pair<std::string, double>> metrics;
    std::uint64_t seed{0};
    std::string config_digest;
    double runtime_s{0.0};

    double metric(const std::string& name) const;
};

// AUC via the Mann-Whitney rank-sum with average ranks for ties: the
// probability a random positive outscores a random negative, ties counting
// half. Requires at least one positive and one negative label.
double auc(std::span<const double> scores, std::span<const int> labels);

// Average precision with step interpolation over the descending-score
// ranking; ties are broken by a stable sort on the original index.
double average_precision(std::span<const double> scores, std::span<const int> labels);

// Encodes on the full train graph, scores candidates with the structure
// decoder, reports AUC and AP.
MetricsReport eval_link_prediction(const ModelParams& params, const Graph& train_graph,
                                   std::span<const Edge> pos_edges, std::span<const Edge> neg_edges,
                                   std::uint64_t seed, const std::string& config_digest = {});

// Column-concatenation of every encoder layer output on the full train graph.
num::DenseMatrix build_probe_embeddings(const ModelParams& params, const Graph& train_graph);

struct ProbeConfig {
    double lr{0.01};
    int epochs{300};
    double weight_decay{1e-5};
    bool standardize{false}; // z-score embedding columns before fitting
    std::vector<std::int32_t> train_idx, val_idx, test_idx;

    void validate(std::int64_t n_rows) const;
};

// Multinomial logistic regression on frozen embeddings, trained full-batch
// with Adam; model selection on validation accuracy, reports test accuracy.
MetricsReport linear_probe(const num::DenseMatrix& embeddings,
                           std::span<const std::int32_t> labels, const ProbeConfig& config,
                           std::uint64_t seed);

void save_metrics(const std::string& path, const MetricsReport& report);

// Mean and sample standard deviation per metric across seeds.
void save_metrics_summary(const std::string& path, const std::string& task,
                          std::span<const MetricsReport> reports);

} // namespace maskgae
