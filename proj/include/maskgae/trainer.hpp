#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "maskgae/graph.hpp"
#include "maskgae/masking.hpp"
#include "maskgae/models.hpp"
#include "maskgae/tape.hpp"

namespace maskgae {

enum class MaskStrategy { Edge, Path };

MaskStrategy mask_strategy_from_string(const std::string& s);
std::string to_string(MaskStrategy s);

struct TrainConfig {
    MaskStrategy strategy{MaskStrategy::Path};
    double mask_rate{0.7};      // Bernoulli p for edge-wise masking
    double root_fraction{0.5};  // path-wise masking
    int n_walk{2};
    int l_walk{4};

    double alpha{2e-3}; // weight of the degree regression term
    double lr{0.01};
    int max_epochs{500};
    int patience{50};
    DecoderMode decoder{DecoderMode::Mlp};
    EncoderConfig encoder{};
    std::uint64_t seed{1};

    void validate() const;
};

struct EpochLog {
    int epoch{0};
    double loss{0.0};
    double gae{0.0};
    double deg{0.0};
    double val_auc{0.0}; // NaN when no validation edges were given
};

struct TrainState {
    int epochs_run{0};
    int best_epoch{0};
    double best_val_auc{0.0};
    std::vector<EpochLog> history;
};

// `count` pairs (u,v), u != v, that are not edges of g. Duplicates permitted
// across draws. Throws when the graph has no non-edge or rejection stalls.
std::vector<Edge> negative_sample(const Graph& g, std::size_t count, Rng& rng);

// Binary cross-entropy of the edge reconstruction: the positive and negative
// sides are averaged separately then summed.
num::ValueRef gae_loss(num::Tape& tape, num::ValueRef pos_logits, num::ValueRef neg_logits);

// Mean squared error of per-node degree predictions against the number of
// masked edges incident to each node.
num::ValueRef degree_loss(num::Tape& tape, num::ValueRef predictions,
                          std::vector<float> masked_degrees);

num::ValueRef total_loss(num::Tape& tape, num::ValueRef gae, num::ValueRef deg, double alpha);

std::vector<float> masked_degree_targets(NodeId n_nodes, std::span<const Edge> masked_edges);

struct PretrainResult {
    ModelParams params; // best validation-AUC snapshot (final params if no val edges)
    TrainState state;
};

// Self-supervised pretraining: per epoch the train graph is re-masked, the
// encoder runs on the visible part, masked positives plus an equal number of
// fresh negatives drive the reconstruction loss, and Adam updates all
// parameters. Validation AUC is computed on embeddings from the full train
// graph and drives early stopping.
PretrainResult pretrain(const Graph& train_graph, const TrainConfig& config,
                        std::span<const Edge> val_pos, std::span<const Edge> val_neg,
                        std::ostream* epoch_log = nullptr);

void save_train_state(const std::string& path, const TrainState& state);

} // namespace maskgae
