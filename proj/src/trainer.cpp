#include "maskgae/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <ostream>
#include <stdexcept>

#include <json.hpp>

#include "maskgae/adam.hpp"
#include "maskgae/evaluation.hpp"
#include "maskgae/rng.hpp"

namespace maskgae {

using num::DenseMatrix;
using num::SparseMatrix;
using num::Tape;
using num::ValueRef;

MaskStrategy mask_strategy_from_string(const std::string& s) {
    if (s == "edge") return MaskStrategy::Edge;
    if (s == "path") return MaskStrategy::Path;
    throw std::invalid_argument("unknown masking strategy: " + s + " (expected edge|path)");
}

std::string to_string(MaskStrategy s) { return s == MaskStrategy::Edge ? "edge" : "path"; }

void TrainConfig::validate() const {
    if (mask_rate < 0.0 || mask_rate > 1.0)
        throw std::invalid_argument("TrainConfig: mask_rate must be in [0,1]");
    if (root_fraction <= 0.0 || root_fraction > 1.0)
        throw std::invalid_argument("TrainConfig: root_fraction must be in (0,1]");
    if (n_walk < 1 || l_walk < 1)
        throw std::invalid_argument("TrainConfig: n_walk and l_walk must be >= 1");
    if (alpha < 0.0) throw std::invalid_argument("TrainConfig: alpha must be >= 0");
    if (lr <= 0.0) throw std::invalid_argument("TrainConfig: lr must be > 0");
    if (max_epochs < 1) throw std::invalid_argument("TrainConfig: max_epochs must be >= 1");
    if (patience < 1 || patience > max_epochs)
        throw std::invalid_argument("TrainConfig: patience must be in [1, max_epochs]");
    if (encoder.n_layers < 1) throw std::invalid_argument("TrainConfig: n_layers must be >= 1");
    if (encoder.hidden_dim < 1) throw std::invalid_argument("TrainConfig: hidden_dim must be >= 1");
}

std::vector<Edge> negative_sample(const Graph& g, std::size_t count, Rng& rng) {
    const std::int64_t n = g.n_nodes();
    const std::int64_t max_edges = n * (n - 1) / 2;
    if (g.n_edges() >= max_edges)
        throw std::runtime_error("negative_sample: graph has no non-edges");

    std::vector<Edge> out;
    out.reserve(count);
    while (out.size() < count) {
        std::int64_t attempts = 0;
        for (;;) {
            if (++attempts > 10000)
                throw std::runtime_error("negative_sample: rejection sampling stalled "
                                         "(graph nearly complete)");
            const auto a = static_cast<NodeId>(rng.uniform_index(static_cast<std::uint64_t>(n)));
            const auto b = static_cast<NodeId>(rng.uniform_index(static_cast<std::uint64_t>(n)));
            if (a == b) continue;
            if (g.has_edge(a, b)) continue;
            out.push_back(make_canonical(a, b));
            break;
        }
    }
    return out;
}

ValueRef gae_loss(Tape& tape, ValueRef pos_logits, ValueRef neg_logits) {
    if (tape.value(pos_logits).size() == 0)
        throw std::invalid_argument("gae_loss: empty positive set (nothing masked)");
    if (tape.value(neg_logits).size() == 0)
        throw std::invalid_argument("gae_loss: empty negative set");
    ValueRef pos = tape.bce_with_logits_mean(pos_logits, /*positive=*/true);
    ValueRef neg = tape.bce_with_logits_mean(neg_logits, /*positive=*/false);
    return tape.add_scaled(pos, neg, 1.0);
}

ValueRef degree_loss(Tape& tape, ValueRef predictions, std::vector<float> masked_degrees) {
    return tape.mse_mean(predictions, std::move(masked_degrees));
}

ValueRef total_loss(Tape& tape, ValueRef gae, ValueRef deg, double alpha) {
    if (alpha < 0.0) throw std::invalid_argument("total_loss: alpha must be >= 0");
    return tape.add_scaled(gae, deg, alpha);
}

std::vector<float> masked_degree_targets(NodeId n_nodes, std::span<const Edge> masked_edges) {
    std::vector<float> deg(static_cast<std::size_t>(n_nodes), 0.0f);
    for (const Edge& e : masked_edges) {
        deg[static_cast<std::size_t>(e.u)] += 1.0f;
        deg[static_cast<std::size_t>(e.v)] += 1.0f;
    }
    return deg;
}

PretrainResult pretrain(const Graph& train_graph, const TrainConfig& config,
                        std::span<const Edge> val_pos, std::span<const Edge> val_neg,
                        std::ostream* epoch_log) {
    config.validate();
    if (train_graph.n_edges() < 1)
        throw std::invalid_argument("pretrain: train graph has no edges");
    if (!train_graph.features())
        throw std::invalid_argument("pretrain: train graph has no node features");
    if (val_pos.empty() != val_neg.empty())
        throw std::invalid_argument("pretrain: validation edge lists must both be empty or both present");

    const DenseMatrix& features = *train_graph.features();
    const auto sparse_features = sparse_feature_view(features);
    const SparseMatrix full_adj = normalized_adjacency(train_graph, true);
    const bool has_val = !val_pos.empty();

    ModelParams params = init_params(config.encoder, static_cast<int>(features.cols),
                                     config.decoder, config.seed);
    num::Adam optimizer({.lr = config.lr});

    PretrainResult result;
    result.state.best_val_auc = -1.0;
    ModelParams best = params;
    int best_epoch = 0;

    Rng dropout_rng(derive_seed(config.seed, 0x9d0));

    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        // Distinct per-epoch streams so masking draws never shift negative
        // sampling and vice versa.
        const std::uint64_t mask_seed = derive_seed(config.seed, static_cast<std::uint64_t>(epoch) * 2);
        const std::uint64_t neg_seed = derive_seed(config.seed, static_cast<std::uint64_t>(epoch) * 2 + 1);

        MaskSplit mask = config.strategy == MaskStrategy::Edge
                             ? mask_edges_bernoulli(train_graph, config.mask_rate, mask_seed)
                             : mask_edges_path(train_graph,
                                               sample_roots(train_graph, config.root_fraction,
                                                            derive_seed(mask_seed, 1)),
                                               config.n_walk, config.l_walk,
                                               derive_seed(mask_seed, 2));
        if (mask.masked_edges.empty())
            throw std::runtime_error("pretrain: nothing to reconstruct at epoch " +
                                     std::to_string(epoch) + " (strategy " +
                                     to_string(config.strategy) + ", |E_train|=" +
                                     std::to_string(train_graph.n_edges()) + ")");

        const SparseMatrix vis_adj = normalized_adjacency(mask.visible_graph, true);

        Tape tape;
        ParamRefs refs = register_params(tape, params, /*requires_grad=*/true);
        FeatureInput fin;
        if (sparse_features)
            fin.sparse = &*sparse_features;
        else
            fin.dense = tape.leaf(features, false);

        EncodeResult enc = encode(tape, refs, params, vis_adj, fin, /*training=*/true, &dropout_rng);

        Rng neg_rng(neg_seed);
        const std::vector<Edge> negatives =
            negative_sample(train_graph, mask.masked_edges.size(), neg_rng);

        ValueRef pos_logits =
            decode_structure(tape, refs, params, enc.final, mask.masked_edges, config.decoder);
        ValueRef neg_logits =
            decode_structure(tape, refs, params, enc.final, negatives, config.decoder);
        ValueRef gae = gae_loss(tape, pos_logits, neg_logits);

        ValueRef deg_pred = decode_degree(tape, refs, enc.final);
        ValueRef deg = degree_loss(tape, deg_pred,
                                   masked_degree_targets(train_graph.n_nodes(), mask.masked_edges));
        ValueRef loss = total_loss(tape, gae, deg, config.alpha);

        const double loss_v = static_cast<double>(tape.value(loss)(0, 0));
        const double gae_v = static_cast<double>(tape.value(gae)(0, 0));
        const double deg_v = static_cast<double>(tape.value(deg)(0, 0));
        if (!std::isfinite(loss_v))
            throw std::runtime_error("pretrain: non-finite loss at epoch " + std::to_string(epoch) +
                                     " (gae=" + std::to_string(gae_v) +
                                     ", deg=" + std::to_string(deg_v) + ")");

        tape.backward(loss);

        std::vector<DenseMatrix*> tensors;
        std::vector<DenseMatrix> grads;
        auto named = params.named_tensors();
        auto collect = [&](ValueRef ref) { grads.push_back(tape.grad_or_zeros(ref)); };
        for (std::size_t l = 0; l < refs.layers.size(); ++l) {
            collect(refs.layers[l].weight);
            collect(refs.layers[l].bias);
            if (params.layers[l].has_norm) {
                collect(refs.layers[l].gamma);
                collect(refs.layers[l].beta);
            }
        }
        for (auto head : {&refs.structure_decoder, &refs.degree_decoder}) {
            collect(head->w1);
            collect(head->b1);
            collect(head->w2);
            collect(head->b2);
        }
        if (grads.size() != named.size())
            throw std::logic_error("pretrain: gradient slot mismatch");
        std::vector<const DenseMatrix*> grad_ptrs;
        for (auto& [name, ptr] : named) tensors.push_back(ptr);
        for (auto& g : grads) grad_ptrs.push_back(&g);
        optimizer.step(tensors, grad_ptrs);

        EpochLog log;
        log.epoch = epoch;
        log.loss = loss_v;
        log.gae = gae_v;
        log.deg = deg_v;
        log.val_auc = std::numeric_limits<double>::quiet_NaN();

        if (has_val) {
            InferenceResult inf = encode_infer_with(
                params, features, sparse_features ? &*sparse_features : nullptr, full_adj);
            std::vector<Edge> candidates(val_pos.begin(), val_pos.end());
            candidates.insert(candidates.end(), val_neg.begin(), val_neg.end());
            const std::vector<double> scores = score_edges(params, inf.final, candidates);
            std::vector<int> labels(val_pos.size(), 1);
            labels.resize(scores.size(), 0);
            log.val_auc = auc(scores, labels);
            if (log.val_auc > result.state.best_val_auc) {
                result.state.best_val_auc = log.val_auc;
                best = params;
                best_epoch = epoch;
            }
        }

        result.state.history.push_back(log);
        result.state.epochs_run = epoch;
        if (epoch_log) {
            char line[160];
            std::snprintf(line, sizeof(line), "epoch=%d loss=%.6f gae=%.6f deg=%.6f val_auc=%.6f",
                          epoch, log.loss, log.gae, log.deg, log.val_auc);
            (*epoch_log) << line << "\n";
        }

        if (has_val && epoch - best_epoch >= config.patience) break;
    }

    if (has_val) {
        result.params = std::move(best);
        result.state.best_epoch = best_epoch;
    } else {
        result.params = std::move(params);
        result.state.best_epoch = result.state.epochs_run;
        result.state.best_val_auc = std::numeric_limits<double>::quiet_NaN();
    }
    return result;
}

void save_train_state(const std::string& path, const TrainState& state) {
    nlohmann::ordered_json j;
    j["epochs_run"] = state.epochs_run;
    j["best_epoch"] = state.best_epoch;
    j["best_val_auc"] = std::isnan(state.best_val_auc) ? nlohmann::json() : nlohmann::json(state.best_val_auc);
    nlohmann::ordered_json hist = nlohmann::ordered_json::array();
    for (const EpochLog& e : state.history) {
        nlohmann::ordered_json h;
        h["epoch"] = e.epoch;
        h["loss"] = e.loss;
        h["gae"] = e.gae;
        h["deg"] = e.deg;
        h["val_auc"] = std::isnan(e.val_auc) ? nlohmann::json() : nlohmann::json(e.val_auc);
        hist.push_back(h);
    }
    j["history"] = hist;
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << j.dump(0) << "\n";
}

} // namespace maskgae
