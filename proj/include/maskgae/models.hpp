#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "maskgae/dense.hpp"
#include "maskgae/graph.hpp"
#include "maskgae/tape.hpp"

namespace maskgae {

struct EncoderConfig {
    int n_layers{3};
    int hidden_dim{64};
    bool use_batchnorm{true};
    double dropout{0.0};
};

enum class DecoderMode { Dot, Mlp };

DecoderMode decoder_mode_from_string(const std::string& s);
std::string to_string(DecoderMode mode);

// Encoder + decoder weights. Hidden encoder layers carry batchnorm gamma/beta
// when enabled; both decoders are 2-layer MLPs with hidden width hidden_dim.
struct ModelParams {
    EncoderConfig encoder;
    int in_dim{0};
    DecoderMode decoder_mode{DecoderMode::Mlp};

    struct GcnLayer {
        num::DenseMatrix weight; // in x out
        num::DenseMatrix bias;   // 1 x out
        num::DenseMatrix gamma;  // 1 x out (hidden layers with batchnorm)
        num::DenseMatrix beta;   // 1 x out
        bool has_norm{false};
    };
    struct MlpHead {
        num::DenseMatrix w1, b1; // d_h -> d_h
        num::DenseMatrix w2, b2; // d_h -> 1
    };

    std::vector<GcnLayer> layers;
    MlpHead structure_decoder;
    MlpHead degree_decoder;

    // Stable name -> tensor mapping used by the optimizer and checkpoints.
    std::vector<std::pair<std::string, num::DenseMatrix*>> named_tensors();
    std::vector<std::pair<std::string, const num::DenseMatrix*>> named_tensors() const;

    void save(const std::string& path) const;
    // Loads tensor data into an already-shaped ModelParams.
    void load(const std::string& path);
};

// Glorot-uniform weights, zero biases, gamma=1, beta=0. Deterministic per seed.
ModelParams init_params(const EncoderConfig& config, int in_dim, DecoderMode mode,
                        std::uint64_t seed);

// Either a dense tape value or a constant sparse matrix may feed the first
// encoder layer; sparse inputs keep bag-of-words features cheap.
struct FeatureInput {
    num::ValueRef dense{};                      // used when sparse == nullptr
    const num::SparseMatrix* sparse{nullptr};
};

// Tape handles for one registration of the parameters.
struct ParamRefs {
    struct LayerRefs {
        num::ValueRef weight, bias, gamma, beta;
    };
    struct HeadRefs {
        num::ValueRef w1, b1, w2, b2;
    };
    std::vector<LayerRefs> layers;
    HeadRefs structure_decoder;
    HeadRefs degree_decoder;
};

ParamRefs register_params(num::Tape& tape, const ModelParams& params, bool requires_grad = true);

struct EncodeResult {
    num::ValueRef final;                    // n x d_h
    std::vector<num::ValueRef> layer_outputs; // one per layer, each n x d_h
};

// Layer l computes BN(ELU(A_hat * H_{l-1} * W_l + b_l)) on hidden layers; the
// final layer is linear. `rng` is only consulted when dropout > 0 in training.
EncodeResult encode(num::Tape& tape, const ParamRefs& refs, const ModelParams& params,
                    const num::SparseMatrix& norm_adj, FeatureInput features, bool training,
                    Rng* rng = nullptr);

// Edge logits for the given pairs; sigmoid is applied downstream.
num::ValueRef decode_structure(num::Tape& tape, const ParamRefs& refs, const ModelParams& params,
                               num::ValueRef z, std::span<const Edge> edges, DecoderMode mode);

// One unbounded real per node (n x 1).
num::ValueRef decode_degree(num::Tape& tape, const ParamRefs& refs, num::ValueRef z);

// --- inference conveniences (no gradients) -----------------------------------

struct InferenceResult {
    num::DenseMatrix final;
    std::vector<num::DenseMatrix> layer_outputs;
};

InferenceResult encode_infer(const ModelParams& params, const Graph& graph_with_features,
                             const num::SparseMatrix& norm_adj);

// Same, with a caller-cached sparse feature view (nullptr for the dense path).
InferenceResult encode_infer_with(const ModelParams& params, const num::DenseMatrix& features,
                                  const num::SparseMatrix* sparse_features,
                                  const num::SparseMatrix& norm_adj);

// Structure-decoder probabilities (sigmoid of the logit) for candidate edges.
std::vector<double> score_edges(const ModelParams& params, const num::DenseMatrix& z,
                                std::span<const Edge> edges);

// Feature matrix as CSR when density is low enough to pay off.
std::optional<num::SparseMatrix> sparse_feature_view(const num::DenseMatrix& features,
                                                     double max_density = 0.25);

// Embedding text export: first line "n d", then rows of floats.
void save_embeddings(const std::string& path, const num::DenseMatrix& z);

} // namespace maskgae
