#include "maskgae/models.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>
#include <unordered_map>

#include "maskgae/checkpoint.hpp"
#include "maskgae/rng.hpp"

namespace maskgae {

using num::DenseMatrix;
using num::SparseMatrix;
using num::Tape;
using num::ValueRef;

DecoderMode decoder_mode_from_string(const std::string& s) {
    if (s == "dot") return DecoderMode::Dot;
    if (s == "mlp") return DecoderMode::Mlp;
    throw std::invalid_argument("unknown decoder mode: " + s + " (expected dot|mlp)");
}

std::string to_string(DecoderMode mode) { return mode == DecoderMode::Dot ? "dot" : "mlp"; }

namespace {

DenseMatrix glorot(std::int64_t fan_in, std::int64_t fan_out, Rng& rng) {
    const float bound = static_cast<float>(std::sqrt(6.0 / static_cast<double>(fan_in + fan_out)));
    DenseMatrix w(fan_in, fan_out);
    for (auto& x : w.data) x = rng.uniform_float(-bound, bound);
    return w;
}

} // namespace

ModelParams init_params(const EncoderConfig& config, int in_dim, DecoderMode mode,
                        std::uint64_t seed) {
    if (config.n_layers < 1) throw std::invalid_argument("init_params: n_layers must be >= 1");
    if (config.hidden_dim < 1) throw std::invalid_argument("init_params: hidden_dim must be >= 1");
    if (in_dim < 1) throw std::invalid_argument("init_params: in_dim must be >= 1");
    if (config.dropout < 0.0 || config.dropout >= 1.0)
        throw std::invalid_argument("init_params: dropout must be in [0,1)");

    Rng rng(seed);
    ModelParams p;
    p.encoder = config;
    p.in_dim = in_dim;
    p.decoder_mode = mode;

    const int d = config.hidden_dim;
    for (int l = 0; l < config.n_layers; ++l) {
        ModelParams::GcnLayer layer;
        const std::int64_t fan_in = l == 0 ? in_dim : d;
        layer.weight = glorot(fan_in, d, rng);
        layer.bias = DenseMatrix::zeros(1, d);
        layer.has_norm = config.use_batchnorm && l + 1 < config.n_layers;
        if (layer.has_norm) {
            layer.gamma = DenseMatrix(1, d, 1.0f);
            layer.beta = DenseMatrix::zeros(1, d);
        }
        p.layers.push_back(std::move(layer));
    }

    auto make_head = [&](void) {
        ModelParams::MlpHead head;
        head.w1 = glorot(d, d, rng);
        head.b1 = DenseMatrix::zeros(1, d);
        head.w2 = glorot(d, 1, rng);
        head.b2 = DenseMatrix::zeros(1, 1);
        return head;
    };
    p.structure_decoder = make_head();
    p.degree_decoder = make_head();
    return p;
}

std::vector<std::pair<std::string, DenseMatrix*>> ModelParams::named_tensors() {
    std::vector<std::pair<std::string, DenseMatrix*>> out;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const std::string prefix = "enc.l" + std::to_string(l) + ".";
        out.emplace_back(prefix + "weight", &layers[l].weight);
        out.emplace_back(prefix + "bias", &layers[l].bias);
        if (layers[l].has_norm) {
            out.emplace_back(prefix + "gamma", &layers[l].gamma);
            out.emplace_back(prefix + "beta", &layers[l].beta);
        }
    }
    auto add_head = [&out](const std::string& prefix, MlpHead& h) {
        out.emplace_back(prefix + ".w1", &h.w1);
        out.emplace_back(prefix + ".b1", &h.b1);
        out.emplace_back(prefix + ".w2", &h.w2);
        out.emplace_back(prefix + ".b2", &h.b2);
    };
    add_head("dec.struct", structure_decoder);
    add_head("dec.degree", degree_decoder);
    return out;
}

std::vector<std::pair<std::string, const DenseMatrix*>> ModelParams::named_tensors() const {
    auto mut = const_cast<ModelParams*>(this)->named_tensors();
    std::vector<std::pair<std::string, const DenseMatrix*>> out;
    out.reserve(mut.size());
    for (auto& [name, ptr] : mut) out.emplace_back(name, ptr);
    return out;
}

void ModelParams::save(const std::string& path) const {
    std::vector<std::pair<std::string, const DenseMatrix*>> tensors = named_tensors();
    num::save_tensors(path, tensors);
}

void ModelParams::load(const std::string& path) {
    auto loaded = num::load_tensors(path);
    std::unordered_map<std::string, DenseMatrix*> slots;
    for (auto& [name, ptr] : named_tensors()) slots[name] = ptr;
    if (loaded.size() != slots.size())
        throw std::runtime_error("checkpoint " + path + ": tensor count mismatch (" +
                                 std::to_string(loaded.size()) + " vs " +
                                 std::to_string(slots.size()) + ")");
    for (auto& [name, m] : loaded) {
        auto it = slots.find(name);
        if (it == slots.end()) throw std::runtime_error("checkpoint " + path + ": unexpected tensor " + name);
        if (!it->second->same_shape(m))
            throw std::runtime_error("checkpoint " + path + ": shape mismatch for " + name);
        *it->second = std::move(m);
    }
}

ParamRefs register_params(Tape& tape, const ModelParams& params, bool requires_grad) {
    ParamRefs refs;
    for (const auto& layer : params.layers) {
        ParamRefs::LayerRefs lr;
        lr.weight = tape.leaf(layer.weight, requires_grad);
        lr.bias = tape.leaf(layer.bias, requires_grad);
        if (layer.has_norm) {
            lr.gamma = tape.leaf(layer.gamma, requires_grad);
            lr.beta = tape.leaf(layer.beta, requires_grad);
        }
        refs.layers.push_back(lr);
    }
    auto reg_head = [&](const ModelParams::MlpHead& h) {
        ParamRefs::HeadRefs hr;
        hr.w1 = tape.leaf(h.w1, requires_grad);
        hr.b1 = tape.leaf(h.b1, requires_grad);
        hr.w2 = tape.leaf(h.w2, requires_grad);
        hr.b2 = tape.leaf(h.b2, requires_grad);
        return hr;
    };
    refs.structure_decoder = reg_head(params.structure_decoder);
    refs.degree_decoder = reg_head(params.degree_decoder);
    return refs;
}

EncodeResult encode(Tape& tape, const ParamRefs& refs, const ModelParams& params,
                    const SparseMatrix& norm_adj, FeatureInput features, bool training,
                    Rng* rng) {
    if (refs.layers.size() != params.layers.size())
        throw std::invalid_argument("encode: ParamRefs does not match ModelParams");

    EncodeResult res;
    ValueRef h = features.dense;
    const bool first_sparse = features.sparse != nullptr;
    if (!first_sparse && !h.valid())
        throw std::invalid_argument("encode: no feature input provided");
    const std::size_t n_layers = params.layers.size();
    for (std::size_t l = 0; l < n_layers; ++l) {
        // A_hat (H W): weight first keeps the propagation at hidden width.
        ValueRef hw = (l == 0 && first_sparse) ? tape.spmm(*features.sparse, refs.layers[l].weight)
                                               : tape.matmul(h, refs.layers[l].weight);
        h = tape.spmm(norm_adj, hw);
        h = tape.add_row_bias(h, refs.layers[l].bias);
        if (l + 1 < n_layers) {
            h = tape.elu(h);
            if (params.layers[l].has_norm)
                h = tape.batchnorm_train(h, refs.layers[l].gamma, refs.layers[l].beta);
            if (training && params.encoder.dropout > 0.0) {
                if (!rng) throw std::invalid_argument("encode: dropout requires an rng");
                h = tape.dropout(h, params.encoder.dropout, *rng);
            }
        }
        res.layer_outputs.push_back(h);
    }
    res.final = h;
    return res;
}

namespace {

std::pair<std::vector<std::int32_t>, std::vector<std::int32_t>> edge_endpoints(
    std::span<const Edge> edges) {
    std::vector<std::int32_t> us, vs;
    us.reserve(edges.size());
    vs.reserve(edges.size());
    for (const Edge& e : edges) {
        us.push_back(e.u);
        vs.push_back(e.v);
    }
    return {std::move(us), std::move(vs)};
}

ValueRef mlp_head(Tape& tape, const ParamRefs::HeadRefs& head, ValueRef x) {
    ValueRef h = tape.add_row_bias(tape.matmul(x, head.w1), head.b1);
    h = tape.elu(h);
    return tape.add_row_bias(tape.matmul(h, head.w2), head.b2);
}

} // namespace

ValueRef decode_structure(Tape& tape, const ParamRefs& refs, const ModelParams& params,
                          ValueRef z, std::span<const Edge> edges, DecoderMode mode) {
    (void)params;
    auto [us, vs] = edge_endpoints(edges);
    ValueRef zu = tape.gather_rows(z, std::move(us));
    ValueRef zv = tape.gather_rows(z, std::move(vs));
    ValueRef prod = tape.hadamard(zu, zv);
    if (mode == DecoderMode::Dot) return tape.row_sum(prod);
    return mlp_head(tape, refs.structure_decoder, prod);
}

ValueRef decode_degree(Tape& tape, const ParamRefs& refs, ValueRef z) {
    return mlp_head(tape, refs.degree_decoder, z);
}

InferenceResult encode_infer(const ModelParams& params, const Graph& graph_with_features,
                             const SparseMatrix& norm_adj) {
    if (!graph_with_features.features())
        throw std::invalid_argument("encode_infer: graph has no features");
    const DenseMatrix& x = *graph_with_features.features();
    const auto sparse = sparse_feature_view(x);
    return encode_infer_with(params, x, sparse ? &*sparse : nullptr, norm_adj);
}

InferenceResult encode_infer_with(const ModelParams& params, const DenseMatrix& features,
                                  const SparseMatrix* sparse_features,
                                  const SparseMatrix& norm_adj) {
    Tape tape;
    ParamRefs refs = register_params(tape, params, /*requires_grad=*/false);
    FeatureInput fin;
    if (sparse_features)
        fin.sparse = sparse_features;
    else
        fin.dense = tape.leaf(features, false);
    EncodeResult enc = encode(tape, refs, params, norm_adj, fin, /*training=*/false);

    InferenceResult out;
    out.final = tape.value(enc.final);
    out.layer_outputs.reserve(enc.layer_outputs.size());
    for (ValueRef v : enc.layer_outputs) out.layer_outputs.push_back(tape.value(v));
    return out;
}

std::vector<double> score_edges(const ModelParams& params, const DenseMatrix& z,
                                std::span<const Edge> edges) {
    Tape tape;
    ParamRefs refs = register_params(tape, params, /*requires_grad=*/false);
    ValueRef zref = tape.leaf(z, false);
    ValueRef logits = decode_structure(tape, refs, params, zref, edges, params.decoder_mode);
    const DenseMatrix& lv = tape.value(logits);
    std::vector<double> probs(static_cast<std::size_t>(lv.rows));
    for (std::int64_t i = 0; i < lv.rows; ++i)
        probs[static_cast<std::size_t>(i)] = static_cast<double>(num::stable_sigmoid(lv(i, 0)));
    return probs;
}

std::optional<SparseMatrix> sparse_feature_view(const DenseMatrix& features, double max_density) {
    if (features.size() == 0) return std::nullopt;
    std::int64_t nnz = 0;
    for (float x : features.data) nnz += x != 0.0f;
    const double density = static_cast<double>(nnz) / static_cast<double>(features.size());
    if (density > max_density) return std::nullopt;
    return SparseMatrix::from_dense(features);
}

void save_embeddings(const std::string& path, const DenseMatrix& z) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << z.rows << " " << z.cols << "\n";
    for (std::int64_t i = 0; i < z.rows; ++i) {
        for (std::int64_t j = 0; j < z.cols; ++j) {
            if (j) out << " ";
            out << z(i, j);
        }
        out << "\n";
    }
}

} // namespace maskgae
