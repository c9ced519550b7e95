#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "maskgae/evaluation.hpp"
#include "maskgae/checkpoint.hpp"
#include "maskgae/trainer.hpp"
#include "testutil.hpp"

using namespace maskgae;
using testutil::brute_force_ap;
using testutil::brute_force_auc;
using testutil::random_graph;

TEST_CASE("auc: named examples") {
    CHECK(auc(std::vector<double>{0.9, 0.1}, std::vector<int>{1, 0}) == 1.0);
    CHECK(auc(std::vector<double>{0.5, 0.5, 0.5, 0.5}, std::vector<int>{1, 0, 1, 0}) == 0.5);
    CHECK(auc(std::vector<double>{0.8, 0.6, 0.4}, std::vector<int>{1, 0, 1}) == 0.5);
    CHECK_THROWS_AS((void)auc(std::vector<double>{0.5}, std::vector<int>{1}),
                    std::invalid_argument);
    CHECK_THROWS_AS((void)auc(std::vector<double>{0.5, 0.4}, std::vector<int>{1, 1}),
                    std::invalid_argument);
}

TEST_CASE("average_precision: named examples") {
    CHECK(average_precision(std::vector<double>{0.9, 0.8, 0.1}, std::vector<int>{1, 1, 0}) == 1.0);
    CHECK(average_precision(std::vector<double>{0.9, 0.5, 0.3}, std::vector<int>{1, 0, 1}) ==
          doctest::Approx((1.0 + 2.0 / 3.0) / 2.0));
    // Single positive ranked last among four.
    CHECK(average_precision(std::vector<double>{0.9, 0.8, 0.7, 0.1}, std::vector<int>{0, 0, 0, 1}) ==
          doctest::Approx(0.25));
    CHECK_THROWS_AS((void)average_precision(std::vector<double>{0.5}, std::vector<int>{0}),
                    std::invalid_argument);
}

TEST_CASE("auc and average_precision match brute force on 1000 random instances") {
    Rng rng(42);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 2 + rng.uniform_index(63);
        std::vector<double> scores(n);
        std::vector<int> labels(n);
        for (std::size_t i = 0; i < n; ++i) {
            // Coarse quantization forces plenty of exact ties.
            scores[i] = static_cast<double>(rng.uniform_index(8)) / 8.0;
            labels[i] = rng.uniform_real() < 0.5 ? 1 : 0;
        }
        labels[0] = 1;     // guarantee one of each class
        labels[n - 1] = 0;

        CHECK(std::abs(auc(scores, labels) - brute_force_auc(scores, labels)) < 1e-12);
        CHECK(std::abs(average_precision(scores, labels) - brute_force_ap(scores, labels)) < 1e-12);
    }
}

TEST_CASE("metrics are invariant under strictly monotone score transforms") {
    Rng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 4 + rng.uniform_index(40);
        std::vector<double> scores(n);
        std::vector<int> labels(n);
        for (std::size_t i = 0; i < n; ++i) {
            scores[i] = static_cast<double>(rng.uniform_index(10)) / 10.0;
            labels[i] = rng.uniform_real() < 0.5 ? 1 : 0;
        }
        labels[0] = 1;
        labels[1] = 0;

        std::vector<double> transformed(n);
        for (std::size_t i = 0; i < n; ++i) transformed[i] = std::exp(3.0 * scores[i]) + 2.0;
        CHECK(auc(scores, labels) == doctest::Approx(auc(transformed, labels)).epsilon(1e-12));
        CHECK(average_precision(scores, labels) ==
              doctest::Approx(average_precision(transformed, labels)).epsilon(1e-12));
    }
}

namespace {

Graph clustered_graph(std::uint64_t seed) {
    return testutil::synthetic_clustered(48, 3, 0.45, 0.03, 9, 0.25, seed).graph;
}

} // namespace

TEST_CASE("eval_link_prediction: oracle scores and the null model") {
    // Scores equal to labels give AUC = AP = 1 (pure metric check).
    CHECK(auc(std::vector<double>{1, 1, 0, 0}, std::vector<int>{1, 1, 0, 0}) == 1.0);
    CHECK(average_precision(std::vector<double>{1, 1, 0, 0}, std::vector<int>{1, 1, 0, 0}) == 1.0);

    // Untrained random parameters score near chance over several seeds.
    double total = 0.0;
    const int n_seeds = 8;
    for (std::uint64_t seed = 0; seed < n_seeds; ++seed) {
        const Graph g = clustered_graph(seed + 60);
        const EdgeSplit split = split_edges(g, 0.05, 0.15, seed);
        const ModelParams params = init_params({.n_layers = 2, .hidden_dim = 8},
                                               static_cast<int>(g.features()->cols),
                                               DecoderMode::Mlp, seed + 1);
        const MetricsReport r = eval_link_prediction(params, split.train_graph, split.test_pos,
                                                     split.test_neg, seed);
        total += r.metric("auc");
    }
    CHECK(std::abs(total / n_seeds - 0.5) < 0.1);
}

TEST_CASE("eval_link_prediction: invariant to candidate order, rejects overlap") {
    const Graph g = clustered_graph(3);
    const EdgeSplit split = split_edges(g, 0.05, 0.15, 5);
    const ModelParams params = init_params({.n_layers = 2, .hidden_dim = 8},
                                           static_cast<int>(g.features()->cols), DecoderMode::Mlp,
                                           9);
    const MetricsReport a = eval_link_prediction(params, split.train_graph, split.test_pos,
                                                 split.test_neg, 0);
    std::vector<Edge> pos_rev(split.test_pos.rbegin(), split.test_pos.rend());
    std::vector<Edge> neg_rev(split.test_neg.rbegin(), split.test_neg.rend());
    const MetricsReport b = eval_link_prediction(params, split.train_graph, pos_rev, neg_rev, 0);
    CHECK(a.metric("auc") == doctest::Approx(b.metric("auc")).epsilon(1e-12));
    CHECK(a.metric("ap") == doctest::Approx(b.metric("ap")).epsilon(1e-12));

    CHECK_THROWS_WITH_AS((void)eval_link_prediction(params, split.train_graph, split.test_pos,
                                                    split.test_pos, 0),
                         doctest::Contains("overlap"), std::invalid_argument);
}

TEST_CASE("build_probe_embeddings: width and single-layer identity") {
    const Graph g = clustered_graph(4);
    const int d = static_cast<int>(g.features()->cols);

    const ModelParams p3 = init_params({.n_layers = 3, .hidden_dim = 16}, d, DecoderMode::Mlp, 2);
    const num::DenseMatrix emb = build_probe_embeddings(p3, g);
    CHECK(emb.rows == g.n_nodes());
    CHECK(emb.cols == 3 * 16);

    const ModelParams p1 = init_params({.n_layers = 1, .hidden_dim = 16}, d, DecoderMode::Mlp, 2);
    const num::DenseMatrix emb1 = build_probe_embeddings(p1, g);
    const InferenceResult inf = encode_infer(p1, g, normalized_adjacency(g, true));
    CHECK(emb1.data == inf.final.data);
}

TEST_CASE("build_probe_embeddings: permutation equivariance carries through concatenation") {
    const Graph g = clustered_graph(5);
    const int d = static_cast<int>(g.features()->cols);
    const ModelParams p = init_params({.n_layers = 2, .hidden_dim = 6}, d, DecoderMode::Mlp, 3);

    std::vector<NodeId> pi(static_cast<std::size_t>(g.n_nodes()));
    for (std::size_t i = 0; i < pi.size(); ++i) pi[i] = static_cast<NodeId>(i);
    Rng rng(17);
    for (std::size_t i = pi.size() - 1; i > 0; --i) std::swap(pi[i], pi[rng.uniform_index(i + 1)]);

    std::vector<Edge> edges;
    for (const Edge& e : g.canonical_edges())
        edges.push_back(make_canonical(pi[static_cast<std::size_t>(e.u)],
                                       pi[static_cast<std::size_t>(e.v)]));
    num::DenseMatrix feat(g.n_nodes(), d);
    for (NodeId v = 0; v < g.n_nodes(); ++v)
        for (int j = 0; j < d; ++j) feat(pi[static_cast<std::size_t>(v)], j) = (*g.features())(v, j);
    const Graph gp = Graph::from_edges(g.n_nodes(), std::move(edges), feat);

    const num::DenseMatrix a = build_probe_embeddings(p, g);
    const num::DenseMatrix b = build_probe_embeddings(p, gp);
    for (NodeId v = 0; v < g.n_nodes(); ++v)
        for (std::int64_t j = 0; j < a.cols; ++j)
            CHECK(static_cast<double>(a(v, j)) ==
                  doctest::Approx(static_cast<double>(b(pi[static_cast<std::size_t>(v)], j)))
                      .epsilon(1e-5));
}

TEST_CASE("linear_probe: separable classes reach 100%") {
    // Two classes at embeddings (+-10, 0): trivially separable.
    const std::int64_t n = 40;
    num::DenseMatrix emb(n, 2);
    std::vector<std::int32_t> labels(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) {
        labels[static_cast<std::size_t>(i)] = i % 2;
        emb(i, 0) = i % 2 == 0 ? 10.0f : -10.0f;
        emb(i, 1) = 0.0f;
    }
    ProbeConfig cfg;
    cfg.epochs = 100;
    for (std::int32_t i = 0; i < n; ++i) {
        if (i < 20)
            cfg.train_idx.push_back(i);
        else if (i < 30)
            cfg.val_idx.push_back(i);
        else
            cfg.test_idx.push_back(i);
    }
    const MetricsReport r = linear_probe(emb, labels, cfg, 1);
    CHECK(r.metric("accuracy") == 1.0);
}

TEST_CASE("linear_probe: shuffled labels score near chance") {
    Rng rng(23);
    const std::int64_t n = 300;
    const int n_classes = 6;
    num::DenseMatrix emb = testutil::random_dense(n, 8, rng);
    std::vector<std::int32_t> labels(static_cast<std::size_t>(n));
    for (auto& y : labels) y = static_cast<std::int32_t>(rng.uniform_index(n_classes));

    ProbeConfig cfg;
    cfg.epochs = 60;
    for (std::int32_t i = 0; i < n; ++i) {
        if (i < 100)
            cfg.train_idx.push_back(i);
        else if (i < 150)
            cfg.val_idx.push_back(i);
        else
            cfg.test_idx.push_back(i);
    }
    const MetricsReport r = linear_probe(emb, labels, cfg, 2);
    CHECK(r.metric("accuracy") < 1.0 / n_classes + 0.15);
}

TEST_CASE("linear_probe: validates splits") {
    num::DenseMatrix emb(10, 2);
    std::vector<std::int32_t> labels(10, 0);
    labels[1] = 1;
    ProbeConfig cfg;
    CHECK_THROWS_WITH_AS((void)linear_probe(emb, labels, cfg, 1), doctest::Contains("empty split"),
                         std::invalid_argument);
    cfg.train_idx = {0, 1};
    cfg.val_idx = {1, 2}; // overlaps train
    cfg.test_idx = {3};
    CHECK_THROWS_WITH_AS((void)linear_probe(emb, labels, cfg, 1), doctest::Contains("disjoint"),
                         std::invalid_argument);
    cfg.val_idx = {12}; // out of range
    CHECK_THROWS_AS((void)linear_probe(emb, labels, cfg, 1), std::out_of_range);
}

TEST_CASE("probe pipeline on a trained model beats chance and leaves params frozen") {
    const auto data = testutil::synthetic_clustered(60, 3, 0.4, 0.03, 9, 0.25, 31);
    const EdgeSplit split = split_edges(data.graph, 0.05, 0.1, 7);

    TrainConfig tcfg;
    tcfg.strategy = MaskStrategy::Path;
    tcfg.max_epochs = 60;
    tcfg.patience = 60;
    tcfg.encoder = {.n_layers = 2, .hidden_dim = 12};
    tcfg.seed = 8;
    const PretrainResult trained = pretrain(split.train_graph, tcfg, split.val_pos, split.val_neg);

    const auto ckpt = std::filesystem::temp_directory_path() / "mg_probe_frozen.bin";
    trained.params.save(ckpt.string());
    const std::string digest_before = num::digest_file(ckpt.string());

    const num::DenseMatrix emb = build_probe_embeddings(trained.params, split.train_graph);
    ProbeConfig pcfg;
    pcfg.epochs = 150;
    Rng rng(5);
    std::vector<std::int32_t> order(static_cast<std::size_t>(data.graph.n_nodes()));
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<std::int32_t>(i);
    for (std::size_t i = order.size() - 1; i > 0; --i)
        std::swap(order[i], order[rng.uniform_index(i + 1)]);
    for (std::size_t i = 0; i < order.size(); ++i) {
        if (i < 20)
            pcfg.train_idx.push_back(order[i]);
        else if (i < 35)
            pcfg.val_idx.push_back(order[i]);
        else
            pcfg.test_idx.push_back(order[i]);
    }
    const MetricsReport r = linear_probe(emb, *data.graph.labels(), pcfg, 3);
    CHECK(r.metric("accuracy") > 0.55); // 3 classes, chance ~0.33

    // Probe training never touches the encoder parameters.
    trained.params.save(ckpt.string());
    CHECK(num::digest_file(ckpt.string()) == digest_before);
    std::filesystem::remove(ckpt);
}

TEST_CASE("metrics reports serialize with mean and sample std aggregation") {
    MetricsReport a;
    a.task = "linkpred";
    a.metrics = {{"auc", 0.9}, {"ap", 0.8}};
    a.seed = 1;
    MetricsReport b = a;
    b.metrics = {{"auc", 0.95}, {"ap", 0.9}};
    b.seed = 2;

    const auto dir = std::filesystem::temp_directory_path();
    const auto single = dir / "mg_metrics.json";
    save_metrics(single.string(), a);
    std::ifstream in(single);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    CHECK(text.find("\"task\"") != std::string::npos);
    CHECK(text.find("\"auc\"") != std::string::npos);

    const auto summary = dir / "mg_summary.json";
    const MetricsReport reports[] = {a, b};
    save_metrics_summary(summary.string(), "linkpred", reports);
    std::ifstream in2(summary);
    nlohmann::json j;
    in2 >> j;
    CHECK(j["metrics_mean"]["auc"].get<double>() == doctest::Approx(0.925));
    // Sample std with n-1: |0.9-0.95|/sqrt(2) scaled -> sqrt(0.00125) ~ 0.035355
    CHECK(j["metrics_std"]["auc"].get<double>() == doctest::Approx(0.035355).epsilon(1e-4));
    std::filesystem::remove(single);
    std::filesystem::remove(summary);
}
