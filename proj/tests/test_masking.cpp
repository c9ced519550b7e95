#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "maskgae/masking.hpp"
#include "testutil.hpp"

using namespace maskgae;
using testutil::path_graph;
using testutil::random_graph;
using testutil::triangle_graph;

TEST_CASE("bernoulli masking: p=0 and p=1 extremes") {
    const Graph g = random_graph(20, 40, 1);
    const MaskSplit none = mask_edges_bernoulli(g, 0.0, 7);
    CHECK(none.masked_edges.empty());
    CHECK(none.visible_edges == g.canonical_edges());

    const MaskSplit all = mask_edges_bernoulli(g, 1.0, 7);
    CHECK(all.masked_edges == g.canonical_edges());
    CHECK(all.visible_edges.empty());
    CHECK(all.visible_graph.n_edges() == 0);
    CHECK(all.visible_graph.n_nodes() == g.n_nodes());

    CHECK_THROWS_AS(mask_edges_bernoulli(g, -0.1, 1), std::invalid_argument);
    CHECK_THROWS_AS(mask_edges_bernoulli(g, 1.1, 1), std::invalid_argument);
}

TEST_CASE("bernoulli masking: masked count matches the binomial expectation") {
    // Cora-scale random stand-in: mean over 200 seeds within 3 sigma of p*m.
    const Graph g = random_graph(2708, 4486, 123);
    const double p = 0.7;
    const std::int64_t m = g.n_edges();
    double total = 0.0;
    for (std::uint64_t seed = 0; seed < 200; ++seed)
        total += static_cast<double>(mask_edges_bernoulli(g, p, seed).masked_edges.size());
    const double mean = total / 200.0;
    const double sigma_of_mean =
        std::sqrt(p * (1.0 - p) * static_cast<double>(m)) / std::sqrt(200.0);
    CHECK(std::abs(mean - p * static_cast<double>(m)) < 3.0 * sigma_of_mean);
}

TEST_CASE("masking invariants: partition and determinism across strategies") {
    int trials = 0;
    for (std::uint64_t seed = 0; seed < 500; ++seed) {
        const Graph g = random_graph(15 + seed % 10, 25 + seed % 15, seed * 31 + 5);
        const MaskSplit bern = mask_edges_bernoulli(g, 0.5, seed);
        const auto roots = sample_roots(g, 0.5, seed);
        const MaskSplit path = mask_edges_path(g, roots, 2, 3, seed);

        for (const MaskSplit* s : {&bern, &path}) {
            ++trials;
            std::set<Edge> masked(s->masked_edges.begin(), s->masked_edges.end());
            std::set<Edge> visible(s->visible_edges.begin(), s->visible_edges.end());
            CHECK(masked.size() + visible.size() == static_cast<std::size_t>(g.n_edges()));
            for (const Edge& e : masked) CHECK(visible.count(e) == 0);
            std::set<Edge> all(g.canonical_edges().begin(), g.canonical_edges().end());
            for (const Edge& e : masked) CHECK(all.count(e) == 1);
            for (const Edge& e : visible) CHECK(all.count(e) == 1);
            CHECK(s->visible_graph.canonical_edges() == s->visible_edges);
        }

        // Determinism under identical (graph, params, seed).
        CHECK(mask_edges_bernoulli(g, 0.5, seed).masked_edges == bern.masked_edges);
        CHECK(mask_edges_path(g, roots, 2, 3, seed).masked_edges == path.masked_edges);
    }
    CHECK(trials == 1000);
}

TEST_CASE("sample_roots: full fraction returns every node when none are isolated") {
    const Graph g = random_graph(12, 40, 4);
    bool isolated = false;
    for (NodeId v = 0; v < g.n_nodes(); ++v) isolated = isolated || g.degree(v) == 0;
    REQUIRE(!isolated);
    const auto roots = sample_roots(g, 1.0, 9);
    CHECK(roots.size() == 12);
    std::set<NodeId> uniq(roots.begin(), roots.end());
    CHECK(uniq.size() == 12);
}

TEST_CASE("sample_roots: degree weighting prefers the star center") {
    // Star on 9 nodes: center 0 has degree 8, leaves degree 1.
    std::vector<Edge> edges;
    for (NodeId v = 1; v < 9; ++v) edges.push_back({0, v});
    const Graph star = Graph::from_edges(9, std::move(edges));

    std::map<NodeId, int> hits;
    for (std::uint64_t seed = 0; seed < 10000; ++seed) {
        const auto roots = sample_roots(star, 0.12, seed); // ceil(0.12*9) = 2 roots
        for (NodeId r : roots) ++hits[r];
    }
    // Center weight 8/16 on the first draw; every leaf is far behind.
    for (NodeId leaf = 1; leaf < 9; ++leaf) CHECK(hits[0] > hits[leaf] * 2);
}

TEST_CASE("sample_roots: isolated nodes are excluded, count clips") {
    const Graph g = Graph::from_edges(5, {{0, 1}, {1, 2}}); // 3, 4 isolated
    const auto roots = sample_roots(g, 1.0, 3); // wants 5, only 3 candidates
    CHECK(roots == std::vector<NodeId>{0, 1, 2});
    CHECK_THROWS_AS(sample_roots(g, 0.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(sample_roots(g, 1.5, 1), std::invalid_argument);
}

TEST_CASE("path masking: forced first step on the 4-path") {
    const Graph p4 = path_graph(4);
    const std::vector<NodeId> roots{0};
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const MaskSplit s = mask_edges_path(p4, roots, 1, 1, seed);
        CHECK(s.masked_edges == std::vector<Edge>{{0, 1}});
    }
}

TEST_CASE("path masking: empty roots mask nothing") {
    const Graph g = random_graph(10, 20, 2);
    const MaskSplit s = mask_edges_path(g, {}, 2, 4, 1);
    CHECK(s.masked_edges.empty());
    CHECK(s.visible_edges == g.canonical_edges());
}

TEST_CASE("path masking: l_walk=3 frequencies match exhaustive walk enumeration") {
    // Walks of length 3 from node 0 on the path 0-1-2-3, uniform choices:
    //   0-1-0-1 (prob 1/4), 0-1-2-1 (1/8), 0-1-2-3 (1/8) ... enumerated below.
    // Masked-set outcomes: {(0,1)} p=1/2, {(0,1),(1,2)} p=1/4,
    // {(0,1),(1,2),(2,3)} p=1/4.
    const Graph p4 = path_graph(4);

    // Independent oracle: enumerate all choice sequences with probabilities.
    std::map<std::set<Edge>, double> expected;
    struct State {
        NodeId cur;
        std::set<Edge> masked;
        double prob;
        int step;
    };
    std::vector<State> stack{{0, {}, 1.0, 0}};
    while (!stack.empty()) {
        State s = stack.back();
        stack.pop_back();
        const auto nb = p4.neighbors(s.cur);
        if (s.step == 3 || nb.empty()) {
            expected[s.masked] += s.prob;
            continue;
        }
        for (NodeId next : nb) {
            State t = s;
            t.masked.insert(make_canonical(s.cur, next));
            t.cur = next;
            t.prob = s.prob / static_cast<double>(nb.size());
            t.step = s.step + 1;
            stack.push_back(t);
        }
    }

    std::map<std::set<Edge>, int> observed;
    const int n_seeds = 10000;
    for (int seed = 0; seed < n_seeds; ++seed) {
        const MaskSplit s = mask_edges_path(p4, std::vector<NodeId>{0}, 1, 3,
                                            static_cast<std::uint64_t>(seed));
        observed[std::set<Edge>(s.masked_edges.begin(), s.masked_edges.end())]++;
    }

    // Every observed outcome must be feasible, and each frequency within
    // 4 sigma of its enumerated probability.
    for (const auto& [outcome, count] : observed) CHECK(expected.count(outcome) == 1);
    for (const auto& [outcome, prob] : expected) {
        CHECK(outcome.count(Edge{0, 1}) == 1); // first step always masks (0,1)
        const double sigma = std::sqrt(prob * (1.0 - prob) * n_seeds);
        CHECK(std::abs(observed[outcome] - prob * n_seeds) < 4.0 * sigma);
    }
}

TEST_CASE("path masking: each walk's masked edges form a connected trail") {
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const Graph g = random_graph(12, 24, seed + 77);
        const auto roots = sample_roots(g, 0.3, seed);
        for (NodeId root : roots) {
            // One walk at a time: its edges must form a connected subgraph
            // containing the root.
            const MaskSplit s = mask_edges_path(g, std::vector<NodeId>{root}, 1, 4, seed);
            if (s.masked_edges.empty()) continue;
            std::set<NodeId> reach{root};
            bool grew = true;
            while (grew) {
                grew = false;
                for (const Edge& e : s.masked_edges) {
                    if (reach.count(e.u) && !reach.count(e.v)) reach.insert(e.v), grew = true;
                    if (reach.count(e.v) && !reach.count(e.u)) reach.insert(e.u), grew = true;
                }
            }
            for (const Edge& e : s.masked_edges) {
                CHECK(reach.count(e.u) == 1);
                CHECK(reach.count(e.v) == 1);
            }
        }
    }
}

TEST_CASE("mask split JSON serialization") {
    const Graph g = random_graph(10, 18, 3);
    const MaskSplit s = mask_edges_bernoulli(g, 0.5, 5);
    const auto path = std::filesystem::temp_directory_path() / "mg_mask.json";
    save_mask_split(path.string(), s);
    std::ifstream in(path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    CHECK(text.find("\"masked\"") != std::string::npos);
    CHECK(text.find("\"visible\"") != std::string::npos);
    std::filesystem::remove(path);
}
