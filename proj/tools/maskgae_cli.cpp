// Command-line pipeline: edge splitting, self-supervised pretraining,
// link-prediction / node-classification evaluation, and subgraph-overlap
// diagnostics. See README.md for the config file grammar and output layout.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "maskgae/analysis.hpp"
#include "maskgae/checkpoint.hpp"
#include "maskgae/evaluation.hpp"
#include "maskgae/graph.hpp"
#include "maskgae/masking.hpp"
#include "maskgae/models.hpp"
#include "maskgae/trainer.hpp"

namespace fs = std::filesystem;
using namespace maskgae;

namespace {

// Exit codes: 0 success, 1 internal error, 2 bad input/config.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Flat key = value configuration with '#' comments. CLI flags override keys.
class RunConfig {
public:
    void load_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw UsageError("cannot open config file: " + path);
        std::string line;
        std::int64_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line = line.substr(0, hash);
            const auto eq = line.find('=');
            if (eq == std::string::npos) {
                if (line.find_first_not_of(" \t\r") != std::string::npos)
                    throw UsageError(path + ":" + std::to_string(line_no) +
                                     ": expected key = value");
                continue;
            }
            values_[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
        }
    }

    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    bool has(const std::string& key) const { return values_.count(key) > 0; }

    std::string get_str(const std::string& key, const std::string& fallback = "") const {
        auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }
    double get_double(const std::string& key, double fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        try {
            return std::stod(it->second);
        } catch (...) {
            throw UsageError("config key '" + key + "': not a number: " + it->second);
        }
    }
    std::int64_t get_int(const std::string& key, std::int64_t fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        try {
            return std::stoll(it->second);
        } catch (...) {
            throw UsageError("config key '" + key + "': not an integer: " + it->second);
        }
    }
    bool get_bool(const std::string& key, bool fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        if (it->second == "true" || it->second == "1" || it->second == "on") return true;
        if (it->second == "false" || it->second == "0" || it->second == "off") return false;
        throw UsageError("config key '" + key + "': not a boolean: " + it->second);
    }

    // Effective configuration, sorted, for the manifest and digests.
    std::string render() const {
        std::ostringstream out;
        for (const auto& [k, v] : values_) out << k << " = " << v << "\n";
        return out.str();
    }

private:
    static std::string trim(const std::string& s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return "";
        const auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
    }
    std::map<std::string, std::string> values_;
};

std::string data_path(const std::string& path) {
    if (path.empty() || path.front() == '/') return path;
    const char* prefix = std::getenv("MASKGAE_DATA_DIR");
    if (!prefix || !*prefix) return path;
    return (fs::path(prefix) / path).string();
}

std::vector<std::uint64_t> parse_seeds(const std::string& csv) {
    std::vector<std::uint64_t> seeds;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        try {
            seeds.push_back(std::stoull(item));
        } catch (...) {
            throw UsageError("bad seed list entry: " + item);
        }
    }
    if (seeds.empty()) throw UsageError("seed list is empty");
    return seeds;
}

void ensure_writable(const fs::path& path, bool force) {
    if (fs::exists(path) && !force)
        throw UsageError("refusing to overwrite " + path.string() + " (use --force)");
}

Graph load_dataset(const RunConfig& cfg, bool need_features, bool need_labels) {
    const std::string edges = cfg.get_str("edges");
    if (edges.empty()) throw UsageError("config key 'edges' is required");
    std::optional<std::string> features, labels;
    if (!cfg.get_str("features").empty()) features = data_path(cfg.get_str("features"));
    if (!cfg.get_str("labels").empty()) labels = data_path(cfg.get_str("labels"));
    if (need_features && !features) throw UsageError("config key 'features' is required here");
    if (need_labels && !labels) throw UsageError("config key 'labels' is required here");
    try {
        return load_graph(data_path(edges), features, labels);
    } catch (const std::runtime_error& e) {
        throw UsageError(e.what());
    }
}

TrainConfig trainer_config(const RunConfig& cfg, std::uint64_t seed) {
    TrainConfig t;
    try {
        t.strategy = mask_strategy_from_string(cfg.get_str("strategy", "path"));
        t.mask_rate = cfg.get_double("p", 0.7);
        t.root_fraction = cfg.get_double("root_fraction", 0.5);
        t.n_walk = static_cast<int>(cfg.get_int("n_walk", 2));
        t.l_walk = static_cast<int>(cfg.get_int("l_walk", 4));
        t.alpha = cfg.get_double("alpha", 2e-3);
        t.lr = cfg.get_double("lr", 0.01);
        t.max_epochs = static_cast<int>(cfg.get_int("max_epochs", 500));
        // The default patience follows a shortened run unless set explicitly.
        t.patience = static_cast<int>(cfg.get_int("patience", std::min<std::int64_t>(50, t.max_epochs)));
        t.decoder = decoder_mode_from_string(cfg.get_str("decoder", "mlp"));
        t.encoder.n_layers = static_cast<int>(cfg.get_int("n_layers", 3));
        t.encoder.hidden_dim = static_cast<int>(cfg.get_int("hidden_dim", 64));
        t.encoder.use_batchnorm = cfg.get_bool("batchnorm", true);
        t.encoder.dropout = cfg.get_double("dropout", 0.0);
        t.seed = seed;
        t.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    return t;
}

void write_manifest(const fs::path& out_dir, const std::string& command, const RunConfig& cfg,
                    const std::vector<std::uint64_t>& seeds) {
    nlohmann::ordered_json j;
    j["command"] = command;
    const auto now = std::chrono::system_clock::now().time_since_epoch();
    j["timestamp_unix"] = std::chrono::duration_cast<std::chrono::seconds>(now).count();
    j["seeds"] = seeds;
    j["config"] = cfg.render();
    j["config_digest"] = num::digest_string(cfg.render());
    std::ofstream out(out_dir / ("manifest_" + command + ".json"), std::ios::trunc);
    out << j.dump(2) << "\n";
}

fs::path split_path(const fs::path& out_dir, std::uint64_t seed) {
    return out_dir / ("split_seed" + std::to_string(seed) + ".json");
}
fs::path checkpoint_path(const fs::path& out_dir, std::uint64_t seed) {
    return out_dir / ("checkpoint_seed" + std::to_string(seed) + ".bin");
}

EdgeSplit load_split_or_fail(const fs::path& path, const Graph& original) {
    if (!fs::exists(path))
        throw UsageError("split file not found: " + path.string() +
                         " (run the split command first)");
    return load_edge_split(path.string(), original);
}

// Runs fn(seed) for each seed, optionally in parallel.
void for_each_seed(const std::vector<std::uint64_t>& seeds, int jobs,
                   const std::function<void(std::uint64_t)>& fn) {
    if (jobs <= 1 || seeds.size() <= 1) {
        for (std::uint64_t s : seeds) fn(s);
        return;
    }
    std::vector<std::future<void>> running;
    std::size_t next = 0;
    while (next < seeds.size() || !running.empty()) {
        while (static_cast<int>(running.size()) < jobs && next < seeds.size()) {
            const std::uint64_t seed = seeds[next++];
            running.push_back(std::async(std::launch::async, fn, seed));
        }
        running.front().get();
        running.erase(running.begin());
    }
}

// --- subcommands ------------------------------------------------------------

int cmd_split(const RunConfig& cfg, const fs::path& out_dir,
              const std::vector<std::uint64_t>& seeds, bool force) {
    const Graph g = load_dataset(cfg, false, false);
    const double val_frac = cfg.get_double("val_frac", 0.05);
    const double test_frac = cfg.get_double("test_frac", 0.10);
    fs::create_directories(out_dir);
    for (std::uint64_t seed : seeds) {
        const fs::path path = split_path(out_dir, seed);
        ensure_writable(path, force);
        EdgeSplit split;
        try {
            split = split_edges(g, val_frac, test_frac, seed);
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        }
        save_edge_split(path.string(), split);
        std::cout << "split seed=" << seed << " train=" << split.train_graph.n_edges()
                  << " val=" << split.val_pos.size() << " test=" << split.test_pos.size() << " -> "
                  << path.string() << "\n";
    }
    write_manifest(out_dir, "split", cfg, seeds);
    return 0;
}

int cmd_pretrain(const RunConfig& cfg, const fs::path& out_dir,
                 const std::vector<std::uint64_t>& seeds, bool force, int jobs) {
    const Graph g = load_dataset(cfg, true, false);
    fs::create_directories(out_dir);
    for (std::uint64_t seed : seeds) {
        ensure_writable(checkpoint_path(out_dir, seed), force);
        ensure_writable(out_dir / ("trainlog_seed" + std::to_string(seed) + ".txt"), force);
        ensure_writable(out_dir / ("trainstate_seed" + std::to_string(seed) + ".json"), force);
    }
    for_each_seed(seeds, jobs, [&](std::uint64_t seed) {
        const EdgeSplit split = load_split_or_fail(split_path(out_dir, seed), g);
        const TrainConfig tcfg = trainer_config(cfg, seed);
        std::ofstream log(out_dir / ("trainlog_seed" + std::to_string(seed) + ".txt"),
                          std::ios::trunc);
        const PretrainResult res =
            pretrain(split.train_graph, tcfg, split.val_pos, split.val_neg, &log);
        res.params.save(checkpoint_path(out_dir, seed).string());
        save_train_state((out_dir / ("trainstate_seed" + std::to_string(seed) + ".json")).string(),
                         res.state);
        std::ostringstream line;
        line << "pretrain seed=" << seed << " strategy=" << to_string(tcfg.strategy)
             << " epochs=" << res.state.epochs_run << " best_epoch=" << res.state.best_epoch
             << " best_val_auc=" << res.state.best_val_auc << "\n";
        std::cout << line.str();
    });
    write_manifest(out_dir, "pretrain", cfg, seeds);
    return 0;
}

int cmd_eval_linkpred(const RunConfig& cfg, const fs::path& out_dir,
                      const std::vector<std::uint64_t>& seeds, bool force) {
    const Graph g = load_dataset(cfg, true, false);
    fs::create_directories(out_dir);
    std::vector<MetricsReport> reports;
    const std::string digest = num::digest_string(cfg.render());
    for (std::uint64_t seed : seeds) {
        const fs::path out = out_dir / ("metrics_linkpred_seed" + std::to_string(seed) + ".json");
        ensure_writable(out, force);
        const EdgeSplit split = load_split_or_fail(split_path(out_dir, seed), g);
        const fs::path ckpt = checkpoint_path(out_dir, seed);
        if (!fs::exists(ckpt))
            throw UsageError("checkpoint not found: " + ckpt.string() +
                             " (run the pretrain command first)");
        const TrainConfig tcfg = trainer_config(cfg, seed);
        ModelParams params = init_params(tcfg.encoder,
                                         static_cast<int>(g.features()->cols), tcfg.decoder, seed);
        params.load(ckpt.string());
        MetricsReport r = eval_link_prediction(params, split.train_graph, split.test_pos,
                                               split.test_neg, seed, digest);
        save_metrics(out.string(), r);
        std::cout << "linkpred seed=" << seed << " auc=" << r.metric("auc")
                  << " ap=" << r.metric("ap") << "\n";
        reports.push_back(std::move(r));
    }
    const fs::path summary = out_dir / "summary_linkpred.json";
    ensure_writable(summary, force);
    save_metrics_summary(summary.string(), "linkpred", reports);
    write_manifest(out_dir, "eval-linkpred", cfg, seeds);
    return 0;
}

ProbeConfig probe_config(const RunConfig& cfg, const Graph& g, std::uint64_t seed) {
    ProbeConfig p;
    p.lr = cfg.get_double("probe_lr", 0.01);
    p.epochs = static_cast<int>(cfg.get_int("probe_epochs", 300));
    p.weight_decay = cfg.get_double("probe_weight_decay", 1e-5);
    p.standardize = cfg.get_bool("probe_standardize", false);

    const std::string split_file = cfg.get_str("node_split");
    if (!split_file.empty()) {
        std::ifstream in(data_path(split_file));
        if (!in) throw UsageError("cannot open node split file: " + data_path(split_file));
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw UsageError(data_path(split_file) + ": invalid JSON: " + std::string(e.what()));
        }
        p.train_idx = j.at("train").get<std::vector<std::int32_t>>();
        p.val_idx = j.at("val").get<std::vector<std::int32_t>>();
        p.test_idx = j.at("test").get<std::vector<std::int32_t>>();
        return p;
    }

    // No public split given: seeded random split by fractions.
    const double train_frac = cfg.get_double("probe_train_frac", 0.1);
    const double val_frac = cfg.get_double("probe_val_frac", 0.1);
    if (train_frac <= 0 || val_frac <= 0 || train_frac + val_frac >= 1.0)
        throw UsageError("probe_train_frac/probe_val_frac must be positive with sum < 1");
    std::vector<std::int32_t> order(static_cast<std::size_t>(g.n_nodes()));
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<std::int32_t>(i);
    Rng rng(derive_seed(seed, 0xbeef));
    for (std::size_t i = order.size() - 1; i > 0; --i)
        std::swap(order[i], order[rng.uniform_index(i + 1)]);
    const auto n_train = static_cast<std::size_t>(train_frac * static_cast<double>(order.size()));
    const auto n_val = static_cast<std::size_t>(val_frac * static_cast<double>(order.size()));
    for (std::size_t i = 0; i < order.size(); ++i) {
        if (i < n_train)
            p.train_idx.push_back(order[i]);
        else if (i < n_train + n_val)
            p.val_idx.push_back(order[i]);
        else
            p.test_idx.push_back(order[i]);
    }
    return p;
}

int cmd_eval_nodeclf(const RunConfig& cfg, const fs::path& out_dir,
                     const std::vector<std::uint64_t>& seeds, bool force) {
    const Graph g = load_dataset(cfg, true, true);
    fs::create_directories(out_dir);
    std::vector<MetricsReport> reports;
    const std::string digest = num::digest_string(cfg.render());
    for (std::uint64_t seed : seeds) {
        const fs::path out = out_dir / ("metrics_nodeclf_seed" + std::to_string(seed) + ".json");
        ensure_writable(out, force);
        const EdgeSplit split = load_split_or_fail(split_path(out_dir, seed), g);
        const fs::path ckpt = checkpoint_path(out_dir, seed);
        if (!fs::exists(ckpt))
            throw UsageError("checkpoint not found: " + ckpt.string() +
                             " (run the pretrain command first)");
        const TrainConfig tcfg = trainer_config(cfg, seed);
        ModelParams params = init_params(tcfg.encoder,
                                         static_cast<int>(g.features()->cols), tcfg.decoder, seed);
        params.load(ckpt.string());
        const num::DenseMatrix emb = build_probe_embeddings(params, split.train_graph);
        ProbeConfig pcfg = probe_config(cfg, g, seed);
        MetricsReport r;
        try {
            r = linear_probe(emb, *g.labels(), pcfg, seed);
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        } catch (const std::out_of_range& e) {
            throw UsageError(e.what());
        }
        r.config_digest = digest;
        save_metrics(out.string(), r);
        std::cout << "nodeclf seed=" << seed << " accuracy=" << r.metric("accuracy") << "\n";
        reports.push_back(std::move(r));
    }
    const fs::path summary = out_dir / "summary_nodeclf.json";
    ensure_writable(summary, force);
    save_metrics_summary(summary.string(), "nodeclf", reports);
    write_manifest(out_dir, "eval-nodeclf", cfg, seeds);
    return 0;
}

int cmd_overlap(const RunConfig& cfg, const fs::path& out_dir,
                const std::vector<std::uint64_t>& seeds, bool force, const std::string& regime,
                int k) {
    const Graph g = load_dataset(cfg, false, false);
    fs::create_directories(out_dir);
    const int n_seeds = static_cast<int>(cfg.get_int("overlap_seeds", 10));
    MaskRegimeConfig rc;
    rc.regime = regime;
    rc.mask_rate = cfg.get_double("p", 0.7);
    rc.root_fraction = cfg.get_double("root_fraction", 0.5);
    rc.n_walk = static_cast<int>(cfg.get_int("n_walk", 2));
    rc.l_walk = static_cast<int>(cfg.get_int("l_walk", 4));

    const fs::path out = out_dir / ("overlap_" + regime + "_k" + std::to_string(k) + ".csv");
    ensure_writable(out, force);
    const MaskRegimeConfig regimes[] = {rc};
    std::vector<OverlapReport> reports;
    try {
        reports = masked_overlap_sweep(g, k, regimes, n_seeds, seeds.front());
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    save_overlap_csv(out.string(), reports);
    for (const OverlapReport& r : reports)
        std::cout << "overlap regime=" << r.regime << " k=" << r.k << " o_node=" << r.o_node
                  << " o_edge=" << r.o_edge << "\n";
    write_manifest(out_dir, "overlap-stats", cfg, seeds);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Masked graph autoencoder pipeline"};
    app.require_subcommand(1);

    std::string config_path, out_str = "runs/default", seed_csv = "1";
    bool force = false;
    int jobs = 1;
    app.add_option("--config", config_path, "flat key = value config file")->expected(1);
    app.add_option("--out", out_str, "output directory");
    app.add_option("--seed", seed_csv, "seed or comma-separated seed list");
    app.add_flag("--force", force, "overwrite existing outputs");
    app.add_option("--jobs", jobs, "parallel seeds (pretrain only)");

    auto* split = app.add_subcommand("split", "split edges into train/val/test");
    double opt_val_frac = -1.0, opt_test_frac = -1.0;
    split->add_option("--val-frac", opt_val_frac, "validation edge fraction");
    split->add_option("--test-frac", opt_test_frac, "test edge fraction");

    auto* pretrain_cmd = app.add_subcommand("pretrain", "self-supervised pretraining");
    std::string opt_strategy;
    double opt_alpha = -1.0;
    int opt_epochs = -1;
    pretrain_cmd->add_option("--strategy", opt_strategy, "edge | path");
    pretrain_cmd->add_option("--alpha", opt_alpha, "degree loss weight");
    pretrain_cmd->add_option("--max-epochs", opt_epochs, "training epochs");

    auto* linkpred = app.add_subcommand("eval-linkpred", "test AUC/AP of a checkpoint");
    auto* nodeclf = app.add_subcommand("eval-nodeclf", "linear probe accuracy of a checkpoint");
    auto* overlap = app.add_subcommand("overlap-stats", "subgraph overlap diagnostics");
    std::string opt_regime = "none";
    int opt_k = 2;
    overlap->add_option("--regime", opt_regime, "none | edge | path");
    overlap->add_option("--k", opt_k, "hop count");

    // Dataset/config overrides usable with any subcommand.
    std::string opt_edges, opt_features, opt_labels;
    app.add_option("--edges", opt_edges, "edge list file");
    app.add_option("--features", opt_features, "feature file");
    app.add_option("--labels", opt_labels, "label file");

    CLI11_PARSE(app, argc, argv);

    try {
        RunConfig cfg;
        if (!config_path.empty()) cfg.load_file(config_path);
        if (!opt_edges.empty()) cfg.set("edges", opt_edges);
        if (!opt_features.empty()) cfg.set("features", opt_features);
        if (!opt_labels.empty()) cfg.set("labels", opt_labels);
        if (opt_val_frac >= 0.0) cfg.set("val_frac", std::to_string(opt_val_frac));
        if (opt_test_frac >= 0.0) cfg.set("test_frac", std::to_string(opt_test_frac));
        if (!opt_strategy.empty()) cfg.set("strategy", opt_strategy);
        if (opt_alpha >= 0.0) cfg.set("alpha", std::to_string(opt_alpha));
        if (opt_epochs > 0) cfg.set("max_epochs", std::to_string(opt_epochs));

        const std::vector<std::uint64_t> seeds = parse_seeds(seed_csv);
        const fs::path out_dir(out_str);

        if (split->parsed()) return cmd_split(cfg, out_dir, seeds, force);
        if (pretrain_cmd->parsed()) return cmd_pretrain(cfg, out_dir, seeds, force, jobs);
        if (linkpred->parsed()) return cmd_eval_linkpred(cfg, out_dir, seeds, force);
        if (nodeclf->parsed()) return cmd_eval_nodeclf(cfg, out_dir, seeds, force);
        if (overlap->parsed()) return cmd_overlap(cfg, out_dir, seeds, force, opt_regime, opt_k);
        throw UsageError("no subcommand");
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
}
