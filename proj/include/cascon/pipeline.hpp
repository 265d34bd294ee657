#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cascon/graph.hpp"
#include "cascon/infer.hpp"
#include "cascon/model.hpp"
#include "cascon/rng.hpp"

namespace cascon {

struct RunConfig {
    std::string dataset_dir;
    std::string dataset_name;
    std::uint64_t seed = 0;
    int beta = 5;
    int xi = 1;
    int q = 0;  // 0 selects the default of 20 cascades per node
    double T = 10.0;
    double tau = 0.07;
    double lambda = 0.01;
    int L = 5;
    int hidden_dim = 16;
    double pool_ratio = 0.5;
    int epsilon = 1;
    double learning_rate = 0.01;
    double weight_decay = 0.001;
    double rmsprop_alpha = 0.9;
    int epochs = 100;
    int batch_size = 32;
    int folds = 10;
    double gamma = 0.0;
    std::string view_mode = "stochastic";  // "stochastic" | "deterministic"

    ModelConfig model_config(int attr_dim, int num_classes) const;
    void validate() const;
};

// Key-value text file, one `name value` (or `name = value`) pair per line,
// '#' starts a comment. Unknown names are rejected.
RunConfig load_run_config(const std::string& path);

// RMSprop with decoupled weight decay:
//   s <- alpha s + (1-alpha) g.g ;  p <- p - lr g / sqrt(s + 1e-8) - lr wd p
void rmsprop_step(Matrix& param, const Matrix& grad, Matrix& state, double learning_rate,
                  double alpha, double weight_decay);

struct OptimizerState {
    std::vector<Matrix> second_moment;  // parallel to ModelParams::named_params()
    long step_count = 0;
};

struct Preprocessed {
    Dataset dataset;
    std::vector<TransmissionMatrix> rates;  // per graph
    std::vector<Graph> augmented;           // deterministic top-xi augmentation per graph
    int degenerate_graphs = 0;
    bool cache_hit = false;
};

// Simulates cascades, infers transmission rates and augments every graph.
// Inference results are cached under `cache_dir` keyed by
// (dataset name, seed, q, T); a hit skips all solving.
Preprocessed preprocess(const Dataset& ds, const RunConfig& cfg, const std::string& cache_dir);

// view+ is the deterministic top-xi augmentation; view- draws xi eligible
// pairs without replacement with probability proportional to the symmetrized
// weights (or repeats view+ under view_mode "deterministic").
std::pair<Graph, Graph> make_views(const Graph& g, const TransmissionMatrix& m,
                                   const RunConfig& cfg, Rng& rng);

struct EpochTrace {
    double gc = 0.0;
    double sc = 0.0;
    double total = 0.0;
};

struct TrainResult {
    ModelParams params;
    std::vector<EpochTrace> trace;
};

// Trains on the listed graph indices with seeded shuffling, batching, view
// construction and RMSprop updates.
TrainResult train(const Preprocessed& data, const std::vector<int>& train_indices,
                  const RunConfig& cfg, std::uint64_t run_seed);

// Fraction of listed graphs whose argmax prediction (on the deterministic
// augmented view) matches the label.
double evaluate_accuracy(const Preprocessed& data, const std::vector<int>& indices,
                         const ModelParams& params);

// Seeded stratified split: every fold receives every class in proportion.
std::vector<std::vector<int>> stratified_folds(const Dataset& ds, int folds, Rng& rng);

struct MetricsReport {
    std::vector<double> fold_accuracy;
    double mean_accuracy = 0.0;
    double std_accuracy = 0.0;
    std::vector<std::vector<EpochTrace>> traces;  // per fold
    double wallclock_seconds = 0.0;
};

MetricsReport cross_validate(const Preprocessed& data, const RunConfig& cfg);

// Deterministic renderings: wall-clock time is deliberately excluded so that
// identical (config, seed) runs write byte-identical artifacts.
std::string format_metrics(const MetricsReport& report, const RunConfig& cfg);
std::string format_traces(const MetricsReport& report);

// Generator for a small labeled benchmark with molecule-like graphs: two
// classes that differ in ring-motif counts and node-type frequencies. Used
// as a stand-in when no TU dataset is on disk.
Dataset make_synthetic_dataset(int num_graphs, std::uint64_t seed,
                               const std::string& name = "synthetic");

}  // namespace cascon
