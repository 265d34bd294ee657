#pragma once

#include <string>
#include <utility>
#include <vector>

#include "cascon/graph.hpp"
#include "cascon/matrix.hpp"
#include "cascon/rng.hpp"
#include "cascon/tensor.hpp"

namespace cascon {

struct ModelConfig {
    int attr_dim = 1;
    int num_classes = 2;
    int hidden_dim = 16;  // node, super-node and graph embedding width
    int layers = 5;       // local aggregation layers after the init layer
    int beta = 5;         // BFS sub-graph size cap
    int epsilon = 1;      // sub-graph overlap threshold for coarse edges
    double pool_ratio = 0.5;
    double gamma = 0.0;   // self-weight offset in (1+gamma)
};

// linear -> max(0,.) -> linear
struct MlpParams {
    Matrix w1, b1, w2, b2;
};

struct ModelParams {
    ModelConfig config;
    MlpParams init_mlp;
    std::vector<MlpParams> la_mlps;
    Matrix pool_vector;     // hidden x 1
    Matrix supernode_proj;  // hidden x hidden
    Matrix readout_proj;    // hidden x hidden
    Matrix classifier_w;    // num_classes x hidden
    Matrix classifier_b;    // 1 x num_classes

    static ModelParams init(const ModelConfig& cfg, Rng& rng);

    // Fixed iteration order shared by the optimizer and the checkpoint format.
    std::vector<std::pair<std::string, Matrix*>> named_params();
    std::vector<std::pair<std::string, const Matrix*>> named_params() const;
};

// Parameters registered on a tape for one recorded step.
struct MlpValues {
    Value w1, b1, w2, b2;
};

struct BoundModel {
    ModelConfig config;
    MlpValues init_mlp;
    std::vector<MlpValues> la_mlps;
    Value pool_vector, supernode_proj, readout_proj, classifier_w, classifier_b;
    std::vector<Value> leaves;  // parallel to ModelParams::named_params()

    static BoundModel bind(Tape& tape, const ModelParams& params, bool trainable);
};

struct ForwardResult {
    Value embedding;   // 1 x hidden, pre-classifier graph embedding r
    Value normalized;  // 1 x hidden, L2-normalized copy for contrastive use
    Value probs;       // 1 x num_classes
    std::vector<int> pool_idx;
};

Value apply_mlp(Tape& tape, Value x, const MlpValues& mlp);

// h0_v = MLP((1+gamma) x_v + sum of attributes over S_BFS(v) \ {v}).
Value init_layer(Tape& tape, const Graph& g, const SubGraphTable& table, Value attrs,
                 const MlpValues& mlp, double gamma);

// h'_v = MLP((1+gamma) h_v + sum of h_u over neighbors of v).
Value la_layer(Tape& tape, const Graph& g, Value h, const MlpValues& mlp, double gamma);

struct TopkResult {
    std::vector<int> idx;  // ascending
    Value gated;           // k x d, rows scaled by sigmoid of their score
};

// Scores z . w / |w|; keeps the k largest (ties to the lower index).
TopkResult topk_select(Tape& tape, Value z, Value w, int k);

// Position pairs (a,b) into idx with |S_BFS(idx_a) ∩ S_BFS(idx_b)| >= epsilon.
std::vector<std::pair<int, int>> build_coarse_graph(const SubGraphTable& table,
                                                    const std::vector<int>& idx, int epsilon);

// z~_i = W_g z_i + sum over coarse neighbors j of W_g z_j.
Value super_node_features(Tape& tape, Value gated,
                          const std::vector<std::pair<int, int>>& coarse_edges, Value wg);

// r = proj . column-wise mean of the super-node features.
Value readout(Tape& tape, Value supernodes, Value proj);

ForwardResult model_forward(Tape& tape, const Graph& g, const BoundModel& model);

// Text checkpoint; doubles are printed with enough digits to round-trip
// bit-exactly.
void save_model(const ModelParams& params, const std::string& path);
ModelParams load_model(const std::string& path);

}  // namespace cascon
