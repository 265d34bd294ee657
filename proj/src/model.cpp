#include "cascon/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace cascon {

namespace {

Matrix glorot(int rows, int cols, Rng& rng, double scale = 1.0) {
    const double a = scale * std::sqrt(6.0 / (rows + cols));
    Matrix m(rows, cols);
    for (double& v : m.raw()) v = rng.uniform(-a, a);
    return m;
}

MlpParams init_mlp_params(int in, int hidden, int out, Rng& rng, double scale = 1.0) {
    MlpParams p;
    p.w1 = glorot(in, hidden, rng, scale);
    // Small positive biases keep rectifier layers from dying wholesale, which
    // would zero every downstream feature (the biases are the only additive
    // terms in the network).
    p.b1 = Matrix(1, hidden, 0.01);
    p.w2 = glorot(hidden, out, rng, scale);
    p.b2 = Matrix(1, out, 0.01);
    return p;
}

// (1+gamma) I + A as a constant matrix, with A given by sorted neighbor lists.
Matrix self_plus_adjacency(const Graph& g, double gamma) {
    const int n = g.num_nodes();
    Matrix c(n, n, 0.0);
    for (int v = 0; v < n; ++v) {
        c(v, v) = 1.0 + gamma;
        for (int u : g.neighbors(v)) c(v, u) = 1.0;
    }
    return c;
}

}  // namespace

ModelParams ModelParams::init(const ModelConfig& cfg, Rng& rng) {
    if (cfg.hidden_dim < 1 || cfg.layers < 1 || cfg.num_classes < 1 || cfg.attr_dim < 1) {
        throw std::invalid_argument("ModelParams::init: invalid dimensions");
    }
    ModelParams p;
    p.config = cfg;
    p.init_mlp = init_mlp_params(cfg.attr_dim, cfg.hidden_dim, cfg.hidden_dim, rng);
    p.la_mlps.reserve(cfg.layers);
    // Sum aggregation multiplies the feature amplitude by roughly (1+degree)
    // per layer; damped weights keep the stacked scale near unity so the
    // pooling sigmoid and softmax stay in their responsive range.
    for (int l = 0; l < cfg.layers; ++l) {
        p.la_mlps.push_back(
            init_mlp_params(cfg.hidden_dim, cfg.hidden_dim, cfg.hidden_dim, rng, 0.5));
    }
    p.pool_vector = glorot(cfg.hidden_dim, 1, rng);
    p.supernode_proj = glorot(cfg.hidden_dim, cfg.hidden_dim, rng);
    p.readout_proj = glorot(cfg.hidden_dim, cfg.hidden_dim, rng);
    p.classifier_w = glorot(cfg.num_classes, cfg.hidden_dim, rng);
    p.classifier_b = Matrix(1, cfg.num_classes, 0.0);
    return p;
}

std::vector<std::pair<std::string, Matrix*>> ModelParams::named_params() {
    std::vector<std::pair<std::string, Matrix*>> out;
    auto add_mlp = [&](const std::string& prefix, MlpParams& mlp) {
        out.emplace_back(prefix + ".w1", &mlp.w1);
        out.emplace_back(prefix + ".b1", &mlp.b1);
        out.emplace_back(prefix + ".w2", &mlp.w2);
        out.emplace_back(prefix + ".b2", &mlp.b2);
    };
    add_mlp("init", init_mlp);
    for (std::size_t l = 0; l < la_mlps.size(); ++l) {
        add_mlp("la" + std::to_string(l), la_mlps[l]);
    }
    out.emplace_back("pool.w", &pool_vector);
    out.emplace_back("super.wg", &supernode_proj);
    out.emplace_back("readout.proj", &readout_proj);
    out.emplace_back("classifier.w", &classifier_w);
    out.emplace_back("classifier.b", &classifier_b);
    return out;
}

std::vector<std::pair<std::string, const Matrix*>> ModelParams::named_params() const {
    auto mutable_view = const_cast<ModelParams*>(this)->named_params();
    std::vector<std::pair<std::string, const Matrix*>> out;
    out.reserve(mutable_view.size());
    for (auto& [name, ptr] : mutable_view) out.emplace_back(name, ptr);
    return out;
}

BoundModel BoundModel::bind(Tape& tape, const ModelParams& params, bool trainable) {
    BoundModel b;
    b.config = params.config;
    auto bind_mlp = [&](const MlpParams& mlp) {
        MlpValues v;
        v.w1 = tape.leaf(mlp.w1, trainable);
        v.b1 = tape.leaf(mlp.b1, trainable);
        v.w2 = tape.leaf(mlp.w2, trainable);
        v.b2 = tape.leaf(mlp.b2, trainable);
        b.leaves.insert(b.leaves.end(), {v.w1, v.b1, v.w2, v.b2});
        return v;
    };
    b.init_mlp = bind_mlp(params.init_mlp);
    for (const MlpParams& mlp : params.la_mlps) b.la_mlps.push_back(bind_mlp(mlp));
    b.pool_vector = tape.leaf(params.pool_vector, trainable);
    b.supernode_proj = tape.leaf(params.supernode_proj, trainable);
    b.readout_proj = tape.leaf(params.readout_proj, trainable);
    b.classifier_w = tape.leaf(params.classifier_w, trainable);
    b.classifier_b = tape.leaf(params.classifier_b, trainable);
    b.leaves.insert(b.leaves.end(), {b.pool_vector, b.supernode_proj, b.readout_proj,
                                     b.classifier_w, b.classifier_b});
    return b;
}

Value apply_mlp(Tape& tape, Value x, const MlpValues& mlp) {
    Value h = tape.relu(tape.add(tape.matmul(x, mlp.w1), mlp.b1));
    return tape.add(tape.matmul(h, mlp.w2), mlp.b2);
}

Value init_layer(Tape& tape, const Graph& g, const SubGraphTable& table, Value attrs,
                 const MlpValues& mlp, double gamma) {
    const int n = g.num_nodes();
    if (attrs.rows != n) {
        throw std::invalid_argument("init_layer: attribute rows do not match node count");
    }
    Matrix agg(n, n, 0.0);
    for (int v = 0; v < n; ++v) {
        agg(v, v) = 1.0 + gamma;
        for (int u : table.members(v)) {
            if (u != v) agg(v, u) = 1.0;
        }
    }
    Value combined = tape.matmul(tape.constant(std::move(agg)), attrs);
    return apply_mlp(tape, combined, mlp);
}

Value la_layer(Tape& tape, const Graph& g, Value h, const MlpValues& mlp, double gamma) {
    if (h.rows != g.num_nodes()) {
        throw std::invalid_argument("la_layer: feature rows do not match node count");
    }
    Value combined = tape.matmul(tape.constant(self_plus_adjacency(g, gamma)), h);
    return apply_mlp(tape, combined, mlp);
}

TopkResult topk_select(Tape& tape, Value z, Value w, int k) {
    const int n = z.rows;
    if (k < 1 || k > n) throw std::invalid_argument("topk_select: k out of range");
    double norm_sq = 0.0;
    for (double v : w.value().raw()) norm_sq += v * v;
    if (norm_sq == 0.0) throw std::domain_error("topk_select: degenerate projection vector");

    // Normalize through the tape so w receives the full gradient.
    Value w_unit = tape.transpose(tape.l2_normalize_rows(tape.transpose(w)));
    Value scores = tape.matmul(z, w_unit);  // n x 1

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    const Matrix& s = scores.value();
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (s(a, 0) != s(b, 0)) return s(a, 0) > s(b, 0);
        return a < b;
    });
    std::vector<int> idx(order.begin(), order.begin() + k);
    std::sort(idx.begin(), idx.end());

    Value gate = tape.sigmoid(tape.gather_rows(scores, idx));
    TopkResult out;
    out.gated = tape.mul(tape.gather_rows(z, idx), gate);
    out.idx = std::move(idx);
    return out;
}

std::vector<std::pair<int, int>> build_coarse_graph(const SubGraphTable& table,
                                                    const std::vector<int>& idx, int epsilon) {
    if (idx.empty()) throw std::invalid_argument("build_coarse_graph: empty selection");
    if (epsilon < 1) throw std::invalid_argument("build_coarse_graph: epsilon must be >= 1");
    std::vector<std::pair<int, int>> edges;
    for (std::size_t a = 0; a < idx.size(); ++a) {
        for (std::size_t b = a + 1; b < idx.size(); ++b) {
            if (table.overlap(idx[a], idx[b]) >= epsilon) {
                edges.emplace_back(static_cast<int>(a), static_cast<int>(b));
            }
        }
    }
    return edges;
}

Value super_node_features(Tape& tape, Value gated,
                          const std::vector<std::pair<int, int>>& coarse_edges, Value wg) {
    const int k = gated.rows;
    Matrix mix = Matrix::identity(k);
    for (auto [a, b] : coarse_edges) {
        mix(a, b) = 1.0;
        mix(b, a) = 1.0;
    }
    return tape.matmul(tape.matmul(tape.constant(std::move(mix)), gated), tape.transpose(wg));
}

Value readout(Tape& tape, Value supernodes, Value proj) {
    if (supernodes.rows < 1) throw std::invalid_argument("readout: empty coarse graph");
    return tape.matmul(tape.col_mean(supernodes), tape.transpose(proj));
}

ForwardResult model_forward(Tape& tape, const Graph& g, const BoundModel& model) {
    const ModelConfig& cfg = model.config;
    const SubGraphTable table = bfs_subgraphs(g, cfg.beta);

    Value attrs = tape.constant(g.attributes());
    Value h = init_layer(tape, g, table, attrs, model.init_mlp, cfg.gamma);
    for (const MlpValues& mlp : model.la_mlps) {
        h = la_layer(tape, g, h, mlp, cfg.gamma);
    }

    const int n = g.num_nodes();
    const int k = std::min(n, std::max(1, static_cast<int>(std::ceil(cfg.pool_ratio * n))));
    TopkResult pooled = topk_select(tape, h, model.pool_vector, k);
    const auto coarse_edges = build_coarse_graph(table, pooled.idx, cfg.epsilon);
    Value supernodes = super_node_features(tape, pooled.gated, coarse_edges, model.supernode_proj);

    ForwardResult out;
    out.embedding = readout(tape, supernodes, model.readout_proj);
    out.normalized = tape.l2_normalize_rows(out.embedding);
    // The classifier reads the unit-norm embedding: sum aggregation grows the
    // raw scale roughly geometrically with depth, which would saturate the
    // softmax on larger graphs.
    out.probs = tape.softmax_rows(
        tape.add(tape.matmul(out.normalized, tape.transpose(model.classifier_w)),
                 model.classifier_b));
    out.pool_idx = std::move(pooled.idx);
    return out;
}

namespace {

void write_matrix(std::ofstream& out, const std::string& name, const Matrix& m) {
    out << "param " << name << " " << m.rows() << " " << m.cols() << "\n";
    char buf[40];
    for (int i = 0; i < m.rows(); ++i) {
        for (int j = 0; j < m.cols(); ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", m(i, j));
            out << buf << (j + 1 == m.cols() ? "" : " ");
        }
        out << "\n";
    }
}

}  // namespace

void save_model(const ModelParams& params, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_model: cannot open " + path);
    const ModelConfig& c = params.config;
    out << "cascon-model v1\n";
    out << "attr_dim " << c.attr_dim << "\n";
    out << "num_classes " << c.num_classes << "\n";
    out << "hidden_dim " << c.hidden_dim << "\n";
    out << "layers " << c.layers << "\n";
    out << "beta " << c.beta << "\n";
    out << "epsilon " << c.epsilon << "\n";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", c.pool_ratio);
    out << "pool_ratio " << buf << "\n";
    std::snprintf(buf, sizeof(buf), "%.17g", c.gamma);
    out << "gamma " << buf << "\n";
    for (const auto& [name, m] : params.named_params()) write_matrix(out, name, *m);
}

ModelParams load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_model: cannot open " + path);
    std::string header;
    std::getline(in, header);
    if (header != "cascon-model v1") {
        throw std::runtime_error("load_model: unsupported format in " + path);
    }
    ModelConfig cfg;
    std::string key;
    in >> key >> cfg.attr_dim;
    in >> key >> cfg.num_classes;
    in >> key >> cfg.hidden_dim;
    in >> key >> cfg.layers;
    in >> key >> cfg.beta;
    in >> key >> cfg.epsilon;
    in >> key >> cfg.pool_ratio;
    in >> key >> cfg.gamma;

    Rng rng(0);
    ModelParams params = ModelParams::init(cfg, rng);
    for (auto& [name, m] : params.named_params()) {
        std::string tag, got_name;
        int rows = 0, cols = 0;
        in >> tag >> got_name >> rows >> cols;
        if (tag != "param" || got_name != name || rows != m->rows() || cols != m->cols()) {
            throw std::runtime_error("load_model: malformed checkpoint at param " + name);
        }
        for (double& v : m->raw()) {
            if (!(in >> v)) throw std::runtime_error("load_model: truncated checkpoint");
        }
    }
    return params;
}

}  // namespace cascon
