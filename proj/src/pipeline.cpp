#include "cascon/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "cascon/losses.hpp"
#include "cascon/tensor.hpp"

namespace cascon {

namespace {

// Stream tags for deriving independent seed streams from one run seed.
constexpr std::uint64_t kStreamCascades = 0x11;
constexpr std::uint64_t kStreamParams = 0x22;
constexpr std::uint64_t kStreamShuffle = 0x33;
constexpr std::uint64_t kStreamViews = 0x44;
constexpr std::uint64_t kStreamFolds = 0x55;
constexpr std::uint64_t kStreamFoldRun = 0x66;

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

std::string fmt_full(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

template <typename T>
void shuffle_in_place(std::vector<T>& v, Rng& rng) {
    for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
        std::swap(v[i], v[rng.uniform_int(i + 1)]);
    }
}

}  // namespace

ModelConfig RunConfig::model_config(int attr_dim, int num_classes) const {
    ModelConfig mc;
    mc.attr_dim = attr_dim;
    mc.num_classes = num_classes;
    mc.hidden_dim = hidden_dim;
    mc.layers = L;
    mc.beta = beta;
    mc.epsilon = epsilon;
    mc.pool_ratio = pool_ratio;
    mc.gamma = gamma;
    return mc;
}

void RunConfig::validate() const {
    if (beta < 1) throw std::invalid_argument("config: beta must be >= 1");
    if (xi < 0) throw std::invalid_argument("config: xi must be >= 0");
    if (q < 0) throw std::invalid_argument("config: q must be >= 0");
    if (T < 0.0) throw std::invalid_argument("config: T must be >= 0");
    if (tau <= 0.0) throw std::invalid_argument("config: tau must be positive");
    if (lambda < 0.0) throw std::invalid_argument("config: lambda must be >= 0");
    if (L < 1) throw std::invalid_argument("config: L must be >= 1");
    if (hidden_dim < 1) throw std::invalid_argument("config: hidden_dim must be >= 1");
    if (pool_ratio <= 0.0 || pool_ratio > 1.0) {
        throw std::invalid_argument("config: pool_ratio must be in (0, 1]");
    }
    if (epsilon < 1) throw std::invalid_argument("config: epsilon must be >= 1");
    if (learning_rate <= 0.0) throw std::invalid_argument("config: learning_rate must be positive");
    if (weight_decay < 0.0) throw std::invalid_argument("config: weight_decay must be >= 0");
    if (rmsprop_alpha < 0.0 || rmsprop_alpha >= 1.0) {
        throw std::invalid_argument("config: rmsprop_alpha must be in [0, 1)");
    }
    if (epochs < 0) throw std::invalid_argument("config: epochs must be >= 0");
    if (batch_size < 1) throw std::invalid_argument("config: batch_size must be >= 1");
    if (folds < 2) throw std::invalid_argument("config: folds must be >= 2");
    if (view_mode != "stochastic" && view_mode != "deterministic") {
        throw std::invalid_argument("config: view_mode must be stochastic or deterministic");
    }
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    RunConfig cfg;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::replace(line.begin(), line.end(), '=', ' ');
        std::istringstream ls(line);
        std::string key;
        if (!(ls >> key)) continue;
        std::string value;
        if (!(ls >> value)) {
            throw std::runtime_error("config: missing value at line " + std::to_string(lineno));
        }
        try {
            if (key == "dataset_dir") cfg.dataset_dir = value;
            else if (key == "dataset_name") cfg.dataset_name = value;
            else if (key == "seed") cfg.seed = std::stoull(value);
            else if (key == "beta") cfg.beta = std::stoi(value);
            else if (key == "xi") cfg.xi = std::stoi(value);
            else if (key == "q") cfg.q = std::stoi(value);
            else if (key == "T") cfg.T = std::stod(value);
            else if (key == "tau") cfg.tau = std::stod(value);
            else if (key == "lambda") cfg.lambda = std::stod(value);
            else if (key == "L") cfg.L = std::stoi(value);
            else if (key == "hidden_dim") cfg.hidden_dim = std::stoi(value);
            else if (key == "pool_ratio") cfg.pool_ratio = std::stod(value);
            else if (key == "epsilon") cfg.epsilon = std::stoi(value);
            else if (key == "learning_rate") cfg.learning_rate = std::stod(value);
            else if (key == "weight_decay") cfg.weight_decay = std::stod(value);
            else if (key == "rmsprop_alpha") cfg.rmsprop_alpha = std::stod(value);
            else if (key == "epochs") cfg.epochs = std::stoi(value);
            else if (key == "batch_size") cfg.batch_size = std::stoi(value);
            else if (key == "folds") cfg.folds = std::stoi(value);
            else if (key == "gamma") cfg.gamma = std::stod(value);
            else if (key == "view_mode") cfg.view_mode = value;
            else {
                throw std::runtime_error("config: unknown key '" + key + "' at line " +
                                         std::to_string(lineno));
            }
        } catch (const std::invalid_argument&) {
            throw std::runtime_error("config: bad value for '" + key + "' at line " +
                                     std::to_string(lineno));
        }
    }
    return cfg;
}

void rmsprop_step(Matrix& param, const Matrix& grad, Matrix& state, double learning_rate,
                  double alpha, double weight_decay) {
    if (!param.same_shape(grad) || !param.same_shape(state)) {
        throw std::invalid_argument("rmsprop_step: shape mismatch");
    }
    for (std::size_t i = 0; i < param.raw().size(); ++i) {
        const double g = grad.raw()[i];
        double& s = state.raw()[i];
        s = alpha * s + (1.0 - alpha) * g * g;
        param.raw()[i] -= learning_rate * g / std::sqrt(s + 1e-8) +
                          learning_rate * weight_decay * param.raw()[i];
    }
}

namespace {

std::string cache_path(const std::string& cache_dir, const Dataset& ds, const RunConfig& cfg) {
    std::ostringstream name;
    name << ds.name << "_s" << cfg.seed << "_q" << cfg.q << "_T" << fmt_double(cfg.T)
         << ".rates";
    return (std::filesystem::path(cache_dir) / name.str()).string();
}

bool load_rates_cache(const std::string& path, const Dataset& ds, const RunConfig& cfg,
                      std::vector<TransmissionMatrix>& rates, int& degenerate) {
    std::ifstream in(path);
    if (!in) return false;
    std::string header;
    std::getline(in, header);
    if (header != "cascon-rates v1") return false;
    std::string key, name;
    std::uint64_t seed = 0;
    int q = -1, m = -1;
    double T = -1.0;
    in >> key >> name >> key >> seed >> key >> q >> key >> T >> key >> m;
    if (name != ds.name || seed != cfg.seed || q != cfg.q || T != cfg.T ||
        m != static_cast<int>(ds.graphs.size())) {
        return false;
    }
    rates.clear();
    rates.reserve(m);
    degenerate = 0;
    for (int gi = 0; gi < m; ++gi) {
        int idx = -1, n = -1, nnz = -1, degen = 0;
        if (!(in >> key >> idx >> n >> nnz >> degen) || key != "graph" || idx != gi ||
            n != ds.graphs[gi].num_nodes()) {
            return false;
        }
        std::vector<std::pair<int, int>> support(nnz);
        std::vector<double> vals(nnz);
        for (int k = 0; k < nnz; ++k) {
            if (!(in >> support[k].first >> support[k].second >> vals[k])) return false;
        }
        TransmissionMatrix tm(n, support);
        for (int k = 0; k < nnz; ++k) {
            tm.set_rate(support[k].first, support[k].second, vals[k]);
        }
        rates.push_back(std::move(tm));
        degenerate += degen;
    }
    return true;
}

void save_rates_cache(const std::string& path, const Dataset& ds, const RunConfig& cfg,
                      const std::vector<TransmissionMatrix>& rates,
                      const std::vector<char>& degenerate) {
    std::filesystem::create_directories(std::filesystem::path(path).parent_path());
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw std::runtime_error("preprocess: cannot write cache " + tmp);
        out << "cascon-rates v1\n";
        out << "dataset " << ds.name << " seed " << cfg.seed << " q " << cfg.q << " T "
            << fmt_full(cfg.T) << " graphs " << ds.graphs.size() << "\n";
        for (std::size_t gi = 0; gi < rates.size(); ++gi) {
            const TransmissionMatrix& tm = rates[gi];
            out << "graph " << gi << " " << tm.num_nodes() << " " << tm.support().size() << " "
                << static_cast<int>(degenerate[gi]) << "\n";
            for (std::size_t k = 0; k < tm.support().size(); ++k) {
                out << tm.support()[k].first << " " << tm.support()[k].second << " "
                    << fmt_full(tm.rate_by_index(static_cast<int>(k))) << "\n";
            }
        }
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace

Preprocessed preprocess(const Dataset& ds, const RunConfig& cfg, const std::string& cache_dir) {
    cfg.validate();
    Preprocessed out;
    out.dataset = ds;
    out.rates.resize(ds.graphs.size());
    out.augmented.reserve(ds.graphs.size());

    const std::string path = cache_dir.empty() ? "" : cache_path(cache_dir, ds, cfg);
    int cached_degenerate = 0;
    if (!path.empty() && load_rates_cache(path, ds, cfg, out.rates, cached_degenerate)) {
        out.cache_hit = true;
        out.degenerate_graphs = cached_degenerate;
    } else {
        std::vector<char> degenerate(ds.graphs.size(), 0);
        const std::uint64_t stream = Rng::derive(cfg.seed, kStreamCascades);
        std::vector<std::exception_ptr> errors;
        auto solve_range = [&](std::size_t begin, std::size_t step, std::exception_ptr& err) {
            try {
                for (std::size_t gi = begin; gi < ds.graphs.size(); gi += step) {
                    const Graph& g = ds.graphs[gi];
                    const int q = cfg.q > 0 ? cfg.q : 20 * g.num_nodes();
                    const CascadeSet cs =
                        simulate_cascades(g, q, cfg.T, Rng::derive(stream, gi));
                    auto [m, report] = infer_structure(cs);
                    out.rates[gi] = std::move(m);
                    degenerate[gi] = report.degenerate ? 1 : 0;
                }
            } catch (...) {
                err = std::current_exception();
            }
        };
        const unsigned workers =
            std::max(1u, std::min(std::thread::hardware_concurrency(),
                                  static_cast<unsigned>(ds.graphs.size())));
        errors.resize(workers);
        if (workers > 1) {
            std::vector<std::thread> pool;
            for (unsigned w = 0; w < workers; ++w) {
                pool.emplace_back(solve_range, w, workers, std::ref(errors[w]));
            }
            for (auto& t : pool) t.join();
        } else {
            solve_range(0, 1, errors[0]);
        }
        for (const auto& err : errors) {
            if (err) std::rethrow_exception(err);
        }
        out.degenerate_graphs = 0;
        for (char d : degenerate) out.degenerate_graphs += d;
        if (out.degenerate_graphs > 0) {
            std::cerr << "warning: structure inference degenerated on " << out.degenerate_graphs
                      << " graph(s); their edges stay unchanged\n";
        }
        if (!path.empty()) save_rates_cache(path, ds, cfg, out.rates, degenerate);
    }

    for (std::size_t gi = 0; gi < ds.graphs.size(); ++gi) {
        out.augmented.push_back(augment_graph(ds.graphs[gi], out.rates[gi], cfg.xi));
    }
    return out;
}

std::pair<Graph, Graph> make_views(const Graph& g, const TransmissionMatrix& m,
                                   const RunConfig& cfg, Rng& rng) {
    Graph positive = augment_graph(g, m, cfg.xi);
    if (cfg.view_mode == "deterministic") return {positive, positive};

    // Eligible candidates and their symmetrized weights, in rank order.
    std::vector<std::pair<int, int>> eligible = select_edges(m, g, g.num_nodes() * g.num_nodes());
    if (eligible.empty() || cfg.xi == 0) return {positive, positive};

    std::vector<double> weight(eligible.size());
    for (std::size_t k = 0; k < eligible.size(); ++k) {
        auto [i, j] = eligible[k];
        weight[k] = 0.5 * (m.rate(i, j) + m.rate(j, i));
    }
    std::vector<std::pair<int, int>> drawn;
    const int want = std::min<int>(cfg.xi, static_cast<int>(eligible.size()));
    for (int d = 0; d < want; ++d) {
        double total = std::accumulate(weight.begin(), weight.end(), 0.0);
        double u = rng.uniform() * total;
        std::size_t pick = 0;
        for (; pick + 1 < weight.size(); ++pick) {
            if (u < weight[pick]) break;
            u -= weight[pick];
        }
        drawn.push_back(eligible[pick]);
        eligible.erase(eligible.begin() + pick);
        weight.erase(weight.begin() + pick);
    }
    return {std::move(positive), add_edges(g, drawn)};
}

namespace {

struct BatchLoss {
    double gc = 0.0;
    double sc = 0.0;
    double total = 0.0;
};

BatchLoss run_batch(const Preprocessed& data, const std::vector<int>& batch, ModelParams& params,
                    OptimizerState& opt, const RunConfig& cfg, std::uint64_t view_stream) {
    Tape tape;
    BoundModel model = BoundModel::bind(tape, params, true);

    const int b = static_cast<int>(batch.size());
    std::vector<Value> prob_rows, embed_rows_pos, embed_rows_neg;
    std::vector<int> labels_pos;
    prob_rows.reserve(b);
    embed_rows_pos.reserve(b);
    embed_rows_neg.reserve(b);
    for (int gi : batch) {
        const Graph& g = data.dataset.graphs[gi];
        Rng view_rng(Rng::derive(view_stream, static_cast<std::uint64_t>(gi)));
        auto [pos, neg] = make_views(g, data.rates[gi], cfg, view_rng);
        ForwardResult fpos = model_forward(tape, pos, model);
        ForwardResult fneg = model_forward(tape, neg, model);
        prob_rows.push_back(fpos.probs);
        embed_rows_pos.push_back(fpos.normalized);
        embed_rows_neg.push_back(fneg.normalized);
        labels_pos.push_back(g.label().value());
    }

    Value probs = tape.concat_rows(prob_rows);
    Value gc = cross_entropy(tape, probs, labels_pos);

    std::vector<Value> embed_rows = embed_rows_pos;
    embed_rows.insert(embed_rows.end(), embed_rows_neg.begin(), embed_rows_neg.end());
    Value embeddings = tape.concat_rows(embed_rows);
    std::vector<int> labels(labels_pos);
    labels.insert(labels.end(), labels_pos.begin(), labels_pos.end());
    std::vector<int> pairing(2 * b);
    for (int i = 0; i < b; ++i) {
        pairing[i] = i + b;
        pairing[i + b] = i;
    }
    ContrastBatch contrast = ContrastBatch::make(embeddings, std::move(labels), std::move(pairing));
    Value sc = sup_gcon_loss(tape, contrast, cfg.tau);
    Value total = total_loss(tape, gc, sc, cfg.lambda);

    Gradients grads = tape.backward(total);
    auto named = params.named_params();
    for (std::size_t k = 0; k < named.size(); ++k) {
        rmsprop_step(*named[k].second, grads.at(model.leaves[k]), opt.second_moment[k],
                     cfg.learning_rate, cfg.rmsprop_alpha, cfg.weight_decay);
    }
    opt.step_count += 1;

    return BatchLoss{gc.scalar(), sc.scalar(), total.scalar()};
}

}  // namespace

TrainResult train(const Preprocessed& data, const std::vector<int>& train_indices,
                  const RunConfig& cfg, std::uint64_t run_seed) {
    cfg.validate();
    if (train_indices.empty()) throw std::invalid_argument("train: empty training split");
    for (int gi : train_indices) {
        if (gi < 0 || gi >= static_cast<int>(data.dataset.graphs.size())) {
            throw std::invalid_argument("train: graph index out of range");
        }
        if (!data.dataset.graphs[gi].label().has_value()) {
            throw std::invalid_argument("train: graph " + std::to_string(gi) + " has no label");
        }
    }

    const ModelConfig mc =
        cfg.model_config(data.dataset.graphs[0].attr_dim(), data.dataset.num_classes);
    Rng param_rng(Rng::derive(run_seed, kStreamParams));
    TrainResult result{ModelParams::init(mc, param_rng), {}};

    OptimizerState opt;
    for (const auto& [name, m] : result.params.named_params()) {
        opt.second_moment.emplace_back(m->rows(), m->cols(), 0.0);
    }

    std::vector<int> order(train_indices);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng shuffle_rng(Rng::derive(Rng::derive(run_seed, kStreamShuffle), epoch));
        shuffle_in_place(order, shuffle_rng);
        const std::uint64_t view_stream =
            Rng::derive(Rng::derive(run_seed, kStreamViews), epoch);

        EpochTrace trace;
        int seen = 0;
        for (std::size_t at = 0; at < order.size(); at += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), at + cfg.batch_size);
            std::vector<int> batch(order.begin() + at, order.begin() + end);
            BatchLoss loss;
            try {
                loss = run_batch(data, batch, result.params, opt, cfg, view_stream);
            } catch (const std::domain_error& e) {
                throw std::runtime_error("train: non-finite loss at epoch " +
                                         std::to_string(epoch) + ", batch " +
                                         std::to_string(at / cfg.batch_size) + ": " + e.what());
            }
            const int bsz = static_cast<int>(batch.size());
            trace.gc += loss.gc * bsz;
            trace.sc += loss.sc * bsz;
            trace.total += loss.total * bsz;
            seen += bsz;
        }
        trace.gc /= seen;
        trace.sc /= seen;
        trace.total /= seen;
        result.trace.push_back(trace);
    }
    return result;
}

double evaluate_accuracy(const Preprocessed& data, const std::vector<int>& indices,
                         const ModelParams& params) {
    if (indices.empty()) throw std::invalid_argument("evaluate_accuracy: empty index list");
    int correct = 0;
    for (int gi : indices) {
        Tape tape;
        BoundModel model = BoundModel::bind(tape, params, false);
        ForwardResult f = model_forward(tape, data.augmented[gi], model);
        const Matrix& p = f.probs.value();
        int best = 0;
        for (int c = 1; c < p.cols(); ++c) {
            if (p(0, c) > p(0, best)) best = c;
        }
        if (best == data.dataset.graphs[gi].label().value()) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(indices.size());
}

std::vector<std::vector<int>> stratified_folds(const Dataset& ds, int folds, Rng& rng) {
    if (folds < 2) throw std::invalid_argument("stratified_folds: need at least 2 folds");
    std::vector<std::vector<int>> by_class(ds.num_classes);
    for (std::size_t gi = 0; gi < ds.graphs.size(); ++gi) {
        const auto label = ds.graphs[gi].label();
        if (!label.has_value()) {
            throw std::invalid_argument("stratified_folds: graph without label");
        }
        by_class[*label].push_back(static_cast<int>(gi));
    }
    for (int c = 0; c < ds.num_classes; ++c) {
        if (static_cast<int>(by_class[c].size()) < folds) {
            throw std::invalid_argument(
                "stratified_folds: class " + std::to_string(c) + " has only " +
                std::to_string(by_class[c].size()) + " graphs; use at most that many folds");
        }
    }
    std::vector<std::vector<int>> out(folds);
    for (int c = 0; c < ds.num_classes; ++c) {
        shuffle_in_place(by_class[c], rng);
        for (std::size_t t = 0; t < by_class[c].size(); ++t) {
            out[t % folds].push_back(by_class[c][t]);
        }
    }
    for (auto& fold : out) std::sort(fold.begin(), fold.end());
    return out;
}

MetricsReport cross_validate(const Preprocessed& data, const RunConfig& cfg) {
    cfg.validate();
    const auto start = std::chrono::steady_clock::now();

    Rng fold_rng(Rng::derive(cfg.seed, kStreamFolds));
    const auto folds = stratified_folds(data.dataset, cfg.folds, fold_rng);

    MetricsReport report;
    for (int f = 0; f < cfg.folds; ++f) {
        std::vector<int> train_idx;
        for (int other = 0; other < cfg.folds; ++other) {
            if (other != f) {
                train_idx.insert(train_idx.end(), folds[other].begin(), folds[other].end());
            }
        }
        std::sort(train_idx.begin(), train_idx.end());
        TrainResult tr = train(data, train_idx, cfg,
                               Rng::derive(Rng::derive(cfg.seed, kStreamFoldRun), f));
        report.fold_accuracy.push_back(evaluate_accuracy(data, folds[f], tr.params));
        report.traces.push_back(std::move(tr.trace));
    }

    double mean = 0.0;
    for (double a : report.fold_accuracy) mean += a;
    mean /= report.fold_accuracy.size();
    double var = 0.0;
    for (double a : report.fold_accuracy) var += (a - mean) * (a - mean);
    var /= report.fold_accuracy.size();
    report.mean_accuracy = mean;
    report.std_accuracy = std::sqrt(var);
    report.wallclock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

std::string format_metrics(const MetricsReport& report, const RunConfig& cfg) {
    std::ostringstream out;
    out << "cascon-metrics v1\n";
    out << "dataset " << cfg.dataset_name << "\n";
    out << "seed " << cfg.seed << "\n";
    out << "folds " << cfg.folds << "\n";
    out << "config beta=" << cfg.beta << " xi=" << cfg.xi << " q=" << cfg.q
        << " T=" << fmt_double(cfg.T) << " tau=" << fmt_double(cfg.tau)
        << " lambda=" << fmt_double(cfg.lambda) << " L=" << cfg.L
        << " hidden_dim=" << cfg.hidden_dim << " pool_ratio=" << fmt_double(cfg.pool_ratio)
        << " epsilon=" << cfg.epsilon << " learning_rate=" << fmt_double(cfg.learning_rate)
        << " weight_decay=" << fmt_double(cfg.weight_decay)
        << " rmsprop_alpha=" << fmt_double(cfg.rmsprop_alpha) << " epochs=" << cfg.epochs
        << " batch_size=" << cfg.batch_size << " gamma=" << fmt_double(cfg.gamma)
        << " view_mode=" << cfg.view_mode << "\n";
    for (std::size_t f = 0; f < report.fold_accuracy.size(); ++f) {
        out << "fold " << f << " accuracy " << fmt_double(report.fold_accuracy[f]) << "\n";
    }
    out << "mean_accuracy " << fmt_double(report.mean_accuracy) << "\n";
    out << "std_accuracy " << fmt_double(report.std_accuracy) << "\n";
    return out.str();
}

std::string format_traces(const MetricsReport& report) {
    std::ostringstream out;
    out << "fold\tepoch\tgc\tsc\ttotal\n";
    for (std::size_t f = 0; f < report.traces.size(); ++f) {
        for (std::size_t e = 0; e < report.traces[f].size(); ++e) {
            const EpochTrace& t = report.traces[f][e];
            out << f << "\t" << e << "\t" << fmt_double(t.gc) << "\t" << fmt_double(t.sc)
                << "\t" << fmt_double(t.total) << "\n";
        }
    }
    return out.str();
}

Dataset make_synthetic_dataset(int num_graphs, std::uint64_t seed, const std::string& name) {
    if (num_graphs < 1) throw std::invalid_argument("make_synthetic_dataset: need >= 1 graphs");
    Dataset ds;
    ds.name = name;
    ds.num_classes = 2;
    ds.has_node_labels = true;

    constexpr int kTypes = 7;
    for (int gi = 0; gi < num_graphs; ++gi) {
        Rng rng(Rng::derive(seed, static_cast<std::uint64_t>(gi)));
        const int label = rng.uniform() < 0.665 ? 1 : 0;
        const int n = 10 + rng.uniform_int(19);  // 10..28 nodes

        // Chain-like backbone with short branches.
        std::vector<std::pair<int, int>> edges;
        for (int v = 1; v < n; ++v) {
            const int back = 1 + rng.uniform_int(std::min(v, 3));
            edges.emplace_back(v - back, v);
        }

        // Ring closures: the class-1 distribution is shifted upward.
        auto bern = [&](double p) { return rng.uniform() < p ? 1 : 0; };
        int rings = label == 1 ? 1 + bern(0.6) + bern(0.6) + bern(0.6)
                               : bern(0.25) + bern(0.25);
        for (int r = 0; r < rings; ++r) {
            const int u = rng.uniform_int(n);
            const int v = u + 2 + rng.uniform_int(4);
            if (v < n) edges.emplace_back(u, v);
        }

        // Node types 0..4 are common; type 5 is class-biased, type 6 rare.
        Matrix attrs(n, kTypes, 0.0);
        for (int v = 0; v < n; ++v) {
            int type;
            const double u = rng.uniform();
            if (u < (label == 1 ? 0.22 : 0.06)) type = 5;
            else if (u < (label == 1 ? 0.27 : 0.11)) type = 6;
            else type = rng.uniform_int(5);
            attrs(v, type) = 1.0;
        }
        ds.graphs.emplace_back(n, std::move(edges), std::move(attrs), label);
    }
    return ds;
}

}  // namespace cascon
