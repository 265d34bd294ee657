#include "cascon/infer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>

namespace cascon {

TransmissionMatrix::TransmissionMatrix(int n, std::vector<std::pair<int, int>> support)
    : n_(n), support_(std::move(support)) {
    std::sort(support_.begin(), support_.end());
    support_.erase(std::unique(support_.begin(), support_.end()), support_.end());
    for (auto [i, j] : support_) {
        if (i < 0 || i >= n || j < 0 || j >= n) {
            throw std::invalid_argument("TransmissionMatrix: support pair out of range");
        }
        if (i == j) throw std::invalid_argument("TransmissionMatrix: diagonal pair in support");
    }
    rates_.assign(support_.size(), 0.0);
}

int TransmissionMatrix::support_index(int i, int j) const {
    auto it = std::lower_bound(support_.begin(), support_.end(), std::make_pair(i, j));
    if (it == support_.end() || *it != std::make_pair(i, j)) return -1;
    return static_cast<int>(it - support_.begin());
}

double TransmissionMatrix::rate(int i, int j) const {
    const int k = support_index(i, j);
    return k < 0 ? 0.0 : rates_[k];
}

void TransmissionMatrix::set_rate(int i, int j, double r) {
    const int k = support_index(i, j);
    if (k < 0) throw std::invalid_argument("TransmissionMatrix: pair outside support");
    set_rate_by_index(k, r);
}

void TransmissionMatrix::set_rate_by_index(int k, double r) {
    if (!(r >= 0.0) || !std::isfinite(r)) {
        throw std::invalid_argument("TransmissionMatrix: rate must be finite and >= 0");
    }
    rates_[k] = r;
}

Matrix TransmissionMatrix::to_dense() const {
    Matrix m(n_, n_, 0.0);
    for (std::size_t k = 0; k < support_.size(); ++k) {
        m(support_[k].first, support_[k].second) = rates_[k];
    }
    return m;
}

namespace {

// Cascade set flattened into the convex objective
//   nll(x) = <linear, x> - sum_events log(sum_{p in parents(event)} x[p])
// over the co-occurrence support. Built once, evaluated many times.
struct CompiledLikelihood {
    int n = 0;
    std::vector<std::pair<int, int>> support;
    std::vector<double> linear;
    std::vector<int> parent_flat;                   // support indices
    std::vector<std::pair<int, int>> event_range;   // [begin, end) into parent_flat
    std::vector<std::pair<int, int>> event_info;    // (cascade, node) for diagnostics

    double nll(const std::vector<double>& x) const {
        double total = 0.0;
        for (std::size_t k = 0; k < x.size(); ++k) total += linear[k] * x[k];
        for (std::size_t e = 0; e < event_range.size(); ++e) {
            double hazard = 0.0;
            for (int p = event_range[e].first; p < event_range[e].second; ++p) {
                hazard += x[parent_flat[p]];
            }
            if (hazard <= 0.0) {
                throw std::domain_error("cascade_nll: zero incoming hazard at cascade " +
                                        std::to_string(event_info[e].first) + ", node " +
                                        std::to_string(event_info[e].second));
            }
            total -= std::log(hazard);
        }
        return total;
    }

    void grad(const std::vector<double>& x, std::vector<double>& g) const {
        g.assign(x.size(), 0.0);
        for (std::size_t k = 0; k < x.size(); ++k) g[k] = linear[k];
        for (std::size_t e = 0; e < event_range.size(); ++e) {
            double hazard = 0.0;
            for (int p = event_range[e].first; p < event_range[e].second; ++p) {
                hazard += x[parent_flat[p]];
            }
            if (hazard <= 0.0) {
                throw std::domain_error("cascade_nll_grad: zero incoming hazard at cascade " +
                                        std::to_string(event_info[e].first) + ", node " +
                                        std::to_string(event_info[e].second));
            }
            const double inv = 1.0 / hazard;
            for (int p = event_range[e].first; p < event_range[e].second; ++p) {
                g[parent_flat[p]] -= inv;
            }
        }
    }
};

CompiledLikelihood compile(const CascadeSet& cs) {
    CompiledLikelihood cl;
    cl.n = cs.num_nodes;
    const double T = cs.window;

    std::map<std::pair<int, int>, double> linear;
    // First pass: accumulate linear coefficients and discover the support.
    for (const Cascade& c : cs.cascades) {
        for (int j = 0; j < cl.n; ++j) {
            const double tj = c.times[j];
            if (tj == kNeverActivated) {
                for (int i = 0; i < cl.n; ++i) {
                    // t_i == T contributes no survival mass; skip so every
                    // support pair carries actual gradient pressure.
                    if (i != j && c.times[i] != kNeverActivated && c.times[i] < T) {
                        linear[{i, j}] += T - c.times[i];
                    }
                }
            } else if (tj > 0.0) {
                for (int i = 0; i < cl.n; ++i) {
                    if (i != j && c.times[i] < tj) {
                        linear[{i, j}] += tj - c.times[i];
                    }
                }
            }
        }
    }
    cl.support.reserve(linear.size());
    cl.linear.reserve(linear.size());
    std::map<std::pair<int, int>, int> index;
    for (const auto& [pair, coeff] : linear) {
        index[pair] = static_cast<int>(cl.support.size());
        cl.support.push_back(pair);
        cl.linear.push_back(coeff);
    }

    // Second pass: activation events with their potential-transmitter lists.
    for (std::size_t ci = 0; ci < cs.cascades.size(); ++ci) {
        const Cascade& c = cs.cascades[ci];
        for (int j = 0; j < cl.n; ++j) {
            const double tj = c.times[j];
            if (tj == kNeverActivated || tj <= 0.0) continue;
            const int begin = static_cast<int>(cl.parent_flat.size());
            for (int i = 0; i < cl.n; ++i) {
                if (i != j && c.times[i] < tj) {
                    cl.parent_flat.push_back(index.at({i, j}));
                }
            }
            cl.event_range.emplace_back(begin, static_cast<int>(cl.parent_flat.size()));
            cl.event_info.emplace_back(static_cast<int>(ci), j);
        }
    }
    return cl;
}

std::vector<double> rates_on_support(const CompiledLikelihood& cl, const TransmissionMatrix& m) {
    std::vector<double> x(cl.support.size());
    for (std::size_t k = 0; k < cl.support.size(); ++k) {
        x[k] = m.rate(cl.support[k].first, cl.support[k].second);
    }
    return x;
}

}  // namespace

double cascade_nll(const CascadeSet& cs, const TransmissionMatrix& m) {
    if (cs.cascades.empty()) throw std::invalid_argument("cascade_nll: empty cascade set");
    const CompiledLikelihood cl = compile(cs);
    return cl.nll(rates_on_support(cl, m));
}

Matrix cascade_nll_grad(const CascadeSet& cs, const TransmissionMatrix& m) {
    if (cs.cascades.empty()) throw std::invalid_argument("cascade_nll_grad: empty cascade set");
    const CompiledLikelihood cl = compile(cs);
    std::vector<double> g;
    cl.grad(rates_on_support(cl, m), g);
    Matrix out(cs.num_nodes, cs.num_nodes, 0.0);
    for (std::size_t k = 0; k < cl.support.size(); ++k) {
        out(cl.support[k].first, cl.support[k].second) = g[k];
    }
    return out;
}

std::pair<TransmissionMatrix, SolverReport> infer_structure(const CascadeSet& cs,
                                                            const SolverConfig& cfg) {
    if (cs.cascades.empty()) throw std::invalid_argument("infer_structure: empty cascade set");
    const CompiledLikelihood cl = compile(cs);
    SolverReport report;

    if (cl.event_range.empty()) {
        // No activated transitions anywhere: only survival mass, whose
        // minimizer is all-zero.
        report.degenerate = true;
        return {TransmissionMatrix(cs.num_nodes, {}), report};
    }

    const std::size_t dim = cl.support.size();
    std::vector<double> x(dim, cfg.init_rate);
    std::vector<double> g(dim), x_new(dim);

    double nll = cl.nll(x);
    report.nll_trace.push_back(nll);
    double step = cfg.init_step;

    for (int iter = 0; iter < cfg.max_iters; ++iter) {
        cl.grad(x, g);

        // Projected gradient: floor-pinned coordinates pushed further down
        // are already optimal, so they do not count against convergence.
        double norm = 0.0;
        for (std::size_t k = 0; k < dim; ++k) {
            const bool pinned = x[k] <= cfg.rate_floor && g[k] > 0.0;
            if (!pinned) norm = std::max(norm, std::abs(g[k]));
        }
        report.final_grad_norm = norm;
        if (norm < cfg.tol) {
            report.converged = true;
            break;
        }

        bool accepted = false;
        while (step > 1e-18) {
            for (std::size_t k = 0; k < dim; ++k) {
                x_new[k] = std::max(cfg.rate_floor, x[k] - step * g[k]);
            }
            const double nll_new = cl.nll(x_new);
            if (nll_new <= nll) {
                x.swap(x_new);
                nll = nll_new;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        report.iterations = iter + 1;
        if (!accepted) break;  // stalled at numerical precision
        report.nll_trace.push_back(nll);
        step = std::min(step * 2.0, 1e6);
    }

    report.final_nll = nll;
    TransmissionMatrix m(cs.num_nodes, cl.support);
    for (std::size_t k = 0; k < dim; ++k) {
        m.set_rate(cl.support[k].first, cl.support[k].second, x[k]);
    }
    return {std::move(m), std::move(report)};
}

std::vector<std::pair<int, int>> select_edges(const TransmissionMatrix& m, const Graph& g,
                                              int xi) {
    if (xi < 0) throw std::invalid_argument("select_edges: xi must be >= 0");
    // Symmetrized weight per unordered pair.
    std::map<std::pair<int, int>, double> weight;
    for (std::size_t k = 0; k < m.support().size(); ++k) {
        auto [i, j] = m.support()[k];
        auto key = i < j ? std::make_pair(i, j) : std::make_pair(j, i);
        weight[key] += 0.5 * m.rate_by_index(static_cast<int>(k));
    }
    std::vector<std::pair<double, std::pair<int, int>>> candidates;
    for (const auto& [pair, w] : weight) {
        if (w > kSelectThreshold && !g.has_edge(pair.first, pair.second)) {
            candidates.emplace_back(w, pair);
        }
    }
    std::sort(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    std::vector<std::pair<int, int>> out;
    const int take = std::min<int>(xi, static_cast<int>(candidates.size()));
    out.reserve(take);
    for (int k = 0; k < take; ++k) out.push_back(candidates[k].second);
    return out;
}

Graph augment_graph(const Graph& g, const TransmissionMatrix& m, int xi) {
    return add_edges(g, select_edges(m, g, xi));
}

}  // namespace cascon
