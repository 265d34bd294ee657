#pragma once

#include <utility>
#include <vector>

#include "cascon/cascade.hpp"
#include "cascon/graph.hpp"
#include "cascon/matrix.hpp"

namespace cascon {

// Nonnegative directed transmission rates with an explicit support set;
// entries outside the support are identically zero, the diagonal is empty.
class TransmissionMatrix {
public:
    TransmissionMatrix() = default;
    TransmissionMatrix(int n, std::vector<std::pair<int, int>> support);

    int num_nodes() const { return n_; }
    const std::vector<std::pair<int, int>>& support() const { return support_; }

    double rate(int i, int j) const;
    void set_rate(int i, int j, double r);

    double rate_by_index(int k) const { return rates_[k]; }
    void set_rate_by_index(int k, double r);

    Matrix to_dense() const;

private:
    int support_index(int i, int j) const;  // -1 when absent

    int n_ = 0;
    std::vector<std::pair<int, int>> support_;  // sorted lexicographically
    std::vector<double> rates_;
};

struct SolverConfig {
    double tol = 1e-6;        // projected-gradient infinity-norm stop
    int max_iters = 2000;
    double init_rate = 0.1;
    double rate_floor = 1e-9;  // lower bound keeping log-hazards finite
    double init_step = 1.0;
};

struct SolverReport {
    int iterations = 0;
    double final_nll = 0.0;
    double final_grad_norm = 0.0;
    std::vector<double> nll_trace;  // non-increasing
    bool converged = false;
    bool degenerate = false;  // no activated transitions; M forced to zero
};

// Negative log-likelihood of the cascade set under the exponential
// transmission model: per cascade, every activated non-root node j
// contributes sum_i M[i][j]*(t_j - t_i) - log(sum_i M[i][j]) over earlier
// activated i, and every never-activated l contributes the survival mass
// sum_j M[j][l]*(T - t_j) over activated j.
double cascade_nll(const CascadeSet& cs, const TransmissionMatrix& m);

// Closed-form gradient of cascade_nll, dense n x n, zero outside the
// co-occurrence support of the cascade set.
Matrix cascade_nll_grad(const CascadeSet& cs, const TransmissionMatrix& m);

// Maximum-likelihood rates via projected gradient descent with backtracking
// line search over the co-occurrence support.
std::pair<TransmissionMatrix, SolverReport> infer_structure(const CascadeSet& cs,
                                                            const SolverConfig& cfg = {});

// Ranks non-edge unordered pairs by symmetrized weight (M + M^T)/2 and
// returns the first min(xi, available) of them; ties break lexicographically.
std::vector<std::pair<int, int>> select_edges(const TransmissionMatrix& m, const Graph& g,
                                              int xi);

// add_edges(g, select_edges(m, g, xi)).
Graph augment_graph(const Graph& g, const TransmissionMatrix& m, int xi);

// Weight below which an inferred rate is treated as absent by edge selection.
inline constexpr double kSelectThreshold = 1e-6;

}  // namespace cascon
