#pragma once

#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "cascon/matrix.hpp"

namespace cascon {

class Tape;

// Handle to a recorded value. Cheap to copy; the backing matrix lives on the
// tape. Valid only while the owning tape is alive and not cleared.
struct Value {
    Tape* tape = nullptr;
    int id = -1;
    int rows = 0;
    int cols = 0;

    const Matrix& value() const;
    double scalar() const;
    bool requires_grad() const;
};

// Result of reverse accumulation: node-id -> gradient matrix. Leaves that
// require grad but do not participate in the root get zeros.
class Gradients {
public:
    explicit Gradients(std::unordered_map<int, Matrix> grads) : grads_(std::move(grads)) {}

    const Matrix& at(const Value& v) const;
    bool contains(const Value& v) const { return grads_.count(v.id) > 0; }

private:
    std::unordered_map<int, Matrix> grads_;
};

// Append-only record of primitive ops over dense 2-D double matrices with
// reverse-mode differentiation. One tape per training step; ops are recorded
// in topological order by construction. Every forward result is checked for
// NaN/Inf and an error is raised at the offending op.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Value leaf(Matrix m, bool requires_grad = false);
    Value constant(Matrix m) { return leaf(std::move(m), false); }
    Value scalar_constant(double v) { return leaf(Matrix(1, 1, std::vector<double>{v}), false); }

    // (n,k)x(k,m) matrix product.
    Value matmul(Value a, Value b);
    // Elementwise with broadcasting of a (1,1), (n,1) or (1,m) operand.
    Value add(Value a, Value b);
    Value mul(Value a, Value b);
    Value sub(Value a, Value b) { return add(a, scale(b, -1.0)); }
    Value scale(Value a, double c);
    Value relu(Value a);  // subgradient at 0 is 0
    Value exp(Value a);
    Value log(Value a);  // entries must be > 0
    Value sigmoid(Value a);
    Value softmax_rows(Value a);
    Value l2_normalize_rows(Value a);  // rows must have nonzero norm
    Value transpose(Value a);
    Value sum_all(Value a);    // 1x1
    Value mean_all(Value a);   // 1x1
    Value row_sum(Value a);    // n x 1
    Value col_mean(Value a);   // 1 x m
    Value gather_rows(Value a, std::vector<int> idx);
    Value concat_rows(const std::vector<Value>& parts);
    Value hcat(Value a, Value b);

    // Reverse accumulation from a 1x1 root.
    Gradients backward(Value root);

    std::size_t size() const { return nodes_.size(); }
    void clear() { nodes_.clear(); }

    const Matrix& value_of(int id) const { return nodes_[id].val; }
    bool node_requires_grad(int id) const { return nodes_[id].req_grad; }

private:
    enum class Op {
        kLeaf, kMatmul, kAdd, kMul, kScale, kRelu, kExp, kLog, kSigmoid,
        kSoftmaxRows, kL2NormRows, kTranspose, kSumAll, kMeanAll, kRowSum,
        kColMean, kGatherRows, kConcatRows, kHcat,
    };

    struct Node {
        Op op;
        std::vector<int> inputs;
        Matrix val;
        bool req_grad = false;
        std::vector<int> idx;  // gather indices
        double c = 0.0;        // scale factor
    };

    Value push(Op op, std::vector<int> inputs, Matrix val, bool req_grad,
               std::vector<int> idx = {}, double c = 0.0);
    void check_finite(const Matrix& m, const char* op) const;

    std::vector<Node> nodes_;
};

// Max over all leaf entries of |analytic - numeric| / max(1, |analytic|, |numeric|)
// where numeric comes from central finite differences with step h. `f` must
// be a deterministic scalar-valued function of the leaves.
double grad_check(const std::function<Value(Tape&, const std::vector<Value>&)>& f,
                  const std::vector<Matrix>& leaves, double h = 1e-5);

}  // namespace cascon
