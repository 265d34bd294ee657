#include "cascon/tensor.hpp"

#include <cmath>
#include <stdexcept>

namespace cascon {

namespace {

[[noreturn]] void shape_error(const char* op, const Matrix& a, const Matrix& b) {
    throw std::invalid_argument(std::string("shape mismatch in ") + op + ": " +
                                a.shape_str() + " vs " + b.shape_str());
}

// Broadcast layout of an operand against the full shape.
enum class Bcast { kFull, kScalar, kCol, kRow };

Bcast bcast_kind(const Matrix& full, const Matrix& b, const char* op) {
    if (b.rows() == full.rows() && b.cols() == full.cols()) return Bcast::kFull;
    if (b.rows() == 1 && b.cols() == 1) return Bcast::kScalar;
    if (b.rows() == full.rows() && b.cols() == 1) return Bcast::kCol;
    if (b.rows() == 1 && b.cols() == full.cols()) return Bcast::kRow;
    shape_error(op, full, b);
}

double bcast_at(const Matrix& b, Bcast k, int i, int j) {
    switch (k) {
        case Bcast::kFull: return b(i, j);
        case Bcast::kScalar: return b(0, 0);
        case Bcast::kCol: return b(i, 0);
        case Bcast::kRow: return b(0, j);
    }
    return 0.0;  // unreachable
}

// Sums a full-shape gradient down to the shape of the broadcast operand.
Matrix unbroadcast(const Matrix& g, Bcast k) {
    switch (k) {
        case Bcast::kFull: return g;
        case Bcast::kScalar: {
            double s = 0.0;
            for (double v : g.raw()) s += v;
            return Matrix(1, 1, std::vector<double>{s});
        }
        case Bcast::kCol: {
            Matrix out(g.rows(), 1);
            for (int i = 0; i < g.rows(); ++i) {
                double s = 0.0;
                for (int j = 0; j < g.cols(); ++j) s += g(i, j);
                out(i, 0) = s;
            }
            return out;
        }
        case Bcast::kRow: {
            Matrix out(1, g.cols());
            for (int j = 0; j < g.cols(); ++j) {
                double s = 0.0;
                for (int i = 0; i < g.rows(); ++i) s += g(i, j);
                out(0, j) = s;
            }
            return out;
        }
    }
    return g;  // unreachable
}

Matrix matmul_values(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows(), b.cols(), 0.0);
    const int n = a.rows(), k = a.cols(), m = b.cols();
    for (int i = 0; i < n; ++i) {
        const double* arow = a.data() + static_cast<std::size_t>(i) * k;
        double* orow = out.data() + static_cast<std::size_t>(i) * m;
        for (int p = 0; p < k; ++p) {
            const double av = arow[p];
            if (av == 0.0) continue;
            const double* brow = b.data() + static_cast<std::size_t>(p) * m;
            for (int j = 0; j < m; ++j) orow[j] += av * brow[j];
        }
    }
    return out;
}

Matrix transpose_values(const Matrix& a) {
    Matrix out(a.cols(), a.rows());
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
    return out;
}

void add_into(Matrix& acc, const Matrix& g) {
    for (std::size_t i = 0; i < acc.raw().size(); ++i) acc.raw()[i] += g.raw()[i];
}

}  // namespace

const Matrix& Value::value() const { return tape->value_of(id); }

double Value::scalar() const {
    if (rows != 1 || cols != 1) {
        throw std::invalid_argument("Value::scalar: not a 1x1 value");
    }
    return value()(0, 0);
}

bool Value::requires_grad() const { return tape->node_requires_grad(id); }

const Matrix& Gradients::at(const Value& v) const {
    auto it = grads_.find(v.id);
    if (it == grads_.end()) {
        throw std::out_of_range("Gradients::at: node has no recorded gradient");
    }
    return it->second;
}

void Tape::check_finite(const Matrix& m, const char* op) const {
    for (double v : m.raw()) {
        if (!std::isfinite(v)) {
            throw std::domain_error(std::string("non-finite result in op ") + op);
        }
    }
}

Value Tape::push(Op op, std::vector<int> inputs, Matrix val, bool req_grad,
                 std::vector<int> idx, double c) {
    Node node;
    node.op = op;
    node.inputs = std::move(inputs);
    node.val = std::move(val);
    node.req_grad = req_grad;
    node.idx = std::move(idx);
    node.c = c;
    nodes_.push_back(std::move(node));
    const int id = static_cast<int>(nodes_.size()) - 1;
    return Value{this, id, nodes_[id].val.rows(), nodes_[id].val.cols()};
}

Value Tape::leaf(Matrix m, bool requires_grad) {
    check_finite(m, "leaf");
    return push(Op::kLeaf, {}, std::move(m), requires_grad);
}

Value Tape::matmul(Value a, Value b) {
    const Matrix& av = a.value();
    const Matrix& bv = b.value();
    if (av.cols() != bv.rows()) shape_error("matmul", av, bv);
    Matrix out = matmul_values(av, bv);
    check_finite(out, "matmul");
    return push(Op::kMatmul, {a.id, b.id}, std::move(out),
                a.requires_grad() || b.requires_grad());
}

Value Tape::add(Value a, Value b) {
    const Matrix* full = &a.value();
    const Matrix* other = &b.value();
    bool swapped = false;
    if (other->size() > full->size()) {
        std::swap(full, other);
        swapped = true;
    }
    Bcast k = bcast_kind(*full, *other, "add");
    Matrix out(full->rows(), full->cols());
    for (int i = 0; i < full->rows(); ++i)
        for (int j = 0; j < full->cols(); ++j)
            out(i, j) = (*full)(i, j) + bcast_at(*other, k, i, j);
    check_finite(out, "add");
    return push(Op::kAdd, swapped ? std::vector<int>{b.id, a.id} : std::vector<int>{a.id, b.id},
                std::move(out), a.requires_grad() || b.requires_grad());
}

Value Tape::mul(Value a, Value b) {
    const Matrix* full = &a.value();
    const Matrix* other = &b.value();
    bool swapped = false;
    if (other->size() > full->size()) {
        std::swap(full, other);
        swapped = true;
    }
    Bcast k = bcast_kind(*full, *other, "mul");
    Matrix out(full->rows(), full->cols());
    for (int i = 0; i < full->rows(); ++i)
        for (int j = 0; j < full->cols(); ++j)
            out(i, j) = (*full)(i, j) * bcast_at(*other, k, i, j);
    check_finite(out, "mul");
    return push(Op::kMul, swapped ? std::vector<int>{b.id, a.id} : std::vector<int>{a.id, b.id},
                std::move(out), a.requires_grad() || b.requires_grad());
}

Value Tape::scale(Value a, double c) {
    if (!std::isfinite(c)) throw std::invalid_argument("scale: non-finite factor");
    Matrix out = a.value();
    for (double& v : out.raw()) v *= c;
    check_finite(out, "scale");
    return push(Op::kScale, {a.id}, std::move(out), a.requires_grad(), {}, c);
}

Value Tape::relu(Value a) {
    Matrix out = a.value();
    for (double& v : out.raw()) v = v > 0.0 ? v : 0.0;
    return push(Op::kRelu, {a.id}, std::move(out), a.requires_grad());
}

Value Tape::exp(Value a) {
    Matrix out = a.value();
    for (double& v : out.raw()) v = std::exp(v);
    check_finite(out, "exp");
    return push(Op::kExp, {a.id}, std::move(out), a.requires_grad());
}

Value Tape::log(Value a) {
    Matrix out = a.value();
    for (double& v : out.raw()) {
        if (v <= 0.0) throw std::domain_error("log: non-positive entry");
        v = std::log(v);
    }
    check_finite(out, "log");
    return push(Op::kLog, {a.id}, std::move(out), a.requires_grad());
}

Value Tape::sigmoid(Value a) {
    Matrix out = a.value();
    for (double& v : out.raw()) v = 1.0 / (1.0 + std::exp(-v));
    check_finite(out, "sigmoid");
    return push(Op::kSigmoid, {a.id}, std::move(out), a.requires_grad());
}

Value Tape::softmax_rows(Value a) {
    Matrix out = a.value();
    for (int i = 0; i < out.rows(); ++i) {
        double mx = out(i, 0);
        for (int j = 1; j < out.cols(); ++j) mx = std::max(mx, out(i, j));
        double sum = 0.0;
        for (int j = 0; j < out.cols(); ++j) {
            out(i, j) = std::exp(out(i, j) - mx);
            sum += out(i, j);
        }
        for (int j = 0; j < out.cols(); ++j) out(i, j) /= sum;
    }
    check_finite(out, "softmax_rows");
    return push(Op::kSoftmaxRows, {a.id}, std::move(out), a.requires_grad());
}

Value Tape::l2_normalize_rows(Value a) {
    Matrix out = a.value();
    for (int i = 0; i < out.rows(); ++i) {
        double sq = 0.0;
        for (int j = 0; j < out.cols(); ++j) sq += out(i, j) * out(i, j);
        if (sq == 0.0) throw std::domain_error("l2_normalize_rows: zero row norm");
        const double inv = 1.0 / std::sqrt(sq);
        for (int j = 0; j < out.cols(); ++j) out(i, j) *= inv;
    }
    check_finite(out, "l2_normalize_rows");
    return push(Op::kL2NormRows, {a.id}, std::move(out), a.requires_grad());
}

Value Tape::transpose(Value a) {
    return push(Op::kTranspose, {a.id}, transpose_values(a.value()), a.requires_grad());
}

Value Tape::sum_all(Value a) {
    double s = 0.0;
    for (double v : a.value().raw()) s += v;
    Matrix out(1, 1, std::vector<double>{s});
    check_finite(out, "sum_all");
    return push(Op::kSumAll, {a.id}, std::move(out), a.requires_grad());
}

Value Tape::mean_all(Value a) {
    if (a.value().size() == 0) throw std::invalid_argument("mean_all: empty matrix");
    double s = 0.0;
    for (double v : a.value().raw()) s += v;
    Matrix out(1, 1, std::vector<double>{s / static_cast<double>(a.value().size())});
    check_finite(out, "mean_all");
    return push(Op::kMeanAll, {a.id}, std::move(out), a.requires_grad());
}

Value Tape::row_sum(Value a) {
    const Matrix& av = a.value();
    Matrix out(av.rows(), 1);
    for (int i = 0; i < av.rows(); ++i) {
        double s = 0.0;
        for (int j = 0; j < av.cols(); ++j) s += av(i, j);
        out(i, 0) = s;
    }
    check_finite(out, "row_sum");
    return push(Op::kRowSum, {a.id}, std::move(out), a.requires_grad());
}

Value Tape::col_mean(Value a) {
    const Matrix& av = a.value();
    if (av.rows() == 0) throw std::invalid_argument("col_mean: empty matrix");
    Matrix out(1, av.cols());
    for (int j = 0; j < av.cols(); ++j) {
        double s = 0.0;
        for (int i = 0; i < av.rows(); ++i) s += av(i, j);
        out(0, j) = s / av.rows();
    }
    check_finite(out, "col_mean");
    return push(Op::kColMean, {a.id}, std::move(out), a.requires_grad());
}

Value Tape::gather_rows(Value a, std::vector<int> idx) {
    const Matrix& av = a.value();
    for (int i : idx) {
        if (i < 0 || i >= av.rows()) {
            throw std::invalid_argument("gather_rows: index out of range");
        }
    }
    Matrix out(static_cast<int>(idx.size()), av.cols());
    for (std::size_t r = 0; r < idx.size(); ++r)
        for (int j = 0; j < av.cols(); ++j) out(static_cast<int>(r), j) = av(idx[r], j);
    return push(Op::kGatherRows, {a.id}, std::move(out), a.requires_grad(), std::move(idx));
}

Value Tape::concat_rows(const std::vector<Value>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_rows: no parts");
    const int cols = parts[0].cols;
    int rows = 0;
    bool rg = false;
    std::vector<int> inputs;
    for (const Value& p : parts) {
        if (p.cols != cols) shape_error("concat_rows", parts[0].value(), p.value());
        rows += p.rows;
        rg = rg || p.requires_grad();
        inputs.push_back(p.id);
    }
    Matrix out(rows, cols);
    int r = 0;
    for (const Value& p : parts) {
        const Matrix& pv = p.value();
        for (int i = 0; i < pv.rows(); ++i, ++r)
            for (int j = 0; j < cols; ++j) out(r, j) = pv(i, j);
    }
    return push(Op::kConcatRows, std::move(inputs), std::move(out), rg);
}

Value Tape::hcat(Value a, Value b) {
    const Matrix& av = a.value();
    const Matrix& bv = b.value();
    if (av.rows() != bv.rows()) shape_error("hcat", av, bv);
    Matrix out(av.rows(), av.cols() + bv.cols());
    for (int i = 0; i < av.rows(); ++i) {
        for (int j = 0; j < av.cols(); ++j) out(i, j) = av(i, j);
        for (int j = 0; j < bv.cols(); ++j) out(i, av.cols() + j) = bv(i, j);
    }
    return push(Op::kHcat, {a.id, b.id}, std::move(out),
                a.requires_grad() || b.requires_grad());
}

Gradients Tape::backward(Value root) {
    if (root.rows != 1 || root.cols != 1) {
        throw std::invalid_argument("backward: root must be a 1x1 scalar");
    }
    std::vector<Matrix> grad(nodes_.size());
    std::vector<char> has_grad(nodes_.size(), 0);

    auto accumulate = [&](int id, Matrix g) {
        if (!nodes_[id].req_grad) return;
        if (!has_grad[id]) {
            grad[id] = std::move(g);
            has_grad[id] = 1;
        } else {
            add_into(grad[id], g);
        }
    };

    accumulate(root.id, Matrix(1, 1, std::vector<double>{1.0}));

    for (int id = root.id; id >= 0; --id) {
        if (!has_grad[id] || !nodes_[id].req_grad) continue;
        const Node& node = nodes_[id];
        const Matrix& g = grad[id];
        switch (node.op) {
            case Op::kLeaf:
                break;
            case Op::kMatmul: {
                const Matrix& av = nodes_[node.inputs[0]].val;
                const Matrix& bv = nodes_[node.inputs[1]].val;
                if (nodes_[node.inputs[0]].req_grad)
                    accumulate(node.inputs[0], matmul_values(g, transpose_values(bv)));
                if (nodes_[node.inputs[1]].req_grad)
                    accumulate(node.inputs[1], matmul_values(transpose_values(av), g));
                break;
            }
            case Op::kAdd: {
                const Matrix& full = nodes_[node.inputs[0]].val;
                const Matrix& other = nodes_[node.inputs[1]].val;
                Bcast k = bcast_kind(full, other, "add");
                if (nodes_[node.inputs[0]].req_grad) accumulate(node.inputs[0], g);
                if (nodes_[node.inputs[1]].req_grad) accumulate(node.inputs[1], unbroadcast(g, k));
                break;
            }
            case Op::kMul: {
                const Matrix& full = nodes_[node.inputs[0]].val;
                const Matrix& other = nodes_[node.inputs[1]].val;
                Bcast k = bcast_kind(full, other, "mul");
                if (nodes_[node.inputs[0]].req_grad) {
                    Matrix ga(full.rows(), full.cols());
                    for (int i = 0; i < full.rows(); ++i)
                        for (int j = 0; j < full.cols(); ++j)
                            ga(i, j) = g(i, j) * bcast_at(other, k, i, j);
                    accumulate(node.inputs[0], std::move(ga));
                }
                if (nodes_[node.inputs[1]].req_grad) {
                    Matrix gb(full.rows(), full.cols());
                    for (int i = 0; i < full.rows(); ++i)
                        for (int j = 0; j < full.cols(); ++j)
                            gb(i, j) = g(i, j) * full(i, j);
                    accumulate(node.inputs[1], unbroadcast(gb, k));
                }
                break;
            }
            case Op::kScale: {
                Matrix ga = g;
                for (double& v : ga.raw()) v *= node.c;
                accumulate(node.inputs[0], std::move(ga));
                break;
            }
            case Op::kRelu: {
                const Matrix& x = nodes_[node.inputs[0]].val;
                Matrix ga = g;
                for (std::size_t i = 0; i < ga.raw().size(); ++i)
                    if (x.raw()[i] <= 0.0) ga.raw()[i] = 0.0;
                accumulate(node.inputs[0], std::move(ga));
                break;
            }
            case Op::kExp: {
                Matrix ga = g;
                for (std::size_t i = 0; i < ga.raw().size(); ++i) ga.raw()[i] *= node.val.raw()[i];
                accumulate(node.inputs[0], std::move(ga));
                break;
            }
            case Op::kLog: {
                const Matrix& x = nodes_[node.inputs[0]].val;
                Matrix ga = g;
                for (std::size_t i = 0; i < ga.raw().size(); ++i) ga.raw()[i] /= x.raw()[i];
                accumulate(node.inputs[0], std::move(ga));
                break;
            }
            case Op::kSigmoid: {
                Matrix ga = g;
                for (std::size_t i = 0; i < ga.raw().size(); ++i) {
                    const double y = node.val.raw()[i];
                    ga.raw()[i] *= y * (1.0 - y);
                }
                accumulate(node.inputs[0], std::move(ga));
                break;
            }
            case Op::kSoftmaxRows: {
                const Matrix& y = node.val;
                Matrix ga(y.rows(), y.cols());
                for (int i = 0; i < y.rows(); ++i) {
                    double dot = 0.0;
                    for (int j = 0; j < y.cols(); ++j) dot += g(i, j) * y(i, j);
                    for (int j = 0; j < y.cols(); ++j) ga(i, j) = y(i, j) * (g(i, j) - dot);
                }
                accumulate(node.inputs[0], std::move(ga));
                break;
            }
            case Op::kL2NormRows: {
                const Matrix& x = nodes_[node.inputs[0]].val;
                const Matrix& y = node.val;
                Matrix ga(x.rows(), x.cols());
                for (int i = 0; i < x.rows(); ++i) {
                    double norm = 0.0;
                    for (int j = 0; j < x.cols(); ++j) norm += x(i, j) * x(i, j);
                    norm = std::sqrt(norm);
                    double dot = 0.0;
                    for (int j = 0; j < x.cols(); ++j) dot += g(i, j) * y(i, j);
                    for (int j = 0; j < x.cols(); ++j)
                        ga(i, j) = (g(i, j) - y(i, j) * dot) / norm;
                }
                accumulate(node.inputs[0], std::move(ga));
                break;
            }
            case Op::kTranspose:
                accumulate(node.inputs[0], transpose_values(g));
                break;
            case Op::kSumAll: {
                const Matrix& x = nodes_[node.inputs[0]].val;
                accumulate(node.inputs[0], Matrix(x.rows(), x.cols(), g(0, 0)));
                break;
            }
            case Op::kMeanAll: {
                const Matrix& x = nodes_[node.inputs[0]].val;
                accumulate(node.inputs[0],
                           Matrix(x.rows(), x.cols(), g(0, 0) / static_cast<double>(x.size())));
                break;
            }
            case Op::kRowSum: {
                const Matrix& x = nodes_[node.inputs[0]].val;
                Matrix ga(x.rows(), x.cols());
                for (int i = 0; i < x.rows(); ++i)
                    for (int j = 0; j < x.cols(); ++j) ga(i, j) = g(i, 0);
                accumulate(node.inputs[0], std::move(ga));
                break;
            }
            case Op::kColMean: {
                const Matrix& x = nodes_[node.inputs[0]].val;
                Matrix ga(x.rows(), x.cols());
                for (int i = 0; i < x.rows(); ++i)
                    for (int j = 0; j < x.cols(); ++j) ga(i, j) = g(0, j) / x.rows();
                accumulate(node.inputs[0], std::move(ga));
                break;
            }
            case Op::kGatherRows: {
                const Matrix& x = nodes_[node.inputs[0]].val;
                Matrix ga(x.rows(), x.cols(), 0.0);
                for (std::size_t r = 0; r < node.idx.size(); ++r)
                    for (int j = 0; j < x.cols(); ++j)
                        ga(node.idx[r], j) += g(static_cast<int>(r), j);
                accumulate(node.inputs[0], std::move(ga));
                break;
            }
            case Op::kConcatRows: {
                int r = 0;
                for (int input : node.inputs) {
                    const Matrix& x = nodes_[input].val;
                    if (nodes_[input].req_grad) {
                        Matrix ga(x.rows(), x.cols());
                        for (int i = 0; i < x.rows(); ++i)
                            for (int j = 0; j < x.cols(); ++j) ga(i, j) = g(r + i, j);
                        accumulate(input, std::move(ga));
                    }
                    r += x.rows();
                }
                break;
            }
            case Op::kHcat: {
                const Matrix& av = nodes_[node.inputs[0]].val;
                const Matrix& bv = nodes_[node.inputs[1]].val;
                if (nodes_[node.inputs[0]].req_grad) {
                    Matrix ga(av.rows(), av.cols());
                    for (int i = 0; i < av.rows(); ++i)
                        for (int j = 0; j < av.cols(); ++j) ga(i, j) = g(i, j);
                    accumulate(node.inputs[0], std::move(ga));
                }
                if (nodes_[node.inputs[1]].req_grad) {
                    Matrix gb(bv.rows(), bv.cols());
                    for (int i = 0; i < bv.rows(); ++i)
                        for (int j = 0; j < bv.cols(); ++j) gb(i, j) = g(i, av.cols() + j);
                    accumulate(node.inputs[1], std::move(gb));
                }
                break;
            }
        }
    }

    // Requires-grad leaves that never participated get explicit zeros.
    std::unordered_map<int, Matrix> result;
    for (std::size_t id = 0; id < nodes_.size(); ++id) {
        if (has_grad[id]) {
            result.emplace(static_cast<int>(id), std::move(grad[id]));
        } else if (nodes_[id].op == Op::kLeaf && nodes_[id].req_grad) {
            result.emplace(static_cast<int>(id),
                           Matrix(nodes_[id].val.rows(), nodes_[id].val.cols(), 0.0));
        }
    }
    return Gradients(std::move(result));
}

double grad_check(const std::function<Value(Tape&, const std::vector<Value>&)>& f,
                  const std::vector<Matrix>& leaves, double h) {
    if (h <= 0.0) throw std::invalid_argument("grad_check: h must be positive");

    auto eval = [&](const std::vector<Matrix>& inputs) {
        Tape tape;
        std::vector<Value> vals;
        vals.reserve(inputs.size());
        for (const Matrix& m : inputs) vals.push_back(tape.leaf(m, false));
        return f(tape, vals).scalar();
    };

    // Analytic pass.
    Tape tape;
    std::vector<Value> vals;
    vals.reserve(leaves.size());
    for (const Matrix& m : leaves) vals.push_back(tape.leaf(m, true));
    Value root = f(tape, vals);
    Gradients grads = tape.backward(root);

    double max_err = 0.0;
    std::vector<Matrix> work = leaves;
    for (std::size_t li = 0; li < leaves.size(); ++li) {
        const Matrix& analytic = grads.at(vals[li]);
        for (int i = 0; i < work[li].rows(); ++i) {
            for (int j = 0; j < work[li].cols(); ++j) {
                const double orig = work[li](i, j);
                work[li](i, j) = orig + h;
                const double fp = eval(work);
                work[li](i, j) = orig - h;
                const double fm = eval(work);
                work[li](i, j) = orig;
                const double numeric = (fp - fm) / (2.0 * h);
                const double a = analytic(i, j);
                const double err = std::abs(a - numeric) /
                                   std::max({1.0, std::abs(a), std::abs(numeric)});
                max_err = std::max(max_err, err);
            }
        }
    }
    return max_err;
}

}  // namespace cascon
