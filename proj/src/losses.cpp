#include "cascon/losses.hpp"

#include <cmath>
#include <iostream>
#include <stdexcept>

namespace cascon {

ContrastBatch ContrastBatch::make(Value normalized_embeddings, std::vector<int> labels,
                                  std::vector<int> pairing) {
    const int n = normalized_embeddings.rows;
    if (static_cast<int>(labels.size()) != n || static_cast<int>(pairing.size()) != n) {
        throw std::invalid_argument("ContrastBatch: labels/pairing size mismatch");
    }
    const Matrix& r = normalized_embeddings.value();
    for (int i = 0; i < n; ++i) {
        double sq = 0.0;
        for (int j = 0; j < r.cols(); ++j) sq += r(i, j) * r(i, j);
        if (std::abs(std::sqrt(sq) - 1.0) > 1e-9) {
            throw std::invalid_argument("ContrastBatch: row " + std::to_string(i) +
                                        " is not L2-normalized");
        }
        const int j = pairing[i];
        if (j < 0 || j >= n || j == i || pairing[j] != i) {
            throw std::invalid_argument("ContrastBatch: pairing is not an involution");
        }
        if (labels[i] != labels[j]) {
            throw std::invalid_argument("ContrastBatch: paired views carry different labels");
        }
    }
    return ContrastBatch{normalized_embeddings, std::move(labels), std::move(pairing)};
}

Value cross_entropy(Tape& tape, Value probs, const std::vector<int>& labels) {
    const int batch = probs.rows;
    const int classes = probs.cols;
    if (static_cast<int>(labels.size()) != batch) {
        throw std::invalid_argument("cross_entropy: label count mismatch");
    }
    const Matrix& p = probs.value();
    Matrix mask(batch, classes, 0.0);
    bool clamped = false;
    for (int i = 0; i < batch; ++i) {
        if (labels[i] < 0 || labels[i] >= classes) {
            throw std::invalid_argument("cross_entropy: label out of range");
        }
        double row = 0.0;
        for (int j = 0; j < classes; ++j) row += p(i, j);
        if (std::abs(row - 1.0) > 1e-6) {
            throw std::invalid_argument("cross_entropy: row " + std::to_string(i) +
                                        " does not sum to 1");
        }
        mask(i, labels[i]) = 1.0;
        if (p(i, labels[i]) < 1e-12) clamped = true;
    }
    if (clamped) {
        std::cerr << "warning: cross_entropy clamped zero probability at the true class\n";
    }
    Value picked = tape.row_sum(tape.mul(probs, tape.constant(std::move(mask))));
    // max(p, 1e-12) written as relu(p - c) + c.
    Value floor = tape.scalar_constant(1e-12);
    Value safe = tape.add(tape.relu(tape.sub(picked, floor)), floor);
    return tape.scale(tape.mean_all(tape.log(safe)), -1.0);
}

namespace {

// exp(R R^T / tau) and the off-diagonal mask shared by both losses.
struct SimilarityParts {
    Value expsim;        // 2B x 2B
    Value log_denom;     // 2B x 1: log sum over k != i
};

SimilarityParts similarity_parts(Tape& tape, const ContrastBatch& batch, double tau) {
    if (tau <= 0.0) throw std::invalid_argument("contrastive loss: tau must be positive");
    const int n = batch.embeddings.rows;
    if (n < 2) throw std::invalid_argument("contrastive loss: need at least 2 samples");
    Value logits = tape.scale(tape.matmul(batch.embeddings, tape.transpose(batch.embeddings)),
                              1.0 / tau);
    Value expsim = tape.exp(logits);
    Matrix offdiag(n, n, 1.0);
    for (int i = 0; i < n; ++i) offdiag(i, i) = 0.0;
    Value denom = tape.row_sum(tape.mul(expsim, tape.constant(std::move(offdiag))));
    return SimilarityParts{expsim, tape.log(denom)};
}

}  // namespace

Value self_con_loss(Tape& tape, const ContrastBatch& batch, double tau) {
    SimilarityParts parts = similarity_parts(tape, batch, tau);
    const int n = batch.embeddings.rows;
    Matrix pair_mask(n, n, 0.0);
    for (int i = 0; i < n; ++i) pair_mask(i, batch.pairing[i]) = 1.0;
    Value numer = tape.row_sum(tape.mul(parts.expsim, tape.constant(std::move(pair_mask))));
    return tape.scale(tape.sum_all(tape.sub(tape.log(numer), parts.log_denom)), -1.0);
}

Value sup_gcon_loss(Tape& tape, const ContrastBatch& batch, double tau) {
    SimilarityParts parts = similarity_parts(tape, batch, tau);
    const int n = batch.embeddings.rows;
    Matrix positive_mask(n, n, 0.0);
    Matrix weight(n, 1, 0.0);
    for (int i = 0; i < n; ++i) {
        int count = 0;
        for (int p = 0; p < n; ++p) {
            if (p != i && batch.labels[p] == batch.labels[i]) {
                positive_mask(i, p) = 1.0;
                ++count;
            }
        }
        if (count == 0) {
            throw std::invalid_argument("sup_gcon_loss: anchor " + std::to_string(i) +
                                        " has no positives");
        }
        weight(i, 0) = -1.0 / count;
    }
    Value log_ratio = tape.sub(tape.log(parts.expsim), parts.log_denom);  // col broadcast
    Value per_anchor = tape.row_sum(tape.mul(log_ratio, tape.constant(std::move(positive_mask))));
    return tape.sum_all(tape.mul(per_anchor, tape.constant(std::move(weight))));
}

Value total_loss(Tape& tape, Value gc, Value sc, double lambda) {
    if (lambda < 0.0) throw std::invalid_argument("total_loss: lambda must be >= 0");
    if (gc.rows != 1 || gc.cols != 1 || sc.rows != 1 || sc.cols != 1) {
        throw std::invalid_argument("total_loss: losses must be scalars");
    }
    return tape.add(gc, tape.scale(sc, lambda));
}

}  // namespace cascon
