#pragma once

#include <vector>

#include "cascon/tensor.hpp"

namespace cascon {

// 2B graph views for contrastive training: L2-normalized embedding rows,
// class labels, and the involutive pairing linking the two views of each
// graph. Anchors contrast against every other row; positives are either the
// paired view (self-supervised) or all same-label rows (supervised).
struct ContrastBatch {
    Value embeddings;          // 2B x d, unit rows
    std::vector<int> labels;   // length 2B
    std::vector<int> pairing;  // j(i); j(j(i)) = i, labels agree across a pair

    static ContrastBatch make(Value normalized_embeddings, std::vector<int> labels,
                              std::vector<int> pairing);
};

// Mean over the batch of -log P[i][label_i]. Probabilities below 1e-12 are
// clamped (with a warning) instead of producing infinities.
Value cross_entropy(Tape& tape, Value probs, const std::vector<int>& labels);

// -sum_i log( exp(r_i . r_j(i) / tau) / sum_{k != i} exp(r_i . r_k / tau) ).
Value self_con_loss(Tape& tape, const ContrastBatch& batch, double tau);

// Supervised variant: positives of anchor i are all other same-label rows,
// each term weighted by 1/|positives(i)|.
Value sup_gcon_loss(Tape& tape, const ContrastBatch& batch, double tau);

// gc + lambda * sc.
Value total_loss(Tape& tape, Value gc, Value sc, double lambda);

}  // namespace cascon
