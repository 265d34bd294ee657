#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cascon/matrix.hpp"

namespace cascon {

// Undirected simple graph with per-node attribute rows and an optional
// class label. Immutable after construction; safe to share across threads.
class Graph {
public:
    Graph(int n, std::vector<std::pair<int, int>> edges, Matrix attributes,
          std::optional<int> label = std::nullopt);

    int num_nodes() const { return n_; }
    int num_edges() const { return static_cast<int>(edges_.size()); }

    // Canonical edge list: (min,max) pairs, sorted, unique.
    const std::vector<std::pair<int, int>>& edges() const { return edges_; }

    // Neighbor lists sorted ascending.
    const std::vector<int>& neighbors(int v) const { return adj_[v]; }

    bool has_edge(int u, int v) const;

    const Matrix& attributes() const { return attributes_; }
    int attr_dim() const { return attributes_.cols(); }

    std::optional<int> label() const { return label_; }

private:
    int n_ = 0;
    std::vector<std::pair<int, int>> edges_;
    std::vector<std::vector<int>> adj_;
    Matrix attributes_;
    std::optional<int> label_;
};

struct Dataset {
    std::vector<Graph> graphs;
    int num_classes = 0;
    std::string name;
    // Present when the source had a node-label file; lets a save round-trip
    // regenerate it instead of emitting constant features.
    bool has_node_labels = false;
};

// Per-node BFS neighborhoods, each truncated to at most `beta` nodes.
class SubGraphTable {
public:
    SubGraphTable(std::vector<std::vector<int>> members, int beta);

    int beta() const { return beta_; }
    int num_nodes() const { return static_cast<int>(members_.size()); }

    // Nodes in BFS discovery order; the root is always first.
    const std::vector<int>& members(int v) const { return members_[v]; }

    // Size of the intersection of the two member sets.
    int overlap(int u, int v) const;

private:
    std::vector<std::vector<int>> members_;
    std::vector<std::vector<int>> sorted_members_;
    int beta_ = 0;
};

// Thrown by the TU loader with the offending file (and line when known).
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Loads `{name}_A.txt`, `{name}_graph_indicator.txt`, `{name}_graph_labels.txt`
// and, when present, `{name}_node_labels.txt` from `dir`. Node labels are
// one-hot encoded into attributes; without them every node gets the constant
// feature 1.0. Graph labels are remapped to contiguous [0, num_classes).
Dataset load_tu_dataset(const std::string& dir, const std::string& name);

// Writes `dataset` back in the same TU plain-text format (both directions of
// every undirected edge). Node labels are emitted as the argmax attribute
// column when the dataset carries them.
void save_tu_dataset(const Dataset& dataset, const std::string& dir);

// BFS neighborhood per root, frontiers expanded in ascending node-index
// order, truncated at `beta` nodes (the root counts).
SubGraphTable bfs_subgraphs(const Graph& g, int beta);

// Union of the edge set with `new_edges`; attributes and label unchanged.
Graph add_edges(const Graph& g, const std::vector<std::pair<int, int>>& new_edges);

}  // namespace cascon
