#include "cascon/graph.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

namespace cascon {

namespace {

std::pair<int, int> canonical(int u, int v) {
    return u < v ? std::make_pair(u, v) : std::make_pair(v, u);
}

}  // namespace

Graph::Graph(int n, std::vector<std::pair<int, int>> edges, Matrix attributes,
             std::optional<int> label)
    : n_(n), attributes_(std::move(attributes)), label_(label) {
    if (n < 0) throw std::invalid_argument("Graph: negative node count");
    if (attributes_.rows() != n) {
        throw std::invalid_argument("Graph: attribute matrix has " +
                                    std::to_string(attributes_.rows()) + " rows for " +
                                    std::to_string(n) + " nodes");
    }
    std::set<std::pair<int, int>> uniq;
    for (auto [u, v] : edges) {
        if (u < 0 || u >= n || v < 0 || v >= n) {
            throw std::invalid_argument("Graph: edge endpoint out of range [0, " +
                                        std::to_string(n) + ")");
        }
        if (u == v) throw std::invalid_argument("Graph: self-loop at node " + std::to_string(u));
        uniq.insert(canonical(u, v));
    }
    edges_.assign(uniq.begin(), uniq.end());
    adj_.assign(n, {});
    for (auto [u, v] : edges_) {
        adj_[u].push_back(v);
        adj_[v].push_back(u);
    }
    for (auto& nb : adj_) std::sort(nb.begin(), nb.end());
}

bool Graph::has_edge(int u, int v) const {
    if (u == v) return false;
    const auto& nb = adj_[u];
    return std::binary_search(nb.begin(), nb.end(), v);
}

SubGraphTable::SubGraphTable(std::vector<std::vector<int>> members, int beta)
    : members_(std::move(members)), beta_(beta) {
    sorted_members_ = members_;
    for (auto& s : sorted_members_) std::sort(s.begin(), s.end());
}

int SubGraphTable::overlap(int u, int v) const {
    const auto& a = sorted_members_[u];
    const auto& b = sorted_members_[v];
    int count = 0;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] < b[j]) ++i;
        else if (a[i] > b[j]) ++j;
        else { ++count; ++i; ++j; }
    }
    return count;
}

SubGraphTable bfs_subgraphs(const Graph& g, int beta) {
    if (beta < 1) throw std::invalid_argument("bfs_subgraphs: beta must be >= 1");
    const int n = g.num_nodes();
    std::vector<std::vector<int>> table(n);
    std::vector<char> visited(n);
    for (int root = 0; root < n; ++root) {
        std::fill(visited.begin(), visited.end(), 0);
        std::vector<int>& out = table[root];
        out.clear();
        out.push_back(root);
        visited[root] = 1;
        std::vector<int> frontier{root};
        while (!frontier.empty() && static_cast<int>(out.size()) < beta) {
            std::vector<int> next;
            for (int u : frontier) {
                for (int w : g.neighbors(u)) {
                    if (!visited[w]) {
                        visited[w] = 1;
                        next.push_back(w);
                    }
                }
            }
            // Frontier members join in ascending node-index order.
            std::sort(next.begin(), next.end());
            for (int w : next) {
                if (static_cast<int>(out.size()) >= beta) break;
                out.push_back(w);
            }
            frontier = std::move(next);
        }
    }
    return SubGraphTable(std::move(table), beta);
}

Graph add_edges(const Graph& g, const std::vector<std::pair<int, int>>& new_edges) {
    const int n = g.num_nodes();
    for (auto [u, v] : new_edges) {
        if (u < 0 || u >= n || v < 0 || v >= n) {
            throw std::invalid_argument("add_edges: endpoint out of range");
        }
        if (u == v) throw std::invalid_argument("add_edges: self-loop rejected");
    }
    std::vector<std::pair<int, int>> all = g.edges();
    all.insert(all.end(), new_edges.begin(), new_edges.end());
    return Graph(n, std::move(all), g.attributes(), g.label());
}

namespace {

// Splits a line into integer tokens separated by commas and/or whitespace.
std::vector<long long> parse_int_line(const std::string& line, const std::string& file,
                                      std::size_t lineno) {
    std::vector<long long> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ',' || std::isspace(static_cast<unsigned char>(line[i])))) ++i;
        if (i >= line.size()) break;
        std::size_t start = i;
        if (line[i] == '+' || line[i] == '-') ++i;
        std::size_t digits = 0;
        while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) { ++i; ++digits; }
        if (digits == 0 || (i < line.size() && line[i] != ',' && !std::isspace(static_cast<unsigned char>(line[i])))) {
            throw ParseError("parse error in " + file + " line " + std::to_string(lineno) +
                             ": non-integer token");
        }
        out.push_back(std::stoll(line.substr(start, i - start)));
    }
    return out;
}

std::vector<long long> read_int_file(const std::string& path, int values_per_line) {
    std::ifstream in(path);
    if (!in) throw ParseError("missing mandatory file: " + path);
    std::vector<long long> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r\n,") == std::string::npos) continue;
        auto vals = parse_int_line(line, path, lineno);
        if (static_cast<int>(vals.size()) != values_per_line) {
            throw ParseError("parse error in " + path + " line " + std::to_string(lineno) +
                             ": expected " + std::to_string(values_per_line) + " integers");
        }
        out.insert(out.end(), vals.begin(), vals.end());
    }
    return out;
}

}  // namespace

Dataset load_tu_dataset(const std::string& dir, const std::string& name) {
    namespace fs = std::filesystem;
    const std::string base = (fs::path(dir) / name).string() + "_";
    const std::string a_file = base + "A.txt";
    const std::string ind_file = base + "graph_indicator.txt";
    const std::string glab_file = base + "graph_labels.txt";
    const std::string nlab_file = base + "node_labels.txt";

    std::vector<long long> indicator = read_int_file(ind_file, 1);
    const int total_nodes = static_cast<int>(indicator.size());
    if (total_nodes == 0) throw ParseError("parse error in " + ind_file + ": no nodes");

    std::vector<long long> glabels_raw = read_int_file(glab_file, 1);
    const int num_graphs = static_cast<int>(glabels_raw.size());

    // Node id -> (graph index, local index); TU nodes are 1-based and
    // consecutive per graph.
    std::vector<int> node_graph(total_nodes), node_local(total_nodes);
    std::vector<int> graph_size(num_graphs, 0);
    for (int i = 0; i < total_nodes; ++i) {
        long long gid = indicator[i];
        if (gid < 1 || gid > num_graphs) {
            throw ParseError("parse error in " + ind_file + " line " + std::to_string(i + 1) +
                             ": graph id out of range");
        }
        node_graph[i] = static_cast<int>(gid) - 1;
        node_local[i] = graph_size[node_graph[i]]++;
    }

    // Optional node labels, one-hot encoded over the distinct values.
    bool has_node_labels = fs::exists(nlab_file);
    std::vector<long long> nlabels;
    std::map<long long, int> label_col;
    if (has_node_labels) {
        nlabels = read_int_file(nlab_file, 1);
        if (static_cast<int>(nlabels.size()) != total_nodes) {
            throw ParseError("parse error in " + nlab_file + ": " + std::to_string(nlabels.size()) +
                             " labels for " + std::to_string(total_nodes) + " nodes");
        }
        for (long long v : nlabels) label_col.emplace(v, 0);
        int col = 0;
        for (auto& [v, c] : label_col) c = col++;
    }
    const int d = has_node_labels ? static_cast<int>(label_col.size()) : 1;

    // Edges.
    std::vector<std::vector<std::pair<int, int>>> edges(num_graphs);
    {
        std::ifstream in(a_file);
        if (!in) throw ParseError("missing mandatory file: " + a_file);
        std::string line;
        std::size_t lineno = 0;
        int dropped_loops = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.find_first_not_of(" \t\r\n,") == std::string::npos) continue;
            auto vals = parse_int_line(line, a_file, lineno);
            if (vals.size() != 2) {
                throw ParseError("parse error in " + a_file + " line " + std::to_string(lineno) +
                                 ": expected 2 integers");
            }
            long long u = vals[0], v = vals[1];
            if (u < 1 || u > total_nodes || v < 1 || v > total_nodes) {
                throw ParseError("parse error in " + a_file + " line " + std::to_string(lineno) +
                                 ": node index out of range");
            }
            int ui = static_cast<int>(u) - 1, vi = static_cast<int>(v) - 1;
            if (node_graph[ui] != node_graph[vi]) {
                throw ParseError("parse error in " + a_file + " line " + std::to_string(lineno) +
                                 ": edge endpoints belong to different graphs");
            }
            if (ui == vi) {
                ++dropped_loops;
                continue;
            }
            edges[node_graph[ui]].push_back(canonical(node_local[ui], node_local[vi]));
        }
        if (dropped_loops > 0) {
            std::cerr << "warning: dropped " << dropped_loops << " self-loop line(s) in "
                      << a_file << "\n";
        }
    }

    // Graph labels remapped to contiguous [0, num_classes).
    std::map<long long, int> class_of;
    for (long long v : glabels_raw) class_of.emplace(v, 0);
    int cls = 0;
    for (auto& [v, c] : class_of) c = cls++;

    Dataset ds;
    ds.name = name;
    ds.num_classes = static_cast<int>(class_of.size());
    ds.has_node_labels = has_node_labels;
    ds.graphs.reserve(num_graphs);

    std::vector<int> first_node(num_graphs, -1);
    for (int i = 0; i < total_nodes; ++i) {
        if (first_node[node_graph[i]] < 0) first_node[node_graph[i]] = i;
    }
    for (int gi = 0; gi < num_graphs; ++gi) {
        const int n = graph_size[gi];
        if (n == 0) throw ParseError("parse error in " + ind_file + ": graph " +
                                     std::to_string(gi + 1) + " has no nodes");
        Matrix attrs(n, d, has_node_labels ? 0.0 : 1.0);
        if (has_node_labels) {
            for (int i = 0; i < total_nodes; ++i) {
                if (node_graph[i] == gi) attrs(node_local[i], label_col[nlabels[i]]) = 1.0;
            }
        }
        ds.graphs.emplace_back(n, std::move(edges[gi]), std::move(attrs),
                               class_of[glabels_raw[gi]]);
    }
    return ds;
}

void save_tu_dataset(const Dataset& dataset, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const std::string base = (fs::path(dir) / dataset.name).string() + "_";

    std::ofstream a_out(base + "A.txt");
    std::ofstream ind_out(base + "graph_indicator.txt");
    std::ofstream glab_out(base + "graph_labels.txt");
    std::ofstream nlab_out;
    if (dataset.has_node_labels) nlab_out.open(base + "node_labels.txt");

    int offset = 0;
    for (std::size_t gi = 0; gi < dataset.graphs.size(); ++gi) {
        const Graph& g = dataset.graphs[gi];
        for (auto [u, v] : g.edges()) {
            a_out << (offset + u + 1) << ", " << (offset + v + 1) << "\n";
            a_out << (offset + v + 1) << ", " << (offset + u + 1) << "\n";
        }
        for (int v = 0; v < g.num_nodes(); ++v) {
            ind_out << (gi + 1) << "\n";
            if (dataset.has_node_labels) {
                int best = 0;
                for (int c = 1; c < g.attr_dim(); ++c) {
                    if (g.attributes()(v, c) > g.attributes()(v, best)) best = c;
                }
                nlab_out << best << "\n";
            }
        }
        glab_out << g.label().value_or(0) << "\n";
        offset += g.num_nodes();
    }
}

}  // namespace cascon
