#include "cascon/cascade.hpp"

#include <algorithm>
#include <cstdio>
#include <queue>
#include <sstream>
#include <stdexcept>

namespace cascon {

int Cascade::num_activated() const {
    int count = 0;
    for (double t : times) {
        if (t != kNeverActivated) ++count;
    }
    return count;
}

Cascade simulate_cascade(const Graph& g, double T, Rng& rng) {
    const int n = g.num_nodes();
    if (n < 1) throw std::invalid_argument("simulate_cascade: empty graph");
    if (T < 0.0) throw std::invalid_argument("simulate_cascade: negative window");

    const int root = rng.uniform_int(n);

    // One delay per undirected edge, drawn in canonical edge order so the
    // realization depends only on the generator state.
    std::vector<double> delay(g.edges().size());
    for (std::size_t e = 0; e < delay.size(); ++e) delay[e] = rng.exponential(1.0);

    // Map (u,v) -> edge slot for Dijkstra over the delay weights.
    std::vector<std::vector<std::pair<int, int>>> weighted_adj(n);
    for (std::size_t e = 0; e < g.edges().size(); ++e) {
        auto [u, v] = g.edges()[e];
        weighted_adj[u].emplace_back(v, static_cast<int>(e));
        weighted_adj[v].emplace_back(u, static_cast<int>(e));
    }

    std::vector<double> dist(n, kNeverActivated);
    dist[root] = 0.0;
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> frontier;
    frontier.emplace(0.0, root);
    while (!frontier.empty()) {
        auto [d, u] = frontier.top();
        frontier.pop();
        if (d > dist[u]) continue;
        for (auto [v, e] : weighted_adj[u]) {
            const double cand = d + delay[e];
            if (cand < dist[v]) {
                dist[v] = cand;
                frontier.emplace(cand, v);
            }
        }
    }

    Cascade c;
    c.root = root;
    c.times.resize(n);
    for (int v = 0; v < n; ++v) c.times[v] = dist[v] <= T ? dist[v] : kNeverActivated;
    return c;
}

CascadeSet simulate_cascades(const Graph& g, int q, double T, std::uint64_t seed) {
    if (q < 1) throw std::invalid_argument("simulate_cascades: q must be >= 1");
    CascadeSet cs;
    cs.window = T;
    cs.num_nodes = g.num_nodes();
    cs.cascades.reserve(q);
    for (int i = 0; i < q; ++i) {
        Rng rng(Rng::derive(seed, static_cast<std::uint64_t>(i)));
        cs.cascades.push_back(simulate_cascade(g, T, rng));
    }
    return cs;
}

std::string format_cascades(const CascadeSet& cs) {
    std::string out;
    char buf[64];
    for (const Cascade& c : cs.cascades) {
        std::vector<std::pair<double, int>> events;
        for (int v = 0; v < static_cast<int>(c.times.size()); ++v) {
            if (c.activated(v)) events.emplace_back(c.times[v], v);
        }
        std::sort(events.begin(), events.end());
        std::snprintf(buf, sizeof(buf), "%d;", c.root);
        out += buf;
        for (std::size_t i = 0; i < events.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%s%d:%.6f", i == 0 ? "" : ",",
                          events[i].second, events[i].first);
            out += buf;
        }
        out += '\n';
    }
    return out;
}

CascadeSet parse_cascades(const std::string& text, int num_nodes, double T) {
    CascadeSet cs;
    cs.window = T;
    cs.num_nodes = num_nodes;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto semi = line.find(';');
        if (semi == std::string::npos) {
            throw std::runtime_error("cascade parse error at line " + std::to_string(lineno) +
                                     ": missing ';'");
        }
        Cascade c;
        c.root = std::stoi(line.substr(0, semi));
        c.times.assign(num_nodes, kNeverActivated);
        std::istringstream rest(line.substr(semi + 1));
        std::string tok;
        while (std::getline(rest, tok, ',')) {
            const auto colon = tok.find(':');
            if (colon == std::string::npos) {
                throw std::runtime_error("cascade parse error at line " +
                                         std::to_string(lineno) + ": missing ':'");
            }
            const int node = std::stoi(tok.substr(0, colon));
            const double t = std::stod(tok.substr(colon + 1));
            if (node < 0 || node >= num_nodes) {
                throw std::runtime_error("cascade parse error at line " +
                                         std::to_string(lineno) + ": node out of range");
            }
            c.times[node] = t;
        }
        if (c.root < 0 || c.root >= num_nodes || c.times[c.root] != 0.0) {
            throw std::runtime_error("cascade parse error at line " + std::to_string(lineno) +
                                     ": root must carry time 0");
        }
        cs.cascades.push_back(std::move(c));
    }
    return cs;
}

}  // namespace cascon
