#include "ibn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <queue>
#include <set>

#include "ibn/errors.hpp"
#include "ibn/numerics.hpp"

namespace ibn {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double beta_to_variance(double beta) {
    const double s = 1.0 / beta;
    return s * s * std::numbers::pi * std::numbers::pi / 3.0;
}

double variance_to_beta(double variance) {
    return std::numbers::pi / std::sqrt(3.0 * variance);
}

void check_spec(const GraphSpec& spec) {
    if (spec.n < 2) throw ParameterError("generate_ib_graph: need n >= 2");
    if (!(spec.base_beta > 0.0)) throw ParameterError("generate_ib_graph: base_beta must be positive");
    if (spec.family == GraphFamily::hierarchical) {
        if (!(spec.I > 0.0)) throw ParameterError("generate_ib_graph: I must be positive");
        if (!(spec.alpha > 0.0)) throw ParameterError("generate_ib_graph: alpha must be positive");
        if (spec.var_floor < 0.0) throw ParameterError("generate_ib_graph: var_floor must be >= 0");
    }
}

// Per-level edge variances for the hierarchical family.
//
// The generator builds a recursive-bisection tree: each block splits into two
// halves whose representatives are joined by an edge at depth level+1. For a
// power-of-two space the mean intra-block distance over blocks at depth j is
//   E_j = sum_{d > j} (1 - 2^(j-d)) * w_d
// where w_d is the variance of depth-d edges. We pick w >= 0 so that E_j hits
// the target I * (2^j)^-alpha on every granularity the contract checks
// (M = 1, 2, 4, ..., n/4, i.e. rows j = 0..L-2), leaving the deepest level
// free; rows are weighted by 1/target so the fit error is relative.
std::vector<double> hierarchical_weights(int n, double I, double alpha) {
    const int L = std::max(1, static_cast<int>(std::ceil(std::log2(static_cast<double>(n)))));
    const int rows = std::max(L - 1, 1);
    std::vector<double> target(rows);
    for (int j = 0; j < rows; ++j) target[j] = I * std::pow(2.0, -alpha * j);

    std::vector<std::vector<double>> A(rows, std::vector<double>(L + 1, 0.0));
    std::vector<double> b(rows);
    for (int j = 0; j < rows; ++j) {
        for (int d = j + 1; d <= L; ++d) {
            A[j][d] = (1.0 - std::pow(2.0, j - d)) / target[j];
        }
        b[j] = 1.0;  // target[j] / target[j]
    }
    std::vector<double> w = nnls(A, b);

    // NNLS may zero out a level entirely; keep every edge variance positive so
    // betas stay finite.
    const double floor = 1e-9 * I;
    for (int d = 1; d <= L; ++d) w[d] = std::max(w[d], floor);
    return w;  // w[0] unused
}

struct HierBuilder {
    int levels;
    const std::vector<double>& w;
    double var_floor;
    std::vector<IbEdge>& edges;

    // Returns the representative (leftmost) node of block [lo, hi).
    int build(int lo, int hi, int level) {
        if (hi - lo == 1) return lo;
        const int mid = lo + (hi - lo + 1) / 2;
        const int a = build(lo, mid, level + 1);
        const int b = build(mid, hi, level + 1);
        const int depth = std::min(level + 1, levels);
        const double variance = std::max(w[depth], var_floor);
        edges.push_back({a, b, variance_to_beta(variance)});
        return a;
    }
};

struct AdjEntry {
    int to;
    double weight;
};

std::vector<std::vector<AdjEntry>> ib_adjacency(const IbnGraph& g) {
    std::vector<std::vector<AdjEntry>> adj(g.space.n);
    for (const IbEdge& e : g.ib_edges) {
        const double w = beta_to_variance(e.beta);
        adj[e.u].push_back({e.v, w});
        adj[e.v].push_back({e.u, w});
    }
    return adj;
}

std::vector<double> dijkstra(const std::vector<std::vector<AdjEntry>>& adj, int src) {
    std::vector<double> dist(adj.size(), kInf);
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<Item>> heap;
    dist[src] = 0.0;
    heap.push({0.0, src});
    while (!heap.empty()) {
        const auto [d, u] = heap.top();
        heap.pop();
        if (d > dist[u]) continue;
        for (const AdjEntry& e : adj[u]) {
            const double nd = d + e.weight;
            if (nd < dist[e.to]) {
                dist[e.to] = nd;
                heap.push({nd, e.to});
            }
        }
    }
    return dist;
}

// Dense all-pairs IB distance matrix (row per source).
std::vector<std::vector<double>> all_pairs(const IbnGraph& g) {
    const auto adj = ib_adjacency(g);
    std::vector<std::vector<double>> dist(g.space.n);
    for (int i = 0; i < g.space.n; ++i) dist[i] = dijkstra(adj, i);
    return dist;
}

// Mean distance over ordered pairs drawn uniformly within the cluster,
// equal pairs included (they contribute zero).
double cluster_mean(const std::vector<std::vector<double>>& dist, const std::vector<int>& members) {
    double total = 0.0;
    for (int i : members) {
        for (int j : members) total += dist[i][j];
    }
    const double k = static_cast<double>(members.size());
    return total / (k * k);
}

struct PartitionBounds {
    int min_size;
    int max_size;
};

PartitionBounds partition_bounds(int n, int M) {
    // |C_i| / n must lie in [1/(2M), 2/M].
    const int min_size = (n + 2 * M - 1) / (2 * M);  // ceil(n / (2M))
    const int max_size = (2 * n) / M;                // floor(2n / M)
    if (min_size * M > n || max_size * M < n) {
        throw InfeasibleError("structural_function: no admissible partition for n=" +
                              std::to_string(n) + ", M=" + std::to_string(M));
    }
    return {min_size, max_size};
}

// Exhaustive minimum over admissible partitions into exactly M clusters.
// Canonical enumeration: node 0 opens cluster 0; each later node joins an
// existing cluster or opens the next one. Feasible for n <= 10.
double exact_structural_function(const std::vector<std::vector<double>>& dist, int n, int M) {
    const auto [min_size, max_size] = partition_bounds(n, M);
    std::vector<std::vector<int>> clusters;
    double best = kInf;

    auto feasible_completion = [&](int placed) {
        // Remaining nodes must be able to open the missing clusters and top
        // every open cluster up to min_size.
        const int remaining = n - placed;
        int deficit = (M - static_cast<int>(clusters.size())) * min_size;
        for (const auto& c : clusters) {
            deficit += std::max(0, min_size - static_cast<int>(c.size()));
        }
        return deficit <= remaining;
    };

    std::function<void(int)> recurse = [&](int node) {
        if (node == n) {
            if (static_cast<int>(clusters.size()) != M) return;
            double worst = 0.0;
            for (const auto& c : clusters) {
                if (static_cast<int>(c.size()) < min_size) return;
                worst = std::max(worst, cluster_mean(dist, c));
            }
            best = std::min(best, worst);
            return;
        }
        if (!feasible_completion(node)) return;
        // Index-based: the recursive call below appends to `clusters`, which
        // would invalidate range-for iterators.
        const std::size_t open = clusters.size();
        for (std::size_t ci = 0; ci < open; ++ci) {
            if (static_cast<int>(clusters[ci].size()) < max_size) {
                clusters[ci].push_back(node);
                recurse(node + 1);
                clusters[ci].pop_back();
            }
        }
        if (static_cast<int>(clusters.size()) < M) {
            clusters.emplace_back(std::vector<int>{node});
            recurse(node + 1);
            clusters.pop_back();
        }
    };
    recurse(0);

    if (!std::isfinite(best)) {
        throw InfeasibleError("structural_function: exact search found no admissible partition");
    }
    return best;
}

// Constrained k-medoids upper bound: standard assign/update sweeps plus a
// repair pass enforcing the size window, best of 20 deterministic restarts.
double heuristic_structural_function(const std::vector<std::vector<double>>& dist, int n, int M) {
    const auto [min_size, max_size] = partition_bounds(n, M);
    if (M == n) return 0.0;  // singletons are forced and admissible

    double best = kInf;
    Rng restart_rng(0x5EEDULL ^ (static_cast<std::uint64_t>(n) << 20) ^
                    static_cast<std::uint64_t>(M));
    for (int restart = 0; restart < 20; ++restart) {
        Rng rng = restart_rng.fork(restart);

        // Distinct random medoids.
        std::vector<int> medoids;
        std::set<int> chosen;
        while (static_cast<int>(medoids.size()) < M) {
            const int c = static_cast<int>(rng.next_below(n));
            if (chosen.insert(c).second) medoids.push_back(c);
        }

        std::vector<int> assign(n, 0);
        std::vector<std::vector<int>> members;
        for (int sweep = 0; sweep < 30; ++sweep) {
            // Nearest-medoid assignment (ties to the lower cluster index).
            for (int i = 0; i < n; ++i) {
                int arg = 0;
                for (int c = 1; c < M; ++c) {
                    if (dist[i][medoids[c]] < dist[i][medoids[arg]]) arg = c;
                }
                assign[i] = arg;
            }
            for (int c = 0; c < M; ++c) assign[medoids[c]] = c;  // medoids stay home

            std::vector<int> size(M, 0);
            for (int i = 0; i < n; ++i) ++size[assign[i]];

            // Shed from oversized clusters into the cheapest non-full cluster.
            for (bool moved = true; moved;) {
                moved = false;
                for (int c = 0; c < M && !moved; ++c) {
                    if (size[c] <= max_size) continue;
                    int best_node = -1, best_dst = -1;
                    double best_cost = kInf;
                    for (int i = 0; i < n; ++i) {
                        if (assign[i] != c || i == medoids[c]) continue;
                        for (int d = 0; d < M; ++d) {
                            if (d == c || size[d] >= max_size) continue;
                            if (dist[i][medoids[d]] < best_cost) {
                                best_cost = dist[i][medoids[d]];
                                best_node = i;
                                best_dst = d;
                            }
                        }
                    }
                    if (best_node < 0) break;
                    assign[best_node] = best_dst;
                    --size[c];
                    ++size[best_dst];
                    moved = true;
                }
            }
            // Top up undersized clusters from donors that can spare a node.
            for (bool moved = true; moved;) {
                moved = false;
                for (int c = 0; c < M && !moved; ++c) {
                    if (size[c] >= min_size) continue;
                    int best_node = -1;
                    double best_cost = kInf;
                    for (int i = 0; i < n; ++i) {
                        const int from = assign[i];
                        if (from == c || size[from] <= min_size || i == medoids[from]) continue;
                        if (dist[i][medoids[c]] < best_cost) {
                            best_cost = dist[i][medoids[c]];
                            best_node = i;
                        }
                    }
                    if (best_node < 0) break;
                    --size[assign[best_node]];
                    assign[best_node] = c;
                    ++size[c];
                    moved = true;
                }
            }

            members.assign(M, {});
            for (int i = 0; i < n; ++i) members[assign[i]].push_back(i);

            // Medoid update: the member minimizing summed distance to its cluster.
            bool changed = false;
            for (int c = 0; c < M; ++c) {
                int arg = medoids[c];
                double best_sum = kInf;
                for (int i : members[c]) {
                    double s = 0.0;
                    for (int j : members[c]) s += dist[i][j];
                    if (s < best_sum) {
                        best_sum = s;
                        arg = i;
                    }
                }
                if (arg != medoids[c]) {
                    medoids[c] = arg;
                    changed = true;
                }
            }
            if (!changed) break;
        }

        bool admissible = true;
        double worst = 0.0;
        for (const auto& c : members) {
            const int size = static_cast<int>(c.size());
            if (size < min_size || size > max_size) {
                admissible = false;
                break;
            }
            worst = std::max(worst, cluster_mean(dist, c));
        }
        if (admissible) best = std::min(best, worst);
    }

    if (!std::isfinite(best)) {
        throw InfeasibleError("structural_function: heuristic found no admissible partition");
    }
    return best;
}

}  // namespace

IbnGraph generate_ib_graph(const GraphSpec& spec, Rng& rng) {
    check_spec(spec);
    IbnGraph g{ResponseSpace(spec.n), {}, {}};
    const int n = spec.n;

    switch (spec.family) {
        case GraphFamily::clique:
            for (int u = 0; u < n; ++u) {
                for (int v = u + 1; v < n; ++v) g.ib_edges.push_back({u, v, spec.base_beta});
            }
            break;
        case GraphFamily::star:
            for (int v = 1; v < n; ++v) g.ib_edges.push_back({0, v, spec.base_beta});
            break;
        case GraphFamily::chain:
            for (int v = 1; v < n; ++v) g.ib_edges.push_back({v - 1, v, spec.base_beta});
            break;
        case GraphFamily::random_graph: {
            // Random recursive tree for guaranteed connectivity, then extra
            // uniform non-parallel edges to densify.
            std::set<std::pair<int, int>> seen;
            for (int v = 1; v < n; ++v) {
                const int u = static_cast<int>(rng.next_below(v));
                g.ib_edges.push_back({u, v, spec.base_beta});
                seen.insert({std::min(u, v), std::max(u, v)});
            }
            for (int extra = 0; extra < n; ++extra) {
                const int u = static_cast<int>(rng.next_below(n));
                const int v = static_cast<int>(rng.next_below(n));
                if (u == v) continue;
                if (!seen.insert({std::min(u, v), std::max(u, v)}).second) continue;
                g.ib_edges.push_back({u, v, spec.base_beta});
            }
            break;
        }
        case GraphFamily::hierarchical: {
            const std::vector<double> w = hierarchical_weights(n, spec.I, spec.alpha);
            const int levels = static_cast<int>(w.size()) - 1;
            HierBuilder builder{levels, w, spec.var_floor, g.ib_edges};
            builder.build(0, n, 0);
            break;
        }
    }
    return g;
}

std::vector<double> ib_distances_from(const IbnGraph& g, int src) {
    if (src < 0 || src >= g.space.n) throw ParameterError("ib_distances_from: id out of range");
    return dijkstra(ib_adjacency(g), src);
}

double ib_distance(const IbnGraph& g, int y1, int y2) {
    if (y1 < 0 || y1 >= g.space.n || y2 < 0 || y2 >= g.space.n) {
        throw ParameterError("ib_distance: id out of range");
    }
    if (y1 == y2) return 0.0;
    const double d = ib_distances_from(g, y1)[y2];
    if (!std::isfinite(d)) {
        throw UnreachableError("ib_distance: nodes " + std::to_string(y1) + " and " +
                               std::to_string(y2) + " are not IB-connected");
    }
    return d;
}

double structural_function(const IbnGraph& g, int M, StrfunMode mode) {
    const int n = g.space.n;
    if (M < 1 || M > n) throw ParameterError("structural_function: M out of range [1, n]");
    if (mode == StrfunMode::exact && n > 10) {
        throw ParameterError("structural_function: exact mode requires n <= 10");
    }
    const auto dist = all_pairs(g);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (!std::isfinite(dist[i][j])) {
                throw UnreachableError("structural_function: IB subgraph is disconnected");
            }
        }
    }
    return mode == StrfunMode::exact ? exact_structural_function(dist, n, M)
                                     : heuristic_structural_function(dist, n, M);
}

StructuralProfile measure_structural_profile(const IbnGraph& g, const std::vector<int>& ms,
                                             StrfunMode mode) {
    StructuralProfile profile;
    for (int m : ms) profile.points.emplace_back(m, structural_function(g, m, mode));
    return profile;
}

IbnGraph attach_preferences(const IbnGraph& g, const PreferenceDataset& dataset) {
    IbnGraph out = g;
    out.hp_edges.reserve(out.hp_edges.size() + dataset.samples.size());
    for (const PreferenceSample& s : dataset.samples) {
        if (s.a < 0 || s.a >= g.space.n || s.b < 0 || s.b >= g.space.n) {
            throw ParameterError("attach_preferences: sample endpoint out of range");
        }
        if (s.a == s.b) throw ParameterError("attach_preferences: degenerate sample pair");
        out.hp_edges.push_back({s.a, s.b, s.delta, dataset.beta_hp});
    }
    return out;
}

bool ib_connected(const IbnGraph& g) {
    const auto d = ib_distances_from(g, 0);
    return std::all_of(d.begin(), d.end(), [](double x) { return std::isfinite(x); });
}

nlohmann::json graph_to_json(const IbnGraph& g) {
    nlohmann::json j;
    j["n"] = g.space.n;
    j["ib_edges"] = nlohmann::json::array();
    for (const IbEdge& e : g.ib_edges) {
        j["ib_edges"].push_back({{"u", e.u}, {"v", e.v}, {"beta", e.beta}});
    }
    j["hp_edges"] = nlohmann::json::array();
    for (const HpEdge& e : g.hp_edges) {
        j["hp_edges"].push_back(
            {{"u", e.u}, {"v", e.v}, {"delta", e.delta}, {"beta_hp", e.beta_hp}});
    }
    return j;
}

IbnGraph graph_from_json(const nlohmann::json& j) {
    try {
        IbnGraph g{ResponseSpace(j.at("n").get<int>()), {}, {}};
        for (const auto& e : j.at("ib_edges")) {
            IbEdge edge{e.at("u").get<int>(), e.at("v").get<int>(), e.at("beta").get<double>()};
            if (edge.u == edge.v || edge.u < 0 || edge.v < 0 || edge.u >= g.space.n ||
                edge.v >= g.space.n || !(edge.beta > 0.0)) {
                throw ConfigError("graph JSON: invalid IB edge");
            }
            g.ib_edges.push_back(edge);
        }
        for (const auto& e : j.value("hp_edges", nlohmann::json::array())) {
            HpEdge edge{e.at("u").get<int>(), e.at("v").get<int>(), e.at("delta").get<double>(),
                        e.at("beta_hp").get<double>()};
            if (edge.u == edge.v || edge.u < 0 || edge.v < 0 || edge.u >= g.space.n ||
                edge.v >= g.space.n || !(edge.beta_hp > 0.0)) {
                throw ConfigError("graph JSON: invalid HP edge");
            }
            g.hp_edges.push_back(edge);
        }
        return g;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("graph JSON: ") + e.what());
    }
}

GraphFamily graph_family_from_string(const std::string& name) {
    if (name == "clique") return GraphFamily::clique;
    if (name == "star") return GraphFamily::star;
    if (name == "chain") return GraphFamily::chain;
    if (name == "random") return GraphFamily::random_graph;
    if (name == "hierarchical") return GraphFamily::hierarchical;
    throw ConfigError("unknown graph family: " + name);
}

std::string to_string(GraphFamily family) {
    switch (family) {
        case GraphFamily::clique: return "clique";
        case GraphFamily::star: return "star";
        case GraphFamily::chain: return "chain";
        case GraphFamily::random_graph: return "random";
        case GraphFamily::hierarchical: return "hierarchical";
    }
    return "unknown";
}

}  // namespace ibn
