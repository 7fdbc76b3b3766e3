#include "ibn/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <queue>
#include <unordered_map>

#include "ibn/core.hpp"
#include "ibn/errors.hpp"
#include "ibn/numerics.hpp"

namespace ibn {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double variance_to_beta(double variance) {
    return std::numbers::pi / std::sqrt(3.0 * variance);
}

// Combined-edge adjacency for minimum-variance search.
struct Hop {
    int to;
    double weight;
    double delta;  // oriented: contribution when traversing from -> to
    bool is_hp;
};

std::vector<std::vector<Hop>> combined_adjacency(const IbnGraph& g) {
    std::vector<std::vector<Hop>> adj(g.space.n);
    for (const IbEdge& e : g.ib_edges) {
        const double w = edge_variance(e);
        adj[e.u].push_back({e.v, w, 0.0, false});
        adj[e.v].push_back({e.u, w, 0.0, false});
    }
    for (const HpEdge& e : g.hp_edges) {
        const double w = edge_variance(e);
        // The edge asserts R_v = R_u + delta; traversing v -> u flips the sign.
        adj[e.u].push_back({e.v, w, e.delta, true});
        adj[e.v].push_back({e.u, w, -e.delta, true});
    }
    return adj;
}

std::vector<double> dijkstra_distances(const std::vector<std::vector<Hop>>& adj, int src) {
    std::vector<double> dist(adj.size(), kInf);
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<Item>> heap;
    dist[src] = 0.0;
    heap.push({0.0, src});
    while (!heap.empty()) {
        const auto [d, u] = heap.top();
        heap.pop();
        if (d > dist[u]) continue;
        for (const Hop& h : adj[u]) {
            const double nd = d + h.weight;
            if (nd < dist[h.to]) {
                dist[h.to] = nd;
                heap.push({nd, h.to});
            }
        }
    }
    return dist;
}

bool has_parallel_hp(const IbnGraph& g) {
    std::map<std::pair<int, int>, int> count;
    for (const HpEdge& e : g.hp_edges) {
        const auto key = std::minmax(e.u, e.v);
        if (++count[{key.first, key.second}] > 1) return true;
    }
    return false;
}

}  // namespace

double logistic_variance(double beta) {
    if (!(beta > 0.0)) throw ParameterError("logistic_variance: beta must be positive");
    const double s = 1.0 / beta;
    return s * s * std::numbers::pi * std::numbers::pi / 3.0;
}

double edge_variance(const IbEdge& edge) { return logistic_variance(edge.beta); }

double edge_variance(const HpEdge& edge) { return logistic_variance(edge.beta_hp); }

double path_variance(const InferencePath& path) {
    if (path.edges.empty()) {
        if (path.y1 != path.y2) {
            throw ParameterError("path_variance: empty path with distinct endpoints");
        }
        return 0.0;
    }
    if (path.edges.front().u != path.y1 || path.edges.back().v != path.y2) {
        throw ParameterError("path_variance: path does not join its endpoints");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < path.edges.size(); ++i) {
        if (i > 0 && path.edges[i - 1].v != path.edges[i].u) {
            throw ParameterError("path_variance: consecutive edges do not share a node");
        }
        total += path.edges[i].variance;
    }
    return total;
}

PosteriorSummary posterior_parallel(const std::vector<double>& deltas, double beta,
                                    double rel_tol) {
    if (deltas.empty()) throw ParameterError("posterior_parallel: need at least one sample");
    if (!(beta > 0.0)) throw ParameterError("posterior_parallel: beta must be positive");
    if (!(rel_tol > 0.0)) throw ParameterError("posterior_parallel: rel_tol must be positive");
    const std::size_t k = deltas.size();
    double delta_bar = 0.0;
    for (double d : deltas) delta_bar += d;
    delta_bar /= static_cast<double>(k);

    if (k > 64) {
        // Asymptotic regime of the parallel-comparison lemma: the posterior is
        // approximately normal around the sample mean with variance 3/(beta^2 k)
        // (within a few tenths of a percent of the exact value at k = 64).
        return {delta_bar, 3.0 / (beta * beta * static_cast<double>(k))};
    }

    const double scale = 1.0 / beta;
    const double half_width = 30.0 * scale;
    const double a = delta_bar - half_width;
    const double b = delta_bar + half_width;

    // Flat prior: log posterior (unnormalized) is the sum of logistic log-pdfs.
    std::vector<LogisticDist> kernels;
    kernels.reserve(k);
    for (double d : deltas) kernels.emplace_back(LogisticParams{d, scale});
    auto log_density = [&](double x) {
        double acc = 0.0;
        for (const LogisticDist& kernel : kernels) acc += kernel.log_pdf(x);
        return acc;
    };

    // Coarse grid pass: locate the density peak for max-subtraction and get
    // magnitude estimates that anchor the absolute quadrature tolerances.
    const int grid = 513;
    double log_max = -kInf;
    for (int i = 0; i < grid; ++i) {
        const double x = a + (b - a) * i / (grid - 1);
        log_max = std::max(log_max, log_density(x));
    }
    auto density = [&](double x) { return std::exp(log_density(x) - log_max); };

    double z0 = 0.0, m20 = 0.0;
    const double h = (b - a) / (grid - 1);
    for (int i = 0; i < grid; ++i) {
        const double x = a + h * i;
        const double wq = (i == 0 || i == grid - 1) ? 0.5 : 1.0;
        const double f = density(x);
        z0 += wq * f * h;
        const double t = x - delta_bar;
        m20 += wq * t * t * f * h;
    }
    const double sd0 = std::sqrt(std::max(m20 / std::max(z0, 1e-300), 1e-300));

    // Adaptive Simpson started blind on the full 60/beta window can falsely
    // converge: for k >= 2 the density underflows at every initial stencil
    // node while the mass hides between them. Pre-split into panels narrow
    // enough that the central ones see the peak, and hand each panel its
    // share of the absolute budget.
    constexpr int kPanels = 64;
    auto integrate_panels = [&](const std::function<double(double)>& f, double abs_budget) {
        const double w = (b - a) / kPanels;
        double total = 0.0;
        for (int i = 0; i < kPanels; ++i) {
            total += integrate_adaptive(f, a + i * w, a + (i + 1) * w, rel_tol / 8.0,
                                        abs_budget / kPanels);
        }
        return total;
    };

    try {
        const double z = integrate_panels(density, rel_tol * z0);
        const double m1 = integrate_panels(
            [&](double x) { return (x - delta_bar) * density(x); }, rel_tol * z0 * sd0);
        const double m2 = integrate_panels(
            [&](double x) {
                const double t = x - delta_bar;
                return t * t * density(x);
            },
            rel_tol * std::max(m20, 1e-300));
        const double mean_offset = m1 / z;
        const double variance = m2 / z - mean_offset * mean_offset;
        if (!(variance > 0.0) || !std::isfinite(variance)) {
            throw NumericError("posterior_parallel: non-positive posterior variance " +
                               std::to_string(variance));
        }
        return {delta_bar + mean_offset, variance};
    } catch (const NumericError& e) {
        throw NumericError("posterior_parallel: quadrature failed for k=" + std::to_string(k) +
                           ", beta=" + std::to_string(beta) + ": " + e.what());
    }
}

IbnGraph collapse_multiedges(const IbnGraph& g) {
    // Group parallel HP edges by unordered pair; deltas are re-oriented toward
    // the pair's smaller id (an edge (u, v, d) asserts R_v = R_u + d, so the
    // flipped orientation carries -d).
    std::map<std::pair<int, int>, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < g.hp_edges.size(); ++i) {
        const HpEdge& e = g.hp_edges[i];
        const auto key = std::minmax(e.u, e.v);
        groups[{key.first, key.second}].push_back(i);
    }

    IbnGraph out{g.space, g.ib_edges, {}};
    std::map<std::pair<int, int>, bool> emitted;
    for (std::size_t i = 0; i < g.hp_edges.size(); ++i) {
        const HpEdge& e = g.hp_edges[i];
        const auto mm = std::minmax(e.u, e.v);
        const std::pair<int, int> key{mm.first, mm.second};
        const auto& group = groups[key];
        if (group.size() == 1) {
            out.hp_edges.push_back(e);  // singletons pass through untouched
            continue;
        }
        if (emitted[key]) continue;  // merged edge goes at the first occurrence
        emitted[key] = true;

        const double beta_hp = g.hp_edges[group.front()].beta_hp;
        std::vector<double> oriented;
        oriented.reserve(group.size());
        for (std::size_t idx : group) {
            const HpEdge& member = g.hp_edges[idx];
            if (std::abs(member.beta_hp - beta_hp) > 1e-12 * std::max(1.0, std::abs(beta_hp))) {
                throw ParameterError(
                    "collapse_multiedges: parallel edges with differing beta_hp");
            }
            oriented.push_back(member.u == key.first ? member.delta : -member.delta);
        }
        const PosteriorSummary post = posterior_parallel(oriented, beta_hp);
        out.hp_edges.push_back(
            {key.first, key.second, post.mean, variance_to_beta(post.variance)});
    }
    return out;
}

InferenceResult optimal_inference_path(const IbnGraph& g, int y1, int y2) {
    const int n = g.space.n;
    if (y1 < 0 || y1 >= n || y2 < 0 || y2 >= n) {
        throw ParameterError("optimal_inference_path: id out of range");
    }
    if (has_parallel_hp(g)) {
        return optimal_inference_path(collapse_multiedges(g), y1, y2);
    }

    InferenceResult result;
    result.path.y1 = y1;
    result.path.y2 = y2;
    if (y1 == y2) return result;

    const auto adj = combined_adjacency(g);
    std::vector<double> dist(n, kInf);
    std::vector<int> parent(n, -1);
    std::vector<Hop> parent_hop(n);
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<Item>> heap;
    dist[y1] = 0.0;
    heap.push({0.0, y1});
    while (!heap.empty()) {
        const auto [d, u] = heap.top();
        heap.pop();
        if (d > dist[u]) continue;
        for (const Hop& h : adj[u]) {
            const double nd = d + h.weight;
            if (nd < dist[h.to]) {
                dist[h.to] = nd;
                parent[h.to] = u;
                parent_hop[h.to] = h;
                heap.push({nd, h.to});
            }
        }
    }
    if (!std::isfinite(dist[y2])) {
        throw UnreachableError("optimal_inference_path: " + std::to_string(y1) + " and " +
                               std::to_string(y2) + " are not connected");
    }

    for (int node = y2; node != y1; node = parent[node]) {
        const Hop& h = parent_hop[node];
        result.path.edges.push_back({parent[node], node, h.weight, h.delta, h.is_hp});
        result.location_shift += h.delta;
    }
    std::reverse(result.path.edges.begin(), result.path.edges.end());
    result.variance = dist[y2];
    return result;
}

std::pair<double, double> mean_inference_distance(const IbnGraph& g, int n_pairs, Rng& rng) {
    if (n_pairs < 1) throw ParameterError("mean_inference_distance: need n_pairs >= 1");
    const IbnGraph* graph = &g;
    IbnGraph collapsed;
    if (has_parallel_hp(g)) {
        collapsed = collapse_multiedges(g);
        graph = &collapsed;
    }
    const auto adj = combined_adjacency(*graph);
    const int n = graph->space.n;

    std::unordered_map<int, std::vector<double>> source_cache;
    double sum = 0.0, sum_sq = 0.0;
    for (int i = 0; i < n_pairs; ++i) {
        Rng pair_rng = rng.fork(static_cast<std::uint64_t>(i));
        const int u = static_cast<int>(pair_rng.next_below(n));
        const int v = static_cast<int>(pair_rng.next_below(n));
        double d = 0.0;
        if (u != v) {
            auto it = source_cache.find(u);
            if (it == source_cache.end()) {
                it = source_cache.emplace(u, dijkstra_distances(adj, u)).first;
            }
            d = it->second[v];
            if (!std::isfinite(d)) {
                throw UnreachableError("mean_inference_distance: pair (" + std::to_string(u) +
                                       ", " + std::to_string(v) + ") is not connected");
            }
        }
        sum += d;
        sum_sq += d * d;
    }
    const double mean = sum / n_pairs;
    double stderr_est = 0.0;
    if (n_pairs > 1) {
        const double var =
            std::max(0.0, (sum_sq - n_pairs * mean * mean) / (n_pairs - 1));
        stderr_est = std::sqrt(var / n_pairs);
    }
    return {mean, stderr_est};
}

}  // namespace ibn
