#ifndef IBN_GRAPH_HPP_
#define IBN_GRAPH_HPP_

#include <string>
#include <vector>

#include "json.hpp"

#include "ibn/core.hpp"
#include "ibn/dataset_types.hpp"
#include "ibn/rng.hpp"

namespace ibn {

// Inductive-bias edge: symmetric logistic conditional with zero location shift.
struct IbEdge {
    int u = 0;
    int v = 0;
    double beta = 1.0;
};

// Human-preference edge: logistic conditional shifted by the judged delta.
// Parallel edges between the same unordered pair are allowed (multigraph).
struct HpEdge {
    int u = 0;
    int v = 0;
    double delta = 0.0;
    double beta_hp = 1.0;
};

struct IbnGraph {
    ResponseSpace space{2};
    std::vector<IbEdge> ib_edges;
    std::vector<HpEdge> hp_edges;
};

enum class GraphFamily { clique, star, chain, random_graph, hierarchical };

struct GraphSpec {
    GraphFamily family = GraphFamily::chain;
    int n = 2;
    double I = 1.0;          // target structural-function value at M = 1
    double alpha = 0.5;      // target decay exponent (hierarchical only)
    double base_beta = 1.8137993642342178;  // pi/sqrt(3): per-edge variance 1
    // Optional lower bound applied to every hierarchical edge variance. Zero
    // means no floor (variances at the finest levels shrink like I * M^-alpha);
    // a positive value keeps all path variances bounded below by a constant.
    double var_floor = 0.0;
};

struct StructuralProfile {
    std::vector<std::pair<int, double>> points;  // (M, F(M))
};

enum class StrfunMode { exact, heuristic };

// Build the inductive-bias edge set for the requested family (hp_edges empty).
// Every family produces a connected graph. For the hierarchical family the
// measured structural function tracks I * M^-alpha within a factor of two on
// M = 1, 2, 4, ..., n/4.
IbnGraph generate_ib_graph(const GraphSpec& spec, Rng& rng);

// Minimum summed-variance path using inductive-bias edges only.
double ib_distance(const IbnGraph& g, int y1, int y2);

// All IB-only distances from src (Dijkstra); entries are +inf when unreachable.
std::vector<double> ib_distances_from(const IbnGraph& g, int src);

// Smallest achievable max-over-clusters mean intra-cluster distance over
// admissible M-partitions (cluster sizes within [n/(2M), 2n/M]). The cluster
// mean is over ordered pairs drawn uniformly with replacement, so equal pairs
// (distance zero) count. Exact mode enumerates partitions (n <= 10); heuristic
// mode is constrained k-medoids with 20 deterministic restarts (upper bound).
double structural_function(const IbnGraph& g, int M, StrfunMode mode);

// Measured structural profile at the given granularities.
StructuralProfile measure_structural_profile(const IbnGraph& g, const std::vector<int>& ms,
                                             StrfunMode mode);

// New graph with one HpEdge appended per dataset sample; IB edges unchanged.
IbnGraph attach_preferences(const IbnGraph& g, const PreferenceDataset& dataset);

bool ib_connected(const IbnGraph& g);

nlohmann::json graph_to_json(const IbnGraph& g);
IbnGraph graph_from_json(const nlohmann::json& j);

GraphFamily graph_family_from_string(const std::string& name);
std::string to_string(GraphFamily family);

}  // namespace ibn

#endif  // IBN_GRAPH_HPP_
