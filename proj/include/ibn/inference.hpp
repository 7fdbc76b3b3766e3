#ifndef IBN_INFERENCE_HPP_
#define IBN_INFERENCE_HPP_

#include <utility>
#include <vector>

#include "ibn/graph.hpp"
#include "ibn/rng.hpp"

namespace ibn {

// One edge of an inference path, oriented along the traversal (u -> v).
// delta carries the orientation-adjusted location shift (0 for IB edges).
struct PathEdge {
    int u = 0;
    int v = 0;
    double variance = 0.0;
    double delta = 0.0;
    bool is_hp = false;
};

struct InferencePath {
    int y1 = 0;
    int y2 = 0;
    std::vector<PathEdge> edges;
};

struct InferenceResult {
    InferencePath path;
    double variance = 0.0;        // inference distance d(y1, y2)
    double location_shift = 0.0;  // summed oriented deltas along the path
};

struct PosteriorSummary {
    double mean = 0.0;
    double variance = 0.0;
};

// Variance of the logistic conditional carried by an edge: (1/beta)^2 * pi^2/3.
double logistic_variance(double beta);
double edge_variance(const IbEdge& edge);
double edge_variance(const HpEdge& edge);

// Sum of edge variances along a well-formed path (throws on inconsistent
// endpoints or broken adjacency).
double path_variance(const InferencePath& path);

// Posterior mean/variance of a reward gap observed through k parallel logistic
// comparisons under a flat prior: density proportional to the product of
// logistic kernels, integrated by adaptive quadrature over
// [mean(deltas) - 30/beta, mean(deltas) + 30/beta]. Beyond k = 64 parallel
// observations the asymptotic variance 3/(beta^2 k) is used instead (the
// approximation error at the switch point is a few tenths of a percent).
PosteriorSummary posterior_parallel(const std::vector<double>& deltas, double beta,
                                    double rel_tol = 1e-6);

// Replace every group of parallel HP edges between the same unordered pair by
// one synthetic edge carrying the group's posterior mean and variance
// (orientation-normalized toward the smaller id). Groups of one and IB edges
// pass through untouched, so the operation is idempotent.
IbnGraph collapse_multiedges(const IbnGraph& g);

// Minimum-variance path over IB and HP edges combined. If the graph still has
// parallel HP edges, collapse_multiedges is applied internally first.
InferenceResult optimal_inference_path(const IbnGraph& g, int y1, int y2);

// Monte Carlo estimate of E[d(y1, y2)] over ordered pairs drawn independently
// and uniformly from Y^2 (equal pairs contribute zero). Pair i draws from
// rng.fork(i), so the estimate is independent of evaluation order and the
// caller's rng position is not advanced. Returns (estimate, stderr) where
// stderr = sample SD / sqrt(n_pairs).
std::pair<double, double> mean_inference_distance(const IbnGraph& g, int n_pairs, Rng& rng);

}  // namespace ibn

#endif  // IBN_INFERENCE_HPP_
