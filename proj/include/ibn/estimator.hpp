#ifndef IBN_ESTIMATOR_HPP_
#define IBN_ESTIMATOR_HPP_

#include <cstdint>
#include <utility>
#include <vector>

#include "ibn/core.hpp"
#include "ibn/dataset_types.hpp"
#include "ibn/rng.hpp"

namespace ibn {

// Point estimate of the reward field, pinned to values[anchor] = 0 (the
// Bradley-Terry likelihood only identifies reward gaps).
struct RewardEstimate {
    std::vector<double> values;
    int anchor = 0;
};

struct PolicyDistribution {
    std::vector<double> probs;
};

// Negative log-likelihood of the observed continuous deltas under
// delta_i ~ Logistic(beta * (r_a - r_b), 1/beta), plus its exact gradient in
// the reward vector. Convex in r.
std::pair<double, std::vector<double>> bt_negloglik(const PreferenceDataset& dataset,
                                                    const std::vector<double>& rewards,
                                                    double beta);

// Deterministic full-batch gradient descent with step halving on non-decrease;
// stops when the gradient Euclidean norm drops below tol (default 1e-8) or
// after 1e5 iterations. n is the response-space size. Throws an
// unidentifiable error when some response is not connected to the anchor
// through dataset pairs.
RewardEstimate bt_mle(const PreferenceDataset& dataset, int n, double beta, int anchor = 0,
                      double tol = 1e-8);

// Gibbs policy of the estimate: probs proportional to exp(r / beta),
// overflow-guarded by max subtraction (exactly shift-invariant).
PolicyDistribution gibbs_decode(const RewardEstimate& estimate, double beta);

// Total variation distance (1/2) * sum |p - q| for same-support distributions.
double tv_distance(const PolicyDistribution& p, const PolicyDistribution& q);

struct ConvergenceConfig {
    int n = 10;
    double beta = 1.0;
    double field_sigma = 1.0;       // ground truth: iid Gaussian rewards
    std::vector<int> sizes;         // strictly increasing dataset sizes
    int seeds = 10;                 // trials per size
    std::uint64_t master_seed = 0;
};

struct ConvergenceRow {
    int size = 0;
    int seed = 0;
    double tv = 0.0;
    double sup_gap_err = 0.0;
};

// Per (size, seed): sample a chain dataset, fit the MLE, decode the Gibbs
// policy, and compare against the idealized human distribution. tv is the
// total variation distance; sup_gap_err is the worst-pair absolute error of
// the estimated reward gaps.
std::vector<ConvergenceRow> convergence_experiment(const ConvergenceConfig& config);

}  // namespace ibn

#endif  // IBN_ESTIMATOR_HPP_
