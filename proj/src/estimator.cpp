#include "ibn/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ibn/datasets.hpp"
#include "ibn/errors.hpp"
#include "ibn/numerics.hpp"

namespace ibn {

namespace {

double grad_norm(const std::vector<double>& g) {
    double acc = 0.0;
    for (double x : g) acc += x * x;
    return std::sqrt(acc);
}

}  // namespace

std::pair<double, std::vector<double>> bt_negloglik(const PreferenceDataset& dataset,
                                                    const std::vector<double>& rewards,
                                                    double beta) {
    if (!(beta > 0.0)) throw ParameterError("bt_negloglik: beta must be positive");
    const int n = static_cast<int>(rewards.size());
    double value = 0.0;
    std::vector<double> grad(rewards.size(), 0.0);
    const double log_scale = -std::log(beta);  // log of scale 1/beta
    for (const PreferenceSample& s : dataset.samples) {
        if (s.a < 0 || s.a >= n || s.b < 0 || s.b >= n) {
            throw ParameterError("bt_negloglik: sample endpoint out of range");
        }
        // -log LogisticPDF(delta; beta*(r_a - r_b), 1/beta)
        //   = log s + z + 2 log(1 + exp(-z)),  z = beta * (delta - beta*(r_a - r_b))
        const double z = beta * (s.delta - beta * (rewards[s.a] - rewards[s.b]));
        const double log1pe = std::max(0.0, -z) + std::log1p(std::exp(-std::abs(z)));
        value += log_scale + z + 2.0 * log1pe;
        const double t = std::tanh(0.5 * z);  // d/dz of the per-sample loss
        grad[s.a] += -beta * beta * t;
        grad[s.b] += beta * beta * t;
    }
    return {value, grad};
}

RewardEstimate bt_mle(const PreferenceDataset& dataset, int n, double beta, int anchor,
                      double tol) {
    if (n < 1) throw ParameterError("bt_mle: need n >= 1");
    if (anchor < 0 || anchor >= n) throw ParameterError("bt_mle: anchor out of range");
    if (!(beta > 0.0)) throw ParameterError("bt_mle: beta must be positive");
    if (!(tol > 0.0)) throw ParameterError("bt_mle: tol must be positive");

    // Identifiability: every response must reach the anchor through samples.
    UnionFind components(static_cast<std::size_t>(n));
    for (const PreferenceSample& s : dataset.samples) {
        if (s.a < 0 || s.a >= n || s.b < 0 || s.b >= n) {
            throw ParameterError("bt_mle: sample endpoint out of range");
        }
        components.unite(static_cast<std::size_t>(s.a), static_cast<std::size_t>(s.b));
    }
    std::vector<int> offenders;
    for (int i = 0; i < n; ++i) {
        if (!components.same(static_cast<std::size_t>(i), static_cast<std::size_t>(anchor))) {
            offenders.push_back(i);
        }
    }
    if (!offenders.empty()) {
        std::string ids;
        for (std::size_t i = 0; i < offenders.size() && i < 8; ++i) {
            ids += (i ? ", " : "") + std::to_string(offenders[i]);
        }
        if (offenders.size() > 8) ids += ", ...";
        throw UnidentifiableError("bt_mle: responses {" + ids + "} (" +
                                  std::to_string(offenders.size()) +
                                  " total) are not connected to anchor " +
                                  std::to_string(anchor) + " through the dataset");
    }

    std::vector<double> r(n, 0.0);
    auto eval = [&](const std::vector<double>& point) { return bt_negloglik(dataset, point, beta); };
    auto [value, grad] = eval(r);
    grad[anchor] = 0.0;  // quotient out the shift family by freezing the anchor

    double step = 1.0 / (beta * beta * std::max<std::size_t>(1, dataset.samples.size()));
    const int max_iters = 100000;
    for (int iter = 0; iter < max_iters && grad_norm(grad) >= tol; ++iter) {
        bool accepted = false;
        while (!accepted) {
            std::vector<double> candidate = r;
            for (int i = 0; i < n; ++i) candidate[i] -= step * grad[i];
            auto [cand_value, cand_grad] = eval(candidate);
            if (cand_value < value) {
                r = std::move(candidate);
                value = cand_value;
                grad = std::move(cand_grad);
                grad[anchor] = 0.0;
                step *= 2.0;  // regrow after success so steps adapt both ways
                accepted = true;
            } else {
                step *= 0.5;
                if (step < 1e-18) {
                    // No descent direction at floating-point resolution: treat
                    // the current point as converged.
                    accepted = true;
                }
            }
        }
        if (step < 1e-18) break;
    }

    RewardEstimate estimate;
    estimate.anchor = anchor;
    estimate.values = std::move(r);
    estimate.values[anchor] = 0.0;
    return estimate;
}

PolicyDistribution gibbs_decode(const RewardEstimate& estimate, double beta) {
    if (!(beta > 0.0)) throw ParameterError("gibbs_decode: beta must be positive");
    if (estimate.values.empty()) throw ParameterError("gibbs_decode: empty estimate");
    const double m = *std::max_element(estimate.values.begin(), estimate.values.end());
    PolicyDistribution policy;
    policy.probs.resize(estimate.values.size());
    double z = 0.0;
    for (std::size_t i = 0; i < policy.probs.size(); ++i) {
        policy.probs[i] = std::exp((estimate.values[i] - m) / beta);
        z += policy.probs[i];
    }
    for (double& p : policy.probs) p /= z;
    return policy;
}

double tv_distance(const PolicyDistribution& p, const PolicyDistribution& q) {
    if (p.probs.size() != q.probs.size()) {
        throw ParameterError("tv_distance: support size mismatch");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < p.probs.size(); ++i) acc += std::abs(p.probs[i] - q.probs[i]);
    return 0.5 * acc;
}

std::vector<ConvergenceRow> convergence_experiment(const ConvergenceConfig& config) {
    if (config.sizes.empty()) throw ParameterError("convergence_experiment: no sizes");
    for (std::size_t i = 1; i < config.sizes.size(); ++i) {
        if (config.sizes[i] <= config.sizes[i - 1]) {
            throw ParameterError("convergence_experiment: sizes must be strictly increasing");
        }
    }
    if (config.seeds < 1) throw ParameterError("convergence_experiment: need seeds >= 1");

    const ResponseSpace space(config.n);
    Rng master(config.master_seed);
    Rng field_rng = master.fork(0xF1E1DULL);
    const RewardField field = gaussian_field(space, config.field_sigma, field_rng);
    const std::vector<double> p_human = human_distribution(field, config.beta);
    PolicyDistribution human_policy;
    human_policy.probs = p_human;

    std::vector<ConvergenceRow> rows;
    for (std::size_t si = 0; si < config.sizes.size(); ++si) {
        for (int seed = 0; seed < config.seeds; ++seed) {
            Rng cell_rng = master.fork(1 + si * 4096 + static_cast<std::uint64_t>(seed));
            const PreferenceDataset dataset = sample_chain_dataset(
                space, field, config.sizes[si], config.beta, cell_rng);
            const RewardEstimate estimate = bt_mle(dataset, config.n, config.beta);
            const PolicyDistribution policy = gibbs_decode(estimate, config.beta);

            double sup_gap = 0.0;
            for (int a = 0; a < config.n; ++a) {
                for (int b = a + 1; b < config.n; ++b) {
                    const double est_gap = estimate.values[a] - estimate.values[b];
                    const double true_gap = field.values[a] - field.values[b];
                    sup_gap = std::max(sup_gap, std::abs(est_gap - true_gap));
                }
            }
            rows.push_back({config.sizes[si], seed, tv_distance(policy, human_policy), sup_gap});
        }
    }
    return rows;
}

}  // namespace ibn
