#include "ibn/core.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ibn/errors.hpp"

namespace ibn {

ResponseSpace::ResponseSpace(int count) : n(count) {
    if (count < 2) throw ParameterError("ResponseSpace: need n >= 2 responses");
}

void RewardField::validate() const {
    for (double v : values) {
        if (!std::isfinite(v)) throw ParameterError("RewardField: non-finite reward value");
    }
}

LogisticDist::LogisticDist(LogisticParams params) : params_(params) {
    if (!(params.scale > 0.0)) throw ParameterError("LogisticDist: scale must be positive");
}

double LogisticDist::sample(Rng& rng) const {
    return rng.next_logistic(params_.location, params_.scale);
}

double LogisticDist::pdf(double x) const { return std::exp(log_pdf(x)); }

double LogisticDist::log_pdf(double x) const {
    // -log s - z - 2 log(1 + exp(-z)) with z = (x - mu)/s, stable for |z| large.
    const double z = (x - params_.location) / params_.scale;
    const double az = std::abs(z);
    // log(1+e^-z) = max(0,-z) + log1p(e^-|z|)
    const double log1pe = std::max(0.0, -z) + std::log1p(std::exp(-az));
    return -std::log(params_.scale) - z - 2.0 * log1pe;
}

double LogisticDist::cdf(double x) const {
    const double z = (x - params_.location) / params_.scale;
    return 1.0 / (1.0 + std::exp(-z));
}

double LogisticDist::variance() const {
    const double s = params_.scale;
    return s * s * std::numbers::pi * std::numbers::pi / 3.0;
}

std::vector<double> human_distribution(const RewardField& field, double beta) {
    if (!(beta > 0.0)) throw ParameterError("human_distribution: beta must be positive");
    if (field.size() == 0) throw ParameterError("human_distribution: empty field");
    field.validate();
    // Max-subtraction keeps the softmax overflow-free and makes the shift
    // invariance exact in floating point: adding c to all rewards shifts the
    // max by the same c and the subtracted exponents are bit-identical.
    const double m = *std::max_element(field.values.begin(), field.values.end());
    std::vector<double> probs(field.values.size());
    double z = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        probs[i] = std::exp(beta * (field.values[i] - m));
        z += probs[i];
    }
    for (double& p : probs) p /= z;
    return probs;
}

Judgment sample_judgment(const RewardField& field, int a, int b, double beta, Rng& rng) {
    if (a == b) throw ParameterError("sample_judgment: degenerate pair (a == b)");
    if (!(beta > 0.0)) throw ParameterError("sample_judgment: beta must be positive");
    const int n = field.size();
    if (a < 0 || b < 0 || a >= n || b >= n) {
        throw ParameterError("sample_judgment: response id out of range");
    }
    const double gap = beta * (field.values[a] - field.values[b]);
    Judgment j;
    j.a = a;
    j.b = b;
    j.delta = rng.next_logistic(gap, 1.0 / beta);
    return j;
}

RewardField gaussian_field(const ResponseSpace& space, double sigma, Rng& rng) {
    if (!(sigma >= 0.0)) throw ParameterError("gaussian_field: sigma must be >= 0");
    RewardField field;
    field.values.resize(space.n);
    for (int i = 0; i < space.n; ++i) {
        field.values[i] = sigma > 0.0 ? rng.next_normal(0.0, sigma) : 0.0;
    }
    return field;
}

RewardField clustered_field(const ResponseSpace& space, int n_clusters, double cluster_sd,
                            double noise_sd, Rng& rng) {
    if (n_clusters < 1 || n_clusters > space.n) {
        throw ParameterError("clustered_field: n_clusters must be in [1, n]");
    }
    if (!(cluster_sd >= 0.0) || !(noise_sd >= 0.0)) {
        throw ParameterError("clustered_field: spreads must be >= 0");
    }
    std::vector<double> means(n_clusters);
    for (double& m : means) m = cluster_sd > 0.0 ? rng.next_normal(0.0, cluster_sd) : 0.0;

    RewardField field;
    field.values.resize(space.n);
    for (int i = 0; i < space.n; ++i) {
        // Contiguous equal-size blocks (last block absorbs the remainder).
        const int cluster = std::min(i * n_clusters / space.n, n_clusters - 1);
        const double noise = noise_sd > 0.0 ? rng.next_normal(0.0, noise_sd) : 0.0;
        field.values[i] = means[cluster] + noise;
    }
    return field;
}

nlohmann::json field_to_json(const RewardField& field) {
    return nlohmann::json(field.values);
}

RewardField field_from_json(const nlohmann::json& j) {
    if (!j.is_array()) throw ConfigError("reward field JSON must be an array");
    RewardField field;
    field.values = j.get<std::vector<double>>();
    field.validate();
    return field;
}

}  // namespace ibn
