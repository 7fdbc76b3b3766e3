#ifndef IBN_CORE_HPP_
#define IBN_CORE_HPP_

#include <vector>

#include "json.hpp"

#include "ibn/rng.hpp"

namespace ibn {

// The finite response space Y: ids are dense 0..n-1.
struct ResponseSpace {
    int n = 0;

    explicit ResponseSpace(int count);
};

// Ground-truth reward function over the space, one finite value per id.
struct RewardField {
    std::vector<double> values;

    int size() const { return static_cast<int>(values.size()); }
    void validate() const;  // throws ParameterError on non-finite entries
};

// One human judgment of the reward gap between responses a and b.
struct Judgment {
    int a = 0;
    int b = 0;
    double delta = 0.0;
};

struct LogisticParams {
    double location = 0.0;
    double scale = 1.0;  // scale = 1/beta
};

// Logistic distribution handle: sampling via inverse CDF, analytic moments.
class LogisticDist {
public:
    explicit LogisticDist(LogisticParams params);

    double sample(Rng& rng) const;
    double pdf(double x) const;
    double log_pdf(double x) const;
    double cdf(double x) const;
    double variance() const;
    double location() const { return params_.location; }
    double scale() const { return params_.scale; }

private:
    LogisticParams params_;
};

// Softmax distribution of the idealized human: p(y) proportional to exp(beta * r(y)).
// Exactly invariant under adding a constant to all rewards.
std::vector<double> human_distribution(const RewardField& field, double beta);

// Draw one judgment: delta ~ Logistic(beta * (r(a) - r(b)), 1/beta).
Judgment sample_judgment(const RewardField& field, int a, int b, double beta, Rng& rng);

// Synthetic ground-truth generators. The cluster-correlated field splits the
// space into n_clusters contiguous blocks sharing a cluster mean.
RewardField gaussian_field(const ResponseSpace& space, double sigma, Rng& rng);
RewardField clustered_field(const ResponseSpace& space, int n_clusters, double cluster_sd,
                            double noise_sd, Rng& rng);

// Reward fields serialize as plain JSON arrays indexed by id.
nlohmann::json field_to_json(const RewardField& field);
RewardField field_from_json(const nlohmann::json& j);

}  // namespace ibn

#endif  // IBN_CORE_HPP_
