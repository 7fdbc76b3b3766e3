#include "ibn/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "ibn/errors.hpp"

namespace ibn {

namespace {

void check_common(const RewardField& field, int n, int size, double beta_hp) {
    if (size < 1) throw ParameterError("dataset sampler: size must be >= 1");
    if (!(beta_hp > 0.0)) throw ParameterError("dataset sampler: beta_hp must be positive");
    if (field.size() != n) throw ParameterError("dataset sampler: field size mismatch");
}

PreferenceSample draw_pair(const RewardField& field, const std::vector<int>& pool,
                           double beta_hp, Rng& rng) {
    const std::size_t m = pool.size();
    int a, b;
    do {
        a = pool[rng.next_below(m)];
        b = pool[rng.next_below(m)];
    } while (a == b);
    const Judgment j = sample_judgment(field, a, b, beta_hp, rng);
    return {j.a, j.b, j.delta};
}

}  // namespace

PreferenceDataset sample_chain_dataset(const ResponseSpace& space, const RewardField& field,
                                       int size, double beta_hp, Rng& rng) {
    check_common(field, space.n, size, beta_hp);
    PreferenceDataset dataset;
    dataset.topology = Topology::chain;
    dataset.beta_hp = beta_hp;
    dataset.samples.reserve(size);
    for (int i = 0; i < size; ++i) {
        int a, b;
        do {
            a = static_cast<int>(rng.next_below(space.n));
            b = static_cast<int>(rng.next_below(space.n));
        } while (a == b);
        const Judgment j = sample_judgment(field, a, b, beta_hp, rng);
        dataset.samples.push_back({j.a, j.b, j.delta});
    }
    return dataset;
}

PreferenceDataset sample_tree_dataset(const IbnGraph& g, const RewardField& field, int B,
                                      double gamma, int size, double beta_hp, Rng& rng,
                                      std::ostream* warn_sink) {
    const int n = g.space.n;
    check_common(field, n, size, beta_hp);
    if (B < 2) throw ParameterError("sample_tree_dataset: need B >= 2");
    if (gamma < 0.0) throw ParameterError("sample_tree_dataset: gamma must be >= 0");
    if (B * B > n) {
        throw ParameterError("sample_tree_dataset: B^2 leaves cannot fit in a space of " +
                             std::to_string(n));
    }

    if (size < 3.0 * B * std::log(static_cast<double>(B)) && warn_sink != nullptr) {
        *warn_sink << "warning: tree dataset size " << size << " is below 3*B*log(B) = "
                   << 3.0 * B * std::log(static_cast<double>(B))
                   << "; the tree-topology analysis assumes more pairs\n";
    }

    // Leaf-ball radius: the structural function at granularity ceil(B^(1+gamma)),
    // never above its value at M = 1.
    const int granularity =
        std::clamp(static_cast<int>(std::ceil(std::pow(B, 1.0 + gamma))), 1, n);
    const double radius = std::min(structural_function(g, granularity, StrfunMode::heuristic),
                                   structural_function(g, 1, StrfunMode::heuristic));

    PreferenceDataset dataset;
    dataset.topology = Topology::tree;
    dataset.beta_hp = beta_hp;
    dataset.B = B;
    dataset.gamma = gamma;

    std::vector<bool> used(n, false);
    const int attempt_cap = 50 * B;
    int attempts = 0;
    for (int slot = 0; slot < B; ++slot) {
        bool placed = false;
        while (!placed) {
            if (++attempts > attempt_cap) {
                throw InfeasibleError(
                    "sample_tree_dataset: could not place subtree " + std::to_string(slot) +
                    " after " + std::to_string(attempt_cap) + " root draws (radius " +
                    std::to_string(radius) + " admits too few unused candidates)");
            }
            const int root = static_cast<int>(rng.next_below(n));
            const std::vector<double> dist = ib_distances_from(g, root);
            std::vector<int> candidates;
            for (int v = 0; v < n; ++v) {
                if (!used[v] && dist[v] <= radius * (1.0 + 1e-9)) candidates.push_back(v);
            }
            if (static_cast<int>(candidates.size()) < B) continue;  // starved: redraw root

            dataset.roots.push_back(root);
            for (int pick = 0; pick < B; ++pick) {
                const std::size_t at = rng.next_below(candidates.size());
                const int leaf = candidates[at];
                candidates.erase(candidates.begin() + static_cast<std::ptrdiff_t>(at));
                used[leaf] = true;
                dataset.leaves.push_back(leaf);
            }
            placed = true;
        }
    }

    dataset.samples.reserve(size);
    for (int i = 0; i < size; ++i) {
        dataset.samples.push_back(draw_pair(field, dataset.leaves, beta_hp, rng));
    }
    return dataset;
}

nlohmann::json dataset_to_json(const PreferenceDataset& dataset) {
    nlohmann::json j;
    j["topology"] = dataset.topology == Topology::tree ? "tree" : "chain";
    j["beta_hp"] = dataset.beta_hp;
    j["samples"] = nlohmann::json::array();
    for (const PreferenceSample& s : dataset.samples) {
        j["samples"].push_back({{"a", s.a}, {"b", s.b}, {"delta", s.delta}});
    }
    if (dataset.topology == Topology::tree) {
        j["meta"] = {{"B", dataset.B},
                     {"gamma", dataset.gamma},
                     {"roots", dataset.roots},
                     {"leaves", dataset.leaves}};
    }
    return j;
}

PreferenceDataset dataset_from_json(const nlohmann::json& j) {
    try {
        PreferenceDataset dataset;
        const std::string topology = j.at("topology").get<std::string>();
        if (topology == "chain") {
            dataset.topology = Topology::chain;
        } else if (topology == "tree") {
            dataset.topology = Topology::tree;
        } else {
            throw ConfigError("dataset JSON: unknown topology " + topology);
        }
        dataset.beta_hp = j.value("beta_hp", 1.0);
        for (const auto& s : j.at("samples")) {
            PreferenceSample sample{s.at("a").get<int>(), s.at("b").get<int>(),
                                    s.at("delta").get<double>()};
            if (sample.a == sample.b) throw ConfigError("dataset JSON: degenerate pair");
            dataset.samples.push_back(sample);
        }
        if (dataset.topology == Topology::tree) {
            const auto& meta = j.at("meta");
            dataset.B = meta.at("B").get<int>();
            dataset.gamma = meta.at("gamma").get<double>();
            dataset.roots = meta.at("roots").get<std::vector<int>>();
            dataset.leaves = meta.at("leaves").get<std::vector<int>>();
        }
        return dataset;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("dataset JSON: ") + e.what());
    }
}

void dataset_to_csv(const PreferenceDataset& dataset, std::ostream& out) {
    out << "a,b,delta\n";
    char buffer[64];
    for (const PreferenceSample& s : dataset.samples) {
        std::snprintf(buffer, sizeof(buffer), "%.17g", s.delta);
        out << s.a << ',' << s.b << ',' << buffer << '\n';
    }
}

}  // namespace ibn
