#ifndef IBN_DATASETS_HPP_
#define IBN_DATASETS_HPP_

#include <iosfwd>
#include <iostream>

#include "json.hpp"

#include "ibn/core.hpp"
#include "ibn/dataset_types.hpp"
#include "ibn/graph.hpp"
#include "ibn/rng.hpp"

namespace ibn {

// Chain-based dataset: both endpoints of every sample are independent uniform
// draws from Y (the pair is redrawn when a == b); deltas come from
// sample_judgment at beta_hp.
PreferenceDataset sample_chain_dataset(const ResponseSpace& space, const RewardField& field,
                                       int size, double beta_hp, Rng& rng);

// Tree-based dataset: B roots drawn uniformly from Y; per root, B leaves drawn
// uniformly among nodes within d_IB radius F(ceil(B^(1+gamma))) of the root
// (structural function in heuristic mode, capped at F(1)), without replacement
// globally — no node appears in two subtrees. Pairs are then uniform over the
// B^2 recorded leaves with a != b. Roots whose radius ball is too depleted to
// supply B fresh leaves are redrawn, up to 50*B attempts in total; running out
// of attempts raises an infeasible-topology error. A warning is written to
// warn_sink (pass nullptr to silence) when size < 3*B*ln(B), the regime the
// tree analysis assumes.
PreferenceDataset sample_tree_dataset(const IbnGraph& g, const RewardField& field, int B,
                                      double gamma, int size, double beta_hp, Rng& rng,
                                      std::ostream* warn_sink = &std::cerr);

nlohmann::json dataset_to_json(const PreferenceDataset& dataset);
PreferenceDataset dataset_from_json(const nlohmann::json& j);

// CSV with header "a,b,delta", one row per sample, full double precision.
void dataset_to_csv(const PreferenceDataset& dataset, std::ostream& out);

}  // namespace ibn

#endif  // IBN_DATASETS_HPP_
