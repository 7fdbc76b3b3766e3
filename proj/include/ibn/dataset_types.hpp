#ifndef IBN_DATASET_TYPES_HPP_
#define IBN_DATASET_TYPES_HPP_

#include <vector>

namespace ibn {

struct PreferenceSample {
    int a = 0;
    int b = 0;
    double delta = 0.0;
};

enum class Topology { chain, tree };

// A sampled preference dataset plus its topology provenance. Tree datasets
// carry the roots and the B^2 globally distinct leaves they were drawn over.
struct PreferenceDataset {
    std::vector<PreferenceSample> samples;
    Topology topology = Topology::chain;
    double beta_hp = 1.0;  // judgment noise level the samples were drawn with
    // Tree metadata (meaningful only when topology == tree).
    int B = 0;
    double gamma = 0.0;
    std::vector<int> roots;
    std::vector<int> leaves;
};

}  // namespace ibn

#endif  // IBN_DATASET_TYPES_HPP_
