#ifndef IBN_CLI_HPP_
#define IBN_CLI_HPP_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "ibn/core.hpp"
#include "ibn/estimator.hpp"
#include "ibn/graph.hpp"
#include "ibn/numerics.hpp"
#include "ibn/rng.hpp"

namespace ibn {

// Ground-truth reward field specification, as it appears in config files.
struct FieldSpec {
    std::string type = "gaussian";  // gaussian | clustered
    double sigma = 1.0;             // gaussian: iid N(0, sigma)
    int n_clusters = 4;             // clustered: contiguous blocks
    double cluster_sd = 1.0;
    double noise_sd = 0.1;
};

struct SweepConfig {
    GraphSpec graph;
    FieldSpec field;
    Topology topology = Topology::chain;
    std::vector<int> sizes;  // dataset sizes |D|, strictly increasing
    int trials = 1;
    double beta_hp = 1.0;
    int mc_pairs = 400;  // Monte Carlo pairs per mean-inference-distance estimate
    std::uint64_t master_seed = 0;
    // Tree-topology dataset knobs (ignored for chain).
    int tree_B = 6;
    double tree_gamma = 0.5;
    int threads = 1;
};

struct SweepRow {
    Topology topology = Topology::chain;
    int size = 0;
    int trial = 0;
    double distance = 0.0;
    double stderr_ = 0.0;
    double wall_time = 0.0;  // seconds; diagnostic only, never serialized
};

struct SweepResult {
    std::vector<SweepRow> rows;  // ordered by (size index, trial index)
};

// The slope report reuses the OLS fit record: slope, intercept, r_squared,
// and the 95% confidence half-width of the slope.
using FitReport = LinearFit;

struct CompareRow {
    int size = 0;
    double chain_median = 0.0;
    double tree_median = 0.0;
    double ratio = 0.0;  // tree / chain
    double ci_low = 0.0;
    double ci_high = 0.0;
};

struct CompareReport {
    std::vector<CompareRow> rows;
};

GraphSpec graph_spec_from_json(const nlohmann::json& j);
FieldSpec field_spec_from_json(const nlohmann::json& j);
SweepConfig sweep_config_from_json(const nlohmann::json& j);

RewardField make_field(const FieldSpec& spec, const ResponseSpace& space, Rng& rng);

// Runs every (size, trial) cell on config.threads workers stealing from a
// shared cell queue. Each cell's RNG is forked from (master seed, size index,
// trial index), and finished rows are streamed to csv_out strictly in cell
// order, so the emitted bytes are independent of scheduling. Wall times go to
// the in-memory rows only.
SweepResult run_sweep(const SweepConfig& config, std::ostream& csv_out);

// Deterministic per-config aggregate (per-size medians; no timing data).
nlohmann::json sweep_summary(const SweepConfig& config, const SweepResult& result);

// Minimal log-log line chart of per-size median distance.
void write_sweep_svg(const SweepConfig& config, const SweepResult& result, std::ostream& out);

// Median-aggregates y per distinct x, then fits OLS on (log x, log y).
// Requires >= 3 distinct positive x values and positive medians.
FitReport fit_slope(const std::vector<std::pair<double, double>>& xy);

// Runs both sweeps (which must agree on graph, field, sizes, trials, noise
// level, Monte Carlo effort, and master seed) and reports the per-size ratio
// of tree to chain median distances with a bootstrap-over-trials 95% interval.
CompareReport compare_topologies(const SweepConfig& chain_config,
                                 const SweepConfig& tree_config);

nlohmann::json compare_to_json(const CompareReport& report);

ConvergenceConfig convergence_config_from_json(const nlohmann::json& j);

// Parses a sweep CSV back into (column x, column y) pairs by header name.
std::vector<std::pair<double, double>> read_csv_columns(std::istream& in,
                                                        const std::string& x_column,
                                                        const std::string& y_column);

// Entry points for the two binaries; both map the error taxonomy onto exit
// codes (config/argument problems -> 2, numeric/infeasibility -> 3, anything
// unrecognized -> 1).
int run_ibn_cli(int argc, char** argv);
int run_treegen_cli(int argc, char** argv);

}  // namespace ibn

#endif  // IBN_CLI_HPP_
