#include "ibn/cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"

#include "ibn/datasets.hpp"
#include "ibn/errors.hpp"
#include "ibn/inference.hpp"
#include "ibn/treegen.hpp"

namespace ibn {

namespace {

std::string g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string topology_name(Topology t) { return t == Topology::chain ? "chain" : "tree"; }

Topology topology_from_string(const std::string& name) {
    if (name == "chain") return Topology::chain;
    if (name == "tree") return Topology::tree;
    throw ConfigError("unknown topology: " + name + " (expected chain or tree)");
}

nlohmann::json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("bad JSON in " + path + ": " + e.what());
    }
}

void validate_sweep_config(const SweepConfig& config) {
    if (config.sizes.empty()) throw ConfigError("sweep config: sizes must be non-empty");
    for (std::size_t i = 0; i < config.sizes.size(); ++i) {
        if (config.sizes[i] < 1) throw ConfigError("sweep config: sizes must be >= 1");
        if (i > 0 && config.sizes[i] <= config.sizes[i - 1]) {
            throw ConfigError("sweep config: sizes must be strictly increasing");
        }
    }
    if (config.trials < 1) throw ConfigError("sweep config: trials must be >= 1");
    if (!(config.beta_hp > 0.0)) throw ConfigError("sweep config: beta_hp must be positive");
    if (config.mc_pairs < 1) throw ConfigError("sweep config: mc_pairs must be >= 1");
    if (config.threads < 1) throw ConfigError("sweep config: threads must be >= 1");
    if (config.topology == Topology::tree) {
        if (config.tree_B < 2) throw ConfigError("sweep config: tree_B must be >= 2");
        if (config.tree_gamma < 0.0) throw ConfigError("sweep config: tree_gamma must be >= 0");
    }
}

void write_sweep_row(std::ostream& out, const SweepRow& row) {
    out << topology_name(row.topology) << ',' << row.size << ',' << row.trial << ','
        << g17(row.distance) << ',' << g17(row.stderr_) << '\n';
}

std::vector<double> per_size_medians(const SweepConfig& config, const SweepResult& result) {
    std::vector<double> medians;
    medians.reserve(config.sizes.size());
    for (std::size_t si = 0; si < config.sizes.size(); ++si) {
        std::vector<double> vals;
        for (int ti = 0; ti < config.trials; ++ti) {
            vals.push_back(result.rows[si * config.trials + ti].distance);
        }
        medians.push_back(median(std::move(vals)));
    }
    return medians;
}

}  // namespace

GraphSpec graph_spec_from_json(const nlohmann::json& j) {
    try {
        GraphSpec spec;
        spec.family = graph_family_from_string(j.at("family").get<std::string>());
        spec.n = j.at("n").get<int>();
        spec.I = j.value("I", spec.I);
        spec.alpha = j.value("alpha", spec.alpha);
        spec.base_beta = j.value("base_beta", spec.base_beta);
        spec.var_floor = j.value("var_floor", spec.var_floor);
        if (spec.n < 2) throw ConfigError("graph spec: n must be >= 2");
        if (!(spec.I > 0.0)) throw ConfigError("graph spec: I must be positive");
        if (!(spec.base_beta > 0.0)) throw ConfigError("graph spec: base_beta must be positive");
        if (spec.var_floor < 0.0) throw ConfigError("graph spec: var_floor must be >= 0");
        return spec;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("graph spec: ") + e.what());
    }
}

FieldSpec field_spec_from_json(const nlohmann::json& j) {
    try {
        FieldSpec spec;
        spec.type = j.value("type", spec.type);
        spec.sigma = j.value("sigma", spec.sigma);
        spec.n_clusters = j.value("n_clusters", spec.n_clusters);
        spec.cluster_sd = j.value("cluster_sd", spec.cluster_sd);
        spec.noise_sd = j.value("noise_sd", spec.noise_sd);
        if (spec.type != "gaussian" && spec.type != "clustered") {
            throw ConfigError("field spec: unknown type " + spec.type);
        }
        return spec;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("field spec: ") + e.what());
    }
}

SweepConfig sweep_config_from_json(const nlohmann::json& j) {
    try {
        SweepConfig config;
        config.graph = graph_spec_from_json(j.at("graph"));
        if (j.contains("field")) config.field = field_spec_from_json(j.at("field"));
        config.topology = topology_from_string(j.value("topology", std::string{"chain"}));
        config.sizes = j.at("sizes").get<std::vector<int>>();
        config.trials = j.value("trials", config.trials);
        config.beta_hp = j.value("beta_hp", config.beta_hp);
        config.mc_pairs = j.value("mc_pairs", config.mc_pairs);
        config.master_seed = j.value("master_seed", config.master_seed);
        config.tree_B = j.value("tree_B", config.tree_B);
        config.tree_gamma = j.value("tree_gamma", config.tree_gamma);
        config.threads = j.value("threads", config.threads);
        validate_sweep_config(config);
        return config;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("sweep config: ") + e.what());
    }
}

RewardField make_field(const FieldSpec& spec, const ResponseSpace& space, Rng& rng) {
    if (spec.type == "gaussian") return gaussian_field(space, spec.sigma, rng);
    if (spec.type == "clustered") {
        return clustered_field(space, spec.n_clusters, spec.cluster_sd, spec.noise_sd, rng);
    }
    throw ConfigError("field spec: unknown type " + spec.type);
}

SweepResult run_sweep(const SweepConfig& config, std::ostream& csv_out) {
    validate_sweep_config(config);

    Rng master(config.master_seed);
    Rng graph_rng = master.fork(0xA11CE);
    const IbnGraph graph = generate_ib_graph(config.graph, graph_rng);
    Rng field_rng = master.fork(0xF1E1D);
    const RewardField field = make_field(config.field, graph.space, field_rng);

    if (config.topology == Topology::tree) {
        const double assumed = 3.0 * config.tree_B * std::log(static_cast<double>(config.tree_B));
        if (static_cast<double>(config.sizes.front()) < assumed) {
            std::cerr << "warning: smallest size " << config.sizes.front()
                      << " is below 3*B*ln(B) ~= " << assumed
                      << "; the tree-topology analysis assumes larger datasets\n";
        }
    }

    const int trials = config.trials;
    const int total = static_cast<int>(config.sizes.size()) * trials;

    SweepResult result;
    result.rows.resize(total);

    csv_out << "topology,size,trial,distance,stderr\n";
    csv_out.flush();

    std::atomic<int> next_cell{0};
    std::atomic<bool> stop{false};
    std::mutex io_mu;
    std::vector<char> done(total, 0);
    int next_write = 0;
    std::exception_ptr first_error;

    auto run_cell = [&](int si, int ti) {
        const int size = config.sizes[si];
        const auto t0 = std::chrono::steady_clock::now();
        Rng cell_rng = master.fork(static_cast<std::uint64_t>(si)).fork(
            static_cast<std::uint64_t>(ti));
        PreferenceDataset dataset =
            config.topology == Topology::chain
                ? sample_chain_dataset(graph.space, field, size, config.beta_hp, cell_rng)
                : sample_tree_dataset(graph, field, config.tree_B, config.tree_gamma, size,
                                      config.beta_hp, cell_rng, nullptr);
        const IbnGraph attached = attach_preferences(graph, dataset);
        Rng mc_rng = cell_rng.fork(0xD157);
        const auto [distance, stderr_val] =
            mean_inference_distance(attached, config.mc_pairs, mc_rng);

        SweepRow row;
        row.topology = config.topology;
        row.size = size;
        row.trial = ti;
        row.distance = distance;
        row.stderr_ = stderr_val;
        row.wall_time =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return row;
    };

    auto worker = [&]() {
        while (!stop.load(std::memory_order_relaxed)) {
            const int k = next_cell.fetch_add(1, std::memory_order_relaxed);
            if (k >= total) break;
            const int si = k / trials;
            const int ti = k % trials;
            try {
                SweepRow row;
                try {
                    row = run_cell(si, ti);
                } catch (const InfeasibleError& e) {
                    throw InfeasibleError("cell size=" + std::to_string(config.sizes[si]) +
                                          " trial=" + std::to_string(ti) + ": " + e.what());
                }
                std::lock_guard<std::mutex> lock(io_mu);
                result.rows[k] = row;
                done[k] = 1;
                // Flush every finished row whose predecessors are all written,
                // keeping the byte stream independent of worker scheduling.
                bool wrote = false;
                while (next_write < total && done[next_write]) {
                    write_sweep_row(csv_out, result.rows[next_write]);
                    ++next_write;
                    wrote = true;
                }
                if (wrote) csv_out.flush();
            } catch (...) {
                std::lock_guard<std::mutex> lock(io_mu);
                if (!first_error) first_error = std::current_exception();
                stop.store(true, std::memory_order_relaxed);
            }
        }
    };

    const int n_workers = std::min(config.threads, total);
    if (n_workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(n_workers);
        for (int t = 0; t < n_workers; ++t) pool.emplace_back(worker);
        for (std::thread& t : pool) t.join();
    }

    if (first_error) std::rethrow_exception(first_error);
    return result;
}

nlohmann::json sweep_summary(const SweepConfig& config, const SweepResult& result) {
    // Everything here must be schedule- and thread-count-independent: no
    // timings, no worker counts.
    nlohmann::json j;
    j["topology"] = topology_name(config.topology);
    j["graph"] = {{"family", to_string(config.graph.family)},
                  {"n", config.graph.n},
                  {"I", config.graph.I},
                  {"alpha", config.graph.alpha},
                  {"base_beta", config.graph.base_beta},
                  {"var_floor", config.graph.var_floor}};
    j["sizes"] = config.sizes;
    j["trials"] = config.trials;
    j["beta_hp"] = config.beta_hp;
    j["mc_pairs"] = config.mc_pairs;
    j["master_seed"] = config.master_seed;
    j["median_distance"] = per_size_medians(config, result);
    return j;
}

void write_sweep_svg(const SweepConfig& config, const SweepResult& result, std::ostream& out) {
    const std::vector<double> medians = per_size_medians(config, result);
    std::vector<double> lx, ly;
    for (std::size_t si = 0; si < config.sizes.size(); ++si) {
        lx.push_back(std::log10(static_cast<double>(config.sizes[si])));
        ly.push_back(std::log10(std::max(medians[si], 1e-12)));
    }
    double x_lo = *std::min_element(lx.begin(), lx.end());
    double x_hi = *std::max_element(lx.begin(), lx.end());
    double y_lo = *std::min_element(ly.begin(), ly.end());
    double y_hi = *std::max_element(ly.begin(), ly.end());
    if (x_hi - x_lo < 1e-12) { x_lo -= 0.5; x_hi += 0.5; }
    if (y_hi - y_lo < 1e-12) { y_lo -= 0.5; y_hi += 0.5; }

    const double width = 640, height = 440, margin = 60;
    auto px = [&](double v) { return margin + (v - x_lo) / (x_hi - x_lo) * (width - 2 * margin); };
    auto py = [&](double v) {
        return height - margin - (v - y_lo) / (y_hi - y_lo) * (height - 2 * margin);
    };
    auto f2 = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.2f", v);
        return std::string(buf);
    };
    auto f3 = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.3g", v);
        return std::string(buf);
    };

    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<line x1=\"" << f2(margin) << "\" y1=\"" << f2(height - margin) << "\" x2=\""
        << f2(width - margin) << "\" y2=\"" << f2(height - margin)
        << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << f2(margin) << "\" y1=\"" << f2(margin) << "\" x2=\"" << f2(margin)
        << "\" y2=\"" << f2(height - margin) << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << f2(width / 2) << "\" y=\"24\" text-anchor=\"middle\" "
           "font-family=\"sans-serif\" font-size=\"14\">"
        << topology_name(config.topology)
        << " median inference distance vs dataset size (log-log)</text>\n";
    out << "<text x=\"" << f2(width / 2) << "\" y=\"" << f2(height - 16)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">log10 "
           "size: "
        << f3(x_lo) << " to " << f3(x_hi) << "</text>\n";
    out << "<text x=\"16\" y=\"" << f2(height / 2)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
           "transform=\"rotate(-90 16 "
        << f2(height / 2) << ")\">log10 distance: " << f3(y_lo) << " to " << f3(y_hi)
        << "</text>\n";
    out << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < lx.size(); ++i) {
        if (i) out << ' ';
        out << f2(px(lx[i])) << ',' << f2(py(ly[i]));
    }
    out << "\"/>\n";
    for (std::size_t i = 0; i < lx.size(); ++i) {
        out << "<circle cx=\"" << f2(px(lx[i])) << "\" cy=\"" << f2(py(ly[i]))
            << "\" r=\"3\" fill=\"steelblue\"/>\n";
    }
    out << "</svg>\n";
}

FitReport fit_slope(const std::vector<std::pair<double, double>>& xy) {
    if (xy.empty()) throw ParameterError("fit_slope: no data");
    std::map<double, std::vector<double>> groups;
    for (const auto& [x, y] : xy) groups[x].push_back(y);
    std::vector<double> lx, ly;
    for (auto& [x, ys] : groups) {
        if (!(x > 0.0)) throw ParameterError("fit_slope: x values must be positive for log-log");
        const double m = median(std::move(ys));
        if (!(m > 0.0)) throw ParameterError("fit_slope: median y must be positive for log-log");
        lx.push_back(std::log(x));
        ly.push_back(std::log(m));
    }
    return ols_fit(lx, ly);
}

namespace {

void require_match(bool ok, const std::string& what) {
    if (!ok) throw ConfigError("compare: configs differ in " + what);
}

}  // namespace

CompareReport compare_topologies(const SweepConfig& chain_config,
                                 const SweepConfig& tree_config) {
    const GraphSpec &ga = chain_config.graph, &gb = tree_config.graph;
    require_match(ga.family == gb.family && ga.n == gb.n && ga.I == gb.I &&
                      ga.alpha == gb.alpha && ga.base_beta == gb.base_beta &&
                      ga.var_floor == gb.var_floor,
                  "graph spec");
    const FieldSpec &fa = chain_config.field, &fb = tree_config.field;
    require_match(fa.type == fb.type && fa.sigma == fb.sigma &&
                      fa.n_clusters == fb.n_clusters && fa.cluster_sd == fb.cluster_sd &&
                      fa.noise_sd == fb.noise_sd,
                  "field spec");
    require_match(chain_config.sizes == tree_config.sizes, "sizes");
    require_match(chain_config.trials == tree_config.trials, "trials");
    require_match(chain_config.beta_hp == tree_config.beta_hp, "beta_hp");
    require_match(chain_config.mc_pairs == tree_config.mc_pairs, "mc_pairs");
    require_match(chain_config.master_seed == tree_config.master_seed, "master_seed");

    std::ostringstream chain_sink, tree_sink;
    const SweepResult chain_res = run_sweep(chain_config, chain_sink);
    const SweepResult tree_res = run_sweep(tree_config, tree_sink);

    const int trials = chain_config.trials;
    constexpr int kBootstrap = 1000;

    CompareReport report;
    for (std::size_t si = 0; si < chain_config.sizes.size(); ++si) {
        std::vector<double> chain_vals, tree_vals;
        for (int ti = 0; ti < trials; ++ti) {
            chain_vals.push_back(chain_res.rows[si * trials + ti].distance);
            tree_vals.push_back(tree_res.rows[si * trials + ti].distance);
        }
        CompareRow row;
        row.size = chain_config.sizes[si];
        row.chain_median = median(chain_vals);
        row.tree_median = median(tree_vals);
        if (!(row.chain_median > 0.0)) {
            throw NumericError("compare: chain median distance is not positive at size " +
                               std::to_string(row.size));
        }
        row.ratio = row.tree_median / row.chain_median;

        Rng boot = Rng(chain_config.master_seed).fork(0xB007).fork(si);
        std::vector<double> ratios;
        ratios.reserve(kBootstrap);
        for (int b = 0; b < kBootstrap; ++b) {
            std::vector<double> rc, rt;
            rc.reserve(trials);
            rt.reserve(trials);
            for (int t = 0; t < trials; ++t) {
                rc.push_back(chain_vals[boot.next_below(trials)]);
            }
            for (int t = 0; t < trials; ++t) {
                rt.push_back(tree_vals[boot.next_below(trials)]);
            }
            const double mc = median(std::move(rc));
            if (!(mc > 0.0)) continue;  // degenerate resample; skip
            ratios.push_back(median(std::move(rt)) / mc);
        }
        if (ratios.empty()) throw NumericError("compare: bootstrap degenerate at every draw");
        std::sort(ratios.begin(), ratios.end());
        row.ci_low = ratios[static_cast<std::size_t>(0.025 * (ratios.size() - 1))];
        row.ci_high = ratios[static_cast<std::size_t>(0.975 * (ratios.size() - 1))];
        report.rows.push_back(row);
    }
    return report;
}

nlohmann::json compare_to_json(const CompareReport& report) {
    nlohmann::json rows = nlohmann::json::array();
    for (const CompareRow& row : report.rows) {
        rows.push_back({{"size", row.size},
                        {"chain_median", row.chain_median},
                        {"tree_median", row.tree_median},
                        {"ratio", row.ratio},
                        {"ci_low", row.ci_low},
                        {"ci_high", row.ci_high}});
    }
    return nlohmann::json{{"rows", rows}};
}

ConvergenceConfig convergence_config_from_json(const nlohmann::json& j) {
    try {
        ConvergenceConfig config;
        config.n = j.value("n", config.n);
        config.beta = j.value("beta", config.beta);
        config.field_sigma = j.value("field_sigma", config.field_sigma);
        config.sizes = j.at("sizes").get<std::vector<int>>();
        config.seeds = j.value("seeds", config.seeds);
        config.master_seed = j.value("master_seed", config.master_seed);
        return config;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("convergence config: ") + e.what());
    }
}

std::vector<std::pair<double, double>> read_csv_columns(std::istream& in,
                                                        const std::string& x_column,
                                                        const std::string& y_column) {
    auto split = [](const std::string& line) {
        std::vector<std::string> fields;
        std::string field;
        std::istringstream ss(line);
        while (std::getline(ss, field, ',')) fields.push_back(field);
        return fields;
    };
    auto strip_cr = [](std::string& s) {
        if (!s.empty() && s.back() == '\r') s.pop_back();
    };

    std::string line;
    if (!std::getline(in, line)) throw ConfigError("CSV input is empty");
    strip_cr(line);
    const std::vector<std::string> header = split(line);
    int ix = -1, iy = -1;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == x_column) ix = static_cast<int>(i);
        if (header[i] == y_column) iy = static_cast<int>(i);
    }
    if (ix < 0) throw ConfigError("CSV has no column named " + x_column);
    if (iy < 0) throw ConfigError("CSV has no column named " + y_column);

    auto parse_num = [](const std::string& s, int line_no) {
        char* end = nullptr;
        const double v = std::strtod(s.c_str(), &end);
        if (end == s.c_str() || *end != '\0') {
            throw ConfigError("CSV line " + std::to_string(line_no) + ": not a number: " + s);
        }
        return v;
    };

    std::vector<std::pair<double, double>> out;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        strip_cr(line);
        if (line.empty()) continue;
        const std::vector<std::string> fields = split(line);
        if (static_cast<int>(fields.size()) <= std::max(ix, iy)) {
            throw ConfigError("CSV line " + std::to_string(line_no) + ": too few fields");
        }
        out.emplace_back(parse_num(fields[ix], line_no), parse_num(fields[iy], line_no));
    }
    return out;
}

namespace {

DtgParams dtg_params_from_json(const nlohmann::json& j) {
    try {
        DtgParams params;
        params.T = j.value("T", params.T);
        params.gamma = j.value("gamma", params.gamma);
        params.alpha = j.value("alpha", params.alpha);
        params.D = j.value("D", params.D);
        params.B = j.value("B", params.B);
        if (j.contains("separators")) params.separators = j.at("separators").get<TokenSeq>();
        params.eos = j.value("eos", params.eos);
        params.max_len = j.value("max_len", params.max_len);
        return params;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("dtg params: ") + e.what());
    }
}

int cmd_sweep(const std::string& config_path, const std::string& out_path,
              const std::string& svg_path, int threads_override) {
    SweepConfig config = sweep_config_from_json(load_json(config_path));
    if (threads_override > 0) config.threads = threads_override;

    std::ofstream csv(out_path);
    if (!csv) throw ConfigError("cannot open output file " + out_path);
    const auto t0 = std::chrono::steady_clock::now();
    const SweepResult result = run_sweep(config, csv);
    csv.close();

    const std::string summary_path = out_path + ".summary.json";
    std::ofstream summary(summary_path);
    if (!summary) throw ConfigError("cannot open output file " + summary_path);
    summary << sweep_summary(config, result).dump(2) << '\n';
    summary.close();

    if (!svg_path.empty()) {
        std::ofstream svg(svg_path);
        if (!svg) throw ConfigError("cannot open output file " + svg_path);
        write_sweep_svg(config, result, svg);
    }

    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cerr << "sweep: " << result.rows.size() << " cells in " << g17(elapsed) << " s\n";
    return 0;
}

int cmd_fit(const std::string& in_path, const std::string& x_column,
            const std::string& y_column) {
    std::ifstream in(in_path);
    if (!in) throw ConfigError("cannot open " + in_path);
    const auto xy = read_csv_columns(in, x_column, y_column);
    const FitReport report = fit_slope(xy);
    nlohmann::json j{{"slope", report.slope},
                     {"intercept", report.intercept},
                     {"r_squared", report.r_squared},
                     {"half_width", report.half_width}};
    std::cout << j.dump(2) << '\n';
    return 0;
}

int cmd_compare(const std::string& chain_path, const std::string& tree_path) {
    const SweepConfig chain_config = sweep_config_from_json(load_json(chain_path));
    const SweepConfig tree_config = sweep_config_from_json(load_json(tree_path));
    const CompareReport report = compare_topologies(chain_config, tree_config);
    std::cout << compare_to_json(report).dump(2) << '\n';
    return 0;
}

int cmd_converge(const std::string& config_path) {
    const ConvergenceConfig config = convergence_config_from_json(load_json(config_path));
    const std::vector<ConvergenceRow> rows = convergence_experiment(config);
    std::cout << "size,seed,tv,sup_gap_err\n";
    for (const ConvergenceRow& row : rows) {
        std::cout << row.size << ',' << row.seed << ',' << g17(row.tv) << ','
                  << g17(row.sup_gap_err) << '\n';
    }
    return 0;
}

int cmd_strfun(const std::string& graph_path, int max_m) {
    if (max_m < 1) throw ConfigError("strfun: --max-m must be >= 1");
    const nlohmann::json j = load_json(graph_path);
    IbnGraph graph;
    if (j.contains("ib_edges")) {
        graph = graph_from_json(j);
    } else {
        // Allow a generator spec instead of an explicit edge list.
        const GraphSpec spec = graph_spec_from_json(j);
        Rng rng(j.value("seed", std::uint64_t{0}));
        graph = generate_ib_graph(spec, rng);
    }
    std::vector<int> ms;
    for (int m = 1; m <= max_m && m <= graph.space.n; m *= 2) ms.push_back(m);
    const StrfunMode mode = graph.space.n <= 10 ? StrfunMode::exact : StrfunMode::heuristic;
    const StructuralProfile profile = measure_structural_profile(graph, ms, mode);
    std::cout << "m,f\n";
    for (const auto& [m, f] : profile.points) {
        std::cout << m << ',' << g17(f) << '\n';
    }
    return 0;
}

int cmd_treegen_run(const std::string& config_path, const std::string& out_path) {
    const nlohmann::json j = load_json(config_path);
    TokenSeq prompt;
    try {
        if (j.contains("prompt")) prompt = j.at("prompt").get<TokenSeq>();
        if (!j.contains("generator")) throw ConfigError("treegen config: missing generator");
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("treegen config: ") + e.what());
    }
    const DtgParams params =
        j.contains("params") ? dtg_params_from_json(j.at("params")) : DtgParams{};
    auto generator = generator_from_json(j.at("generator"), static_cast<int>(prompt.size()));
    Rng rng(j.value("seed", std::uint64_t{0}));
    const ResponseTree tree = dtg_generate(*generator, prompt, params, rng);

    std::ofstream out(out_path);
    if (!out) throw ConfigError("cannot open output file " + out_path);
    out << tree_to_json(tree).dump(2) << '\n';
    return 0;
}

int cmd_treegen_pairs(const std::string& tree_path, const std::string& policy_name, int count,
                      std::uint64_t seed) {
    const ResponseTree tree = tree_from_json(load_json(tree_path));
    const PairPolicy policy = pair_policy_from_string(policy_name);
    Rng rng(seed);
    const std::vector<ResponsePair> pairs = extract_pairs(tree, policy, count, rng);
    std::cout << pairs_to_json(tree.prompt, pairs).dump(2) << '\n';
    return 0;
}

template <typename Fn>
int guard_errors(Fn&& fn) {
    try {
        return fn();
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const ParameterError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const InfeasibleError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const UnreachableError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const UnidentifiableError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const GeneratorError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "unexpected error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace

int run_ibn_cli(int argc, char** argv) {
    CLI::App app{"induced-Bayesian-network reward-generalization lab"};
    app.require_subcommand(1);

    std::string config_path, out_path, svg_path;
    std::string in_path, x_column = "size", y_column = "distance";
    std::string chain_path, tree_path, graph_path, converge_path;
    int max_m = 0;
    int threads = 0;

    CLI::App* sweep = app.add_subcommand(
        "sweep", "sample preference datasets and measure mean inference distance per size");
    sweep->add_option("--config", config_path, "sweep config JSON")->required();
    sweep->add_option("--out", out_path, "output CSV path")->required();
    sweep->add_option("--svg", svg_path, "optional SVG line chart path");
    sweep->add_option("--threads", threads, "worker threads (overrides the config value)");

    CLI::App* fit = app.add_subcommand("fit", "log-log OLS slope over a sweep CSV");
    fit->add_option("--in", in_path, "input CSV path")->required();
    fit->add_option("--x", x_column, "x column name (default size)");
    fit->add_option("--y", y_column, "y column name (default distance)");

    CLI::App* compare =
        app.add_subcommand("compare", "per-size tree/chain distance ratios with bootstrap CI");
    compare->add_option("--chain", chain_path, "chain sweep config JSON")->required();
    compare->add_option("--tree", tree_path, "tree sweep config JSON")->required();

    CLI::App* converge =
        app.add_subcommand("converge", "policy convergence experiment (CSV to stdout)");
    converge->add_option("--config", converge_path, "convergence config JSON")->required();

    CLI::App* strfun =
        app.add_subcommand("strfun", "structural function profile at doubling granularities");
    strfun->add_option("--graph", graph_path, "graph JSON (edge list or generator spec)")
        ->required();
    strfun->add_option("--max-m", max_m, "largest granularity to probe")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    return guard_errors([&]() {
        if (sweep->parsed()) return cmd_sweep(config_path, out_path, svg_path, threads);
        if (fit->parsed()) return cmd_fit(in_path, x_column, y_column);
        if (compare->parsed()) return cmd_compare(chain_path, tree_path);
        if (converge->parsed()) return cmd_converge(converge_path);
        if (strfun->parsed()) return cmd_strfun(graph_path, max_m);
        throw ConfigError("no subcommand given");
    });
}

int run_treegen_cli(int argc, char** argv) {
    CLI::App app{"dynamic response-tree generation over a pluggable text generator"};
    app.require_subcommand(1);

    std::string config_path, out_path = "tree.json", tree_path, policy_name;
    int count = 0;
    std::uint64_t seed = 0;

    CLI::App* run = app.add_subcommand("run", "generate a response tree");
    run->add_option("--config", config_path, "generation config JSON")->required();
    run->add_option("--out", out_path, "output tree JSON path")->required();

    CLI::App* pairs = app.add_subcommand("pairs", "extract preference pairs from a tree");
    pairs->add_option("--tree", tree_path, "tree JSON path")->required();
    pairs
        ->add_option("--policy", policy_name,
                     "all-complete | half-incomplete | third-mix")
        ->required();
    pairs->add_option("--count", count, "number of pairs")->required();
    pairs->add_option("--seed", seed, "extraction seed (default 0)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    return guard_errors([&]() {
        if (run->parsed()) return cmd_treegen_run(config_path, out_path);
        if (pairs->parsed()) return cmd_treegen_pairs(tree_path, policy_name, count, seed);
        throw ConfigError("no subcommand given");
    });
}

}  // namespace ibn
