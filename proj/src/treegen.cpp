#include "ibn/treegen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "httplib.h"

#include "ibn/errors.hpp"

namespace ibn {

namespace {

void check_params(const DtgParams& params) {
    if (!(params.T > 0.0)) throw ParameterError("DtgParams: T must be positive");
    if (params.gamma < 0.0) throw ParameterError("DtgParams: gamma must be >= 0");
    if (params.alpha < 0.0) throw ParameterError("DtgParams: alpha must be >= 0");
    if (params.D < 1) throw ParameterError("DtgParams: D must be >= 1");
    if (params.B < 2) throw ParameterError("DtgParams: B must be >= 2");
    if (params.max_len < 1) throw ParameterError("DtgParams: max_len must be >= 1");
    if (params.eos.empty()) throw ParameterError("DtgParams: eos token must be non-empty");
}

bool contains(const TokenSeq& tokens, const Token& token) {
    return std::find(tokens.begin(), tokens.end(), token) != tokens.end();
}

std::string join(const TokenSeq& tokens) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) out += ' ';
        out += tokens[i];
    }
    return out;
}

}  // namespace

FixedStreamGenerator::FixedStreamGenerator(TokenSeq stream, int prompt_len, Token eos)
    : stream_(std::move(stream)), prompt_len_(prompt_len), eos_(std::move(eos)) {
    if (prompt_len_ < 0) throw ParameterError("FixedStreamGenerator: prompt_len must be >= 0");
}

TokenSeq FixedStreamGenerator::generate(const TokenSeq& prefix, double /*temperature*/,
                                        int max_tokens, Rng& /*rng*/) {
    TokenSeq out;
    int pos = static_cast<int>(prefix.size()) - prompt_len_;
    if (pos < 0) throw GeneratorError("FixedStreamGenerator: prefix shorter than the prompt");
    for (int i = 0; i < max_tokens; ++i, ++pos) {
        const Token& token =
            pos < static_cast<int>(stream_.size()) ? stream_[pos] : eos_;
        out.push_back(token);
        if (token == eos_) break;
    }
    return out;
}

MarkovGenerator::MarkovGenerator(std::vector<Token> words, Token separator, Token eos,
                                 std::uint64_t seed, double separator_bias, double eos_bias)
    : words_(std::move(words)), separator_(std::move(separator)), eos_(std::move(eos)) {
    if (words_.empty()) throw ParameterError("MarkovGenerator: need at least one word token");
    // Source states: start (row 0), each word, the separator. Target columns:
    // each word, the separator, EOS.
    const int rows = static_cast<int>(words_.size()) + 2;
    const int cols = static_cast<int>(words_.size()) + 2;
    Rng rng(seed);
    logits_.assign(rows, std::vector<double>(cols, 0.0));
    for (auto& row : logits_) {
        for (double& logit : row) logit = rng.next_normal(0.0, 1.0);
    }
    const int sep_col = static_cast<int>(words_.size());
    const int eos_col = sep_col + 1;
    for (int r = 0; r < rows; ++r) {
        logits_[r][sep_col] += separator_bias;
        logits_[r][eos_col] += eos_bias;
    }
    // The start state and the separator state should not emit EOS or another
    // separator immediately; keep clauses non-empty.
    logits_[0][sep_col] -= 8.0;
    logits_[0][eos_col] -= 8.0;
    logits_[rows - 1][sep_col] -= 8.0;
    logits_[rows - 1][eos_col] -= 8.0;
}

int MarkovGenerator::state_of(const Token& token) const {
    for (std::size_t i = 0; i < words_.size(); ++i) {
        if (words_[i] == token) return static_cast<int>(i) + 1;
    }
    if (token == separator_) return static_cast<int>(words_.size()) + 1;
    return 0;  // unknown tokens (e.g. prompt words) act like the start state
}

TokenSeq MarkovGenerator::generate(const TokenSeq& prefix, double temperature, int max_tokens,
                                   Rng& rng) {
    if (temperature < 0.0) throw GeneratorError("MarkovGenerator: negative temperature");
    TokenSeq out;
    Token prev = prefix.empty() ? Token{} : prefix.back();
    const int sep_col = static_cast<int>(words_.size());
    const int eos_col = sep_col + 1;
    for (int i = 0; i < max_tokens; ++i) {
        const std::vector<double>& row = logits_[state_of(prev)];
        int choice;
        if (temperature < 1e-9) {
            choice = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
        } else {
            const double m = *std::max_element(row.begin(), row.end());
            std::vector<double> probs(row.size());
            double z = 0.0;
            for (std::size_t c = 0; c < row.size(); ++c) {
                probs[c] = std::exp((row[c] - m) / temperature);
                z += probs[c];
            }
            double u = rng.next_double() * z;
            choice = static_cast<int>(row.size()) - 1;
            for (std::size_t c = 0; c < probs.size(); ++c) {
                u -= probs[c];
                if (u <= 0.0) {
                    choice = static_cast<int>(c);
                    break;
                }
            }
        }
        Token token;
        if (choice == eos_col) {
            token = eos_;
        } else if (choice == sep_col) {
            token = separator_;
        } else {
            token = words_[choice];
        }
        out.push_back(token);
        if (token == eos_) break;
        prev = token;
    }
    return out;
}

HttpGenerator::HttpGenerator(std::string host, std::string path, std::string api_key_env,
                             int retries)
    : host_(std::move(host)),
      path_(std::move(path)),
      api_key_env_(std::move(api_key_env)),
      retries_(retries) {
    if (retries_ < 0) throw ParameterError("HttpGenerator: retries must be >= 0");
}

TokenSeq HttpGenerator::generate(const TokenSeq& prefix, double temperature, int max_tokens,
                                 Rng& /*rng*/) {
    nlohmann::json body;
    body["prompt"] = join(prefix);
    body["temperature"] = temperature;
    body["max_tokens"] = max_tokens;

    httplib::Client client(host_);
    client.set_connection_timeout(5);
    httplib::Headers headers;
    if (!api_key_env_.empty()) {
        if (const char* key = std::getenv(api_key_env_.c_str())) {
            headers.emplace("Authorization", std::string("Bearer ") + key);
        }
    }

    std::string last_error = "no attempt made";
    for (int attempt = 0; attempt <= retries_; ++attempt) {
        auto res = client.Post(path_, headers, body.dump(), "application/json");
        if (!res) {
            last_error = "transport error " + httplib::to_string(res.error());
            continue;
        }
        if (res->status != 200) {
            last_error = "HTTP status " + std::to_string(res->status);
            continue;
        }
        try {
            const nlohmann::json parsed = nlohmann::json::parse(res->body);
            return parsed.at("tokens").get<TokenSeq>();
        } catch (const nlohmann::json::exception& e) {
            last_error = std::string("bad response body: ") + e.what();
        }
    }
    throw GeneratorError("HttpGenerator: " + last_error + " after " +
                         std::to_string(retries_ + 1) + " attempt(s)");
}

int count_clauses(const TokenSeq& text, const TokenSeq& separators, const Token& eos) {
    int clauses = 0;
    bool in_clause = false;
    for (const Token& token : text) {
        if (token == eos || contains(separators, token)) {
            in_clause = false;
        } else if (!in_clause) {
            in_clause = true;
            ++clauses;
        }
    }
    return clauses;
}

int clause_threshold(const TokenSeq& reference, int D, const TokenSeq& separators,
                     const Token& eos) {
    if (D < 1) throw ParameterError("clause_threshold: D must be >= 1");
    const int clauses = count_clauses(reference, separators, eos);
    return std::max(1, (clauses + D - 1) / D);
}

double lcs_ratio(const TokenSeq& a, const TokenSeq& b) {
    if (a.empty() || b.empty()) return 0.0;
    const std::size_t n = a.size(), m = b.size();
    std::vector<int> prev(m + 1, 0), cur(m + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        for (std::size_t j = 1; j <= m; ++j) {
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return static_cast<double>(prev[m]) / static_cast<double>(std::max(n, m));
}

double adjust_temperature(int depth, double parent_temperature, const TokenSeq* sibling_text,
                          const TokenSeq& node_text, const DtgParams& params) {
    if (depth < 0) throw ParameterError("adjust_temperature: negative depth");
    if (depth == 0) return params.T;
    const double t_v = std::max(params.T - params.gamma * depth, 0.0);
    const double bonus =
        sibling_text != nullptr ? params.alpha * lcs_ratio(node_text, *sibling_text) : 0.0;
    return std::min(parent_temperature, t_v + bonus);
}

namespace {

struct DtgBuilder {
    GeneratorInterface& generator;
    const TokenSeq& prompt;
    const DtgParams& params;
    Rng& rng;
    int eps;

    Token draw(const TokenSeq& full_prefix, double temperature) {
        const TokenSeq out = generator.generate(full_prefix, temperature, 1, rng);
        if (out.empty()) {
            throw GeneratorError("dtg_generate: generator returned no tokens for max_tokens=1");
        }
        return out.front();
    }

    // Extends node token by token until EOS (complete), the per-path token
    // budget (abandoned), or a branch. On entry full_prefix holds the prompt
    // plus all segments above node; node's own text (the seed token, or empty
    // for the root) is pushed here and the whole contribution popped on exit.
    void grow(TreeNode& node, TokenSeq& full_prefix) {
        const std::size_t entry_size = full_prefix.size();
        full_prefix.insert(full_prefix.end(), node.text.begin(), node.text.end());
        while (true) {
            if (static_cast<int>(full_prefix.size() - prompt.size()) >= params.max_len) {
                node.status = NodeStatus::abandoned;
                break;
            }
            const Token token = draw(full_prefix, node.temperature);
            if (token == params.eos) {
                node.status = NodeStatus::complete;
                break;
            }
            node.text.push_back(token);
            full_prefix.push_back(token);
            if (contains(params.separators, token) && node.depth < params.D &&
                count_clauses(node.text, params.separators, params.eos) >= eps) {
                branch(node, full_prefix);
                break;
            }
        }
        full_prefix.resize(entry_size);
    }

    void branch(TreeNode& node, TokenSeq& full_prefix) {
        // Seed all B children eagerly with independent next-token draws at the
        // branching node's temperature, then expand them depth-first; a later
        // sibling's temperature sees the finished text of the previous one.
        node.children.resize(params.B);
        for (TreeNode& child : node.children) {
            child.depth = node.depth + 1;
            const Token seed = draw(full_prefix, node.temperature);
            if (seed == params.eos) {
                child.status = NodeStatus::complete;  // empty continuation
            } else {
                child.text.push_back(seed);
            }
        }
        for (int c = 0; c < params.B; ++c) {
            TreeNode& child = node.children[c];
            const TokenSeq* sibling = c > 0 ? &node.children[c - 1].text : nullptr;
            child.temperature =
                adjust_temperature(child.depth, node.temperature, sibling, child.text, params);
            if (child.status == NodeStatus::complete) continue;
            grow(child, full_prefix);
        }
    }
};

}  // namespace

ResponseTree dtg_generate(GeneratorInterface& generator, const TokenSeq& prompt,
                          const DtgParams& params, Rng& rng) {
    check_params(params);

    ResponseTree tree;
    tree.prompt = prompt;
    tree.params = params;
    // Straight reference completion fixes the clause threshold.
    tree.reference = generator.generate(prompt, params.T, params.max_len, rng);
    tree.clause_threshold =
        clause_threshold(tree.reference, params.D, params.separators, params.eos);

    DtgBuilder builder{generator, prompt, params, rng, tree.clause_threshold};
    tree.root.depth = 0;
    tree.root.temperature = params.T;
    TokenSeq full_prefix = prompt;
    builder.grow(tree.root, full_prefix);
    return tree;
}

namespace {

struct FlatNode {
    const TreeNode* node;
    std::vector<int> path;  // child indices from the root
};

void flatten(const TreeNode& node, std::vector<int>& path, std::vector<FlatNode>& out) {
    out.push_back({&node, path});
    for (std::size_t c = 0; c < node.children.size(); ++c) {
        path.push_back(static_cast<int>(c));
        flatten(node.children[c], path, out);
        path.pop_back();
    }
}

ResponsePair make_pair(const ResponseTree& tree, const FlatNode& a, const FlatNode& b,
                       PairClass cls) {
    std::size_t lca = 0;
    while (lca < a.path.size() && lca < b.path.size() && a.path[lca] == b.path[lca]) ++lca;

    ResponsePair pair;
    pair.cls = cls;
    // Shared prefix: segments from the root down to (and including) the LCA.
    const TreeNode* walk = &tree.root;
    pair.shared_prefix.insert(pair.shared_prefix.end(), walk->text.begin(), walk->text.end());
    for (std::size_t i = 0; i < lca; ++i) {
        walk = &walk->children[a.path[i]];
        pair.shared_prefix.insert(pair.shared_prefix.end(), walk->text.begin(),
                                  walk->text.end());
    }
    auto tail = [&](const FlatNode& endpoint, TokenSeq& out) {
        const TreeNode* node = walk;
        for (std::size_t i = lca; i < endpoint.path.size(); ++i) {
            node = &node->children[endpoint.path[i]];
            out.insert(out.end(), node->text.begin(), node->text.end());
        }
    };
    tail(a, pair.diff_a);
    tail(b, pair.diff_b);
    return pair;
}

}  // namespace

std::vector<ResponsePair> extract_pairs(const ResponseTree& tree, PairPolicy policy, int count,
                                        Rng& rng) {
    if (count < 0) throw ParameterError("extract_pairs: count must be >= 0");
    std::vector<FlatNode> all;
    std::vector<int> path;
    flatten(tree.root, path, all);

    std::vector<FlatNode> complete, incomplete;
    for (const FlatNode& f : all) {
        if (f.node->status == NodeStatus::complete) {
            complete.push_back(f);
        } else {
            incomplete.push_back(f);  // abandoned leaves and live interior prefixes
        }
    }

    int quota_cross = 0, quota_unfinished = 0;
    switch (policy) {
        case PairPolicy::all_complete:
            break;
        case PairPolicy::half_incomplete:
            quota_cross = count / 4;
            quota_unfinished = count / 4;
            break;
        case PairPolicy::third_mix:
            // Even thirds; any remainder goes to Full first, then Cross.
            quota_cross = count / 3 + (count % 3 == 2 ? 1 : 0);
            quota_unfinished = count / 3;
            break;
    }
    const int quota_full = count - quota_cross - quota_unfinished;

    if (quota_full > 0 && complete.size() < 2) {
        throw InfeasibleError("extract_pairs: need >= 2 complete responses for Full pairs");
    }
    if (quota_cross > 0 && (complete.empty() || incomplete.empty())) {
        throw InfeasibleError("extract_pairs: need complete and incomplete responses for Cross");
    }
    if (quota_unfinished > 0 && incomplete.size() < 2) {
        throw InfeasibleError("extract_pairs: need >= 2 incomplete responses for Unfinished");
    }

    auto draw_distinct = [&](const std::vector<FlatNode>& pool) {
        std::size_t i, j;
        do {
            i = rng.next_below(pool.size());
            j = rng.next_below(pool.size());
        } while (i == j);
        return std::pair<const FlatNode*, const FlatNode*>{&pool[i], &pool[j]};
    };

    std::vector<ResponsePair> pairs;
    pairs.reserve(count);
    for (int i = 0; i < quota_full; ++i) {
        const auto [a, b] = draw_distinct(complete);
        pairs.push_back(make_pair(tree, *a, *b, PairClass::Full));
    }
    for (int i = 0; i < quota_cross; ++i) {
        const FlatNode& a = complete[rng.next_below(complete.size())];
        const FlatNode& b = incomplete[rng.next_below(incomplete.size())];
        pairs.push_back(make_pair(tree, a, b, PairClass::Cross));
    }
    for (int i = 0; i < quota_unfinished; ++i) {
        const auto [a, b] = draw_distinct(incomplete);
        pairs.push_back(make_pair(tree, *a, *b, PairClass::Unfinished));
    }
    return pairs;
}

int effective_length(const ResponsePair& pair, LengthMode mode) {
    const int diffs = static_cast<int>(pair.diff_a.size() + pair.diff_b.size());
    return mode == LengthMode::without_prefix
               ? diffs
               : diffs + static_cast<int>(pair.shared_prefix.size());
}

namespace {

const char* status_name(NodeStatus status) {
    switch (status) {
        case NodeStatus::live: return "live";
        case NodeStatus::complete: return "complete";
        case NodeStatus::abandoned: return "abandoned";
    }
    return "unknown";
}

NodeStatus status_from(const std::string& name) {
    if (name == "live") return NodeStatus::live;
    if (name == "complete") return NodeStatus::complete;
    if (name == "abandoned") return NodeStatus::abandoned;
    throw ConfigError("tree JSON: unknown node status " + name);
}

nlohmann::json node_to_json(const TreeNode& node, TokenSeq& prefix) {
    prefix.insert(prefix.end(), node.text.begin(), node.text.end());
    nlohmann::json j;
    j["text"] = node.text;
    j["temperature"] = node.temperature;
    j["status"] = status_name(node.status);
    j["full_response_prefix"] = prefix;
    j["children"] = nlohmann::json::array();
    for (const TreeNode& child : node.children) {
        j["children"].push_back(node_to_json(child, prefix));
    }
    prefix.resize(prefix.size() - node.text.size());
    return j;
}

TreeNode node_from_json(const nlohmann::json& j, int depth) {
    TreeNode node;
    node.text = j.at("text").get<TokenSeq>();
    node.temperature = j.at("temperature").get<double>();
    node.status = status_from(j.at("status").get<std::string>());
    node.depth = depth;
    for (const auto& child : j.value("children", nlohmann::json::array())) {
        node.children.push_back(node_from_json(child, depth + 1));
    }
    return node;
}

}  // namespace

nlohmann::json tree_to_json(const ResponseTree& tree) {
    nlohmann::json j;
    j["prompt"] = tree.prompt;
    j["reference"] = tree.reference;
    j["clause_threshold"] = tree.clause_threshold;
    j["params"] = {{"T", tree.params.T},         {"gamma", tree.params.gamma},
                   {"alpha", tree.params.alpha}, {"D", tree.params.D},
                   {"B", tree.params.B},         {"separators", tree.params.separators},
                   {"eos", tree.params.eos},     {"max_len", tree.params.max_len}};
    TokenSeq prefix;
    j["root"] = node_to_json(tree.root, prefix);
    return j;
}

ResponseTree tree_from_json(const nlohmann::json& j) {
    try {
        ResponseTree tree;
        tree.prompt = j.at("prompt").get<TokenSeq>();
        tree.reference = j.value("reference", TokenSeq{});
        tree.clause_threshold = j.value("clause_threshold", 1);
        const auto& p = j.at("params");
        tree.params.T = p.at("T").get<double>();
        tree.params.gamma = p.at("gamma").get<double>();
        tree.params.alpha = p.at("alpha").get<double>();
        tree.params.D = p.at("D").get<int>();
        tree.params.B = p.at("B").get<int>();
        tree.params.separators = p.at("separators").get<TokenSeq>();
        tree.params.eos = p.at("eos").get<Token>();
        tree.params.max_len = p.at("max_len").get<int>();
        tree.root = node_from_json(j.at("root"), 0);
        return tree;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("tree JSON: ") + e.what());
    }
}

nlohmann::json pairs_to_json(const TokenSeq& prompt, const std::vector<ResponsePair>& pairs) {
    nlohmann::json arr = nlohmann::json::array();
    for (const ResponsePair& pair : pairs) {
        arr.push_back({{"prompt", prompt},
                       {"shared_prefix", pair.shared_prefix},
                       {"diff_0", pair.diff_a},
                       {"diff_1", pair.diff_b},
                       {"class", to_string(pair.cls)}});
    }
    return arr;
}

PairPolicy pair_policy_from_string(const std::string& name) {
    if (name == "all-complete") return PairPolicy::all_complete;
    if (name == "half-incomplete") return PairPolicy::half_incomplete;
    if (name == "third-mix") return PairPolicy::third_mix;
    throw ConfigError("unknown pair policy: " + name);
}

std::string to_string(PairClass cls) {
    switch (cls) {
        case PairClass::Full: return "Full";
        case PairClass::Cross: return "Cross";
        case PairClass::Unfinished: return "Unfinished";
    }
    return "unknown";
}

std::unique_ptr<GeneratorInterface> generator_from_json(const nlohmann::json& j,
                                                        int prompt_len) {
    try {
        const std::string type = j.at("type").get<std::string>();
        if (type == "fixed") {
            return std::make_unique<FixedStreamGenerator>(j.at("stream").get<TokenSeq>(),
                                                          prompt_len,
                                                          j.value("eos", Token{"<eos>"}));
        }
        if (type == "markov") {
            return std::make_unique<MarkovGenerator>(
                j.at("words").get<std::vector<Token>>(), j.value("separator", Token{"."}),
                j.value("eos", Token{"<eos>"}), j.value("seed", std::uint64_t{0}),
                j.value("separator_bias", 0.5), j.value("eos_bias", 0.25));
        }
        if (type == "http") {
            return std::make_unique<HttpGenerator>(
                j.at("host").get<std::string>(), j.value("path", std::string{"/complete"}),
                j.value("api_key_env", std::string{}), j.value("retries", 2));
        }
        throw ConfigError("unknown generator type: " + type);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("generator JSON: ") + e.what());
    }
}

}  // namespace ibn
