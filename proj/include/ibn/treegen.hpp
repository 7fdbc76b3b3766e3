#ifndef IBN_TREEGEN_HPP_
#define IBN_TREEGEN_HPP_

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "ibn/rng.hpp"

namespace ibn {

using Token = std::string;
using TokenSeq = std::vector<Token>;

// Pluggable text generator. Must return at most max_tokens newly generated
// tokens, stopping right after emitting the EOS token, and be deterministic
// given (prefix, temperature, rng state).
class GeneratorInterface {
public:
    virtual ~GeneratorInterface() = default;
    virtual TokenSeq generate(const TokenSeq& prefix, double temperature, int max_tokens,
                              Rng& rng) = 0;
};

// Replays a fixed token stream: the emitted token depends only on how many
// response tokens the prefix already holds (prefix length minus the prompt
// length), so sibling branches replay identically. Past the end it emits EOS.
class FixedStreamGenerator : public GeneratorInterface {
public:
    FixedStreamGenerator(TokenSeq stream, int prompt_len, Token eos);
    TokenSeq generate(const TokenSeq& prefix, double temperature, int max_tokens,
                      Rng& rng) override;

private:
    TokenSeq stream_;
    int prompt_len_;
    Token eos_;
};

// Order-1 Markov chain over a small word alphabet plus separator and EOS
// tokens, with temperature-scaled logits. Keeps the whole treegen module
// testable offline.
class MarkovGenerator : public GeneratorInterface {
public:
    MarkovGenerator(std::vector<Token> words, Token separator, Token eos, std::uint64_t seed,
                    double separator_bias = 0.5, double eos_bias = 0.25);
    TokenSeq generate(const TokenSeq& prefix, double temperature, int max_tokens,
                      Rng& rng) override;

private:
    int state_of(const Token& token) const;

    std::vector<Token> words_;
    Token separator_;
    Token eos_;
    std::vector<std::vector<double>> logits_;  // rows: start + words + separator
};

// POSTs {prompt, temperature, max_tokens} to a completions endpoint and expects
// {"tokens": [...]} back. The API key (optional) is read from the environment
// variable named by api_key_env and sent as a bearer token. Failures after the
// configured retries surface as generator errors.
class HttpGenerator : public GeneratorInterface {
public:
    HttpGenerator(std::string host, std::string path, std::string api_key_env, int retries);
    TokenSeq generate(const TokenSeq& prefix, double temperature, int max_tokens,
                      Rng& rng) override;

private:
    std::string host_;
    std::string path_;
    std::string api_key_env_;
    int retries_;
};

struct DtgParams {
    double T = 1.4;       // root temperature
    double gamma = 0.2;   // per-depth discounter
    double alpha = 0.05;  // sibling-similarity temperature bonus
    int D = 3;            // max tree depth
    int B = 2;            // branching factor
    TokenSeq separators = {"."};
    Token eos = "<eos>";
    int max_len = 256;  // max response tokens per root-to-leaf path
};

enum class NodeStatus { live, complete, abandoned };

struct TreeNode {
    TokenSeq text;  // this node's segment only
    int depth = 0;
    double temperature = 0.0;
    NodeStatus status = NodeStatus::live;
    std::vector<TreeNode> children;
};

struct ResponseTree {
    TokenSeq prompt;
    TreeNode root;
    DtgParams params;
    int clause_threshold = 1;
    TokenSeq reference;  // the straight completion used to set the threshold
};

enum class PairClass { Full, Cross, Unfinished };

struct ResponsePair {
    TokenSeq shared_prefix;  // concatenated segments down to the LCA
    TokenSeq diff_a;
    TokenSeq diff_b;
    PairClass cls = PairClass::Full;
};

enum class PairPolicy { all_complete, half_incomplete, third_mix };

// Number of non-empty separator-delimited segments (EOS acts as a boundary).
int count_clauses(const TokenSeq& text, const TokenSeq& separators, const Token& eos);

// ceil(clauses(reference)/D), floored at 1.
int clause_threshold(const TokenSeq& reference, int D, const TokenSeq& separators,
                     const Token& eos);

// Longest-common-subsequence length over max(|a|, |b|); 0 when either is empty.
double lcs_ratio(const TokenSeq& a, const TokenSeq& b);

// Node temperature rule: the root gets T; a node at depth d gets
// min(parent temperature, max(T - gamma*d, 0) + alpha * lcs_ratio(node text,
// sibling text)), the bonus applying only when an elder sibling exists.
double adjust_temperature(int depth, double parent_temperature, const TokenSeq* sibling_text,
                          const TokenSeq& node_text, const DtgParams& params);

// Dynamic tree generation: depth-first token-by-token expansion. A node
// branches into B children (seeded eagerly with independent next-token draws
// at the node's temperature) when the sampled token is a separator, the node's
// own segment has accumulated at least the clause threshold, and depth < D.
// Paths terminate complete at EOS or abandoned at max_len. Interior nodes keep
// status live.
ResponseTree dtg_generate(GeneratorInterface& generator, const TokenSeq& prompt,
                          const DtgParams& params, Rng& rng);

// Uniform pair extraction under a class-quota policy. Complete endpoints are
// complete leaves; incomplete endpoints are abandoned leaves and interior
// nodes (their accumulated prefix is an unfinished response). For Cross pairs
// the complete endpoint is diff_a's side.
std::vector<ResponsePair> extract_pairs(const ResponseTree& tree, PairPolicy policy, int count,
                                        Rng& rng);

// Annotation-cost accounting: token count of a pair, counting the shared
// prefix once (with_prefix) or ignoring it (without_prefix).
enum class LengthMode { with_prefix, without_prefix };
int effective_length(const ResponsePair& pair, LengthMode mode);

nlohmann::json tree_to_json(const ResponseTree& tree);
ResponseTree tree_from_json(const nlohmann::json& j);
nlohmann::json pairs_to_json(const TokenSeq& prompt, const std::vector<ResponsePair>& pairs);

PairPolicy pair_policy_from_string(const std::string& name);
std::string to_string(PairClass cls);

// Builds a generator from its JSON spec ({"type": "fixed"|"markov"|"http", ...});
// prompt_len seeds the fixed generator's position bookkeeping.
std::unique_ptr<GeneratorInterface> generator_from_json(const nlohmann::json& j, int prompt_len);

}  // namespace ibn

#endif  // IBN_TREEGEN_HPP_
