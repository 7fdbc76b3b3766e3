#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "doctest.h"
#include "httplib.h"
#include "json.hpp"

#include "ibn/errors.hpp"
#include "ibn/rng.hpp"
#include "ibn/treegen.hpp"

using namespace ibn;

namespace {

DtgParams base_params() {
    DtgParams p;
    p.T = 1.4;
    p.gamma = 0.2;
    p.alpha = 0.05;
    p.D = 2;
    p.B = 2;
    p.separators = {"."};
    p.eos = "<eos>";
    p.max_len = 256;
    return p;
}

int count_leaves(const TreeNode& node) {
    if (node.children.empty()) return 1;
    int total = 0;
    for (const TreeNode& child : node.children) total += count_leaves(child);
    return total;
}

bool trees_equal(const TreeNode& a, const TreeNode& b) {
    if (a.text != b.text || a.depth != b.depth || a.temperature != b.temperature ||
        a.status != b.status || a.children.size() != b.children.size()) {
        return false;
    }
    for (std::size_t c = 0; c < a.children.size(); ++c) {
        if (!trees_equal(a.children[c], b.children[c])) return false;
    }
    return true;
}

// Walks the finished tree and checks every invariant the builder guarantees.
void check_tree_invariants(const TreeNode& node, const DtgParams& params, int depth,
                           double parent_temperature) {
    CAPTURE(depth);
    CHECK(node.depth == depth);
    CHECK(node.depth <= params.D);
    CHECK(node.temperature >= 0.0);
    CHECK(node.temperature <= parent_temperature);
    for (const Token& token : node.text) CHECK(token != params.eos);
    if (node.children.empty()) {
        CHECK(node.status != NodeStatus::live);
    } else {
        CHECK(node.status == NodeStatus::live);
        CHECK(static_cast<int>(node.children.size()) == params.B);
        CHECK(node.depth < params.D);
        // Branching happens right after a separator once the segment holds
        // enough clauses, so the segment must witness both facts.
        REQUIRE(!node.text.empty());
        CHECK(std::find(params.separators.begin(), params.separators.end(), node.text.back()) !=
              params.separators.end());
        for (const TreeNode& child : node.children) {
            check_tree_invariants(child, params, depth + 1, node.temperature);
        }
    }
}

// Root-to-endpoint token sequence reconstructed from a pair's fields.
TokenSeq reconstruct(const ResponsePair& pair, const TokenSeq& diff) {
    TokenSeq out = pair.shared_prefix;
    out.insert(out.end(), diff.begin(), diff.end());
    return out;
}

}  // namespace

TEST_SUITE("treegen") {

TEST_CASE("count_clauses splits on separators and eos") {
    const TokenSeq seps = {"."};
    const Token eos = "<eos>";
    CHECK(count_clauses({"x", "x", ".", "y", "y", "<eos>"}, seps, eos) == 2);
    CHECK(count_clauses({"a", "b", ".", "c"}, seps, eos) == 2);
    CHECK(count_clauses({"a", ".", ".", "b"}, seps, eos) == 2);  // empty segment: no clause
    CHECK(count_clauses({"a", "<eos>", "b"}, seps, eos) == 2);
    CHECK(count_clauses({}, seps, eos) == 0);
    CHECK(count_clauses({"."}, seps, eos) == 0);
    CHECK(count_clauses({"<eos>"}, seps, eos) == 0);
    CHECK(count_clauses({"just", "one", "clause"}, seps, eos) == 1);
    // Multiple separator tokens.
    CHECK(count_clauses({"a", ";", "b", ".", "c"}, {".", ";"}, eos) == 3);
}

TEST_CASE("clause_threshold is ceil(clauses/D) with a floor of one") {
    const TokenSeq seps = {"."};
    const Token eos = "<eos>";
    TokenSeq nine, ten;
    for (int i = 0; i < 9; ++i) {
        if (i) nine.push_back(".");
        nine.push_back("w");
    }
    ten = nine;
    ten.push_back(".");
    ten.push_back("w");
    REQUIRE(count_clauses(nine, seps, eos) == 9);
    REQUIRE(count_clauses(ten, seps, eos) == 10);

    CHECK(clause_threshold(nine, 3, seps, eos) == 3);
    CHECK(clause_threshold(ten, 3, seps, eos) == 4);
    CHECK(clause_threshold(nine, 1, seps, eos) == 9);
    CHECK(clause_threshold(nine, 100, seps, eos) == 1);
    CHECK(clause_threshold({}, 3, seps, eos) == 1);  // floor: empty reference
    CHECK_THROWS_AS(clause_threshold(nine, 0, seps, eos), ParameterError);
}

TEST_CASE("lcs_ratio: common subsequence over the longer length") {
    CHECK(lcs_ratio({"a", "b", "c"}, {"a", "b", "c"}) == doctest::Approx(1.0));
    CHECK(lcs_ratio({"a", "b", "c"}, {"a", "x", "c"}) == doctest::Approx(2.0 / 3.0));
    CHECK(lcs_ratio({"a", "b"}, {"c", "d"}) == doctest::Approx(0.0));
    CHECK(lcs_ratio({}, {"a"}) == doctest::Approx(0.0));
    CHECK(lcs_ratio({"a"}, {}) == doctest::Approx(0.0));
    CHECK(lcs_ratio({"a"}, {"a", "a", "a"}) == doctest::Approx(1.0 / 3.0));
    // Subsequence, not substring: "a c" inside "a b c".
    CHECK(lcs_ratio({"a", "c"}, {"a", "b", "c"}) == doctest::Approx(2.0 / 3.0));
    // Symmetric in its arguments.
    const TokenSeq u = {"p", "q", "r", "s"}, v = {"q", "s", "p"};
    CHECK(lcs_ratio(u, v) == doctest::Approx(lcs_ratio(v, u)));
}

TEST_CASE("adjust_temperature: depth decay, sibling bonus, parent cap") {
    const DtgParams p = base_params();  // T=1.4, gamma=0.2, alpha=0.05
    // The root always starts at the base temperature.
    CHECK(adjust_temperature(0, 0.1, nullptr, {}, p) == doctest::Approx(1.4));
    // Depth decay without a sibling: min(parent, T - gamma*depth).
    CHECK(adjust_temperature(2, 1.2, nullptr, {"a"}, p) == doctest::Approx(1.0));
    CHECK(adjust_temperature(1, 1.4, nullptr, {"a"}, p) == doctest::Approx(1.2));
    // Sibling overlap raises the target before the parent cap applies.
    const TokenSeq sibling = {"y", "y"};
    const TokenSeq node = {"y"};
    CHECK(adjust_temperature(1, 1.4, &sibling, node, p) == doctest::Approx(1.2 + 0.05 * 0.5));
    const TokenSeq same = {"y"};
    CHECK(adjust_temperature(1, 1.4, &same, node, p) == doctest::Approx(1.25));
    // The parent's temperature is a hard ceiling.
    CHECK(adjust_temperature(1, 0.9, &same, node, p) == doctest::Approx(0.9));
    // Decay bottoms out at zero.
    CHECK(adjust_temperature(10, 5.0, nullptr, {"a"}, p) == doctest::Approx(0.0));
    CHECK_THROWS_AS(adjust_temperature(-1, 1.0, nullptr, {}, p), ParameterError);
}

TEST_CASE("FixedStreamGenerator replays the stream from the prompt offset") {
    FixedStreamGenerator gen({"a", "b", "c"}, 1, "<eos>");
    Rng rng(0);
    CHECK(gen.generate({"P"}, 1.0, 10, rng) == TokenSeq{"a", "b", "c", "<eos>"});
    CHECK(gen.generate({"P", "a"}, 1.0, 10, rng) == TokenSeq{"b", "c", "<eos>"});
    CHECK(gen.generate({"P", "a", "b", "c"}, 1.0, 10, rng) == TokenSeq{"<eos>"});
    // max_tokens truncates before the stream runs out.
    CHECK(gen.generate({"P"}, 1.0, 2, rng) == TokenSeq{"a", "b"});
    // A prefix shorter than the prompt has no well-defined position.
    CHECK_THROWS_AS(gen.generate({}, 1.0, 4, rng), GeneratorError);
    CHECK_THROWS_AS(FixedStreamGenerator({"a"}, -1, "<eos>"), ParameterError);
}

TEST_CASE("MarkovGenerator emits vocabulary tokens and is rng-deterministic") {
    const std::vector<Token> words = {"u", "v", "w"};
    MarkovGenerator gen(words, ".", "<eos>", 17);
    std::set<Token> allowed(words.begin(), words.end());
    allowed.insert(".");
    allowed.insert("<eos>");

    Rng rng_a(5), rng_b(5);
    const TokenSeq out_a = gen.generate({"prompt"}, 1.1, 64, rng_a);
    const TokenSeq out_b = gen.generate({"prompt"}, 1.1, 64, rng_b);
    CHECK(out_a == out_b);
    REQUIRE(!out_a.empty());
    for (const Token& token : out_a) CHECK(allowed.count(token) == 1);
    // Everything before a break is a word; eos only ever ends the output.
    for (std::size_t i = 0; i + 1 < out_a.size(); ++i) CHECK(out_a[i] != "<eos>");

    // Greedy decoding ignores the rng entirely, and the start state never
    // opens with a separator or eos.
    Rng rng_c(1), rng_d(999);
    const TokenSeq greedy_a = gen.generate({"prompt"}, 0.0, 16, rng_c);
    const TokenSeq greedy_b = gen.generate({"prompt"}, 0.0, 16, rng_d);
    CHECK(greedy_a == greedy_b);
    CHECK(allowed.count(greedy_a.front()) == 1);
    CHECK(greedy_a.front() != ".");
    CHECK(greedy_a.front() != "<eos>");

    CHECK_THROWS_AS(gen.generate({"p"}, -0.5, 4, rng_c), GeneratorError);
    CHECK_THROWS_AS(MarkovGenerator({}, ".", "<eos>", 0), ParameterError);
}

TEST_CASE("tree growth: branch at the first eligible separator") {
    // Stream "x x . y y <eos>": the reference has 2 clauses, so with D=2 the
    // threshold is ceil(2/2)=1 and the root branches at the ".". Both
    // children then replay "y y" and finish at eos.
    FixedStreamGenerator gen({"x", "x", ".", "y", "y", "<eos>"}, 1, "<eos>");
    DtgParams params = base_params();
    Rng rng(3);
    const ResponseTree tree = dtg_generate(gen, {"P"}, params, rng);

    CHECK(tree.prompt == TokenSeq{"P"});
    CHECK(tree.reference == TokenSeq{"x", "x", ".", "y", "y", "<eos>"});
    CHECK(tree.clause_threshold == 1);

    CHECK(tree.root.text == TokenSeq{"x", "x", "."});
    CHECK(tree.root.status == NodeStatus::live);
    CHECK(tree.root.depth == 0);
    CHECK(tree.root.temperature == doctest::Approx(1.4));
    REQUIRE(tree.root.children.size() == 2);

    const TreeNode& first = tree.root.children[0];
    const TreeNode& second = tree.root.children[1];
    for (const TreeNode* child : {&first, &second}) {
        CHECK(child->text == TokenSeq{"y", "y"});
        CHECK(child->status == NodeStatus::complete);
        CHECK(child->depth == 1);
        CHECK(child->children.empty());
    }
    // First child: plain depth decay. Second child: its single-token seed "y"
    // overlaps the finished sibling "y y" with lcs ratio 1/2.
    CHECK(first.temperature == doctest::Approx(1.2));
    CHECK(second.temperature == doctest::Approx(1.2 + 0.05 * 0.5));
}

TEST_CASE("tree growth: clause threshold blocks branching at D=1") {
    // Same stream with D=1: the threshold rises to ceil(2/1)=2, the root's
    // segment has only 1 clause at the separator, so the tree stays a single
    // completed path.
    FixedStreamGenerator gen({"x", "x", ".", "y", "y", "<eos>"}, 1, "<eos>");
    DtgParams params = base_params();
    params.D = 1;
    Rng rng(3);
    const ResponseTree tree = dtg_generate(gen, {"P"}, params, rng);

    CHECK(tree.clause_threshold == 2);
    CHECK(tree.root.text == TokenSeq{"x", "x", ".", "y", "y"});
    CHECK(tree.root.status == NodeStatus::complete);
    CHECK(tree.root.children.empty());
}

TEST_CASE("tree growth: eos drawn as a branch seed completes an empty child") {
    FixedStreamGenerator gen({"x", ".", "<eos>"}, 1, "<eos>");
    DtgParams params = base_params();
    Rng rng(3);
    const ResponseTree tree = dtg_generate(gen, {"P"}, params, rng);

    CHECK(tree.clause_threshold == 1);
    CHECK(tree.root.text == TokenSeq{"x", "."});
    REQUIRE(tree.root.children.size() == 2);
    for (const TreeNode& child : tree.root.children) {
        CHECK(child.text.empty());
        CHECK(child.status == NodeStatus::complete);
        CHECK(child.children.empty());
    }
}

TEST_CASE("tree growth: token budget abandons the path") {
    FixedStreamGenerator gen({"a", "b", "c", "d", "e", "f"}, 1, "<eos>");
    DtgParams params = base_params();
    params.max_len = 4;
    Rng rng(3);
    const ResponseTree tree = dtg_generate(gen, {"P"}, params, rng);

    CHECK(tree.root.status == NodeStatus::abandoned);
    CHECK(tree.root.text == TokenSeq{"a", "b", "c", "d"});
    CHECK(tree.root.children.empty());
}

TEST_CASE("dtg_generate validates parameters") {
    FixedStreamGenerator gen({"a", "<eos>"}, 0, "<eos>");
    Rng rng(0);
    auto expect_throw = [&](auto mutate) {
        DtgParams p = base_params();
        mutate(p);
        CHECK_THROWS_AS(dtg_generate(gen, {}, p, rng), ParameterError);
    };
    expect_throw([](DtgParams& p) { p.T = 0.0; });
    expect_throw([](DtgParams& p) { p.gamma = -0.1; });
    expect_throw([](DtgParams& p) { p.alpha = -0.1; });
    expect_throw([](DtgParams& p) { p.D = 0; });
    expect_throw([](DtgParams& p) { p.B = 1; });
    expect_throw([](DtgParams& p) { p.max_len = 0; });
    expect_throw([](DtgParams& p) { p.eos = ""; });
}

TEST_CASE("markov trees: structural and temperature invariants over many seeds") {
    for (int seed = 0; seed < 100; ++seed) {
        CAPTURE(seed);
        MarkovGenerator gen({"u", "v", "w"}, ".", "<eos>", 1000 + seed);
        DtgParams params = base_params();
        params.D = 3;
        params.B = 2;
        params.max_len = 64;
        Rng rng(seed);
        const ResponseTree tree = dtg_generate(gen, {"q"}, params, rng);

        CHECK(tree.clause_threshold >= 1);
        CHECK(tree.root.temperature == doctest::Approx(params.T));
        check_tree_invariants(tree.root, params, 0, params.T);
        CHECK(count_leaves(tree.root) <= 8);  // B^D
    }

    // Wider fan-out at a shallower depth.
    for (int seed = 0; seed < 30; ++seed) {
        CAPTURE(seed);
        MarkovGenerator gen({"u", "v", "w", "z"}, ".", "<eos>", 5000 + seed);
        DtgParams params = base_params();
        params.D = 2;
        params.B = 3;
        params.max_len = 96;
        Rng rng(seed);
        const ResponseTree tree = dtg_generate(gen, {"q"}, params, rng);
        check_tree_invariants(tree.root, params, 0, params.T);
        CHECK(count_leaves(tree.root) <= 9);
    }
}

TEST_CASE("markov trees: identical seeds give identical trees") {
    for (int seed : {2, 11, 42}) {
        CAPTURE(seed);
        DtgParams params = base_params();
        params.D = 3;
        params.max_len = 64;
        MarkovGenerator gen_a({"u", "v", "w"}, ".", "<eos>", 77);
        MarkovGenerator gen_b({"u", "v", "w"}, ".", "<eos>", 77);
        Rng rng_a(seed), rng_b(seed);
        const ResponseTree tree_a = dtg_generate(gen_a, {"q"}, params, rng_a);
        const ResponseTree tree_b = dtg_generate(gen_b, {"q"}, params, rng_b);
        CHECK(tree_a.reference == tree_b.reference);
        CHECK(tree_a.clause_threshold == tree_b.clause_threshold);
        CHECK(trees_equal(tree_a.root, tree_b.root));
    }
}

namespace {

// Hand-built tree with one unique token per node, so every pair endpoint can
// be identified from the reconstructed root-to-endpoint token sequence:
//
//   root "r" (live)
//   ├── "a" (live) ── "p" (complete), "q" (complete)
//   └── "b" (live) ── "s" (complete), "t" (abandoned)
ResponseTree pair_fixture() {
    auto node = [](Token token, int depth, NodeStatus status) {
        TreeNode n;
        n.text = {std::move(token)};
        n.depth = depth;
        n.temperature = 1.0;
        n.status = status;
        return n;
    };
    ResponseTree tree;
    tree.prompt = {"P"};
    tree.params = base_params();
    tree.clause_threshold = 1;
    tree.root = node("r", 0, NodeStatus::live);
    TreeNode c0 = node("a", 1, NodeStatus::live);
    c0.children.push_back(node("p", 2, NodeStatus::complete));
    c0.children.push_back(node("q", 2, NodeStatus::complete));
    TreeNode c1 = node("b", 1, NodeStatus::live);
    c1.children.push_back(node("s", 2, NodeStatus::complete));
    c1.children.push_back(node("t", 2, NodeStatus::abandoned));
    tree.root.children.push_back(std::move(c0));
    tree.root.children.push_back(std::move(c1));
    return tree;
}

const std::set<TokenSeq> kCompletePaths = {
    {"r", "a", "p"}, {"r", "a", "q"}, {"r", "b", "s"}};
const std::set<TokenSeq> kIncompletePaths = {
    {"r"}, {"r", "a"}, {"r", "b"}, {"r", "b", "t"}};

}  // namespace

TEST_CASE("extract_pairs: classes match endpoint statuses") {
    const ResponseTree tree = pair_fixture();

    Rng rng(9);
    const auto pairs = extract_pairs(tree, PairPolicy::half_incomplete, 8, rng);
    REQUIRE(pairs.size() == 8);

    int full = 0, cross = 0, unfinished = 0;
    for (const ResponsePair& pair : pairs) {
        const TokenSeq path_a = reconstruct(pair, pair.diff_a);
        const TokenSeq path_b = reconstruct(pair, pair.diff_b);
        CAPTURE(path_a.size());
        CHECK(path_a != path_b);  // endpoints are distinct nodes
        switch (pair.cls) {
            case PairClass::Full:
                ++full;
                CHECK(kCompletePaths.count(path_a) == 1);
                CHECK(kCompletePaths.count(path_b) == 1);
                break;
            case PairClass::Cross:
                ++cross;
                // The complete response always sits on the first slot.
                CHECK(kCompletePaths.count(path_a) == 1);
                CHECK(kIncompletePaths.count(path_b) == 1);
                break;
            case PairClass::Unfinished:
                ++unfinished;
                CHECK(kIncompletePaths.count(path_a) == 1);
                CHECK(kIncompletePaths.count(path_b) == 1);
                break;
        }
        // The shared prefix is the path down to the lowest common ancestor,
        // so it is itself a prefix of both reconstructions starting at "r".
        REQUIRE(!path_a.empty());
        CHECK(path_a.front() == "r");
        CHECK(path_b.front() == "r");
    }
    CHECK(full == 4);
    CHECK(cross == 2);
    CHECK(unfinished == 2);
}

TEST_CASE("extract_pairs: policy quotas") {
    const ResponseTree tree = pair_fixture();
    auto class_counts = [&](PairPolicy policy, int count) {
        Rng rng(31);
        std::array<int, 3> n{0, 0, 0};
        for (const ResponsePair& pair : extract_pairs(tree, policy, count, rng)) {
            n[static_cast<int>(pair.cls)]++;
        }
        return n;
    };

    CHECK(class_counts(PairPolicy::all_complete, 6) == std::array<int, 3>{6, 0, 0});
    CHECK(class_counts(PairPolicy::half_incomplete, 8) == std::array<int, 3>{4, 2, 2});
    // Integer division: below four pairs there is no room for the mixed
    // classes and everything falls back to Full.
    CHECK(class_counts(PairPolicy::half_incomplete, 3) == std::array<int, 3>{3, 0, 0});
    // Thirds with the remainder going to Full first, then Cross.
    CHECK(class_counts(PairPolicy::third_mix, 6) == std::array<int, 3>{2, 2, 2});
    CHECK(class_counts(PairPolicy::third_mix, 7) == std::array<int, 3>{3, 2, 2});
    CHECK(class_counts(PairPolicy::third_mix, 8) == std::array<int, 3>{3, 3, 2});

    // count 0 is legal and empty regardless of pool sizes.
    Rng rng(1);
    CHECK(extract_pairs(tree, PairPolicy::third_mix, 0, rng).empty());
    CHECK_THROWS_AS(extract_pairs(tree, PairPolicy::all_complete, -1, rng), ParameterError);
}

TEST_CASE("extract_pairs: deterministic under a fixed rng seed") {
    const ResponseTree tree = pair_fixture();
    Rng rng_a(123), rng_b(123);
    const auto pairs_a = extract_pairs(tree, PairPolicy::third_mix, 9, rng_a);
    const auto pairs_b = extract_pairs(tree, PairPolicy::third_mix, 9, rng_b);
    REQUIRE(pairs_a.size() == pairs_b.size());
    for (std::size_t i = 0; i < pairs_a.size(); ++i) {
        CHECK(pairs_a[i].cls == pairs_b[i].cls);
        CHECK(pairs_a[i].shared_prefix == pairs_b[i].shared_prefix);
        CHECK(pairs_a[i].diff_a == pairs_b[i].diff_a);
        CHECK(pairs_a[i].diff_b == pairs_b[i].diff_b);
    }
}

TEST_CASE("extract_pairs: infeasible pools throw") {
    // A single completed root: no second complete response, no incomplete one.
    ResponseTree lone;
    lone.prompt = {"P"};
    lone.params = base_params();
    lone.root.text = {"only"};
    lone.root.status = NodeStatus::complete;

    Rng rng(4);
    CHECK_THROWS_AS(extract_pairs(lone, PairPolicy::all_complete, 2, rng), InfeasibleError);
    CHECK_THROWS_AS(extract_pairs(lone, PairPolicy::half_incomplete, 4, rng), InfeasibleError);
    CHECK_THROWS_AS(extract_pairs(lone, PairPolicy::third_mix, 3, rng), InfeasibleError);

    // Complete leaves but only one incomplete node (the root): Unfinished
    // pairs need two distinct incomplete endpoints.
    ResponseTree shallow = pair_fixture();
    shallow.root.children[0].status = NodeStatus::complete;
    shallow.root.children[0].children.clear();
    shallow.root.children[1].status = NodeStatus::complete;
    shallow.root.children[1].children.clear();
    CHECK_THROWS_AS(extract_pairs(shallow, PairPolicy::third_mix, 3, rng), InfeasibleError);
    CHECK(extract_pairs(shallow, PairPolicy::all_complete, 4, rng).size() == 4);
}

TEST_CASE("effective_length counts diff tokens, optionally plus the prefix") {
    ResponsePair pair;
    pair.shared_prefix.assign(10, "s");
    pair.diff_a.assign(5, "a");
    pair.diff_b.assign(7, "b");
    CHECK(effective_length(pair, LengthMode::without_prefix) == 12);
    CHECK(effective_length(pair, LengthMode::with_prefix) == 22);

    ResponsePair bare;
    bare.diff_a.assign(20, "a");
    bare.diff_b.assign(30, "b");
    CHECK(effective_length(bare, LengthMode::without_prefix) == 50);
    CHECK(effective_length(bare, LengthMode::with_prefix) == 50);
}

TEST_CASE("tree JSON round-trip preserves the full tree") {
    MarkovGenerator gen({"u", "v", "w"}, ".", "<eos>", 33);
    DtgParams params = base_params();
    params.D = 3;
    params.max_len = 64;
    Rng rng(8);
    const ResponseTree tree = dtg_generate(gen, {"q", "?"}, params, rng);

    const nlohmann::json j = tree_to_json(tree);
    const ResponseTree back = tree_from_json(j);
    CHECK(back.prompt == tree.prompt);
    CHECK(back.reference == tree.reference);
    CHECK(back.clause_threshold == tree.clause_threshold);
    CHECK(back.params.T == tree.params.T);
    CHECK(back.params.gamma == tree.params.gamma);
    CHECK(back.params.alpha == tree.params.alpha);
    CHECK(back.params.D == tree.params.D);
    CHECK(back.params.B == tree.params.B);
    CHECK(back.params.separators == tree.params.separators);
    CHECK(back.params.eos == tree.params.eos);
    CHECK(back.params.max_len == tree.params.max_len);
    CHECK(trees_equal(back.root, tree.root));
}

TEST_CASE("tree JSON carries cumulative full_response_prefix per node") {
    FixedStreamGenerator gen({"x", "x", ".", "y", "y", "<eos>"}, 1, "<eos>");
    DtgParams params = base_params();
    Rng rng(3);
    const nlohmann::json j = tree_to_json(dtg_generate(gen, {"P"}, params, rng));

    CHECK(j.at("root").at("full_response_prefix").get<TokenSeq>() == TokenSeq{"x", "x", "."});
    REQUIRE(j.at("root").at("children").size() == 2);
    for (const auto& child : j.at("root").at("children")) {
        CHECK(child.at("full_response_prefix").get<TokenSeq>() ==
              TokenSeq{"x", "x", ".", "y", "y"});
        CHECK(child.at("children").is_array());
        CHECK(child.at("children").empty());
    }
}

TEST_CASE("tree JSON rejects malformed input") {
    FixedStreamGenerator gen({"x", ".", "y", "<eos>"}, 0, "<eos>");
    Rng rng(0);
    const nlohmann::json good = tree_to_json(dtg_generate(gen, {}, base_params(), rng));
    CHECK_NOTHROW(tree_from_json(good));

    nlohmann::json no_params = good;
    no_params.erase("params");
    CHECK_THROWS_AS(tree_from_json(no_params), ConfigError);

    nlohmann::json bad_status = good;
    bad_status["root"]["status"] = "zombie";
    CHECK_THROWS_AS(tree_from_json(bad_status), ConfigError);

    nlohmann::json no_text = good;
    no_text["root"].erase("text");
    CHECK_THROWS_AS(tree_from_json(no_text), ConfigError);
}

TEST_CASE("pairs_to_json: one record per pair with class names") {
    const ResponseTree tree = pair_fixture();
    Rng rng(6);
    const auto pairs = extract_pairs(tree, PairPolicy::third_mix, 6, rng);
    const nlohmann::json j = pairs_to_json(tree.prompt, pairs);

    REQUIRE(j.is_array());
    REQUIRE(j.size() == pairs.size());
    std::set<std::string> seen;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        CHECK(j[i].at("prompt").get<TokenSeq>() == tree.prompt);
        CHECK(j[i].at("shared_prefix").get<TokenSeq>() == pairs[i].shared_prefix);
        CHECK(j[i].at("diff_0").get<TokenSeq>() == pairs[i].diff_a);
        CHECK(j[i].at("diff_1").get<TokenSeq>() == pairs[i].diff_b);
        CHECK(j[i].at("class").get<std::string>() == to_string(pairs[i].cls));
        seen.insert(j[i].at("class").get<std::string>());
    }
    CHECK(seen == std::set<std::string>{"Full", "Cross", "Unfinished"});
}

TEST_CASE("pair policy and class names round-trip") {
    CHECK(pair_policy_from_string("all-complete") == PairPolicy::all_complete);
    CHECK(pair_policy_from_string("half-incomplete") == PairPolicy::half_incomplete);
    CHECK(pair_policy_from_string("third-mix") == PairPolicy::third_mix);
    CHECK_THROWS_AS(pair_policy_from_string("full-only"), ConfigError);

    CHECK(to_string(PairClass::Full) == "Full");
    CHECK(to_string(PairClass::Cross) == "Cross");
    CHECK(to_string(PairClass::Unfinished) == "Unfinished");
}

TEST_CASE("generator_from_json builds each backend") {
    Rng rng(0);

    const auto fixed = generator_from_json(
        nlohmann::json{{"type", "fixed"}, {"stream", {"a", "b"}}}, 1);
    // Default eos token: replaying past the stream end pads with "<eos>".
    CHECK(fixed->generate({"P"}, 1.0, 8, rng) == TokenSeq{"a", "b", "<eos>"});

    const nlohmann::json markov_cfg{{"type", "markov"}, {"words", {"u", "v"}}, {"seed", 9}};
    const auto markov_a = generator_from_json(markov_cfg, 0);
    const auto markov_b = generator_from_json(markov_cfg, 0);
    Rng rng_a(4), rng_b(4);
    const TokenSeq seq = markov_a->generate({"p"}, 1.0, 32, rng_a);
    CHECK(seq == markov_b->generate({"p"}, 1.0, 32, rng_b));
    // Default separator and eos are available to the chain.
    std::set<Token> allowed = {"u", "v", ".", "<eos>"};
    for (const Token& token : seq) CHECK(allowed.count(token) == 1);

    CHECK_THROWS_AS(generator_from_json(nlohmann::json{{"type", "gpt"}}, 0), ConfigError);
    CHECK_THROWS_AS(generator_from_json(nlohmann::json{{"type", "fixed"}}, 0), ConfigError);
    CHECK_THROWS_AS(generator_from_json(nlohmann::json{{"stream", {"a"}}}, 0), ConfigError);

    // An http generator with nothing listening exhausts its retries.
    const auto http = generator_from_json(
        nlohmann::json{{"type", "http"}, {"host", "http://127.0.0.1:1"}, {"retries", 0}}, 0);
    CHECK_THROWS_AS(http->generate({"p"}, 1.0, 4, rng), GeneratorError);
}

TEST_CASE("HttpGenerator: request shape, retries, and error reporting") {
    httplib::Server server;
    std::mutex mu;
    nlohmann::json seen_body;
    std::string seen_auth;
    std::atomic<int> flaky_hits{0};

    server.Post("/complete", [&](const httplib::Request& req, httplib::Response& res) {
        {
            std::lock_guard<std::mutex> lock(mu);
            seen_body = nlohmann::json::parse(req.body);
            seen_auth = req.get_header_value("Authorization");
        }
        res.set_content(nlohmann::json{{"tokens", {"ok", "done", "<eos>"}}}.dump(),
                        "application/json");
    });
    server.Post("/flaky", [&](const httplib::Request&, httplib::Response& res) {
        if (++flaky_hits <= 2) {
            res.status = 500;
            return;
        }
        res.set_content(nlohmann::json{{"tokens", {"recovered"}}}.dump(), "application/json");
    });
    server.Post("/garbage", [&](const httplib::Request&, httplib::Response& res) {
        res.set_content("not json at all", "text/plain");
    });

    const int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread server_thread([&] { server.listen_after_bind(); });
    server.wait_until_ready();
    const std::string host = "http://127.0.0.1:" + std::to_string(port);

    {
        // Happy path: tokens come back verbatim and the request carries the
        // prompt as one space-joined string plus the sampling knobs.
        setenv("IBN_TEST_API_KEY", "sekret-123", 1);
        HttpGenerator gen(host, "/complete", "IBN_TEST_API_KEY", 0);
        Rng rng(0);
        CHECK(gen.generate({"hello", "world"}, 0.7, 8, rng) ==
              TokenSeq{"ok", "done", "<eos>"});
        std::lock_guard<std::mutex> lock(mu);
        CHECK(seen_body.at("prompt").get<std::string>() == "hello world");
        CHECK(seen_body.at("temperature").get<double>() == doctest::Approx(0.7));
        CHECK(seen_body.at("max_tokens").get<int>() == 8);
        CHECK(seen_auth == "Bearer sekret-123");
        unsetenv("IBN_TEST_API_KEY");
    }
    {
        // Two failures then success: retries=2 allows three attempts.
        HttpGenerator gen(host, "/flaky", "", 2);
        Rng rng(0);
        CHECK(gen.generate({"p"}, 1.0, 4, rng) == TokenSeq{"recovered"});
        CHECK(flaky_hits.load() == 3);
    }
    {
        // retries=1 gives up after two failed attempts and says so.
        flaky_hits = 0;
        HttpGenerator gen(host, "/flaky", "", 1);
        Rng rng(0);
        try {
            gen.generate({"p"}, 1.0, 4, rng);
            FAIL("expected GeneratorError");
        } catch (const GeneratorError& e) {
            const std::string what = e.what();
            CHECK(what.find("2 attempt(s)") != std::string::npos);
            CHECK(what.find("500") != std::string::npos);
        }
        CHECK(flaky_hits.load() == 2);
    }
    {
        // A 200 with an unparseable body is still an error.
        HttpGenerator gen(host, "/garbage", "", 0);
        Rng rng(0);
        try {
            gen.generate({"p"}, 1.0, 4, rng);
            FAIL("expected GeneratorError");
        } catch (const GeneratorError& e) {
            CHECK(std::string(e.what()).find("bad response body") != std::string::npos);
        }
    }

    server.stop();
    server_thread.join();

    CHECK_THROWS_AS(HttpGenerator("http://127.0.0.1:1", "/x", "", -1), ParameterError);
}

}  // TEST_SUITE
