#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ilr/synth.hpp"
#include "ilr/trace.hpp"
#include "support.hpp"

using namespace ilr;

namespace {

InterleavedTrace pairs_trace(std::vector<StepPair> pairs) {
  return make_trace(pairs, TraceMode::CloseEnded);
}

}  // namespace

TEST_CASE("minimal well-formed trace parses to one pair") {
  const auto out = parse_trace("<think>t1</think><answer>a1</answer>");
  REQUIRE(out.format_ok);
  REQUIRE(out.trace);
  CHECK(out.trace->pair_count() == 1);
  CHECK(out.trace->pair(0) == StepPair{"t1", "a1"});
  CHECK(out.diagnostics.empty());
}

TEST_CASE("trace ending with think is rejected") {
  const auto out = parse_trace("<think>t1</think><answer>a1</answer><think>t2</think>");
  CHECK_FALSE(out.format_ok);
  CHECK_FALSE(out.trace);
  CHECK_FALSE(out.diagnostics.empty());
}

TEST_CASE("answer before think is rejected") {
  CHECK_FALSE(parse_trace("<answer>a1</answer><think>t1</think>").format_ok);
}

TEST_CASE("two-segment orderings: only think then answer is accepted") {
  // Every ordered choice of two blocks drawn from {think, answer}.
  const std::string blocks[2] = {"<think>x</think>", "<answer>y</answer>"};
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      const bool expect = a == 0 && b == 1;
      CHECK(parse_trace(blocks[a] + blocks[b]).format_ok == expect);
    }
  }
}

TEST_CASE("whitespace between blocks is tolerated, prose is not") {
  CHECK(parse_trace("  <think> t </think>\n<answer>a</answer>\n").format_ok);
  CHECK_FALSE(parse_trace("Sure! <think>t</think><answer>a</answer>").format_ok);
  CHECK_FALSE(parse_trace("<think>t</think> so <answer>a</answer>").format_ok);
  CHECK_FALSE(parse_trace("<think>t</think><answer>a</answer> done").format_ok);
}

TEST_CASE("inner text is trimmed") {
  const auto out = parse_trace("<think>\n  left  \n</think><answer> b </answer>");
  REQUIRE(out.format_ok);
  CHECK(out.trace->pair(0) == StepPair{"left", "b"});
}

TEST_CASE("nested, unclosed and case-variant tags are violations") {
  for (const char* raw : {"<think><think>t</think></think><answer>a</answer>",
                          "<think>t<answer>a</answer>",
                          "<think>t</think><answer>a",
                          "<THINK>t</THINK><answer>a</answer>",
                          "<think>t</think><answer>a</answer></answer>",
                          "", "   ", "<think>t</think>"}) {
    const auto out = parse_trace(raw);
    CHECK_MESSAGE(!out.format_ok, raw);
    CHECK_MESSAGE(!out.diagnostics.empty(), raw);
  }
}

TEST_CASE("diagnostics carry byte offsets") {
  const auto out = parse_trace("<think>t</think>xx<answer>a</answer>");
  REQUIRE_FALSE(out.diagnostics.empty());
  CHECK(out.diagnostics.front().offset == 16);
}

TEST_CASE("terminal answer survives an earlier violation") {
  const auto out = parse_trace("<answer>x</answer><think>t</think><answer> B </answer>");
  CHECK_FALSE(out.format_ok);
  REQUIRE(out.terminal_answer);
  CHECK(*out.terminal_answer == "B");
  CHECK_FALSE(parse_trace("<think>t</think><answer>a</answer><think>").terminal_answer);
}

TEST_CASE("serialize emits tag blocks without padding") {
  CHECK(serialize_trace(pairs_trace({{"t1", "a1"}})) == "<think>t1</think><answer>a1</answer>");
  CHECK(serialize_trace(pairs_trace({{"t1", "a1"}, {"t2", "a2"}})) ==
        "<think>t1</think><answer>a1</answer><think>t2</think><answer>a2</answer>");
}

TEST_CASE("empty think text round-trips") {
  const auto t = pairs_trace({{"", "a"}});
  const auto raw = serialize_trace(t);
  CHECK(raw == "<think></think><answer>a</answer>");
  const auto back = parse_trace(raw);
  REQUIRE(back.trace);
  CHECK(*back.trace == t);
}

TEST_CASE("serialize rejects invalid traces") {
  InterleavedTrace bad;
  CHECK_THROWS_AS(serialize_trace(bad), std::invalid_argument);
  bad.segments = {{SegmentKind::Answer, "a"}, {SegmentKind::Think, "t"}};
  CHECK_THROWS_AS(serialize_trace(bad), std::invalid_argument);
  bad.segments = {{SegmentKind::Think, "t"}};
  CHECK_THROWS_AS(serialize_trace(bad), std::invalid_argument);
  bad.segments = {{SegmentKind::Think, "<answer>"}, {SegmentKind::Answer, "a"}};
  CHECK_THROWS_AS(serialize_trace(bad), std::invalid_argument);
  bad.segments = {{SegmentKind::Think, " t"}, {SegmentKind::Answer, "a"}};
  CHECK(validate_trace(bad).has_value());
}

TEST_CASE("split into intermediate and final pairs") {
  auto s = split_intermediate_final(pairs_trace({{"t1", "a1"}}));
  CHECK(s.intermediate.empty());
  CHECK(s.final == StepPair{"t1", "a1"});

  s = split_intermediate_final(pairs_trace({{"t1", "a1"}, {"t2", "a2"}, {"t3", "a3"}}));
  REQUIRE(s.intermediate.size() == 2);
  CHECK(s.intermediate[0] == StepPair{"t1", "a1"});
  CHECK(s.intermediate[1] == StepPair{"t2", "a2"});
  CHECK(s.final == StepPair{"t3", "a3"});
}

TEST_CASE("gold close-ended trace with four options splits 4 + 1") {
  const auto c = gen_case(11, QuestionKind::Single, 0.1);
  REQUIRE(c.options.size() == 4);
  const auto s = split_intermediate_final(c.gold_trace);
  CHECK(s.intermediate.size() == 4);
}

TEST_CASE("property: round trip over random valid traces") {
  Rng rng(7);
  for (int i = 0; i < 500; ++i) {
    const auto t = testing::random_trace(rng);
    const auto out = parse_trace(serialize_trace(t), t.mode);
    REQUIRE(out.format_ok);
    CHECK(*out.trace == t);
  }
}

TEST_CASE("property: accepted traces alternate think/answer") {
  Rng rng(8);
  for (int i = 0; i < 300; ++i) {
    const auto raw = serialize_trace(testing::random_trace(rng));
    const auto out = parse_trace(raw);
    REQUIRE(out.format_ok);
    for (std::size_t k = 0; k < out.trace->segments.size(); ++k) {
      CHECK(out.trace->segments[k].kind == (k % 2 == 0 ? SegmentKind::Think : SegmentKind::Answer));
    }
  }
}

TEST_CASE("property: tag mutations are violations with diagnostics") {
  Rng rng(9);
  for (int i = 0; i < 500; ++i) {
    const auto raw = serialize_trace(testing::random_trace(rng));
    const auto mutated = testing::mutate_tags(raw, rng);
    const auto out = parse_trace(mutated);
    CHECK_MESSAGE(!out.format_ok, mutated);
    CHECK_FALSE(out.diagnostics.empty());
  }
}

TEST_CASE("property: parser is total on arbitrary bytes") {
  Rng rng(10);
  const std::string alphabet = "<>/thinkanswer \n\t\x01\xff";
  for (int i = 0; i < 2000; ++i) {
    std::string raw;
    const auto n = uniform_index(rng, 60);
    for (std::size_t k = 0; k < n; ++k) raw += alphabet[uniform_index(rng, alphabet.size())];
    ParsedOutcome out;
    CHECK_NOTHROW(out = parse_trace(raw));
    CHECK((out.format_ok || !out.diagnostics.empty()));
    CHECK(out.format_ok == out.trace.has_value());
  }
}
