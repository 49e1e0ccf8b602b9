#include "ilr/trace.hpp"

#include <array>
#include <stdexcept>

namespace ilr {
namespace {

enum class Tag { ThinkOpen, ThinkClose, AnswerOpen, AnswerClose };

constexpr std::array<std::string_view, 4> kTagText = {"<think>", "</think>", "<answer>",
                                                      "</answer>"};

struct Token {
  bool is_tag = false;
  Tag tag = Tag::ThinkOpen;
  std::size_t offset = 0;
  std::string_view text;
};

std::vector<Token> lex(std::string_view raw) {
  std::vector<Token> tokens;
  std::size_t text_start = 0;
  std::size_t i = 0;
  while (i < raw.size()) {
    bool matched = false;
    if (raw[i] == '<') {
      for (std::size_t t = 0; t < kTagText.size(); ++t) {
        if (raw.substr(i, kTagText[t].size()) == kTagText[t]) {
          if (i > text_start) {
            tokens.push_back({false, Tag::ThinkOpen, text_start, raw.substr(text_start, i - text_start)});
          }
          tokens.push_back({true, static_cast<Tag>(t), i, kTagText[t]});
          i += kTagText[t].size();
          text_start = i;
          matched = true;
          break;
        }
      }
    }
    if (!matched) ++i;
  }
  if (text_start < raw.size()) {
    tokens.push_back({false, Tag::ThinkOpen, text_start, raw.substr(text_start)});
  }
  return tokens;
}

bool all_space(std::string_view s) {
  for (char c : s) {
    if (!is_ascii_space(c)) return false;
  }
  return true;
}

std::string describe(const Token& t) {
  if (!t.is_tag) return "text";
  return std::string(kTagText[static_cast<std::size_t>(t.tag)]);
}

bool contains_marker(std::string_view s) {
  for (auto m : kTagText) {
    if (s.find(m) != std::string_view::npos) return true;
  }
  return false;
}

std::optional<std::string> find_terminal_answer(std::string_view raw) {
  const auto close = raw.rfind(kTagText[3]);
  if (close == std::string_view::npos) return std::nullopt;
  if (!all_space(raw.substr(close + kTagText[3].size()))) return std::nullopt;
  const auto open = raw.rfind(kTagText[2], close);
  if (open == std::string_view::npos) return std::nullopt;
  const auto body = raw.substr(open + kTagText[2].size(), close - open - kTagText[2].size());
  if (contains_marker(body)) return std::nullopt;
  return std::string(trim_ascii(body));
}

}  // namespace

bool is_ascii_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::string_view trim_ascii(std::string_view s) {
  while (!s.empty() && is_ascii_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_ascii_space(s.back())) s.remove_suffix(1);
  return s;
}

const char* to_string(TraceMode mode) {
  switch (mode) {
    case TraceMode::CloseEnded: return "close_ended";
    case TraceMode::OpenEnded: return "open_ended";
    case TraceMode::Binary: return "binary";
  }
  return "unknown";
}

ParsedOutcome parse_trace(std::string_view raw, TraceMode mode) {
  ParsedOutcome out;
  out.terminal_answer = find_terminal_answer(raw);

  // Expected sequence per pair: <think> [text] </think> <answer> [text] </answer>,
  // with whitespace-only text allowed between blocks.
  enum class State { BeforeThink, InThink, AfterThink, InAnswer };
  State state = State::BeforeThink;
  InterleavedTrace trace;
  trace.mode = mode;
  std::string_view body;

  auto fail = [&](std::size_t offset, std::string message) {
    out.diagnostics.push_back({offset, std::move(message)});
  };

  const auto tokens = lex(raw);
  for (const auto& tok : tokens) {
    if (!tok.is_tag) {
      if (state == State::InThink || state == State::InAnswer) {
        body = tok.text;
        continue;
      }
      if (!all_space(tok.text)) {
        fail(tok.offset, "non-whitespace text outside tags");
        break;
      }
      continue;
    }
    const auto expected = [&] {
      switch (state) {
        case State::BeforeThink: return Tag::ThinkOpen;
        case State::InThink: return Tag::ThinkClose;
        case State::AfterThink: return Tag::AnswerOpen;
        case State::InAnswer: return Tag::AnswerClose;
      }
      return Tag::ThinkOpen;
    }();
    if (tok.tag != expected) {
      fail(tok.offset, "unexpected " + describe(tok) + ", expected " +
                           std::string(kTagText[static_cast<std::size_t>(expected)]));
      break;
    }
    switch (state) {
      case State::BeforeThink:
        body = {};
        state = State::InThink;
        break;
      case State::InThink:
        trace.segments.push_back({SegmentKind::Think, std::string(trim_ascii(body))});
        state = State::AfterThink;
        break;
      case State::AfterThink:
        body = {};
        state = State::InAnswer;
        break;
      case State::InAnswer:
        trace.segments.push_back({SegmentKind::Answer, std::string(trim_ascii(body))});
        state = State::BeforeThink;
        break;
    }
  }

  if (out.diagnostics.empty()) {
    if (state != State::BeforeThink) {
      fail(raw.size(), state == State::AfterThink ? "think fragment not followed by an answer"
                                                  : "unclosed tag at end of input");
    } else if (trace.segments.empty()) {
      fail(0, "no think/answer pair found");
    }
  }

  out.format_ok = out.diagnostics.empty();
  if (out.format_ok) out.trace = std::move(trace);
  return out;
}

std::optional<std::string> validate_trace(const InterleavedTrace& trace) {
  const auto& segs = trace.segments;
  if (segs.size() < 2) return "trace needs at least one think/answer pair";
  if (segs.size() % 2 != 0) return "trace must end with an answer segment";
  for (std::size_t i = 0; i < segs.size(); ++i) {
    const auto want = (i % 2 == 0) ? SegmentKind::Think : SegmentKind::Answer;
    if (segs[i].kind != want) {
      return "segment " + std::to_string(i) + " breaks think/answer alternation";
    }
    if (contains_marker(segs[i].text)) {
      return "segment " + std::to_string(i) + " contains a tag marker";
    }
    if (trim_ascii(segs[i].text).size() != segs[i].text.size()) {
      return "segment " + std::to_string(i) + " has surrounding whitespace";
    }
  }
  return std::nullopt;
}

std::string serialize_trace(const InterleavedTrace& trace) {
  if (auto err = validate_trace(trace)) throw std::invalid_argument(*err);
  std::string out;
  for (const auto& seg : trace.segments) {
    const bool think = seg.kind == SegmentKind::Think;
    out += think ? kTagText[0] : kTagText[2];
    out += seg.text;
    out += think ? kTagText[1] : kTagText[3];
  }
  return out;
}

InterleavedTrace make_trace(const std::vector<StepPair>& pairs, TraceMode mode) {
  InterleavedTrace trace;
  trace.mode = mode;
  trace.segments.reserve(pairs.size() * 2);
  for (const auto& p : pairs) {
    trace.segments.push_back({SegmentKind::Think, p.think});
    trace.segments.push_back({SegmentKind::Answer, p.answer});
  }
  return trace;
}

SplitTrace split_intermediate_final(const InterleavedTrace& trace) {
  if (auto err = validate_trace(trace)) throw std::invalid_argument(*err);
  SplitTrace split;
  const auto n = trace.pair_count();
  split.intermediate.reserve(n - 1);
  for (std::size_t k = 0; k + 1 < n; ++k) split.intermediate.push_back(trace.pair(k));
  split.final = trace.pair(n - 1);
  return split;
}

}  // namespace ilr
