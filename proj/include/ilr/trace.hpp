#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ilr {

enum class SegmentKind { Think, Answer };
enum class TraceMode { CloseEnded, OpenEnded, Binary };

struct Segment {
  SegmentKind kind = SegmentKind::Think;
  std::string text;

  friend bool operator==(const Segment&, const Segment&) = default;
};

/// One think fragment together with the answer fragment that follows it.
struct StepPair {
  std::string think;
  std::string answer;

  friend bool operator==(const StepPair&, const StepPair&) = default;
};

/// Alternating think/answer segments. A valid trace starts with Think, ends
/// with Answer, holds at least one pair, and every text is free of tag
/// markers and of leading/trailing ASCII whitespace.
struct InterleavedTrace {
  std::vector<Segment> segments;
  TraceMode mode = TraceMode::CloseEnded;

  std::size_t pair_count() const { return segments.size() / 2; }
  StepPair pair(std::size_t k) const {
    return {segments[2 * k].text, segments[2 * k + 1].text};
  }

  friend bool operator==(const InterleavedTrace&, const InterleavedTrace&) = default;
};

struct Diagnostic {
  std::size_t offset = 0;
  std::string message;
};

struct ParsedOutcome {
  std::optional<InterleavedTrace> trace;
  bool format_ok = false;
  std::vector<Diagnostic> diagnostics;
  // Body of the last <answer>...</answer> block when nothing but whitespace
  // follows it. Present even when the overall format is violated.
  std::optional<std::string> terminal_answer;
};

/// Never throws on any input; malformed text yields format_ok == false and at
/// least one diagnostic.
ParsedOutcome parse_trace(std::string_view raw, TraceMode mode = TraceMode::CloseEnded);

/// Throws std::invalid_argument when `trace` breaks the trace invariants.
std::string serialize_trace(const InterleavedTrace& trace);

/// Empty optional when valid, otherwise the first violated invariant.
std::optional<std::string> validate_trace(const InterleavedTrace& trace);

InterleavedTrace make_trace(const std::vector<StepPair>& pairs, TraceMode mode);

struct SplitTrace {
  std::vector<StepPair> intermediate;
  StepPair final;
};

SplitTrace split_intermediate_final(const InterleavedTrace& trace);

std::string_view trim_ascii(std::string_view s);
bool is_ascii_space(char c);
const char* to_string(TraceMode mode);

}  // namespace ilr
