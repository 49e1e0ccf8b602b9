#pragma once

// Generators shared by the unit and acceptance tests.

#include <array>
#include <string>
#include <vector>

#include "ilr/rng.hpp"
#include "ilr/trace.hpp"

namespace ilr::testing {

inline std::string random_text(Rng& rng) {
  static const std::array<std::string, 12> words = {
      "pleural", "effusion", "a<b", "x>y", "\xc3\xa9tat", "think", "answer", "/", "42", "no",
      "<thin", "</answ"};
  const auto n = uniform_index(rng, 5);  // 0..4 words, empty text allowed
  std::string out;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) out += uniform_index(rng, 2) ? " " : "\t";
    out += words[uniform_index(rng, words.size())];
  }
  return out;
}

inline InterleavedTrace random_trace(Rng& rng) {
  static const std::array<TraceMode, 3> modes = {TraceMode::CloseEnded, TraceMode::OpenEnded,
                                                 TraceMode::Binary};
  std::vector<StepPair> pairs(1 + uniform_index(rng, 6));
  for (auto& p : pairs) p = {random_text(rng), random_text(rng)};
  return make_trace(pairs, modes[uniform_index(rng, modes.size())]);
}

struct TagSpan {
  std::size_t offset;
  std::string text;
};

inline std::vector<TagSpan> find_tags(const std::string& raw) {
  static const std::array<std::string, 4> tags = {"<think>", "</think>", "<answer>", "</answer>"};
  std::vector<TagSpan> out;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    for (const auto& t : tags) {
      if (raw.compare(i, t.size(), t) == 0) out.push_back({i, t});
    }
  }
  return out;
}

/// Deletes, swaps (two tags with different text) or duplicates one tag.
inline std::string mutate_tags(const std::string& raw, Rng& rng) {
  const auto tags = find_tags(raw);
  for (;;) {
    const auto op = uniform_index(rng, 3);
    const auto& a = tags[uniform_index(rng, tags.size())];
    std::string out = raw;
    if (op == 0) {
      out.erase(a.offset, a.text.size());
      return out;
    }
    if (op == 1) {
      out.insert(a.offset, a.text);
      return out;
    }
    const auto& b = tags[uniform_index(rng, tags.size())];
    if (a.text == b.text) continue;
    const auto& first = a.offset < b.offset ? a : b;
    const auto& second = a.offset < b.offset ? b : a;
    out.replace(second.offset, second.text.size(), first.text);
    out.replace(first.offset, first.text.size(), second.text);
    return out;
  }
}

}  // namespace ilr::testing
