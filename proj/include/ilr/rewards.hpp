#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "ilr/metrics.hpp"
#include "ilr/trace.hpp"

namespace ilr {

struct RewardConfig {
  double lambda = 0.2;     // format vs. final weight
  double alpha = 0.3;      // BLEU-1 vs. ROUGE-L mix in the think reward
  double gamma = 0.2;      // all-or-none answer bonus
  double ema_decay = 0.9;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

/// How the process reward is granted.
///  Full        - gated on format, final correctness and batch metric > EMA.
///  AnswerOnly  - never granted (outcome-only baseline).
///  DirectThink - granted unconditionally.
enum class ProcessMode { Full, AnswerOnly, DirectThink };

const char* to_string(ProcessMode mode);
std::optional<ProcessMode> parse_process_mode(std::string_view text);

class EmaTracker {
 public:
  double value() const { return value_; }
  void reset() { value_ = 0.0; }
  /// value <- decay * value + (1 - decay) * metric. Throws if metric is not in
  /// [0, 1] or decay is not in (0, 1).
  void update(double batch_metric, double decay);

 private:
  double value_ = 0.0;
};

struct RewardBreakdown {
  double r_format = 0.0;
  double r_final = 0.0;
  bool gate = false;
  std::vector<double> r_think_steps;
  double r_ans = 0.0;
  double r_proc = 0.0;
  double total = 0.0;
};

nlohmann::json to_json(const RewardBreakdown& b);

/// Lowercase, trim surrounding whitespace and punctuation, collapse internal
/// whitespace, and reduce option-letter forms ("(B)", "Option B.") to "b".
std::string normalize_answer(std::string_view raw);

double format_reward(const ParsedOutcome& outcome);

struct ClosedFinal {
  double reward = 0.0;
  std::optional<std::string> warning;
};

/// Answers may list several options separated by commas ("A, C"); they are
/// compared as normalized sets. `option_keys` are the normalized admissible
/// answers (e.g. {"a","b","c","d"} or {"yes","no"}).
ClosedFinal final_reward_closed(std::string_view pred, std::string_view gold,
                                const std::vector<std::string>& option_keys);
/// Normalized set equality of two closed answers, without option checks.
bool closed_answers_equal(std::string_view a, std::string_view b);

double final_reward_open(const LabelSet& pred, const LabelSet& gold);
double think_reward(const TokenSeq& generated, const TokenSeq& gold, double alpha);
double answer_bonus(const std::vector<std::string>& generated,
                    const std::vector<std::string>& gold, double gamma);
bool gate(bool format_ok, bool final_ok, double batch_metric, double ema_prev);

struct ProcessReward {
  std::vector<double> think_steps;
  double r_ans = 0.0;
  double r_proc = 0.0;
};

/// Think rewards over index-aligned intermediate pairs (truncated to the
/// shorter list) plus the answer bonus. Zero when `gate_open` is false.
ProcessReward process_reward(const std::vector<StepPair>& generated,
                             const std::vector<StepPair>& gold, bool gate_open,
                             const RewardConfig& config);

RewardBreakdown total_reward(double r_format, double r_final, bool gate_open,
                             const ProcessReward& proc, const RewardConfig& config);

// ---------------------------------------------------------------------------
// Whole-output scoring against a reference.

struct ScoringTarget {
  bool closed = true;
  std::vector<std::string> option_keys;  // closed only
  std::string gold_final;                // option key(s) or comma-joined labels
  InterleavedTrace gold_trace;
};

struct OutcomeScore {
  ParsedOutcome parsed;
  double r_format = 0.0;
  double r_final = 0.0;
  bool final_ok = false;
  std::vector<std::string> warnings;
};

/// Format and final reward for one raw model output. A missing terminal
/// answer scores r_final = 0.
OutcomeScore score_outcome(std::string_view raw, const ScoringTarget& target,
                           TraceMode mode = TraceMode::CloseEnded);

/// Gate plus process reward and the weighted total.
RewardBreakdown finish_reward(const OutcomeScore& outcome, const ScoringTarget& target,
                              double batch_metric, double ema_prev, ProcessMode mode,
                              const RewardConfig& config);

}  // namespace ilr
