#include "ilr/rewards.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>

namespace ilr {
namespace {

bool is_strip_char(char c) {
  return is_ascii_space(c) || std::ispunct(static_cast<unsigned char>(c)) != 0;
}

std::vector<std::string> split_answer_set(std::string_view text) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto comma = text.find(',', start);
    if (comma == std::string_view::npos) comma = text.size();
    auto part = normalize_answer(text.substr(start, comma - start));
    if (!part.empty()) parts.push_back(std::move(part));
    start = comma + 1;
  }
  std::sort(parts.begin(), parts.end());
  parts.erase(std::unique(parts.begin(), parts.end()), parts.end());
  return parts;
}

void require_unit(double v, const char* name) {
  if (!(v >= 0.0 && v <= 1.0)) {
    throw std::invalid_argument(std::string("field '") + name + "': must be in [0, 1]");
  }
}

}  // namespace

void RewardConfig::validate() const {
  require_unit(lambda, "lambda");
  require_unit(alpha, "alpha");
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) {
    throw std::invalid_argument("field 'gamma': must be a finite value >= 0");
  }
  if (!(ema_decay > 0.0 && ema_decay < 1.0)) {
    throw std::invalid_argument("field 'ema_decay': must be in (0, 1)");
  }
}

const char* to_string(ProcessMode mode) {
  switch (mode) {
    case ProcessMode::Full: return "full";
    case ProcessMode::AnswerOnly: return "answer_only";
    case ProcessMode::DirectThink: return "direct_think";
  }
  return "unknown";
}

std::optional<ProcessMode> parse_process_mode(std::string_view text) {
  if (text == "full") return ProcessMode::Full;
  if (text == "answer_only") return ProcessMode::AnswerOnly;
  if (text == "direct_think") return ProcessMode::DirectThink;
  return std::nullopt;
}

void EmaTracker::update(double batch_metric, double decay) {
  if (!(batch_metric >= 0.0 && batch_metric <= 1.0)) {
    throw std::invalid_argument("EMA update metric must be in [0, 1]");
  }
  if (!(decay > 0.0 && decay < 1.0)) throw std::invalid_argument("EMA decay must be in (0, 1)");
  value_ = decay * value_ + (1.0 - decay) * batch_metric;
}

nlohmann::json to_json(const RewardBreakdown& b) {
  return nlohmann::json{{"r_format", b.r_format}, {"r_final", b.r_final},
                        {"r_proc", b.r_proc},     {"gate", b.gate},
                        {"r_think_steps", b.r_think_steps},
                        {"r_ans", b.r_ans},       {"total", b.total}};
}

std::string normalize_answer(std::string_view raw) {
  std::size_t b = 0, e = raw.size();
  while (b < e && is_strip_char(raw[b])) ++b;
  while (e > b && is_strip_char(raw[e - 1])) --e;
  std::string out;
  bool pending_space = false;
  for (std::size_t i = b; i < e; ++i) {
    const char c = raw[i];
    if (is_ascii_space(c)) {
      pending_space = true;
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  // Surrounding brackets and dots are already gone; "option b" -> "b".
  constexpr std::string_view kOptionPrefix = "option ";
  if (out.size() == kOptionPrefix.size() + 1 && out.starts_with(kOptionPrefix) &&
      std::isalpha(static_cast<unsigned char>(out.back()))) {
    return out.substr(kOptionPrefix.size());
  }
  return out;
}

double format_reward(const ParsedOutcome& outcome) { return outcome.format_ok ? 1.0 : 0.0; }

ClosedFinal final_reward_closed(std::string_view pred, std::string_view gold,
                                const std::vector<std::string>& option_keys) {
  ClosedFinal out;
  const auto p = split_answer_set(pred);
  const auto g = split_answer_set(gold);
  if (p.empty()) {
    out.warning = "empty answer";
    return out;
  }
  for (const auto& key : p) {
    if (std::find(option_keys.begin(), option_keys.end(), key) == option_keys.end()) {
      out.warning = "answer \"" + key + "\" is not one of the question's options";
      return out;
    }
  }
  out.reward = (p == g) ? 1.0 : 0.0;
  return out;
}

bool closed_answers_equal(std::string_view a, std::string_view b) {
  const auto pa = split_answer_set(a);
  return !pa.empty() && pa == split_answer_set(b);
}

double final_reward_open(const LabelSet& pred, const LabelSet& gold) {
  return micro_f1(pred, gold);
}

double think_reward(const TokenSeq& generated, const TokenSeq& gold, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must be in [0, 1]");
  return alpha * bleu1(generated, gold) + (1.0 - alpha) * rouge_l(generated, gold);
}

double answer_bonus(const std::vector<std::string>& generated,
                    const std::vector<std::string>& gold, double gamma) {
  if (generated.size() != gold.size()) return 0.0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (normalize_answer(generated[i]) != normalize_answer(gold[i])) return 0.0;
  }
  return gamma;
}

bool gate(bool format_ok, bool final_ok, double batch_metric, double ema_prev) {
  return format_ok && final_ok && batch_metric > ema_prev;
}

ProcessReward process_reward(const std::vector<StepPair>& generated,
                             const std::vector<StepPair>& gold, bool gate_open,
                             const RewardConfig& config) {
  ProcessReward out;
  if (!gate_open) return out;
  const auto steps = std::min(generated.size(), gold.size());
  std::vector<std::string> gen_answers, gold_answers;
  for (std::size_t k = 0; k < steps; ++k) {
    out.think_steps.push_back(
        think_reward(tokenize(generated[k].think), tokenize(gold[k].think), config.alpha));
    out.r_proc += out.think_steps.back();
  }
  for (const auto& p : generated) gen_answers.push_back(p.answer);
  for (const auto& p : gold) gold_answers.push_back(p.answer);
  out.r_ans = answer_bonus(gen_answers, gold_answers, config.gamma);
  out.r_proc += out.r_ans;
  return out;
}

RewardBreakdown total_reward(double r_format, double r_final, bool gate_open,
                             const ProcessReward& proc, const RewardConfig& config) {
  RewardBreakdown b;
  b.r_format = r_format;
  b.r_final = r_final;
  b.gate = gate_open;
  if (gate_open) {
    b.r_think_steps = proc.think_steps;
    b.r_ans = proc.r_ans;
    b.r_proc = proc.r_proc;
  }
  b.total = config.lambda * r_format + (1.0 - config.lambda) * r_final + b.r_proc;
  return b;
}

OutcomeScore score_outcome(std::string_view raw, const ScoringTarget& target, TraceMode mode) {
  OutcomeScore out;
  out.parsed = parse_trace(raw, mode);
  out.r_format = format_reward(out.parsed);
  if (!out.parsed.terminal_answer) {
    out.warnings.emplace_back("no terminal answer; final reward is 0");
    return out;
  }
  const auto& answer = *out.parsed.terminal_answer;
  if (target.closed) {
    auto fin = final_reward_closed(answer, target.gold_final, target.option_keys);
    out.r_final = fin.reward;
    if (fin.warning) out.warnings.push_back(*fin.warning);
    out.final_ok = out.r_final == 1.0;
  } else {
    try {
      const auto pred = LabelSet::parse(answer);
      out.r_final = final_reward_open(pred, LabelSet::parse(target.gold_final));
    } catch (const std::invalid_argument& e) {
      out.warnings.emplace_back(std::string("unparseable diagnosis: ") + e.what());
      out.r_final = 0.0;
    }
    out.final_ok = out.r_final > 0.0;
  }
  return out;
}

RewardBreakdown finish_reward(const OutcomeScore& outcome, const ScoringTarget& target,
                              double batch_metric, double ema_prev, ProcessMode mode,
                              const RewardConfig& config) {
  bool open = false;
  switch (mode) {
    case ProcessMode::Full:
      open = gate(outcome.parsed.format_ok, outcome.final_ok, batch_metric, ema_prev);
      break;
    case ProcessMode::AnswerOnly: open = false; break;
    case ProcessMode::DirectThink: open = true; break;
  }
  ProcessReward proc;
  if (open && outcome.parsed.trace) {
    const auto gen = split_intermediate_final(*outcome.parsed.trace);
    const auto gold = split_intermediate_final(target.gold_trace);
    proc = process_reward(gen.intermediate, gold.intermediate, true, config);
  }
  return total_reward(outcome.r_format, outcome.r_final, open, proc, config);
}

}  // namespace ilr
