#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "ilr/metrics.hpp"
#include "ilr/rewards.hpp"
#include "ilr/trace.hpp"

namespace ilr {

enum class QuestionKind { Binary, Single, Multiple, Open };

const char* to_string(QuestionKind kind);
/// Throws std::invalid_argument on unknown names.
QuestionKind parse_question_kind(std::string_view text);
bool is_closed(QuestionKind kind);
TraceMode trace_mode(QuestionKind kind);

// ---------------------------------------------------------------------------
// Catalog of observable signs.

/// Signs for a catalog label; empty only for "No Finding". Some signs are
/// shared between diseases so that partial observations stay ambiguous.
std::span<const std::string_view> disease_signs(std::size_t label);
/// Every distinct sign token, sorted.
const std::vector<std::string>& sign_vocabulary();
/// Diseases (never "No Finding") sharing at least one sign with `signs`, in
/// catalog order.
std::vector<std::size_t> candidate_diseases(std::span<const std::string> signs);

/// Evidence bank: two fixed paraphrases per (disease, polarity).
std::string evidence_sentence(std::size_t label, bool present, int paraphrase);

// ---------------------------------------------------------------------------
// Cases.

struct SynthCase {
  std::string id;
  std::uint64_t seed = 0;
  QuestionKind kind = QuestionKind::Single;
  LabelSet gold_diseases;
  std::vector<std::string> observed_signs;  // sorted, unique
  std::string findings_text;
  std::string question;
  std::string probe;                        // Binary only
  std::vector<std::string> options;         // labels (Single/Multiple), yes/no (Binary)
  InterleavedTrace gold_trace;
  std::string gold_final;

  friend bool operator==(const SynthCase&, const SynthCase&) = default;
};

/// Deterministic in (seed, kind, noise_rate). noise_rate must be in [0, 0.5).
SynthCase gen_case(std::uint64_t seed, QuestionKind kind, double noise_rate);

/// Diseases evaluated one per think/answer pair: the probe (Binary), the
/// options (Single/Multiple) or the sign-derived candidates (Open).
std::vector<std::size_t> evaluation_subjects(const SynthCase& c);

/// Content decisions for one evaluation pair.
struct StepChoice {
  bool think_present = false;  // polarity of the evidence sentence
  int paraphrase = 0;          // 0 or 1
  bool positive = false;       // yes / keep / confirm
};

/// Renders a trace in the case's interleaved layout from one choice per
/// evaluation subject. The final pair is derived from the choices.
InterleavedTrace compose_trace(const SynthCase& c, std::span<const StepChoice> choices);

/// Gold chain: truthful choices with seeded paraphrases; for Open questions
/// the final pair states the full gold disease set.
InterleavedTrace build_gold_trace(const SynthCase& c, std::uint64_t seed);

ScoringTarget scoring_target(const SynthCase& c);

nlohmann::json to_json(const SynthCase& c);
/// Throws std::invalid_argument on schema violations.
SynthCase case_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------------------
// Data pipeline.

/// Seeds for training corpora have the top bit clear; held-out seeds set it.
std::uint64_t corpus_case_seed(std::uint64_t base_seed, std::uint64_t index);
std::uint64_t heldout_case_seed(std::uint64_t base_seed, std::uint64_t index);

/// Case i has kind kinds[i % kinds.size()].
std::vector<SynthCase> generate_corpus(std::size_t n, std::uint64_t seed, double noise_rate,
                                       const std::vector<QuestionKind>& kinds);
std::vector<SynthCase> generate_heldout(std::size_t n, std::uint64_t seed, double noise_rate,
                                        QuestionKind kind);

enum class ScreenStatus { Accepted, Rejected };

struct ScreenResult {
  ScreenStatus status = ScreenStatus::Rejected;
  std::string findings;
  std::string reason;
};

/// Text between the first "FINDINGS:" and the first "IMPRESSION:" after it.
/// Missing or misordered markers reject the report; invalid UTF-8 throws.
ScreenResult screen_report(std::string_view raw_report);

/// True iff the findings hold strictly more than `min_tokens` tokens.
bool token_filter(std::string_view findings, std::size_t min_tokens);

/// Stratum of a case: "<kind>/<first gold label>".
std::string stratum_of(const SynthCase& c);

/// Downsamples every stratum to the smallest stratum count. Kept cases retain
/// their input order.
std::vector<SynthCase> balance_labels(const std::vector<SynthCase>& cases, std::uint64_t seed);

struct DatasetPartition {
  std::vector<SynthCase> d_a;
  std::vector<SynthCase> d_r_closed;
  std::vector<SynthCase> d_r_open;
};

/// Sorts by id, shuffles with `seed`, and routes exactly
/// round(fraction * n) cases to the reasoning split.
DatasetPartition partition(const std::vector<SynthCase>& cases, double reasoning_fraction,
                           std::uint64_t seed);

bool is_valid_utf8(std::string_view s);

}  // namespace ilr
