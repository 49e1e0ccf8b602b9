#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ilr/synth.hpp"
#include "ilr/trace.hpp"

namespace ilr {

enum class SlotType { Think, Answer };

/// Conditioning context of one content slot. Evaluation slots are keyed by
/// the observed sign set and the disease under evaluation, and share the
/// "eval" scope across question kinds so that what is learned on close-ended
/// questions carries over to open-ended ones.
struct ContextKey {
  std::string scope;
  std::string signs;    // sorted signs joined by '+', "-" when none
  std::string subject;  // disease being evaluated
  SlotType slot = SlotType::Think;

  std::string str() const;
};

inline constexpr std::size_t kThinkVocab = 4;   // {absent, present} x paraphrase {0, 1}
inline constexpr std::size_t kAnswerVocab = 2;  // {negative, positive}

/// Tabular logits, lazily zero (uniform) for unseen contexts.
class PolicyParams {
 public:
  static constexpr double kLogitBound = 30.0;

  std::vector<double> logits(const std::string& key, std::size_t vocab) const;
  /// Creates a zero entry on first access. Throws if `vocab` disagrees with an
  /// existing entry.
  std::vector<double>& entry(const std::string& key, std::size_t vocab);
  const std::map<std::string, std::vector<double>>& table() const { return table_; }
  bool empty() const { return table_.empty(); }
  void clamp_logits();

  friend bool operator==(const PolicyParams&, const PolicyParams&) = default;

 private:
  std::map<std::string, std::vector<double>> table_;
};

struct Choice {
  std::string context;
  std::size_t vocab = 0;
  std::size_t action = 0;

  friend bool operator==(const Choice&, const Choice&) = default;
};

struct Trajectory {
  std::string case_id;
  InterleavedTrace trace;
  std::string text;  // serialized trace
  std::vector<Choice> actions;
  double logprob_current = 0.0;
  double logprob_old = 0.0;

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

using SparseGrad = std::map<std::string, std::vector<double>>;

struct SlotSpec {
  std::string context;
  std::size_t vocab = 0;
};

std::vector<double> softmax(std::span<const double> logits, double temperature);
std::vector<double> log_softmax(std::span<const double> logits, double temperature);

/// Slot skeleton for a case: a think slot then an answer slot per evaluation
/// subject.
std::vector<SlotSpec> action_slots(const SynthCase& c);

/// Builds the trajectory (trace and text) for one action per slot.
Trajectory realize(const SynthCase& c, std::vector<Choice> actions);

/// G >= 2 trajectories sampled from softmax(logits / temperature). Both
/// logprob fields hold the sampling policy's log-probability.
std::vector<Trajectory> sample_group(const PolicyParams& params, const SynthCase& c,
                                     std::size_t group_size, double temperature,
                                     std::uint64_t seed);

/// Argmax per slot, ties to the lowest action index.
Trajectory decode_greedy(const PolicyParams& params, const SynthCase& c);

double logprob(const PolicyParams& params, std::span<const Choice> actions, double temperature);
double logprob(const PolicyParams& params, const Trajectory& t, double temperature);

/// d logprob / d logits: (onehot(action) - softmax) / temperature per visited
/// context.
SparseGrad grad_logprob(const PolicyParams& params, const Trajectory& t,
                        double temperature = 1.0);

double categorical_kl(std::span<const double> p_logits, std::span<const double> q_logits,
                      double temperature);

/// Mean over the listed contexts of KL(pi_theta(.|ctx) || pi_ref(.|ctx)).
double kl_to_ref(const PolicyParams& params, const PolicyParams& ref,
                 std::span<const SlotSpec> contexts, double temperature = 1.0);

/// d kl_to_ref / d logits of `params`.
SparseGrad grad_kl_to_ref(const PolicyParams& params, const PolicyParams& ref,
                          std::span<const SlotSpec> contexts, double temperature = 1.0);

/// One JSON object per line: {"context": ..., "logits": [...]}.
void write_checkpoint(std::ostream& os, const PolicyParams& params);
PolicyParams read_checkpoint(std::istream& is);

}  // namespace ilr
