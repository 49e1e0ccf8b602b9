#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ilr/grpo.hpp"
#include "ilr/policy.hpp"
#include "ilr/rewards.hpp"
#include "ilr/synth.hpp"

namespace ilr {

struct CurriculumConfig {
  std::size_t n_closed = 200;
  std::size_t n_open = 200;
  std::size_t batch_size = 16;
  RewardConfig reward;
  GrpoConfig grpo;
  ProcessMode mode = ProcessMode::Full;
  std::uint64_t seed = 0;          // batches, rollouts and partition
  double reasoning_fraction = 1.0;
  std::size_t heldout_size = 200;  // per question kind
  std::uint64_t heldout_seed = 1;
  double heldout_noise = 0.1;
  bool log_trajectories = true;

  void validate() const;
  /// Flat JSON document. Unknown fields and bad values throw
  /// std::invalid_argument with a "field '<name>': ..." message; absent fields
  /// keep their defaults.
  static CurriculumConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct StepStats {
  std::size_t step = 0;  // 1-based within the phase
  std::string phase;
  double mean_reward = 0.0;
  double batch_metric = 0.0;
  double ema_prev = 0.0;  // gate threshold used for this batch
  double ema = 0.0;       // after this batch's update
  double clip_fraction = 0.0;
  double kl = 0.0;
  double gate_rate = 0.0;
  double mean_ratio = 0.0;
  double mean_r_proc = 0.0;
  bool update_applied = true;
};

nlohmann::json to_json(const StepStats& s);

/// Greedy-decoding metrics: "<kind>_accuracy" per closed kind,
/// "closed_accuracy" over all closed cases and "open_f1" (mean micro-F1).
using HeldoutMetrics = std::map<std::string, double>;

struct HeldoutSet {
  std::vector<SynthCase> cases;
};

HeldoutSet make_heldout(const CurriculumConfig& config);
HeldoutMetrics evaluate_heldout(const PolicyParams& params, const HeldoutSet& heldout);

struct PhaseReport {
  std::string phase;
  std::vector<StepStats> steps;
  HeldoutMetrics heldout;
  double final_ema = 0.0;
};

class TrainSink {
 public:
  virtual ~TrainSink() = default;
  virtual void on_step(const StepStats&) {}
  virtual void on_trajectory(const StepStats& /*step*/, const std::string& /*case_id*/,
                             std::size_t /*index*/, const RewardBreakdown&) {}
  virtual void on_checkpoint(const std::string& /*name*/, const PolicyParams&) {}
};

struct PhaseResult {
  PolicyParams params;
  PhaseReport report;
};

/// Runs exactly n_steps GRPO batches. The EMA starts at 0 and is updated
/// after each policy update with the batch metric (mean final reward over all
/// trajectories: accuracy when closed, micro-F1 when open). Throws if the
/// dataset is empty (with n_steps > 0) or holds a kind inconsistent with
/// `closed`.
PhaseResult train_phase(const std::vector<SynthCase>& dataset, const PolicyParams& params,
                        const PolicyParams& ref, std::size_t n_steps, bool closed,
                        const CurriculumConfig& config, TrainSink* sink = nullptr,
                        const HeldoutSet* heldout = nullptr);

struct CurriculumResult {
  PolicyParams params;
  HeldoutMetrics initial;
  PhaseReport closed;
  PhaseReport open;
};

/// Closed phase then open phase over the reasoning split of `corpus`, with
/// the reference policy re-frozen at each phase start. Checkpoints "initial",
/// "closed" and "open" go to the sink.
CurriculumResult run_curriculum(const std::vector<SynthCase>& corpus,
                                const CurriculumConfig& config, TrainSink* sink = nullptr);

}  // namespace ilr
