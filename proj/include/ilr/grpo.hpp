#pragma once

#include <span>
#include <string>
#include <vector>

#include "ilr/policy.hpp"

namespace ilr {

struct GrpoConfig {
  std::size_t group_size = 10;
  double clip_epsilon = 0.2;
  double kl_beta = 0.01;
  double learning_rate = 0.1;
  double adv_floor = 1e-8;  // lower bound on the group std
  double temperature = 1.0;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

struct TrajectoryGroup {
  std::vector<Trajectory> trajectories;
  std::vector<double> rewards;
  std::vector<double> advantages;
};

/// (r - mean) / max(population std, floor); all zeros for a constant group.
/// Throws for fewer than two rewards.
std::vector<double> compute_advantages(std::span<const double> rewards, double floor = 1e-8);

/// min(ratio * A, clip(ratio, 1 - eps, 1 + eps) * A)
double clipped_surrogate(double ratio, double advantage, double epsilon);

/// Distinct contexts visited by any trajectory in the groups, sorted by key.
std::vector<SlotSpec> visited_contexts(const std::vector<TrajectoryGroup>& groups);

/// Batch objective: mean over groups of the mean clipped surrogate, minus
/// beta * KL(pi_theta || pi_ref) averaged over visited contexts. Ratios use
/// each trajectory's stored logprob_old.
double surrogate_objective(const PolicyParams& params, const PolicyParams& ref,
                           const std::vector<TrajectoryGroup>& groups, const GrpoConfig& config);
SparseGrad surrogate_gradient(const PolicyParams& params, const PolicyParams& ref,
                              const std::vector<TrajectoryGroup>& groups,
                              const GrpoConfig& config);

struct UpdateStats {
  double mean_reward = 0.0;
  double mean_ratio = 0.0;
  double clip_fraction = 0.0;
  double kl = 0.0;
  double objective = 0.0;
  std::size_t trajectories = 0;
};

struct UpdateResult {
  PolicyParams params;
  UpdateStats stats;
  bool applied = false;
  std::string diagnostic;
};

/// One gradient-ascent step on surrogate_objective. A non-finite gradient
/// leaves the parameters unchanged and sets `diagnostic`.
UpdateResult update_step(const PolicyParams& params, const PolicyParams& ref,
                         const std::vector<TrajectoryGroup>& groups, const GrpoConfig& config);

}  // namespace ilr
