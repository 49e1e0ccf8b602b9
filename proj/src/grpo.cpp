#include "ilr/grpo.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace ilr {
namespace {

void add_scaled(SparseGrad& into, const SparseGrad& from, double scale) {
  for (const auto& [key, row] : from) {
    auto& dst = into.try_emplace(key, row.size(), 0.0).first->second;
    for (std::size_t i = 0; i < row.size(); ++i) dst[i] += scale * row[i];
  }
}

double ratio_of(const PolicyParams& params, const Trajectory& t, double temperature) {
  return std::exp(logprob(params, t, temperature) - t.logprob_old);
}

void check_group(const TrajectoryGroup& g) {
  if (g.trajectories.size() != g.advantages.size()) {
    throw std::invalid_argument("group advantages do not match its trajectories");
  }
}

}  // namespace

void GrpoConfig::validate() const {
  if (group_size < 2) throw std::invalid_argument("field 'group_size': must be >= 2");
  if (!(clip_epsilon > 0.0 && clip_epsilon < 1.0)) {
    throw std::invalid_argument("field 'clip_epsilon': must be in (0, 1)");
  }
  if (!(kl_beta >= 0.0) || !std::isfinite(kl_beta)) {
    throw std::invalid_argument("field 'kl_beta': must be >= 0");
  }
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw std::invalid_argument("field 'learning_rate': must be > 0");
  }
  if (!(adv_floor > 0.0)) throw std::invalid_argument("field 'adv_floor': must be > 0");
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw std::invalid_argument("field 'temperature': must be > 0");
  }
}

std::vector<double> compute_advantages(std::span<const double> rewards, double floor) {
  if (rewards.size() < 2) throw std::invalid_argument("advantages need at least two rewards");
  const auto n = static_cast<double>(rewards.size());
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= n;
  std::vector<double> adv(rewards.size(), 0.0);
  if (std::all_of(rewards.begin(), rewards.end(), [&](double r) { return r == rewards[0]; })) {
    return adv;
  }
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  const double sd = std::max(std::sqrt(var / n), floor);
  for (std::size_t i = 0; i < rewards.size(); ++i) adv[i] = (rewards[i] - mean) / sd;
  return adv;
}

double clipped_surrogate(double ratio, double advantage, double epsilon) {
  const double clipped = std::clamp(ratio, 1.0 - epsilon, 1.0 + epsilon);
  return std::min(ratio * advantage, clipped * advantage);
}

std::vector<SlotSpec> visited_contexts(const std::vector<TrajectoryGroup>& groups) {
  std::set<std::pair<std::string, std::size_t>> seen;
  for (const auto& g : groups) {
    for (const auto& t : g.trajectories) {
      for (const auto& ch : t.actions) seen.emplace(ch.context, ch.vocab);
    }
  }
  std::vector<SlotSpec> out;
  for (const auto& [key, vocab] : seen) out.push_back({key, vocab});
  return out;
}

double surrogate_objective(const PolicyParams& params, const PolicyParams& ref,
                           const std::vector<TrajectoryGroup>& groups, const GrpoConfig& config) {
  if (groups.empty()) return 0.0;
  double pg = 0.0;
  for (const auto& g : groups) {
    check_group(g);
    double group_sum = 0.0;
    for (std::size_t j = 0; j < g.trajectories.size(); ++j) {
      const double ratio = ratio_of(params, g.trajectories[j], config.temperature);
      group_sum += clipped_surrogate(ratio, g.advantages[j], config.clip_epsilon);
    }
    pg += group_sum / static_cast<double>(g.trajectories.size());
  }
  pg /= static_cast<double>(groups.size());
  const auto contexts = visited_contexts(groups);
  return pg - config.kl_beta * kl_to_ref(params, ref, contexts, config.temperature);
}

SparseGrad surrogate_gradient(const PolicyParams& params, const PolicyParams& ref,
                              const std::vector<TrajectoryGroup>& groups,
                              const GrpoConfig& config) {
  SparseGrad grad;
  if (groups.empty()) return grad;
  const double batch_scale = 1.0 / static_cast<double>(groups.size());
  for (const auto& g : groups) {
    check_group(g);
    const double scale = batch_scale / static_cast<double>(g.trajectories.size());
    for (std::size_t j = 0; j < g.trajectories.size(); ++j) {
      const auto& t = g.trajectories[j];
      const double a = g.advantages[j];
      if (a == 0.0) continue;
      const double ratio = ratio_of(params, t, config.temperature);
      const double unclipped = ratio * a;
      const double clipped =
          std::clamp(ratio, 1.0 - config.clip_epsilon, 1.0 + config.clip_epsilon) * a;
      // The clipped branch is constant in theta; only the unclipped one carries gradient.
      if (unclipped > clipped) continue;
      add_scaled(grad, grad_logprob(params, t, config.temperature), scale * a * ratio);
    }
  }
  if (config.kl_beta > 0.0) {
    const auto contexts = visited_contexts(groups);
    add_scaled(grad, grad_kl_to_ref(params, ref, contexts, config.temperature), -config.kl_beta);
  }
  return grad;
}

UpdateResult update_step(const PolicyParams& params, const PolicyParams& ref,
                         const std::vector<TrajectoryGroup>& groups, const GrpoConfig& config) {
  UpdateResult result{params, {}, false, {}};
  auto& stats = result.stats;
  double ratio_sum = 0.0, reward_sum = 0.0;
  std::size_t clipped = 0;
  for (const auto& g : groups) {
    check_group(g);
    for (std::size_t j = 0; j < g.trajectories.size(); ++j) {
      const double ratio = ratio_of(params, g.trajectories[j], config.temperature);
      ratio_sum += ratio;
      if (std::abs(ratio - 1.0) > config.clip_epsilon) ++clipped;
      if (j < g.rewards.size()) reward_sum += g.rewards[j];
      ++stats.trajectories;
    }
  }
  if (stats.trajectories > 0) {
    const auto n = static_cast<double>(stats.trajectories);
    stats.mean_ratio = ratio_sum / n;
    stats.mean_reward = reward_sum / n;
    stats.clip_fraction = static_cast<double>(clipped) / n;
  }
  stats.kl = kl_to_ref(params, ref, visited_contexts(groups), config.temperature);
  stats.objective = surrogate_objective(params, ref, groups, config);

  if (config.learning_rate == 0.0) return result;
  const auto grad = surrogate_gradient(params, ref, groups, config);
  for (const auto& [key, row] : grad) {
    for (double v : row) {
      if (!std::isfinite(v)) {
        result.diagnostic = "non-finite gradient at context " + key + "; update skipped";
        return result;
      }
    }
  }
  for (const auto& [key, row] : grad) {
    if (std::all_of(row.begin(), row.end(), [](double v) { return v == 0.0; })) continue;
    auto& z = result.params.entry(key, row.size());
    for (std::size_t i = 0; i < row.size(); ++i) z[i] += config.learning_rate * row[i];
  }
  result.params.clamp_logits();
  result.applied = true;
  return result;
}

}  // namespace ilr
