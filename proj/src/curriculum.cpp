#include "ilr/curriculum.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

#include "ilr/rng.hpp"

namespace ilr {
namespace {

std::invalid_argument field_error(const std::string& name, const std::string& what) {
  return std::invalid_argument("field '" + name + "': " + what);
}

double get_number(const nlohmann::json& v, const std::string& name) {
  if (!v.is_number()) throw field_error(name, "expected a number");
  return v.get<double>();
}

std::uint64_t get_count(const nlohmann::json& v, const std::string& name) {
  if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
    throw field_error(name, "expected a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

struct Rollout {
  const SynthCase* c = nullptr;
  const ScoringTarget* target = nullptr;
  std::vector<Trajectory> group;
  std::vector<OutcomeScore> outcomes;
};

std::vector<std::size_t> draw_batch(std::size_t dataset_size, std::size_t batch, Rng& rng) {
  std::vector<std::size_t> idx;
  if (dataset_size >= batch) {
    // Partial Fisher-Yates: distinct cases within a batch.
    std::vector<std::size_t> all(dataset_size);
    for (std::size_t i = 0; i < dataset_size; ++i) all[i] = i;
    for (std::size_t i = 0; i < batch; ++i) {
      const auto j = i + uniform_index(rng, dataset_size - i);
      std::swap(all[i], all[j]);
      idx.push_back(all[i]);
    }
  } else {
    for (std::size_t i = 0; i < batch; ++i) idx.push_back(uniform_index(rng, dataset_size));
  }
  return idx;
}

}  // namespace

void CurriculumConfig::validate() const {
  if (batch_size < 1) throw field_error("batch_size", "must be >= 1");
  if (!(reasoning_fraction >= 0.0 && reasoning_fraction <= 1.0)) {
    throw field_error("reasoning_fraction", "must be in [0, 1]");
  }
  if (!(heldout_noise >= 0.0 && heldout_noise < 0.5)) {
    throw field_error("heldout_noise", "must be in [0, 0.5)");
  }
  reward.validate();
  grpo.validate();
}

CurriculumConfig CurriculumConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
  CurriculumConfig c;
  const std::map<std::string, std::function<void(const nlohmann::json&, const std::string&)>>
      setters = {
          {"n_closed", [&](auto& v, auto& n) { c.n_closed = get_count(v, n); }},
          {"n_open", [&](auto& v, auto& n) { c.n_open = get_count(v, n); }},
          {"batch_size", [&](auto& v, auto& n) { c.batch_size = get_count(v, n); }},
          {"group_size", [&](auto& v, auto& n) { c.grpo.group_size = get_count(v, n); }},
          {"lambda", [&](auto& v, auto& n) { c.reward.lambda = get_number(v, n); }},
          {"alpha", [&](auto& v, auto& n) { c.reward.alpha = get_number(v, n); }},
          {"gamma", [&](auto& v, auto& n) { c.reward.gamma = get_number(v, n); }},
          {"ema_decay", [&](auto& v, auto& n) { c.reward.ema_decay = get_number(v, n); }},
          {"clip_epsilon", [&](auto& v, auto& n) { c.grpo.clip_epsilon = get_number(v, n); }},
          {"kl_beta", [&](auto& v, auto& n) { c.grpo.kl_beta = get_number(v, n); }},
          {"learning_rate", [&](auto& v, auto& n) { c.grpo.learning_rate = get_number(v, n); }},
          {"adv_floor", [&](auto& v, auto& n) { c.grpo.adv_floor = get_number(v, n); }},
          {"temperature", [&](auto& v, auto& n) { c.grpo.temperature = get_number(v, n); }},
          {"seed", [&](auto& v, auto& n) { c.seed = get_count(v, n); }},
          {"reasoning_fraction",
           [&](auto& v, auto& n) { c.reasoning_fraction = get_number(v, n); }},
          {"heldout_size", [&](auto& v, auto& n) { c.heldout_size = get_count(v, n); }},
          {"heldout_seed", [&](auto& v, auto& n) { c.heldout_seed = get_count(v, n); }},
          {"heldout_noise", [&](auto& v, auto& n) { c.heldout_noise = get_number(v, n); }},
          {"log_trajectories",
           [&](auto& v, auto& n) {
             if (!v.is_boolean()) throw field_error(n, "expected true or false");
             c.log_trajectories = v.template get<bool>();
           }},
          {"mode",
           [&](auto& v, auto& n) {
             if (!v.is_string()) throw field_error(n, "expected a string");
             auto m = parse_process_mode(v.template get<std::string>());
             if (!m) throw field_error(n, "expected one of full, answer_only, direct_think");
             c.mode = *m;
           }},
      };
  for (const auto& [key, value] : j.items()) {
    auto it = setters.find(key);
    if (it == setters.end()) throw field_error(key, "unknown field");
    it->second(value, key);
  }
  c.validate();
  return c;
}

nlohmann::json CurriculumConfig::to_json() const {
  return nlohmann::json{{"n_closed", n_closed},
                        {"n_open", n_open},
                        {"batch_size", batch_size},
                        {"group_size", grpo.group_size},
                        {"lambda", reward.lambda},
                        {"alpha", reward.alpha},
                        {"gamma", reward.gamma},
                        {"ema_decay", reward.ema_decay},
                        {"clip_epsilon", grpo.clip_epsilon},
                        {"kl_beta", grpo.kl_beta},
                        {"learning_rate", grpo.learning_rate},
                        {"adv_floor", grpo.adv_floor},
                        {"temperature", grpo.temperature},
                        {"mode", ilr::to_string(mode)},
                        {"seed", seed},
                        {"reasoning_fraction", reasoning_fraction},
                        {"heldout_size", heldout_size},
                        {"heldout_seed", heldout_seed},
                        {"heldout_noise", heldout_noise},
                        {"log_trajectories", log_trajectories}};
}

nlohmann::json to_json(const StepStats& s) {
  return nlohmann::json{{"step", s.step},
                        {"phase", s.phase},
                        {"mean_reward", s.mean_reward},
                        {"batch_metric", s.batch_metric},
                        {"ema_prev", s.ema_prev},
                        {"ema", s.ema},
                        {"clip_fraction", s.clip_fraction},
                        {"kl", s.kl},
                        {"gate_rate", s.gate_rate},
                        {"mean_ratio", s.mean_ratio},
                        {"mean_r_proc", s.mean_r_proc},
                        {"update_applied", s.update_applied}};
}

HeldoutSet make_heldout(const CurriculumConfig& config) {
  HeldoutSet h;
  for (auto kind : {QuestionKind::Binary, QuestionKind::Single, QuestionKind::Multiple,
                    QuestionKind::Open}) {
    auto cases = generate_heldout(config.heldout_size,
                                  mix_seed({config.heldout_seed, static_cast<std::uint64_t>(kind)}),
                                  config.heldout_noise, kind);
    h.cases.insert(h.cases.end(), cases.begin(), cases.end());
  }
  return h;
}

HeldoutMetrics evaluate_heldout(const PolicyParams& params, const HeldoutSet& heldout) {
  std::map<std::string, std::pair<double, std::size_t>> sums;
  for (const auto& c : heldout.cases) {
    const auto t = decode_greedy(params, c);
    const auto target = scoring_target(c);
    const auto score = score_outcome(t.text, target, trace_mode(c.kind));
    if (is_closed(c.kind)) {
      auto& kind_sum = sums[std::string(to_string(c.kind)) + "_accuracy"];
      kind_sum.first += score.r_final;
      kind_sum.second += 1;
      auto& all = sums["closed_accuracy"];
      all.first += score.r_final;
      all.second += 1;
    } else {
      auto& s = sums["open_f1"];
      s.first += score.r_final;
      s.second += 1;
    }
  }
  HeldoutMetrics out;
  for (const auto& [name, s] : sums) out[name] = s.first / static_cast<double>(s.second);
  return out;
}

PhaseResult train_phase(const std::vector<SynthCase>& dataset, const PolicyParams& params,
                        const PolicyParams& ref, std::size_t n_steps, bool closed,
                        const CurriculumConfig& config, TrainSink* sink,
                        const HeldoutSet* heldout) {
  PhaseResult result{params, {}};
  auto& report = result.report;
  report.phase = closed ? "closed" : "open";
  if (n_steps == 0) return result;
  config.validate();
  if (dataset.empty()) throw std::invalid_argument("train_phase needs a non-empty dataset");
  for (const auto& c : dataset) {
    if (is_closed(c.kind) != closed) {
      throw std::invalid_argument("case " + c.id + " (" + to_string(c.kind) + ") does not belong in the " +
                                  report.phase + " phase");
    }
  }

  std::vector<ScoringTarget> targets;
  targets.reserve(dataset.size());
  for (const auto& c : dataset) targets.push_back(scoring_target(c));

  const std::uint64_t phase_tag = closed ? 1 : 2;
  Rng batch_rng(mix_seed({config.seed, phase_tag, 0xba7c4}));
  EmaTracker ema;
  auto& current = result.params;

  for (std::size_t step = 1; step <= n_steps; ++step) {
    const auto picks = draw_batch(dataset.size(), config.batch_size, batch_rng);

    std::vector<Rollout> rollouts(picks.size());
    double metric_sum = 0.0;
    std::size_t n_traj = 0;
    for (std::size_t b = 0; b < picks.size(); ++b) {
      auto& r = rollouts[b];
      r.c = &dataset[picks[b]];
      r.target = &targets[picks[b]];
      r.group = sample_group(current, *r.c, config.grpo.group_size, config.grpo.temperature,
                             mix_seed({config.seed, phase_tag, step, b}));
      for (const auto& t : r.group) {
        r.outcomes.push_back(score_outcome(t.text, *r.target, trace_mode(r.c->kind)));
        metric_sum += r.outcomes.back().r_final;
        ++n_traj;
      }
    }

    StepStats stats;
    stats.step = step;
    stats.phase = report.phase;
    stats.batch_metric = std::clamp(metric_sum / static_cast<double>(n_traj), 0.0, 1.0);
    stats.ema_prev = ema.value();

    std::vector<TrajectoryGroup> groups;
    std::vector<std::vector<RewardBreakdown>> breakdowns;
    std::size_t gated = 0;
    double proc_sum = 0.0;
    for (auto& r : rollouts) {
      TrajectoryGroup g;
      std::vector<RewardBreakdown> bd;
      for (std::size_t j = 0; j < r.group.size(); ++j) {
        bd.push_back(finish_reward(r.outcomes[j], *r.target, stats.batch_metric, stats.ema_prev,
                                   config.mode, config.reward));
        g.rewards.push_back(bd.back().total);
        gated += bd.back().gate ? 1 : 0;
        proc_sum += bd.back().r_proc;
      }
      g.advantages = compute_advantages(g.rewards, config.grpo.adv_floor);
      g.trajectories = std::move(r.group);
      groups.push_back(std::move(g));
      breakdowns.push_back(std::move(bd));
    }
    stats.gate_rate = static_cast<double>(gated) / static_cast<double>(n_traj);
    stats.mean_r_proc = proc_sum / static_cast<double>(n_traj);

    auto update = update_step(current, ref, groups, config.grpo);
    stats.mean_reward = update.stats.mean_reward;
    stats.mean_ratio = update.stats.mean_ratio;
    stats.clip_fraction = update.stats.clip_fraction;
    stats.kl = update.stats.kl;
    stats.update_applied = update.applied;
    current = std::move(update.params);

    ema.update(stats.batch_metric, config.reward.ema_decay);
    stats.ema = ema.value();

    if (sink) {
      sink->on_step(stats);
      if (config.log_trajectories) {
        for (std::size_t b = 0; b < groups.size(); ++b) {
          for (std::size_t j = 0; j < breakdowns[b].size(); ++j) {
            sink->on_trajectory(stats, groups[b].trajectories[j].case_id, j, breakdowns[b][j]);
          }
        }
      }
    }
    report.steps.push_back(std::move(stats));
  }
  report.final_ema = ema.value();
  if (heldout) report.heldout = evaluate_heldout(current, *heldout);
  return result;
}

CurriculumResult run_curriculum(const std::vector<SynthCase>& corpus,
                                const CurriculumConfig& config, TrainSink* sink) {
  config.validate();
  const auto split = partition(corpus, config.reasoning_fraction, config.seed);
  const auto heldout = make_heldout(config);

  CurriculumResult result;
  result.initial = evaluate_heldout(result.params, heldout);
  if (sink) sink->on_checkpoint("initial", result.params);

  const PolicyParams ref_closed = result.params;
  auto closed = train_phase(split.d_r_closed, result.params, ref_closed, config.n_closed, true,
                            config, sink, &heldout);
  result.params = std::move(closed.params);
  result.closed = std::move(closed.report);
  if (config.n_closed == 0) result.closed.heldout = result.initial;
  if (sink) sink->on_checkpoint("closed", result.params);

  const PolicyParams ref_open = result.params;
  auto open = train_phase(split.d_r_open, result.params, ref_open, config.n_open, false, config,
                          sink, &heldout);
  result.params = std::move(open.params);
  result.open = std::move(open.report);
  if (config.n_open == 0) result.open.heldout = result.closed.heldout;
  if (sink) sink->on_checkpoint("open", result.params);
  return result;
}

}  // namespace ilr
