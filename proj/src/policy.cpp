#include "ilr/policy.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "ilr/rng.hpp"

namespace ilr {
namespace {

std::string signs_digest(const std::vector<std::string>& signs) {
  if (signs.empty()) return "-";
  std::string out;
  for (const auto& s : signs) {
    if (!out.empty()) out += '+';
    out += s;
  }
  return out;
}

void check_temperature(double temperature) {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw std::invalid_argument("temperature must be positive and finite");
  }
}

std::size_t sample_categorical(std::span<const double> probs, Rng& rng) {
  const double u = uniform01(rng);
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return i;
  }
  return probs.size() - 1;
}

StepChoice to_step_choice(std::size_t think_action, std::size_t answer_action) {
  return {think_action >= 2, static_cast<int>(think_action % 2), answer_action == 1};
}

}  // namespace

std::string ContextKey::str() const {
  return scope + "|" + signs + "|" + subject + "|" + (slot == SlotType::Think ? "think" : "answer");
}

std::vector<double> PolicyParams::logits(const std::string& key, std::size_t vocab) const {
  auto it = table_.find(key);
  if (it == table_.end()) return std::vector<double>(vocab, 0.0);
  if (it->second.size() != vocab) throw std::invalid_argument("vocabulary mismatch for " + key);
  return it->second;
}

std::vector<double>& PolicyParams::entry(const std::string& key, std::size_t vocab) {
  auto [it, inserted] = table_.try_emplace(key, vocab, 0.0);
  if (it->second.size() != vocab) throw std::invalid_argument("vocabulary mismatch for " + key);
  return it->second;
}

void PolicyParams::clamp_logits() {
  for (auto& [key, row] : table_) {
    for (auto& z : row) z = std::clamp(z, -kLogitBound, kLogitBound);
  }
}

std::vector<double> log_softmax(std::span<const double> logits, double temperature) {
  check_temperature(temperature);
  std::vector<double> out(logits.size());
  if (logits.empty()) return out;
  double mx = -INFINITY;
  for (double z : logits) mx = std::max(mx, z / temperature);
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z / temperature - mx);
  const double lse = mx + std::log(sum);
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] / temperature - lse;
  return out;
}

std::vector<double> softmax(std::span<const double> logits, double temperature) {
  auto out = log_softmax(logits, temperature);
  for (auto& v : out) v = std::exp(v);
  return out;
}

std::vector<SlotSpec> action_slots(const SynthCase& c) {
  std::vector<SlotSpec> slots;
  const auto signs = signs_digest(c.observed_signs);
  for (auto d : evaluation_subjects(c)) {
    const std::string subject(kDiseaseCatalog[d]);
    slots.push_back({ContextKey{"eval", signs, subject, SlotType::Think}.str(), kThinkVocab});
    slots.push_back({ContextKey{"eval", signs, subject, SlotType::Answer}.str(), kAnswerVocab});
  }
  return slots;
}

Trajectory realize(const SynthCase& c, std::vector<Choice> actions) {
  std::vector<StepChoice> steps;
  for (std::size_t i = 0; i + 1 < actions.size(); i += 2) {
    steps.push_back(to_step_choice(actions[i].action, actions[i + 1].action));
  }
  Trajectory t;
  t.case_id = c.id;
  t.trace = compose_trace(c, steps);
  t.text = serialize_trace(t.trace);
  t.actions = std::move(actions);
  return t;
}

std::vector<Trajectory> sample_group(const PolicyParams& params, const SynthCase& c,
                                     std::size_t group_size, double temperature,
                                     std::uint64_t seed) {
  if (group_size < 2) throw std::invalid_argument("group size must be at least 2");
  check_temperature(temperature);
  const auto slots = action_slots(c);
  std::vector<std::vector<double>> probs;
  for (const auto& s : slots) probs.push_back(softmax(params.logits(s.context, s.vocab), temperature));

  Rng rng(seed);
  std::vector<Trajectory> group;
  group.reserve(group_size);
  for (std::size_t g = 0; g < group_size; ++g) {
    std::vector<Choice> actions;
    double lp = 0.0;
    for (std::size_t i = 0; i < slots.size(); ++i) {
      const auto a = sample_categorical(probs[i], rng);
      actions.push_back({slots[i].context, slots[i].vocab, a});
      lp += std::log(probs[i][a]);
    }
    auto t = realize(c, std::move(actions));
    t.logprob_current = lp;
    t.logprob_old = lp;
    group.push_back(std::move(t));
  }
  return group;
}

Trajectory decode_greedy(const PolicyParams& params, const SynthCase& c) {
  std::vector<Choice> actions;
  for (const auto& s : action_slots(c)) {
    const auto z = params.logits(s.context, s.vocab);
    const auto best = static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin());
    actions.push_back({s.context, s.vocab, best});
  }
  auto t = realize(c, std::move(actions));
  t.logprob_current = t.logprob_old = logprob(params, t, 1.0);
  return t;
}

double logprob(const PolicyParams& params, std::span<const Choice> actions, double temperature) {
  double lp = 0.0;
  for (const auto& ch : actions) {
    if (ch.action >= ch.vocab) throw std::invalid_argument("action outside slot vocabulary");
    lp += log_softmax(params.logits(ch.context, ch.vocab), temperature)[ch.action];
  }
  return lp;
}

double logprob(const PolicyParams& params, const Trajectory& t, double temperature) {
  return logprob(params, std::span<const Choice>(t.actions), temperature);
}

SparseGrad grad_logprob(const PolicyParams& params, const Trajectory& t, double temperature) {
  SparseGrad grad;
  for (const auto& ch : t.actions) {
    const auto p = softmax(params.logits(ch.context, ch.vocab), temperature);
    auto& g = grad.try_emplace(ch.context, ch.vocab, 0.0).first->second;
    for (std::size_t i = 0; i < ch.vocab; ++i) {
      g[i] += ((i == ch.action ? 1.0 : 0.0) - p[i]) / temperature;
    }
  }
  return grad;
}

double categorical_kl(std::span<const double> p_logits, std::span<const double> q_logits,
                      double temperature) {
  if (p_logits.size() != q_logits.size()) throw std::invalid_argument("KL vocabulary mismatch");
  const auto lp = log_softmax(p_logits, temperature);
  const auto lq = log_softmax(q_logits, temperature);
  double kl = 0.0;
  for (std::size_t i = 0; i < lp.size(); ++i) kl += std::exp(lp[i]) * (lp[i] - lq[i]);
  return std::max(kl, 0.0);
}

double kl_to_ref(const PolicyParams& params, const PolicyParams& ref,
                 std::span<const SlotSpec> contexts, double temperature) {
  if (contexts.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& c : contexts) {
    sum += categorical_kl(params.logits(c.context, c.vocab), ref.logits(c.context, c.vocab),
                          temperature);
  }
  return sum / static_cast<double>(contexts.size());
}

SparseGrad grad_kl_to_ref(const PolicyParams& params, const PolicyParams& ref,
                          std::span<const SlotSpec> contexts, double temperature) {
  SparseGrad grad;
  if (contexts.empty()) return grad;
  const double w = 1.0 / static_cast<double>(contexts.size());
  for (const auto& c : contexts) {
    const auto lp = log_softmax(params.logits(c.context, c.vocab), temperature);
    const auto lq = log_softmax(ref.logits(c.context, c.vocab), temperature);
    double kl = 0.0;
    for (std::size_t i = 0; i < lp.size(); ++i) kl += std::exp(lp[i]) * (lp[i] - lq[i]);
    auto& g = grad.try_emplace(c.context, c.vocab, 0.0).first->second;
    for (std::size_t i = 0; i < lp.size(); ++i) {
      g[i] += w * std::exp(lp[i]) * (lp[i] - lq[i] - kl) / temperature;
    }
  }
  return grad;
}

void write_checkpoint(std::ostream& os, const PolicyParams& params) {
  for (const auto& [key, row] : params.table()) {
    os << nlohmann::json{{"context", key}, {"logits", row}}.dump() << '\n';
  }
}

PolicyParams read_checkpoint(std::istream& is) {
  PolicyParams params;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (trim_ascii(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      const auto row = j.at("logits").get<std::vector<double>>();
      params.entry(j.at("context").get<std::string>(), row.size()) = row;
    } catch (const nlohmann::json::exception& e) {
      throw std::invalid_argument("checkpoint line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return params;
}

}  // namespace ilr
