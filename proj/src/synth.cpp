#include "ilr/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>

#include "ilr/rng.hpp"

namespace ilr {
namespace {

using SignList = std::array<std::string_view, 2>;

struct DiseaseSigns {
  SignList signs;
  std::size_t count;
};

// Index-aligned with kDiseaseCatalog.
constexpr std::array<DiseaseSigns, kCatalogSize> kSignMap = {{
    {{"volume_loss", "platelike_opacity"}, 2},         // Atelectasis
    {{"enlarged_heart", ""}, 1},                        // Cardiomegaly
    {{"air_bronchogram", "dense_opacity"}, 2},          // Consolidation
    {{"vascular_congestion", "kerley_lines"}, 2},       // Edema
    {{"wide_mediastinum", "enlarged_heart"}, 2},        // Enlarged Cardiomediastinum
    {{"cortical_break", ""}, 1},                        // Fracture
    {{"nodule", ""}, 1},                                // Lung Lesion
    {{"hazy_opacity", "dense_opacity"}, 2},             // Lung Opacity
    {{"blunted_angle", "meniscus"}, 2},                 // Pleural Effusion
    {{"pleural_thickening", ""}, 1},                    // Pleural Other
    {{"air_bronchogram", "hazy_opacity"}, 2},           // Pneumonia
    {{"pleural_line", "absent_markings"}, 2},           // Pneumothorax
    {{"tube_line", ""}, 1},                             // Support Devices
    {{"", ""}, 0},                                      // No Finding
}};

const std::map<std::string_view, std::string_view>& sign_phrases() {
  static const std::map<std::string_view, std::string_view> phrases = {
      {"volume_loss", "volume loss"},
      {"platelike_opacity", "plate-like opacity"},
      {"enlarged_heart", "an enlarged cardiac silhouette"},
      {"air_bronchogram", "air bronchograms"},
      {"dense_opacity", "dense airspace opacity"},
      {"vascular_congestion", "pulmonary vascular congestion"},
      {"kerley_lines", "Kerley B lines"},
      {"wide_mediastinum", "a widened mediastinum"},
      {"cortical_break", "a cortical break in a rib"},
      {"nodule", "a focal nodule"},
      {"hazy_opacity", "hazy opacity"},
      {"blunted_angle", "blunting of the costophrenic angle"},
      {"meniscus", "a meniscus sign"},
      {"pleural_thickening", "pleural thickening"},
      {"pleural_line", "a visceral pleural line"},
      {"absent_markings", "absent peripheral lung markings"},
      {"tube_line", "a tube or line in place"},
  };
  return phrases;
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string signs_phrase(std::size_t label) {
  const auto& d = kSignMap[label];
  std::string out(sign_phrases().at(d.signs[0]));
  if (d.count == 2) {
    out += " and ";
    out += sign_phrases().at(d.signs[1]);
  }
  return out;
}

std::string capitalize(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::string option_letter(std::size_t k) { return std::string(1, static_cast<char>('A' + k)); }

std::vector<std::size_t> sample_gold(Rng& rng, QuestionKind kind) {
  constexpr double kNoFindingRate = 0.1;
  if (uniform01(rng) < kNoFindingRate) return {kNoFinding};
  const std::size_t size = kind == QuestionKind::Single ? 1 : 1 + uniform_index(rng, 3);
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < kNoFinding; ++i) pool.push_back(i);
  shuffle_range(pool.begin(), pool.end(), rng);
  pool.resize(size);
  std::sort(pool.begin(), pool.end());
  return pool;
}

std::vector<std::string> observe_signs(Rng& rng, const LabelSet& gold, double noise) {
  std::set<std::string> gold_signs, observed;
  for (auto d : gold.indices()) {
    for (std::size_t s = 0; s < kSignMap[d].count; ++s) {
      gold_signs.emplace(kSignMap[d].signs[s]);
      if (uniform01(rng) >= noise) observed.emplace(kSignMap[d].signs[s]);
    }
  }
  if (uniform01(rng) < noise) {
    std::vector<std::string> distractors;
    for (const auto& s : sign_vocabulary()) {
      if (!gold_signs.count(s)) distractors.push_back(s);
    }
    observed.insert(distractors[uniform_index(rng, distractors.size())]);
  }
  return {observed.begin(), observed.end()};
}

std::string question_text(QuestionKind kind, const std::string& probe) {
  switch (kind) {
    case QuestionKind::Binary:
      return "Is there evidence of " + lower(probe) + " in this chest X-ray?";
    case QuestionKind::Single:
      return "Which of the following is the most likely diagnosis?";
    case QuestionKind::Multiple:
      return "Which of the following findings are present? Select all that apply.";
    case QuestionKind::Open:
      return "Which diseases are present in this chest X-ray?";
  }
  return {};
}

}  // namespace

const char* to_string(QuestionKind kind) {
  switch (kind) {
    case QuestionKind::Binary: return "binary";
    case QuestionKind::Single: return "single";
    case QuestionKind::Multiple: return "multiple";
    case QuestionKind::Open: return "open";
  }
  return "unknown";
}

QuestionKind parse_question_kind(std::string_view text) {
  if (text == "binary") return QuestionKind::Binary;
  if (text == "single") return QuestionKind::Single;
  if (text == "multiple") return QuestionKind::Multiple;
  if (text == "open") return QuestionKind::Open;
  throw std::invalid_argument("unknown question kind: \"" + std::string(text) + "\"");
}

bool is_closed(QuestionKind kind) { return kind != QuestionKind::Open; }

TraceMode trace_mode(QuestionKind kind) {
  switch (kind) {
    case QuestionKind::Binary: return TraceMode::Binary;
    case QuestionKind::Open: return TraceMode::OpenEnded;
    default: return TraceMode::CloseEnded;
  }
}

std::span<const std::string_view> disease_signs(std::size_t label) {
  if (label >= kCatalogSize) throw std::invalid_argument("label index out of range");
  return {kSignMap[label].signs.data(), kSignMap[label].count};
}

const std::vector<std::string>& sign_vocabulary() {
  static const std::vector<std::string> vocab = [] {
    std::set<std::string> all;
    for (const auto& d : kSignMap) {
      for (std::size_t s = 0; s < d.count; ++s) all.emplace(d.signs[s]);
    }
    return std::vector<std::string>(all.begin(), all.end());
  }();
  return vocab;
}

std::vector<std::size_t> candidate_diseases(std::span<const std::string> signs) {
  std::vector<std::size_t> out;
  for (std::size_t d = 0; d < kNoFinding; ++d) {
    const auto own = disease_signs(d);
    const bool hit = std::any_of(own.begin(), own.end(), [&](std::string_view s) {
      return std::find(signs.begin(), signs.end(), s) != signs.end();
    });
    if (hit) out.push_back(d);
  }
  return out;
}

std::string evidence_sentence(std::size_t label, bool present, int paraphrase) {
  if (label >= kCatalogSize) throw std::invalid_argument("label index out of range");
  if (label == kNoFinding) {
    if (present) {
      return paraphrase == 0 ? "The lungs are clear and there is no acute abnormality."
                             : "No acute cardiopulmonary process is identified.";
    }
    return paraphrase == 0 ? "Abnormal findings are present, so the study is not normal."
                           : "This is not a normal study.";
  }
  const auto name = lower(kDiseaseCatalog[label]);
  const auto signs = signs_phrase(label);
  if (present) {
    return paraphrase == 0 ? "There is " + signs + ", consistent with " + name + "."
                           : capitalize(name) + " is suggested by " + signs + ".";
  }
  return paraphrase == 0 ? "There is no " + signs + ", arguing against " + name + "."
                         : capitalize(name) + " is not supported on this study.";
}

SynthCase gen_case(std::uint64_t seed, QuestionKind kind, double noise_rate) {
  if (!(noise_rate >= 0.0 && noise_rate < 0.5)) {
    throw std::invalid_argument("noise_rate must be in [0, 0.5)");
  }
  Rng rng(seed);
  SynthCase c;
  c.seed = seed;
  c.kind = kind;
  c.id = std::string(to_string(kind)) + "-" + std::to_string(seed);
  const auto gold = sample_gold(rng, kind);
  c.gold_diseases = LabelSet::from_indices(gold);
  c.observed_signs = observe_signs(rng, c.gold_diseases, noise_rate);

  std::vector<std::string> sentences;
  for (auto d : gold) sentences.push_back(evidence_sentence(d, true, 0));
  c.findings_text = join(sentences, " ");

  switch (kind) {
    case QuestionKind::Binary: {
      std::vector<std::size_t> absent;
      for (std::size_t d = 0; d < kNoFinding; ++d) {
        if (!c.gold_diseases.contains(d)) absent.push_back(d);
      }
      const bool ask_present = gold.front() != kNoFinding && uniform01(rng) < 0.5;
      const auto probe = ask_present ? gold[uniform_index(rng, gold.size())]
                                     : absent[uniform_index(rng, absent.size())];
      c.probe = std::string(kDiseaseCatalog[probe]);
      c.options = {"yes", "no"};
      c.gold_final = c.gold_diseases.contains(probe) ? "yes" : "no";
      break;
    }
    case QuestionKind::Single:
    case QuestionKind::Multiple: {
      std::vector<std::size_t> pool;
      for (std::size_t d = 0; d < kCatalogSize; ++d) {
        if (!c.gold_diseases.contains(d)) pool.push_back(d);
      }
      shuffle_range(pool.begin(), pool.end(), rng);
      std::vector<std::size_t> opts = gold;
      for (std::size_t i = 0; opts.size() < 4; ++i) opts.push_back(pool[i]);
      shuffle_range(opts.begin(), opts.end(), rng);
      std::vector<std::string> letters;
      for (std::size_t k = 0; k < opts.size(); ++k) {
        c.options.emplace_back(kDiseaseCatalog[opts[k]]);
        if (c.gold_diseases.contains(opts[k])) letters.push_back(option_letter(k));
      }
      c.gold_final = join(letters, ", ");
      break;
    }
    case QuestionKind::Open:
      c.gold_final = c.gold_diseases.join();
      break;
  }
  c.question = question_text(kind, c.probe);
  c.gold_trace = build_gold_trace(c, rng());
  return c;
}

std::vector<std::size_t> evaluation_subjects(const SynthCase& c) {
  switch (c.kind) {
    case QuestionKind::Binary: return {*find_label(c.probe)};
    case QuestionKind::Single:
    case QuestionKind::Multiple: {
      std::vector<std::size_t> out;
      for (const auto& o : c.options) out.push_back(*find_label(o));
      return out;
    }
    case QuestionKind::Open: return candidate_diseases(c.observed_signs);
  }
  return {};
}

InterleavedTrace compose_trace(const SynthCase& c, std::span<const StepChoice> choices) {
  const auto subjects = evaluation_subjects(c);
  if (choices.size() != subjects.size()) {
    throw std::invalid_argument("one choice per evaluation subject is required");
  }
  auto think = [&](std::size_t k) {
    return evidence_sentence(subjects[k], choices[k].think_present, choices[k].paraphrase);
  };

  std::vector<StepPair> pairs;
  switch (c.kind) {
    case QuestionKind::Binary:
      pairs.push_back({think(0), choices[0].positive ? "yes" : "no"});
      break;
    case QuestionKind::Single:
    case QuestionKind::Multiple: {
      std::vector<std::string> kept;
      for (std::size_t k = 0; k < subjects.size(); ++k) {
        pairs.push_back({think(k), choices[k].positive ? "keep" : "exclude"});
        if (choices[k].positive) kept.push_back(option_letter(k));
      }
      if (kept.empty()) {
        pairs.push_back({"No option was retained.", "none"});
      } else {
        pairs.push_back({"Retained options: " + join(kept, ", ") + ".", join(kept, ", ")});
      }
      break;
    }
    case QuestionKind::Open: {
      std::vector<std::string> signs;
      for (const auto& s : c.observed_signs) signs.emplace_back(sign_phrases().at(s));
      std::vector<std::string> names;
      for (auto d : subjects) names.emplace_back(kDiseaseCatalog[d]);
      pairs.push_back({signs.empty() ? "No abnormal signs are observed."
                                     : "Observed signs: " + join(signs, "; ") + ".",
                       names.empty() ? "Candidates: none" : "Candidates: " + join(names, ", ")});
      std::vector<std::size_t> confirmed;
      for (std::size_t k = 0; k < subjects.size(); ++k) {
        pairs.push_back({think(k), choices[k].positive ? "confirm" : "reject"});
        if (choices[k].positive) confirmed.push_back(subjects[k]);
      }
      const auto set = LabelSet::from_indices(confirmed);
      if (set.empty()) {
        pairs.push_back({"No candidate was confirmed.", std::string(kDiseaseCatalog[kNoFinding])});
      } else {
        pairs.push_back({"Confirmed findings: " + set.join() + ".", set.join()});
      }
      break;
    }
  }
  return make_trace(pairs, trace_mode(c.kind));
}

InterleavedTrace build_gold_trace(const SynthCase& c, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<StepChoice> choices;
  for (auto d : evaluation_subjects(c)) {
    const bool present = c.gold_diseases.contains(d);
    choices.push_back({present, static_cast<int>(uniform_index(rng, 2)), present});
  }
  auto trace = compose_trace(c, choices);
  if (c.kind == QuestionKind::Open) {
    auto& think = trace.segments[trace.segments.size() - 2].text;
    auto& answer = trace.segments.back().text;
    answer = c.gold_diseases.join();
    think = c.gold_diseases.contains(kNoFinding) ? "No candidate was confirmed."
                                                 : "Confirmed findings: " + answer + ".";
  }
  return trace;
}

ScoringTarget scoring_target(const SynthCase& c) {
  ScoringTarget t;
  t.closed = is_closed(c.kind);
  t.gold_final = c.gold_final;
  t.gold_trace = c.gold_trace;
  if (c.kind == QuestionKind::Binary) {
    t.option_keys = {"yes", "no"};
  } else if (t.closed) {
    for (std::size_t k = 0; k < c.options.size(); ++k) {
      t.option_keys.push_back(normalize_answer(option_letter(k)));
    }
  }
  return t;
}

nlohmann::json to_json(const SynthCase& c) {
  return nlohmann::json{{"id", c.id},
                        {"seed", c.seed},
                        {"kind", to_string(c.kind)},
                        {"gold_diseases", c.gold_diseases.names()},
                        {"observed_signs", c.observed_signs},
                        {"findings_text", c.findings_text},
                        {"question", c.question},
                        {"probe", c.probe},
                        {"options", c.options},
                        {"trace_text", serialize_trace(c.gold_trace)},
                        {"gold_final", c.gold_final}};
}

SynthCase case_from_json(const nlohmann::json& j) {
  auto field = [&](const char* name) -> const nlohmann::json& {
    if (!j.is_object() || !j.contains(name)) {
      throw std::invalid_argument(std::string("missing field '") + name + "'");
    }
    return j.at(name);
  };
  try {
    SynthCase c;
    c.id = field("id").get<std::string>();
    c.seed = j.value("seed", std::uint64_t{0});
    c.kind = parse_question_kind(field("kind").get<std::string>());
    c.gold_diseases = LabelSet::from_names(field("gold_diseases").get<std::vector<std::string>>());
    c.observed_signs = field("observed_signs").get<std::vector<std::string>>();
    std::sort(c.observed_signs.begin(), c.observed_signs.end());
    c.observed_signs.erase(std::unique(c.observed_signs.begin(), c.observed_signs.end()),
                           c.observed_signs.end());
    for (const auto& s : c.observed_signs) {
      const auto& vocab = sign_vocabulary();
      if (!std::binary_search(vocab.begin(), vocab.end(), s)) {
        throw std::invalid_argument("unknown sign \"" + s + "\"");
      }
    }
    c.findings_text = field("findings_text").get<std::string>();
    c.question = j.value("question", std::string{});
    c.probe = j.value("probe", std::string{});
    c.options = field("options").get<std::vector<std::string>>();
    c.gold_final = field("gold_final").get<std::string>();
    if (c.kind == QuestionKind::Binary && !find_label(c.probe)) {
      throw std::invalid_argument("binary case needs a catalog 'probe'");
    }
    if (c.kind == QuestionKind::Single || c.kind == QuestionKind::Multiple) {
      for (const auto& o : c.options) {
        if (!find_label(o)) throw std::invalid_argument("unknown option label \"" + o + "\"");
      }
    }
    auto parsed = parse_trace(field("trace_text").get<std::string>(), trace_mode(c.kind));
    if (!parsed.format_ok) {
      throw std::invalid_argument("trace_text is malformed: " + parsed.diagnostics.front().message);
    }
    c.gold_trace = std::move(*parsed.trace);
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("bad field type: ") + e.what());
  }
}

std::uint64_t corpus_case_seed(std::uint64_t base_seed, std::uint64_t index) {
  return mix_seed({base_seed, index}) & ~(1ULL << 63);
}

std::uint64_t heldout_case_seed(std::uint64_t base_seed, std::uint64_t index) {
  return mix_seed({base_seed, index}) | (1ULL << 63);
}

std::vector<SynthCase> generate_corpus(std::size_t n, std::uint64_t seed, double noise_rate,
                                       const std::vector<QuestionKind>& kinds) {
  if (kinds.empty()) throw std::invalid_argument("at least one question kind is required");
  std::vector<SynthCase> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(gen_case(corpus_case_seed(seed, i), kinds[i % kinds.size()], noise_rate));
  }
  return out;
}

std::vector<SynthCase> generate_heldout(std::size_t n, std::uint64_t seed, double noise_rate,
                                        QuestionKind kind) {
  std::vector<SynthCase> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(gen_case(heldout_case_seed(seed, i), kind, noise_rate));
  }
  return out;
}

bool is_valid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = 0;
    std::uint32_t cp = 0;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c >> 5) == 0x6) {
      len = 2;
      cp = c & 0x1F;
    } else if ((c >> 4) == 0xE) {
      len = 3;
      cp = c & 0x0F;
    } else if ((c >> 3) == 0x1E) {
      len = 4;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + len > s.size()) return false;
    for (std::size_t k = 1; k < len; ++k) {
      const auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc >> 6) != 0x2) return false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    const bool overlong = (len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) ||
                          (len == 4 && cp < 0x10000);
    if (overlong || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return false;
    i += len;
  }
  return true;
}

ScreenResult screen_report(std::string_view raw_report) {
  if (!is_valid_utf8(raw_report)) throw std::invalid_argument("report is not valid UTF-8");
  constexpr std::string_view kFindings = "FINDINGS:";
  constexpr std::string_view kImpression = "IMPRESSION:";
  ScreenResult r;
  const auto f = raw_report.find(kFindings);
  if (f == std::string_view::npos) {
    r.reason = "missing FINDINGS: marker";
    return r;
  }
  const auto start = f + kFindings.size();
  const auto imp = raw_report.find(kImpression, start);
  if (imp == std::string_view::npos) {
    r.reason = raw_report.find(kImpression) == std::string_view::npos
                   ? "missing IMPRESSION: marker"
                   : "IMPRESSION: precedes FINDINGS:";
    return r;
  }
  r.status = ScreenStatus::Accepted;
  r.findings = std::string(trim_ascii(raw_report.substr(start, imp - start)));
  return r;
}

bool token_filter(std::string_view findings, std::size_t min_tokens) {
  return tokenize(findings).size() > min_tokens;
}

std::string stratum_of(const SynthCase& c) {
  const auto idx = c.gold_diseases.indices();
  const std::string_view primary = idx.empty() ? "none" : kDiseaseCatalog[idx.front()];
  return std::string(to_string(c.kind)) + "/" + std::string(primary);
}

std::vector<SynthCase> balance_labels(const std::vector<SynthCase>& cases, std::uint64_t seed) {
  if (cases.empty()) throw std::invalid_argument("balance_labels needs a non-empty input");
  std::map<std::string, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < cases.size(); ++i) strata[stratum_of(cases[i])].push_back(i);
  std::size_t min_count = cases.size();
  for (const auto& [key, members] : strata) min_count = std::min(min_count, members.size());

  std::vector<char> keep(cases.size(), 0);
  for (auto& [key, members] : strata) {
    // Member order by id makes the draw independent of input order.
    std::sort(members.begin(), members.end(),
              [&](std::size_t a, std::size_t b) { return cases[a].id < cases[b].id; });
    Rng rng(mix_seed({seed, stable_hash(key)}));
    shuffle_range(members.begin(), members.end(), rng);
    for (std::size_t i = 0; i < min_count; ++i) keep[members[i]] = 1;
  }
  std::vector<SynthCase> out;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    if (keep[i]) out.push_back(cases[i]);
  }
  return out;
}

DatasetPartition partition(const std::vector<SynthCase>& cases, double reasoning_fraction,
                           std::uint64_t seed) {
  if (!(reasoning_fraction >= 0.0 && reasoning_fraction <= 1.0)) {
    throw std::invalid_argument("reasoning_fraction must be in [0, 1]");
  }
  std::vector<const SynthCase*> order;
  for (const auto& c : cases) order.push_back(&c);
  std::sort(order.begin(), order.end(),
            [](const SynthCase* a, const SynthCase* b) { return a->id < b->id; });
  Rng rng(seed);
  shuffle_range(order.begin(), order.end(), rng);
  const auto n_reason = static_cast<std::size_t>(
      std::llround(reasoning_fraction * static_cast<double>(order.size())));
  DatasetPartition p;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto& c = *order[i];
    if (i >= n_reason) {
      p.d_a.push_back(c);
    } else if (is_closed(c.kind)) {
      p.d_r_closed.push_back(c);
    } else {
      p.d_r_open.push_back(c);
    }
  }
  return p;
}

}  // namespace ilr
