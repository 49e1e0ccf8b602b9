#include "ilr/metrics.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <stdexcept>

#include "ilr/trace.hpp"

namespace ilr {
namespace {

bool is_ascii_punct(unsigned char c) {
  return (c >= 33 && c <= 47) || (c >= 58 && c <= 64) || (c >= 91 && c <= 96) ||
         (c >= 123 && c <= 126);
}

std::string normalize_label_text(std::string_view s) {
  std::string out;
  bool pending_space = false;
  for (char ch : trim_ascii(s)) {
    if (is_ascii_space(ch)) {
      pending_space = true;
      continue;
    }
    if (pending_space && !out.empty()) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
  }
  return out;
}

using NgramCounts = std::map<std::vector<std::string>, std::size_t>;

NgramCounts ngram_counts(std::span<const std::string> seq, std::size_t n) {
  NgramCounts counts;
  if (seq.size() < n) return counts;
  for (std::size_t i = 0; i + n <= seq.size(); ++i) {
    counts[std::vector<std::string>(seq.begin() + static_cast<std::ptrdiff_t>(i),
                                    seq.begin() + static_cast<std::ptrdiff_t>(i + n))]++;
  }
  return counts;
}

std::size_t clipped_overlap(const NgramCounts& cand, const NgramCounts& ref) {
  std::size_t overlap = 0;
  for (const auto& [gram, count] : cand) {
    if (auto it = ref.find(gram); it != ref.end()) overlap += std::min(count, it->second);
  }
  return overlap;
}

double f_measure(double precision, double recall) {
  if (precision + recall <= 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

}  // namespace

TokenSeq tokenize(std::string_view text) {
  TokenSeq tokens;
  std::string current;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (is_ascii_space(ch) || is_ascii_punct(c)) {
      if (!current.empty()) tokens.push_back(std::move(current));
      current.clear();
      continue;
    }
    current.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : ch);
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::optional<std::size_t> find_label(std::string_view name) {
  const auto key = normalize_label_text(name);
  for (std::size_t i = 0; i < kCatalogSize; ++i) {
    if (normalize_label_text(kDiseaseCatalog[i]) == key) return i;
  }
  return std::nullopt;
}

void LabelSet::insert(std::size_t index) {
  if (index >= kCatalogSize) throw std::invalid_argument("label index out of range");
  const bool nf_conflict = (index == kNoFinding && bits_ != 0 && !contains(kNoFinding)) ||
                           (index != kNoFinding && contains(kNoFinding));
  if (nf_conflict) {
    throw std::invalid_argument("\"No Finding\" cannot be combined with other labels");
  }
  bits_ = static_cast<std::uint16_t>(bits_ | (1U << index));
}

LabelSet LabelSet::from_names(std::span<const std::string> names) {
  LabelSet set;
  for (const auto& name : names) {
    auto idx = find_label(name);
    if (!idx) throw std::invalid_argument("unknown disease label: \"" + name + "\"");
    set.insert(*idx);
  }
  return set;
}

LabelSet LabelSet::from_indices(std::span<const std::size_t> indices) {
  LabelSet set;
  for (auto i : indices) set.insert(i);
  return set;
}

LabelSet LabelSet::parse(std::string_view text) {
  std::vector<std::string> names;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto comma = text.find(',', start);
    if (comma == std::string_view::npos) comma = text.size();
    auto part = trim_ascii(text.substr(start, comma - start));
    if (!part.empty()) names.emplace_back(part);
    start = comma + 1;
  }
  return from_names(names);
}

std::size_t LabelSet::size() const { return static_cast<std::size_t>(std::popcount(bits_)); }

std::vector<std::size_t> LabelSet::indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < kCatalogSize; ++i) {
    if (contains(i)) out.push_back(i);
  }
  return out;
}

std::vector<std::string> LabelSet::names() const {
  std::vector<std::string> out;
  for (auto i : indices()) out.emplace_back(kDiseaseCatalog[i]);
  return out;
}

std::string LabelSet::join() const {
  std::string out;
  for (const auto& n : names()) {
    if (!out.empty()) out += ", ";
    out += n;
  }
  return out;
}

Box::Box(double x_min, double y_min, double x_max, double y_max)
    : x_min_(x_min), y_min_(y_min), x_max_(x_max), y_max_(y_max) {
  const bool ok = std::isfinite(x_min) && std::isfinite(y_min) && std::isfinite(x_max) &&
                  std::isfinite(y_max) && x_min >= 0 && y_min >= 0 && x_min < x_max &&
                  y_min < y_max;
  if (!ok) throw std::invalid_argument("degenerate box");
}

double bleu(std::span<const std::string> candidate, std::span<const std::string> reference,
            int max_n) {
  if (max_n < 1) throw std::invalid_argument("bleu order must be >= 1");
  if (candidate.empty()) return 0.0;
  double log_sum = 0.0;
  for (int n = 1; n <= max_n; ++n) {
    const auto un = static_cast<std::size_t>(n);
    if (candidate.size() < un) return 0.0;
    const auto overlap = clipped_overlap(ngram_counts(candidate, un), ngram_counts(reference, un));
    if (overlap == 0) return 0.0;
    log_sum += std::log(static_cast<double>(overlap) / static_cast<double>(candidate.size() - un + 1));
  }
  const double bp = std::exp(std::min(
      0.0, 1.0 - static_cast<double>(reference.size()) / static_cast<double>(candidate.size())));
  return bp * std::exp(log_sum / max_n);
}

double bleu1(std::span<const std::string> candidate, std::span<const std::string> reference) {
  return bleu(candidate, reference, 1);
}

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l(std::span<const std::string> candidate, std::span<const std::string> reference) {
  if (candidate.empty() || reference.empty()) return 0.0;
  const auto lcs = static_cast<double>(lcs_length(candidate, reference));
  return f_measure(lcs / static_cast<double>(candidate.size()),
                   lcs / static_cast<double>(reference.size()));
}

double rouge_n(std::span<const std::string> candidate, std::span<const std::string> reference,
               int n) {
  if (n != 1 && n != 2) throw std::invalid_argument("rouge_n supports n = 1 or 2");
  const auto un = static_cast<std::size_t>(n);
  if (candidate.size() < un || reference.size() < un) return 0.0;
  const auto overlap = static_cast<double>(
      clipped_overlap(ngram_counts(candidate, un), ngram_counts(reference, un)));
  return f_measure(overlap / static_cast<double>(candidate.size() - un + 1),
                   overlap / static_cast<double>(reference.size() - un + 1));
}

double micro_f1(const LabelSet& pred, const LabelSet& gold) {
  const auto tp = std::popcount(static_cast<unsigned>(pred.bits() & gold.bits()));
  const auto fp = std::popcount(static_cast<unsigned>(pred.bits() & ~gold.bits()));
  const auto fn = std::popcount(static_cast<unsigned>(~pred.bits() & gold.bits()));
  if (tp + fp + fn == 0) return 1.0;
  return 2.0 * tp / static_cast<double>(2 * tp + fp + fn);
}

double jaccard(const LabelSet& pred, const LabelSet& gold) {
  const auto inter = std::popcount(static_cast<unsigned>(pred.bits() & gold.bits()));
  const auto uni = std::popcount(static_cast<unsigned>(pred.bits() | gold.bits()));
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double iou(const Box& a, const Box& b) {
  const double w = std::min(a.x_max(), b.x_max()) - std::max(a.x_min(), b.x_min());
  const double h = std::min(a.y_max(), b.y_max()) - std::max(a.y_min(), b.y_min());
  if (w <= 0 || h <= 0) return 0.0;
  const double inter = w * h;
  return inter / (a.area() + b.area() - inter);
}

double recall_at_k(std::span<const std::size_t> ranked_preds, const LabelSet& gold,
                   std::size_t k) {
  if (k == 0) throw std::invalid_argument("recall@k requires k >= 1");
  std::uint32_t seen = 0;
  for (auto p : ranked_preds) {
    if (p >= kCatalogSize) throw std::invalid_argument("ranked label out of range");
    if ((seen >> p) & 1U) throw std::invalid_argument("duplicate label in ranked predictions");
    seen |= 1U << p;
  }
  if (gold.empty()) return 1.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < std::min(k, ranked_preds.size()); ++i) {
    if (gold.contains(ranked_preds[i])) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(gold.size());
}

}  // namespace ilr
