#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ilr {

using TokenSeq = std::vector<std::string>;

/// Lowercases ASCII and splits on whitespace and ASCII punctuation, which is
/// dropped. Bytes >= 0x80 are kept inside tokens untouched.
TokenSeq tokenize(std::string_view text);

// ---------------------------------------------------------------------------
// Disease labels

inline constexpr std::size_t kCatalogSize = 14;
inline constexpr std::array<std::string_view, kCatalogSize> kDiseaseCatalog = {
    "Atelectasis",      "Cardiomegaly",     "Consolidation",  "Edema",
    "Enlarged Cardiomediastinum", "Fracture", "Lung Lesion",  "Lung Opacity",
    "Pleural Effusion", "Pleural Other",    "Pneumonia",      "Pneumothorax",
    "Support Devices",  "No Finding"};
inline constexpr std::size_t kNoFinding = kCatalogSize - 1;

/// Catalog index for a canonical name; case and spacing are normalized first.
std::optional<std::size_t> find_label(std::string_view name);

/// Subset of the catalog. "No Finding" never coexists with another label.
class LabelSet {
 public:
  LabelSet() = default;

  /// Throws std::invalid_argument on unknown names or a No Finding conflict.
  static LabelSet from_names(std::span<const std::string> names);
  static LabelSet from_indices(std::span<const std::size_t> indices);
  /// Comma-separated list, e.g. "Edema, Pneumonia". Empty / whitespace -> {}.
  static LabelSet parse(std::string_view text);

  bool contains(std::size_t index) const { return (bits_ >> index) & 1U; }
  std::size_t size() const;
  bool empty() const { return bits_ == 0; }
  std::uint16_t bits() const { return bits_; }
  std::vector<std::size_t> indices() const;
  std::vector<std::string> names() const;
  /// Names joined by ", " in catalog order.
  std::string join() const;

  friend bool operator==(const LabelSet&, const LabelSet&) = default;

 private:
  void insert(std::size_t index);
  std::uint16_t bits_ = 0;
};

class Box {
 public:
  /// Throws std::invalid_argument unless 0 <= min < max on both axes.
  Box(double x_min, double y_min, double x_max, double y_max);

  double x_min() const { return x_min_; }
  double y_min() const { return y_min_; }
  double x_max() const { return x_max_; }
  double y_max() const { return y_max_; }
  double area() const { return (x_max_ - x_min_) * (y_max_ - y_min_); }

 private:
  double x_min_, y_min_, x_max_, y_max_;
};

// ---------------------------------------------------------------------------
// Text overlap. All scores lie in [0, 1].

/// Sentence-level, unsmoothed BLEU with uniform weights over 1..max_n grams
/// and brevity penalty exp(min(0, 1 - |ref|/|cand|)).
double bleu(std::span<const std::string> candidate, std::span<const std::string> reference,
            int max_n);
double bleu1(std::span<const std::string> candidate, std::span<const std::string> reference);

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b);
double rouge_l(std::span<const std::string> candidate, std::span<const std::string> reference);
/// n must be 1 or 2 (std::invalid_argument otherwise).
double rouge_n(std::span<const std::string> candidate, std::span<const std::string> reference,
               int n);

// ---------------------------------------------------------------------------
// Set and box overlap.

/// 2TP / (2TP + FP + FN); both empty -> 1.
double micro_f1(const LabelSet& pred, const LabelSet& gold);
/// |pred ∩ gold| / |pred ∪ gold|; both empty -> 1.
double jaccard(const LabelSet& pred, const LabelSet& gold);
double iou(const Box& a, const Box& b);
/// Throws on k == 0 or duplicate predictions; empty gold -> 1.
double recall_at_k(std::span<const std::size_t> ranked_preds, const LabelSet& gold, std::size_t k);

}  // namespace ilr
