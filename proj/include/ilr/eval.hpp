#pragma once

#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "ilr/metrics.hpp"

namespace ilr {

/// Ordered label predictions for recall@k.
struct RankedLabels {
  std::vector<std::size_t> labels;
};

/// option answer or free text | disease set | box | ranked labels
using Payload = std::variant<std::string, LabelSet, Box, RankedLabels>;

struct PredictionRecord {
  std::string id;
  std::string kind;
  Payload pred;
  Payload gold;
};

/// Thrown for schema violations; carries the offending record id.
class EvalDataError : public std::runtime_error {
 public:
  EvalDataError(std::string record_id, const std::string& what)
      : std::runtime_error(what), record_id_(std::move(record_id)) {}
  const std::string& record_id() const { return record_id_; }

 private:
  std::string record_id_;
};

struct EvalConfig {
  double jaccard_threshold = 0.5;  // strict >
  double iou_threshold = 0.5;      // strict >
  std::vector<std::size_t> recall_ks = {1, 3, 5};
};

/// kind -> metric name -> value. Every kind also reports "n".
using MetricsReport = std::map<std::string, std::map<std::string, double>>;

/// Kinds binary/single/multiple are close-ended (accuracy); string payloads
/// of any other kind are free text. Array-of-string payloads are disease sets,
/// except for kind "ranking". Four numbers form a box.
PredictionRecord record_from_json(const nlohmann::json& j);
std::vector<PredictionRecord> read_predictions(std::istream& is);

/// Micro-averaged per kind. Throws EvalDataError when a kind mixes payload
/// types or a record's prediction and gold types differ.
MetricsReport evaluate(const std::vector<PredictionRecord>& records,
                       const EvalConfig& config = {});

struct RenderedReport {
  std::string table;
  nlohmann::json json;
};

/// Rows sorted by (kind, metric); table values rounded to 4 decimals.
RenderedReport render_report(const MetricsReport& report);

}  // namespace ilr
