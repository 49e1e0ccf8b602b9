#include "ilr/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <istream>
#include <sstream>

#include "ilr/rewards.hpp"

namespace ilr {
namespace {

bool is_closed_kind(const std::string& kind) {
  return kind == "binary" || kind == "single" || kind == "multiple";
}

Payload payload_from_json(const nlohmann::json& v, const std::string& kind, const std::string& id,
                          const char* which) {
  try {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_array() && v.size() == 4 && std::all_of(v.begin(), v.end(),
                                                     [](const auto& e) { return e.is_number(); })) {
      return Box(v[0].get<double>(), v[1].get<double>(), v[2].get<double>(), v[3].get<double>());
    }
    if (v.is_array() && std::all_of(v.begin(), v.end(), [](const auto& e) { return e.is_string(); })) {
      const auto names = v.get<std::vector<std::string>>();
      if (kind == "ranking") {
        RankedLabels r;
        for (const auto& n : names) {
          auto idx = find_label(n);
          if (!idx) throw std::invalid_argument("unknown disease label: \"" + n + "\"");
          r.labels.push_back(*idx);
        }
        return r;
      }
      return LabelSet::from_names(names);
    }
  } catch (const std::invalid_argument& e) {
    throw EvalDataError(id, std::string(which) + ": " + e.what());
  }
  throw EvalDataError(id, std::string(which) + ": unsupported payload type");
}

const char* type_name(const Payload& p) {
  switch (p.index()) {
    case 0: return "string";
    case 1: return "label set";
    case 2: return "box";
    default: return "ranked labels";
  }
}

struct KindAccumulator {
  std::size_t payload_type = 0;
  std::string first_id;
  std::size_t n = 0;
  std::map<std::string, double> sums;
};

}  // namespace

PredictionRecord record_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw EvalDataError("", "record is not a JSON object");
  const std::string id = j.contains("id") && j["id"].is_string() ? j["id"].get<std::string>() : "";
  for (const char* f : {"id", "kind", "pred", "gold"}) {
    if (!j.contains(f)) throw EvalDataError(id, std::string("missing field '") + f + "'");
  }
  if (!j["id"].is_string() || !j["kind"].is_string()) {
    throw EvalDataError(id, "'id' and 'kind' must be strings");
  }
  PredictionRecord r;
  r.id = id;
  r.kind = j["kind"].get<std::string>();
  r.pred = payload_from_json(j["pred"], r.kind, id, "pred");
  r.gold = payload_from_json(j["gold"], r.kind, id, "gold");
  return r;
}

std::vector<PredictionRecord> read_predictions(std::istream& is) {
  std::vector<PredictionRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw EvalDataError("line " + std::to_string(lineno), std::string("invalid JSON: ") + e.what());
    }
    out.push_back(record_from_json(j));
  }
  return out;
}

MetricsReport evaluate(const std::vector<PredictionRecord>& records, const EvalConfig& config) {
  std::map<std::string, KindAccumulator> acc;
  for (const auto& r : records) {
    if (r.pred.index() != r.gold.index()) {
      throw EvalDataError(r.id, std::string("prediction is a ") + type_name(r.pred) +
                                    " but gold is a " + type_name(r.gold));
    }
    auto [it, fresh] = acc.try_emplace(r.kind);
    auto& a = it->second;
    if (fresh) {
      a.payload_type = r.pred.index();
      a.first_id = r.id;
    } else if (a.payload_type != r.pred.index()) {
      throw EvalDataError(r.id, "kind '" + r.kind + "' mixes payload types (record " + a.first_id +
                                    " has a different type)");
    }
    a.n += 1;
    auto& s = a.sums;
    if (const auto* pred = std::get_if<std::string>(&r.pred)) {
      const auto& gold = std::get<std::string>(r.gold);
      if (is_closed_kind(r.kind)) {
        s["accuracy"] += closed_answers_equal(*pred, gold) ? 1.0 : 0.0;
      } else {
        const auto c = tokenize(*pred), g = tokenize(gold);
        s["bleu1"] += bleu1(c, g);
        s["bleu4"] += bleu(c, g, 4);
        s["rouge1"] += rouge_n(c, g, 1);
        s["rouge2"] += rouge_n(c, g, 2);
        s["rougeL"] += rouge_l(c, g);
      }
    } else if (const auto* pred_set = std::get_if<LabelSet>(&r.pred)) {
      const auto& gold = std::get<LabelSet>(r.gold);
      const double jac = jaccard(*pred_set, gold);
      s["jaccard"] += jac;
      s["accuracy"] += jac > config.jaccard_threshold ? 1.0 : 0.0;
      s["micro_f1"] += micro_f1(*pred_set, gold);
    } else if (const auto* box = std::get_if<Box>(&r.pred)) {
      const double v = iou(*box, std::get<Box>(r.gold));
      s["iou"] += v;
      s["accuracy"] += v > config.iou_threshold ? 1.0 : 0.0;
    } else {
      const auto& ranked = std::get<RankedLabels>(r.pred).labels;
      LabelSet gold;
      try {
        gold = LabelSet::from_indices(std::get<RankedLabels>(r.gold).labels);
        for (auto k : config.recall_ks) {
          s["recall@" + std::to_string(k)] += recall_at_k(ranked, gold, k);
        }
      } catch (const std::invalid_argument& e) {
        throw EvalDataError(r.id, e.what());
      }
    }
  }

  MetricsReport report;
  for (const auto& [kind, a] : acc) {
    auto& row = report[kind];
    for (const auto& [name, sum] : a.sums) row[name] = sum / static_cast<double>(a.n);
    row["n"] = static_cast<double>(a.n);
  }
  return report;
}

RenderedReport render_report(const MetricsReport& report) {
  RenderedReport out;
  out.json = nlohmann::json::object();
  std::size_t kind_w = 4, metric_w = 6;
  for (const auto& [kind, row] : report) {
    kind_w = std::max(kind_w, kind.size());
    for (const auto& [name, v] : row) metric_w = std::max(metric_w, name.size());
  }
  auto pad = [](const std::string& s, std::size_t w) { return s + std::string(w - s.size(), ' '); };
  std::ostringstream table;
  table << pad("kind", kind_w) << "  " << pad("metric", metric_w) << "  value\n";
  for (const auto& [kind, row] : report) {
    for (const auto& [name, v] : row) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.4f", v);
      table << pad(kind, kind_w) << "  " << pad(name, metric_w) << "  " << buf << "\n";
      out.json[kind][name] = v;
    }
  }
  out.table = table.str();
  return out;
}

}  // namespace ilr
