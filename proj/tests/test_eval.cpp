#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <sstream>

#include "ilr/eval.hpp"
#include "ilr/rng.hpp"

using namespace ilr;
using nlohmann::json;

namespace {

PredictionRecord rec(const json& j) { return record_from_json(j); }

std::vector<PredictionRecord> parse_lines(const std::string& text) {
  std::istringstream in(text);
  return read_predictions(in);
}

}  // namespace

TEST_CASE("closed accuracy") {
  const auto r = evaluate({rec({{"id", "1"}, {"kind", "single"}, {"pred", "B"}, {"gold", "b"}}),
                           rec({{"id", "2"}, {"kind", "single"}, {"pred", "A"}, {"gold", "b"}})});
  CHECK(r.at("single").at("accuracy") == 0.5);
  CHECK(r.at("single").at("n") == 2.0);
}

TEST_CASE("open Jaccard of exactly 0.5 is not counted correct") {
  const auto r = evaluate({rec({{"id", "1"}, {"kind", "open"}, {"pred", {"Pneumonia"}},
                               {"gold", {"Pneumonia", "Edema"}}})});
  CHECK(r.at("open").at("jaccard") == 0.5);
  CHECK(r.at("open").at("accuracy") == 0.0);
  EvalConfig lenient;
  lenient.jaccard_threshold = 0.4;
  const auto r2 = evaluate({rec({{"id", "1"}, {"kind", "open"}, {"pred", {"Pneumonia"}},
                                {"gold", {"Pneumonia", "Edema"}}})},
                           lenient);
  CHECK(r2.at("open").at("accuracy") == 1.0);
}

TEST_CASE("localization IoU of 1/7 falls below the threshold") {
  const auto r = evaluate({rec({{"id", "1"}, {"kind", "localization"}, {"pred", {0, 0, 10, 10}},
                               {"gold", {5, 5, 15, 15}}})});
  CHECK(r.at("localization").at("iou") == doctest::Approx(1.0 / 7.0).epsilon(1e-12));
  CHECK(r.at("localization").at("accuracy") == 0.0);
}

TEST_CASE("text and ranking kinds") {
  const auto r = evaluate(
      {rec({{"id", "t"}, {"kind", "report"}, {"pred", "a b c"}, {"gold", "a c d"}}),
       rec({{"id", "k"}, {"kind", "ranking"}, {"pred", {"Pneumonia", "Fracture", "Edema"}},
            {"gold", {"Edema", "Pneumonia"}}})});
  const auto& t = r.at("report");
  CHECK(t.at("bleu1") == doctest::Approx(2.0 / 3.0));
  CHECK(t.at("rougeL") == doctest::Approx(2.0 / 3.0));
  CHECK(t.at("rouge2") == 0.0);
  CHECK(t.at("bleu4") == 0.0);
  const auto& k = r.at("ranking");
  CHECK(k.at("recall@1") == 0.5);
  CHECK(k.at("recall@3") == 1.0);
  CHECK(k.at("recall@5") == 1.0);
}

TEST_CASE("schema violations name the record") {
  auto mixed = [] {
    evaluate({rec({{"id", "a"}, {"kind", "open"}, {"pred", {"Edema"}}, {"gold", {"Edema"}}}),
              rec({{"id", "b"}, {"kind", "open"}, {"pred", "Edema"}, {"gold", "Edema"}})});
  };
  CHECK_THROWS_AS(mixed(), EvalDataError);
  try {
    mixed();
  } catch (const EvalDataError& e) {
    CHECK(e.record_id() == "b");
  }
  try {
    evaluate({rec({{"id", "c"}, {"kind", "single"}, {"pred", "A"}, {"gold", {"Edema"}}})});
    FAIL("expected a type mismatch");
  } catch (const EvalDataError& e) {
    CHECK(e.record_id() == "c");
  }
  CHECK_THROWS_AS(rec({{"id", "d"}, {"kind", "open"}, {"pred", {"Flu"}}, {"gold", {"Edema"}}}), EvalDataError);
  CHECK_THROWS_AS(rec({{"id", "e"}, {"kind", "open"}, {"gold", {"Edema"}}}), EvalDataError);
  CHECK_THROWS_AS(rec({{"id", "f"}, {"kind", "localization"}, {"pred", {3, 0, 1, 1}}, {"gold", {0, 0, 1, 1}}}),
                  EvalDataError);
  CHECK_THROWS_AS(parse_lines("{not json}\n"), EvalDataError);
}

TEST_CASE("render report") {
  const auto empty = render_report({});
  CHECK(empty.table == "kind  metric  value\n");
  CHECK(empty.json == json::object());

  MetricsReport one;
  one["single"]["accuracy"] = 2.0 / 3.0;
  const auto r = render_report(one);
  CHECK(r.table == "kind    metric    value\nsingle  accuracy  0.6667\n");
  CHECK(r.json["single"]["accuracy"].get<double>() == 2.0 / 3.0);
  CHECK(render_report(one).table == r.table);
  CHECK(render_report(one).json.dump() == r.json.dump());
}

TEST_CASE("fixture of ten records") {
  const std::string lines =
      R"({"id":"1","kind":"binary","pred":"yes","gold":"yes"}
{"id":"2","kind":"binary","pred":"no","gold":"yes"}
{"id":"3","kind":"multiple","pred":"A, C","gold":"c, a"}
{"id":"4","kind":"multiple","pred":"A","gold":"a, c"}
{"id":"5","kind":"open","pred":["Edema","Pneumonia"],"gold":["Pneumonia","Atelectasis"]}
{"id":"6","kind":"open","pred":["Edema"],"gold":["Edema"]}
{"id":"7","kind":"localization","pred":[0,0,10,10],"gold":[0,0,10,10]}
{"id":"8","kind":"localization","pred":[0,0,10,10],"gold":[5,5,15,15]}
{"id":"9","kind":"report","pred":"pleural effusion present","gold":"pleural effusion absent"}
{"id":"10","kind":"ranking","pred":["Pneumonia","Fracture"],"gold":["Edema","Pneumonia"]}
)";
  const auto r = evaluate(parse_lines(lines));
  CHECK(r.at("binary").at("accuracy") == 0.5);
  CHECK(r.at("multiple").at("accuracy") == 0.5);
  CHECK(r.at("open").at("jaccard") == doctest::Approx((1.0 / 3.0 + 1.0) / 2).epsilon(1e-12));
  CHECK(r.at("open").at("accuracy") == 0.5);
  CHECK(r.at("open").at("micro_f1") == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(r.at("localization").at("iou") == doctest::Approx((1.0 + 1.0 / 7.0) / 2).epsilon(1e-12));
  CHECK(r.at("localization").at("accuracy") == 0.5);
  CHECK(r.at("report").at("bleu1") == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(r.at("report").at("rouge2") == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(r.at("ranking").at("recall@1") == 0.5);
}

TEST_CASE("property: permutation invariance and shard merging") {
  Rng rng(61);
  std::vector<PredictionRecord> all;
  const char* opts[] = {"a", "b", "c"};
  for (int i = 0; i < 300; ++i) {
    json j = {{"id", std::to_string(i)}};
    if (i % 3 == 0) {
      j["kind"] = "single";
      j["pred"] = opts[uniform_index(rng, 3)];
      j["gold"] = opts[uniform_index(rng, 3)];
    } else if (i % 3 == 1) {
      j["kind"] = "open";
      j["pred"] = {kDiseaseCatalog[uniform_index(rng, 4)]};
      j["gold"] = {kDiseaseCatalog[uniform_index(rng, 4)], kDiseaseCatalog[4 + uniform_index(rng, 4)]};
    } else {
      j["kind"] = "localization";
      const double x = static_cast<double>(uniform_index(rng, 5));
      j["pred"] = {x, 0, x + 4, 4};
      j["gold"] = {2, 0, 6, 4};
    }
    all.push_back(rec(j));
  }
  const auto whole = evaluate(all);
  auto shuffled = all;
  shuffle_range(shuffled.begin(), shuffled.end(), rng);
  const auto permuted = evaluate(shuffled);
  for (const auto& [kind, row] : whole) {
    for (const auto& [name, v] : row) CHECK(permuted.at(kind).at(name) == doctest::Approx(v).epsilon(1e-12));
  }

  const std::vector<PredictionRecord> a(all.begin(), all.begin() + 111), b(all.begin() + 111, all.end());
  const auto ra = evaluate(a), rb = evaluate(b);
  for (const auto& [kind, row] : whole) {
    const double na = ra.at(kind).at("n"), nb = rb.at(kind).at("n");
    const double merged = (na * ra.at(kind).at("accuracy") + nb * rb.at(kind).at("accuracy")) / (na + nb);
    CHECK(row.at("accuracy") == doctest::Approx(merged).epsilon(1e-12));
  }
}
