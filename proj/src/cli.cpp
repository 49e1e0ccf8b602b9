#include "ilr/cli.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ilr/curriculum.hpp"
#include "ilr/eval.hpp"
#include "ilr/synth.hpp"

namespace fs = std::filesystem;

namespace ilr {
namespace {

// Bad input files and records; mapped to kExitData.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
// Bad flags or configuration; mapped to kExitUsage.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  return out;
}

std::vector<SynthCase> read_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open corpus '" + path + "'");
  std::vector<SynthCase> cases;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    try {
      cases.push_back(case_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return cases;
}

CurriculumConfig load_config(const std::string& path) {
  if (path.empty()) return {};
  const auto text = read_file(path);
  try {
    auto config = CurriculumConfig::from_json(nlohmann::json::parse(text));
    config.validate();
    return config;
  } catch (const nlohmann::json::parse_error& e) {
    throw UsageError("config '" + path + "': invalid JSON: " + e.what());
  } catch (const std::invalid_argument& e) {
    throw UsageError("config '" + path + "': " + e.what());
  }
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

class FileSink : public TrainSink {
 public:
  FileSink(const fs::path& dir, bool log_trajectories)
      : dir_(dir), log_(open_out(dir / "train_log.jsonl")) {
    if (log_trajectories) rewards_ = open_out(dir / "rewards.jsonl");
  }

  void header(const nlohmann::json& j) { log_ << j.dump() << '\n' << std::flush; }

  void on_step(const StepStats& s) override { log_ << to_json(s).dump() << '\n' << std::flush; }

  void on_trajectory(const StepStats& s, const std::string& case_id, std::size_t index,
                     const RewardBreakdown& b) override {
    if (!rewards_.is_open()) return;
    nlohmann::json j = to_json(b);
    j["phase"] = s.phase;
    j["step"] = s.step;
    j["case_id"] = case_id;
    j["index"] = index;
    rewards_ << j.dump() << '\n';
  }

  void on_checkpoint(const std::string& name, const PolicyParams& params) override {
    auto out = open_out(dir_ / ("checkpoint_" + name + ".jsonl"));
    write_checkpoint(out, params);
    if (rewards_.is_open()) rewards_.flush();
  }

 private:
  fs::path dir_;
  std::ofstream log_;
  std::ofstream rewards_;
};

nlohmann::json phase_json(const PhaseReport& p) {
  return {{"steps", p.steps.size()}, {"final_ema", p.final_ema}, {"heldout", p.heldout}};
}

std::vector<QuestionKind> parse_kinds(const std::string& text) {
  std::vector<QuestionKind> kinds;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      kinds.push_back(parse_question_kind(std::string(trim_ascii(item))));
    } catch (const std::invalid_argument& e) {
      throw UsageError(std::string("--kinds: ") + e.what());
    }
  }
  if (kinds.empty()) throw UsageError("--kinds: at least one kind is required");
  return kinds;
}

int cmd_gen_data(const std::string& out_path, std::size_t n, std::uint64_t seed, double noise,
                 const std::string& kinds_text, bool balance, std::ostream& out) {
  if (!(noise >= 0.0 && noise < 0.5)) throw UsageError("--noise: must be in [0, 0.5)");
  const auto kinds = parse_kinds(kinds_text);
  auto cases = generate_corpus(n, seed, noise, kinds);
  const auto generated = cases.size();
  if (balance) cases = balance_labels(cases, seed);

  auto file = open_out(out_path);
  std::map<std::string, std::size_t> per_kind;
  for (const auto& c : cases) {
    file << to_json(c).dump() << '\n';
    per_kind[to_string(c.kind)] += 1;
  }
  nlohmann::json summary = {{"generated", generated},
                            {"written", cases.size()},
                            {"balanced", balance},
                            {"kinds", per_kind},
                            {"out", out_path}};
  out << summary.dump() << '\n';
  return kExitOk;
}

int cmd_train(const std::string& corpus_path, const std::string& config_path,
              const std::string& out_dir, std::ostream& out) {
  const auto config = load_config(config_path);
  const auto corpus = read_corpus(corpus_path);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw DataError("cannot create '" + out_dir + "': " + ec.message());

  FileSink sink(out_dir, config.log_trajectories);
  sink.header({{"timestamp", utc_timestamp()}, {"config", config.to_json()},
               {"corpus_cases", corpus.size()}});
  CurriculumResult result;
  try {
    result = run_curriculum(corpus, config, &sink);
  } catch (const std::invalid_argument& e) {
    throw DataError(e.what());
  }

  nlohmann::json summary = {{"initial", result.initial},
                            {"closed", phase_json(result.closed)},
                            {"open", phase_json(result.open)},
                            {"contexts", result.params.table().size()}};
  open_out(fs::path(out_dir) / "summary.json") << summary.dump(2) << '\n';
  out << summary.dump() << '\n';
  return kExitOk;
}

int cmd_score(const std::string& trace_path, const std::string& gold_path,
              const std::string& config_path, double batch_metric, double ema,
              std::ostream& out) {
  const auto config = load_config(config_path);
  if (!(batch_metric >= 0.0 && batch_metric <= 1.0)) throw UsageError("--batch-metric: must be in [0, 1]");
  if (!(ema >= 0.0 && ema <= 1.0)) throw UsageError("--ema: must be in [0, 1]");
  const auto raw = read_file(trace_path);
  const auto cases = read_corpus(gold_path);
  if (cases.empty()) throw DataError("gold file '" + gold_path + "' holds no record");

  const auto& gold = cases.front();
  const auto target = scoring_target(gold);
  const auto outcome = score_outcome(raw, target, trace_mode(gold.kind));
  const auto breakdown = finish_reward(outcome, target, batch_metric, ema, config.mode, config.reward);

  nlohmann::json j = to_json(breakdown);
  j["format_ok"] = outcome.parsed.format_ok;
  nlohmann::json diags = nlohmann::json::array();
  for (const auto& d : outcome.parsed.diagnostics) diags.push_back(d.message);
  for (const auto& w : outcome.warnings) diags.push_back(w);
  j["diagnostics"] = diags;
  out << j.dump() << '\n';
  return kExitOk;
}

int cmd_eval(const std::string& pred_path, const std::string& out_path, std::ostream& out) {
  std::ifstream in(pred_path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + pred_path + "'");
  MetricsReport report;
  try {
    report = evaluate(read_predictions(in));
  } catch (const EvalDataError& e) {
    throw DataError("record " + (e.record_id().empty() ? std::string("<no id>") : e.record_id()) +
                    ": " + e.what());
  }
  const auto rendered = render_report(report);
  out << rendered.table;
  if (!out_path.empty()) open_out(out_path) << rendered.json.dump(2) << '\n';
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Interleaved-reasoning reward and curriculum toolkit", "ilr"};
  app.require_subcommand(1);

  std::string gen_out, gen_kinds = "binary,single,multiple,open";
  std::size_t gen_n = 1000;
  std::uint64_t gen_seed = 0;
  double gen_noise = 0.1;
  bool gen_balance = false;
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic case corpus (JSONL)");
  gen->add_option("--out", gen_out, "Output JSONL path")->required();
  gen->add_option("--n", gen_n, "Number of cases");
  gen->add_option("--seed", gen_seed, "Base seed");
  gen->add_option("--noise", gen_noise, "Sign noise rate in [0, 0.5)");
  gen->add_option("--kinds", gen_kinds, "Comma-separated question kinds");
  gen->add_flag("--balance", gen_balance, "Downsample to equal label strata");

  std::string train_corpus, train_config, train_out;
  auto* train = app.add_subcommand("train", "Run the closed-then-open curriculum");
  train->add_option("--corpus", train_corpus, "Corpus JSONL")->required();
  train->add_option("--config", train_config, "Config JSON");
  train->add_option("--out-dir", train_out, "Output directory")->required();

  std::string score_trace, score_gold, score_config;
  double score_metric = 1.0, score_ema = 0.0;
  auto* score = app.add_subcommand("score", "Score one raw trace against a gold case");
  score->add_option("--trace", score_trace, "Raw model output file")->required();
  score->add_option("--gold", score_gold, "Gold case JSONL (first record is used)")->required();
  score->add_option("--config", score_config, "Config JSON (reward weights, mode)");
  score->add_option("--batch-metric", score_metric, "Batch metric for the gate");
  score->add_option("--ema", score_ema, "Previous EMA for the gate");

  std::string eval_pred, eval_out;
  auto* ev = app.add_subcommand("eval", "Compute metrics over prediction records");
  ev->add_option("--pred", eval_pred, "Prediction JSONL")->required();
  ev->add_option("--out", eval_out, "Report JSON path");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(gen_out, gen_n, gen_seed, gen_noise, gen_kinds, gen_balance, out);
    if (train->parsed()) return cmd_train(train_corpus, train_config, train_out, out);
    if (score->parsed()) return cmd_score(score_trace, score_gold, score_config, score_metric, score_ema, out);
    if (ev->parsed()) return cmd_eval(eval_pred, eval_out, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace ilr
