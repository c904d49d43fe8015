#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "situseq/csv.hpp"
#include "situseq/error.hpp"
#include "situseq/eval.hpp"
#include "situseq/ingest.hpp"
#include "situseq/labeling.hpp"
#include "situseq/model.hpp"
#include "situseq/synthgen.hpp"
#include "situseq/vocabulary.hpp"

namespace situseq {

namespace cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitInternal = 3;

struct Common {
  std::string config;
  std::string vocab;
  std::uint64_t seed = 1;
};

inline nlohmann::json read_json_file(const std::string& path) {
  const auto text = csv::read_file(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::parse, path + ": " + e.what());
  }
}

inline Vocabulary load_vocab(const Common& c) {
  return c.vocab.empty() ? Vocabulary::standard() : Vocabulary::from_json(read_json_file(c.vocab));
}

inline PipelineParams load_params(const Common& c) {
  PipelineParams p;
  if (!c.config.empty()) params_from_json(read_json_file(c.config), p);
  p.validate();
  return p;
}

inline void write_or_print(const std::string& path, const std::string& content, std::ostream& out) {
  if (path.empty())
    out << content;
  else
    csv::write_file(path, content);
}

struct Inputs {
  std::string ops, sensors;
};

inline std::vector<TimeslotRecord> load_slots(const Inputs& in, const Vocabulary& vocab, TimeOfDay origin,
                                              UnknownOperationPolicy policy, std::ostream& err,
                                              bool sensors_optional = false) {
  ParseReport report;
  const auto events = parse_operation_log(in.ops, vocab, policy, &report);
  for (const auto& w : report.warnings) err << "warning: " << w << "\n";
  std::vector<SensorFrame> frames;
  std::optional<SensorFrame> fallback;
  if (!in.sensors.empty())
    frames = parse_sensor_log(in.sensors, vocab.sensor_ranges());
  else if (sensors_optional)
    fallback = SensorFrame{};
  else
    throw Error(ErrorKind::validation, "--sensors is required");
  return build_timeslots(events, frames, origin, fallback);
}

inline int cmd_label(const Common& c, const Inputs& in, const std::string& export_path, std::ostream& out,
                     std::ostream& err) {
  const auto vocab = load_vocab(c);
  const auto params = load_params(c);
  const auto slots = load_slots(in, vocab, params.day_origin, UnknownOperationPolicy::reject, err);
  const StateAlphabet alphabet;
  const auto labeled = label_states(slots, vocab, params.labeling, alphabet);
  if (!export_path.empty()) {
    csv::write_file(export_path, write_labeled_csv(labeled, alphabet));
    return kExitOk;
  }
  std::map<std::string, std::size_t> histogram;
  std::set<std::int64_t> excluded;
  for (const auto& ls : labeled) {
    ++histogram[alphabet[ls.state].name()];
    if (ls.excluded_day) excluded.insert(ls.slot->day());
  }
  out << "slots " << labeled.size() << ", days " << labeled.size() / kSlotsPerDay << ", excluded days "
      << excluded.size() << "\n";
  for (const auto& [name, count] : histogram) out << "  " << name << " " << count << "\n";
  return kExitOk;
}

inline int cmd_train(const Common& c, const Inputs& in, const std::string& out_path, std::ostream& out,
                     std::ostream& err) {
  const auto vocab = load_vocab(c);
  const auto params = load_params(c);
  const auto slots = load_slots(in, vocab, params.day_origin, UnknownOperationPolicy::reject, err);
  if (slots.empty()) throw Error(ErrorKind::validation, "no data to train on");
  const auto model = train_model(std::span<const TimeslotRecord>(slots), vocab, params);
  write_or_print(out_path, model_to_json(model).dump(1) + "\n", out);
  return kExitOk;
}

inline int cmd_detect(const Common& c, const Inputs& in, const std::string& model_path, const std::string& method_name,
                      const std::string& out_path, std::ostream& out, std::ostream& err) {
  auto model = model_from_json(read_json_file(model_path));
  if (!c.config.empty()) params_from_json(read_json_file(c.config), model.params);
  const auto method = parse_method(method_name);
  if (!method) throw Error(ErrorKind::validation, "unknown method " + method_name);
  const auto slots =
      load_slots(in, model.vocab, model.params.day_origin, UnknownOperationPolicy::skip, err, /*sensors_optional=*/true);
  std::string lines;
  for (const auto& v : detect_stream(model, slots, *method)) lines += verdict_to_json_line(v, model.vocab);
  write_or_print(out_path, lines, out);
  return kExitOk;
}

struct EvaluateArgs {
  Inputs in;
  std::string scenario, preset;
  std::string method = "proposed";
  std::size_t jobs = 1;
  std::size_t injections = 100;
  bool no_prune = false;
  std::optional<double> best_at;
  std::string out_dir = ".";
  std::string results, frontier;
};

inline int cmd_evaluate(const Common& c, const EvaluateArgs& a, std::ostream& out, std::ostream& err) {
  auto vocab = load_vocab(c);
  Grid grid;
  nlohmann::json config = nlohmann::json::object();
  if (!c.config.empty()) config = read_json_file(c.config);

  Dataset data;
  if (!a.scenario.empty() || !a.preset.empty()) {
    Scenario sc;
    if (!a.scenario.empty())
      sc = scenario_from_json(read_json_file(a.scenario));
    else if (a.preset == "s1")
      sc = scenario_s1(c.seed);
    else
      throw Error(ErrorKind::validation, "unknown preset " + a.preset);
    const auto g = generate(sc, vocab);
    grid.base.labeling.initial_occupants = static_cast<int>(sc.n_users);
    data = make_dataset(vocab, g.events, g.frames);
  }
  // Grid JSON may start from a preset and carries fixed parameters under "params".
  if (!config.empty()) {
    const int occupants = grid.base.labeling.initial_occupants;
    grid = grid_from_json(config);
    const auto ptr = nlohmann::json::json_pointer("/params/labeling/initial_occupants");
    if (!config.contains(ptr)) grid.base.labeling.initial_occupants = occupants;
  }
  if (data.slots.empty()) {
    if (a.in.ops.empty()) throw Error(ErrorKind::validation, "evaluate needs --ops/--sensors, --scenario or --preset");
    data.vocab = vocab;
    data.day_origin = grid.base.day_origin;
    data.slots = load_slots(a.in, vocab, grid.base.day_origin, UnknownOperationPolicy::reject, err);
  }

  std::vector<Method> methods;
  if (a.method == "all")
    methods = {Method::proposed, Method::estimation, Method::sequence};
  else if (auto m = parse_method(a.method))
    methods = {*m};
  else
    throw Error(ErrorKind::validation, "unknown method " + a.method);
  if (methods.size() > 1 && (!a.results.empty() || !a.frontier.empty()))
    throw Error(ErrorKind::validation, "--results/--frontier need a single --method");

  GridOptions opt;
  opt.jobs = a.jobs;
  opt.prune = !a.no_prune;
  opt.eval.seed = c.seed;
  opt.eval.injections_per_day = a.injections;
  if (!a.out_dir.empty()) std::filesystem::create_directories(a.out_dir);
  for (auto m : methods) {
    const auto points = grid_search(data, grid, m, opt);
    const auto frontier = pareto_frontier(points);
    const auto name = to_string(m);
    const auto dir = std::filesystem::path(a.out_dir);
    csv::write_file(a.results.empty() ? (dir / ("results_" + name + ".csv")).string() : a.results,
                    write_results_csv(points));
    csv::write_file(a.frontier.empty() ? (dir / ("frontier_" + name + ".csv")).string() : a.frontier,
                    write_results_csv(frontier));
    out << name << ": " << points.size() << " points, " << frontier.size() << " on the frontier\n";
    if (a.best_at) {
      if (auto b = best_at(points, *a.best_at))
        out << "  best with misdetection < " << *a.best_at << ": detection " << b->detection() << ", misdetection "
            << b->misdetection() << ", params " << b->params_json << "\n";
      else
        out << "  no point with misdetection < " << *a.best_at << "\n";
    }
  }
  return kExitOk;
}

inline int cmd_synth(const Common& c, const std::string& scenario, const std::string& preset, bool seed_given,
                     const std::string& out_dir, std::ostream& out) {
  const auto vocab = load_vocab(c);
  Scenario sc;
  if (!scenario.empty())
    sc = scenario_from_json(read_json_file(scenario));
  else if (preset == "s1")
    sc = scenario_s1();
  else
    throw Error(ErrorKind::validation, "synth needs --scenario or --preset s1");
  if (seed_given) sc.seed = c.seed;
  const auto g = generate(sc, vocab);
  std::filesystem::create_directories(out_dir);
  const auto dir = std::filesystem::path(out_dir);
  csv::write_file((dir / "operations.csv").string(), write_operation_log(g.events, vocab));
  csv::write_file((dir / "sensors.csv").string(), write_sensor_log(g.frames));
  csv::write_file((dir / "truth.csv").string(), write_truth_csv(g.truth));
  out << g.events.size() << " events, " << g.frames.size() << " sensor frames, " << g.truth.size()
      << " ground-truth rows\n";
  return kExitOk;
}

inline int report(const std::string& kind, const std::string& msg, int code, std::ostream& err) {
  std::string line = msg;
  for (auto& ch : line)
    if (ch == '\n' || ch == '\r') ch = ' ';
  err << "error[" << kind << "]: " << line << "\n";
  return code;
}

}  // namespace cli

// Entry point shared by the executable and the tests.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  using namespace cli;
  CLI::App app{"Smart-home operation anomaly detector"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "parameters JSON (grid JSON for evaluate)");
    sub->add_option("--vocab", common.vocab, "vocabulary JSON");
    sub->add_option("--seed", common.seed, "random seed");
  };

  Inputs in;
  std::string export_path, out_path, model_path, method = "proposed", scenario, preset, out_dir = ".";
  EvaluateArgs ev;

  auto* label = app.add_subcommand("label", "label timeslots with home states");
  add_common(label);
  label->add_option("--ops", in.ops, "operation log CSV")->required();
  label->add_option("--sensors", in.sensors, "sensor log CSV")->required();
  label->add_option("--export", export_path, "labeled CSV output");

  auto* train = app.add_subcommand("train", "train a model");
  add_common(train);
  train->add_option("--ops", in.ops, "operation log CSV")->required();
  train->add_option("--sensors", in.sensors, "sensor log CSV")->required();
  train->add_option("--out", out_path, "model JSON output (default: standard output)");

  auto* detect = app.add_subcommand("detect", "judge target operations of a stream");
  add_common(detect);
  detect->add_option("--model", model_path, "model JSON")->required();
  detect->add_option("--ops", in.ops, "operation log CSV")->required();
  detect->add_option("--sensors", in.sensors, "sensor log CSV (optional)");
  detect->add_option("--method", method, "proposed | estimation | sequence");
  detect->add_option("--out", out_path, "verdict JSON-lines output (default: standard output)");

  auto* evaluate = app.add_subcommand("evaluate", "leave-one-day-out grid evaluation");
  add_common(evaluate);
  evaluate->add_option("--ops", ev.in.ops, "operation log CSV");
  evaluate->add_option("--sensors", ev.in.sensors, "sensor log CSV");
  evaluate->add_option("--scenario", ev.scenario, "scenario JSON to generate the dataset from");
  evaluate->add_option("--preset", ev.preset, "built-in scenario (s1)");
  evaluate->add_option("--method", ev.method, "proposed | estimation | sequence | all");
  evaluate->add_option("--jobs", ev.jobs, "worker threads")->check(CLI::PositiveNumber);
  evaluate->add_option("--injections", ev.injections, "injected anomalies per day");
  evaluate->add_flag("--no-prune", ev.no_prune, "keep points dominated within their structural combination");
  evaluate->add_option("--best-at", ev.best_at, "print the best point below this misdetection ratio");
  evaluate->add_option("--out-dir", ev.out_dir, "directory for results_<method>.csv and frontier_<method>.csv");
  evaluate->add_option("--results", ev.results, "results CSV path (single method)");
  evaluate->add_option("--frontier", ev.frontier, "frontier CSV path (single method)");

  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  add_common(synth);
  synth->add_option("--scenario", scenario, "scenario JSON");
  synth->add_option("--preset", preset, "built-in scenario (s1)");
  synth->add_option("--out-dir", out_dir, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    return report("usage", e.what(), kExitInput, err);
  }

  try {
    if (label->parsed()) return cmd_label(common, in, export_path, out, err);
    if (train->parsed()) return cmd_train(common, in, out_path, out, err);
    if (detect->parsed()) return cmd_detect(common, in, model_path, method, out_path, out, err);
    if (evaluate->parsed()) return cmd_evaluate(common, ev, out, err);
    if (synth->parsed()) return cmd_synth(common, scenario, preset, synth->count("--seed") > 0, out_dir, out);
  } catch (const Error& e) {
    return report(to_string(e.kind()), e.what(), e.kind() == ErrorKind::invariant ? kExitInternal : kExitInput, err);
  } catch (const std::filesystem::filesystem_error& e) {
    return report("io", e.what(), kExitInput, err);
  } catch (const std::exception& e) {
    return report("internal", e.what(), kExitInternal, err);
  }
  return kExitInput;
}

}  // namespace situseq
