#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "trojanrec/harness.hpp"

namespace trojanrec::harness {

namespace {

using nlohmann::json;

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::optional<std::string> out;

  void attach(CLI::App& app, bool config_required = true) {
    auto* opt = app.add_option("--config", config, "Run configuration file");
    if (config_required) opt->required();
    app.add_option("--seed", seed, "Override run.seed");
    app.add_option("--workers", workers, "Override run.workers")->check(CLI::PositiveNumber);
    app.add_option("--out", out, "Output directory");
  }

  RunConfig load() const {
    Overrides o;
    o.seed = seed;
    o.workers = workers;
    if (out) o.out_dir = *out;
    return load_config(config, o);
  }
};

data::InteractionDataset dataset_from(const RunConfig& cfg, const std::optional<std::string>& dump) {
  return dump ? data::load_dump(*dump) : load_source(cfg.source);
}

data::TargetSpec targets_for(const RunConfig& cfg, const data::InteractionDataset& ds) {
  return data::select_targets(ds, cfg.mode, cfg.bucket, cfg.stage_seed("targets"),
                              cfg.num_clusters);
}

int run_ingest(const RunConfig& cfg) {
  const auto ds = load_source(cfg.source);
  write_atomic(cfg.out_dir / "dataset.dump", [&](std::ostream& out) { data::write_dump(out, ds); });
  write_manifest(cfg, "ingest", {"dataset.dump"});
  std::cout << "users " << ds.num_users() << " items " << ds.num_items() << " events "
            << ds.events.size() << '\n';
  return 0;
}

int run_train(const RunConfig& cfg, const std::optional<std::string>& dump,
              const std::optional<std::string>& model) {
  models::Family family = cfg.victim;
  if (model) {
    auto parsed = models::parse_family(*model);
    if (!parsed) throw ConfigError("unknown model family: " + *model);
    family = *parsed;
  }
  const auto ds = dataset_from(cfg, dump);
  data::InteractionMatrix m(ds);
  const auto params = models::train(family, m, cfg.model_config(family));
  const std::string name = "checkpoint_" + std::string(models::to_string(family)) + ".txt";
  write_atomic(cfg.out_dir / name, [&](std::ostream& out) { models::save_checkpoint(out, params); });
  write_manifest(cfg, "train", {name});
  std::cout << "trained " << models::to_string(family) << " on " << ds.num_users() << " users\n";
  return 0;
}

json targets_json(const data::InteractionDataset& ds, const data::TargetSpec& targets) {
  return {{"target_item", targets.target_item},
          {"target_item_id", ds.item_ids[targets.target_item]},
          {"target_users", targets.target_users},
          {"selection_mode", data::to_string(targets.selection_mode)},
          {"seed", targets.seed}};
}

data::TargetSpec targets_from_json(const json& j) {
  data::TargetSpec t;
  t.target_item = j.at("target_item").get<std::size_t>();
  t.target_users = j.at("target_users").get<std::vector<std::size_t>>();
  auto mode = data::parse_selection_mode(j.at("selection_mode").get<std::string>());
  if (!mode) throw ConfigError("bad selection mode in attack record");
  t.selection_mode = *mode;
  t.seed = j.at("seed").get<std::uint64_t>();
  return t;
}

int run_attack(const RunConfig& cfg, const std::optional<std::string>& dump,
               const std::optional<std::string>& method_name) {
  attack::Method method = cfg.method;
  if (method_name) {
    auto parsed = attack::parse_method(*method_name);
    if (!parsed) throw ConfigError("unknown attack method: " + *method_name);
    method = *parsed;
  }
  const auto ds = dataset_from(cfg, dump);
  const auto targets = targets_for(cfg, ds);
  const auto result = attack::run_method(method, ds, targets, cfg.attack);

  json record = targets_json(ds, targets);
  record["method"] = attack::to_string(method);
  record["bucket"] = data::to_string(cfg.bucket);
  record["num_real_users"] = result.num_real_users;
  record["num_fake_users"] = result.num_fake_users();
  record["trigger_item"] = result.trigger ? json(*result.trigger) : json(nullptr);
  record["trigger_item_id"] = result.trigger ? json(ds.item_ids[*result.trigger]) : json(nullptr);

  write_atomic(cfg.out_dir / "poisoned.dump",
               [&](std::ostream& out) { data::write_dump(out, result.poisoned); });
  write_atomic(cfg.out_dir / "fake_labels.tsv", [&](std::ostream& out) {
    attack::write_labels(out, result.poisoned, result.fake_labels());
  });
  write_atomic(cfg.out_dir / "trace.jsonl",
               [&](std::ostream& out) { attack::write_trace(out, result.trace); });
  write_atomic(cfg.out_dir / "attack.json",
               [&](std::ostream& out) { out << record.dump(2) << '\n'; });
  write_manifest(cfg, "attack", {"poisoned.dump", "fake_labels.tsv", "trace.jsonl", "attack.json"});

  std::cout << "method " << attack::to_string(method) << '\n'
            << "target item " << ds.item_ids[targets.target_item] << '\n'
            << "trigger item " << (result.trigger ? ds.item_ids[*result.trigger] : "none") << '\n'
            << "fake users " << result.num_fake_users() << '\n'
            << "iterations " << result.trace.size() << '\n';
  return 0;
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what(), 0);
  }
}

int run_evaluate(const RunConfig& cfg, const std::optional<std::string>& clean_dump,
                 const std::optional<std::string>& poisoned_path,
                 const std::optional<std::string>& record_path,
                 const std::optional<std::string>& victim_name) {
  models::Family victim = cfg.victim;
  if (victim_name) {
    auto parsed = models::parse_family(*victim_name);
    if (!parsed) throw ConfigError("unknown model family: " + *victim_name);
    victim = *parsed;
  }
  const auto clean = dataset_from(cfg, clean_dump);
  const auto poisoned =
      data::load_dump(poisoned_path ? *poisoned_path : (cfg.out_dir / "poisoned.dump").string());
  const json record =
      read_json(record_path ? std::filesystem::path(*record_path) : cfg.out_dir / "attack.json");
  const auto targets = targets_from_json(record);

  eval::ReportContext context;
  context.dataset = cfg.source.name;
  context.poisoning_ratio = cfg.attack.poisoning_ratio;
  if (auto m = attack::parse_method(record.value("method", "indirectad"))) context.method = *m;
  context.bucket = cfg.bucket;
  context.seed = cfg.seed;
  if (record.contains("trigger_item") && !record["trigger_item"].is_null()) {
    context.trigger_item = record["trigger_item"].get<std::size_t>();
  }
  const auto [before, after] = eval::evaluate_attack(clean, poisoned, targets, victim,
                                                     cfg.model_config(victim), cfg.k_list, context);
  const std::vector<eval::ExperimentReport> reports{before, after};
  write_atomic(cfg.out_dir / "reports.jsonl",
               [&](std::ostream& out) { eval::write_reports(out, reports); });
  write_atomic(cfg.out_dir / "reports.csv",
               [&](std::ostream& out) { eval::write_table(out, reports); });
  write_manifest(cfg, "evaluate", {"reports.jsonl", "reports.csv"});
  eval::write_table(std::cout, reports);
  return 0;
}

int run_detect(const RunConfig& cfg, const std::optional<std::string>& poisoned_path,
               const std::optional<std::string>& labels_path) {
  const auto poisoned =
      data::load_dump(poisoned_path ? *poisoned_path : (cfg.out_dir / "poisoned.dump").string());
  std::ifstream labels_in(labels_path ? *labels_path : (cfg.out_dir / "fake_labels.tsv").string());
  if (!labels_in) throw ConfigError("cannot open fake-user labels");
  const auto labels = attack::read_labels(labels_in);
  if (labels.size() != poisoned.num_users()) throw ConfigError("labels do not match dataset users");

  json record = json::object();
  std::vector<std::string> outputs;
  for (auto heuristic : cfg.detect.heuristics) {
    const auto result =
        detect::run_detection(poisoned, labels, heuristic, cfg.detect.iterations, cfg.detect.damping);
    const std::string name = std::string(detect::to_string(heuristic));
    record[name] = result.auc;
    outputs.push_back("scores_" + name + ".tsv");
    write_atomic(cfg.out_dir / outputs.back(), [&](std::ostream& out) {
      detect::write_scores(out, poisoned, result.suspicion, labels);
    });
    std::cout << "auc " << name << ' ' << std::fixed << std::setprecision(4) << result.auc << '\n';
  }
  json out_record = {{"auc", record},
                     {"iterations", cfg.detect.iterations},
                     {"damping", cfg.detect.damping}};
  write_atomic(cfg.out_dir / "detection.json",
               [&](std::ostream& out) { out << out_record.dump(2) << '\n'; });
  outputs.push_back("detection.json");
  write_manifest(cfg, "detect", outputs);
  return 0;
}

int run_grid_command(const RunConfig& cfg) {
  eval::GridSpec spec;
  spec.dataset_name = cfg.source.name;
  spec.dataset = load_source(cfg.source);
  spec.ratios = cfg.grid.ratios;
  spec.methods = cfg.grid.methods;
  spec.victims = cfg.grid.victims;
  spec.buckets = cfg.grid.buckets;
  spec.modes = cfg.grid.modes;
  spec.seeds = cfg.grid.seeds;
  spec.k_list = cfg.k_list;
  spec.num_clusters = cfg.num_clusters;
  spec.workers = cfg.workers;
  spec.attack = cfg.attack;
  spec.victim_configs = cfg.models;
  const auto reports = eval::run_grid(spec);

  write_atomic(cfg.out_dir / "grid.jsonl",
               [&](std::ostream& out) { eval::write_reports(out, reports); });
  write_atomic(cfg.out_dir / "grid.csv", [&](std::ostream& out) { eval::write_table(out, reports); });
  write_atomic(cfg.out_dir / "grid_timings.jsonl",
               [&](std::ostream& out) { eval::write_reports(out, reports, true); });
  write_manifest(cfg, "grid", {"grid.jsonl", "grid.csv", "grid_timings.jsonl"});
  std::size_t failed = 0;
  for (const auto& r : reports) failed += r.error.empty() ? 0 : 1;
  std::cout << reports.size() << " cells, " << failed << " failed\n";
  return 0;
}

void summarize(std::ostream& out, const std::vector<eval::ExperimentReport>& reports) {
  // Mean HR per (dataset, victim, ratio, method) over seeds and targets.
  struct Acc {
    std::map<std::size_t, double> sum;
    std::size_t n = 0;
    std::size_t failed = 0;
  };
  std::map<std::tuple<std::string, std::string, double, std::string>, Acc> groups;
  for (const auto& r : reports) {
    auto& acc = groups[{r.dataset, std::string(models::to_string(r.victim)), r.poisoning_ratio,
                        std::string(attack::to_string(r.method))}];
    if (!r.error.empty()) {
      ++acc.failed;
      continue;
    }
    ++acc.n;
    for (const auto& [k, v] : r.hr_at) acc.sum[k] += v;
  }
  for (const auto& [key, acc] : groups) {
    const auto& [dataset, victim, ratio, method] = key;
    out << dataset << "  " << victim << "  ratio " << ratio << "  " << method << "  (" << acc.n
        << " runs";
    if (acc.failed > 0) out << ", " << acc.failed << " failed";
    out << ")";
    for (const auto& [k, sum] : acc.sum) {
      out << "  HR@" << k << ' ' << std::fixed << std::setprecision(4)
          << sum / static_cast<double>(acc.n) << std::defaultfloat;
    }
    out << '\n';
  }
}

int run_report(const std::filesystem::path& dir) {
  std::vector<eval::ExperimentReport> reports;
  for (const char* name : {"grid.jsonl", "reports.jsonl"}) {
    std::ifstream in(dir / name);
    if (!in) continue;
    auto more = eval::read_reports(in);
    reports.insert(reports.end(), more.begin(), more.end());
  }
  if (reports.empty()) throw ConfigError("no report records under " + dir.string());
  std::ostringstream text;
  summarize(text, reports);
  if (std::filesystem::exists(dir / "detection.json")) {
    const json detection = read_json(dir / "detection.json");
    for (const auto& [name, value] : detection.at("auc").items()) {
      text << "detection auc " << name << ' ' << std::fixed << std::setprecision(4)
           << value.get<double>() << std::defaultfloat << '\n';
    }
  }
  std::cout << text.str();
  write_atomic(dir / "summary.txt", [&](std::ostream& out) { out << text.str(); });
  return 0;
}

}  // namespace

int cli(int argc, const char* const* argv) {
  configure_logging(std::getenv("TROJANREC_LOG"));

  CLI::App app{"Data-poisoning attacks and detection for implicit-feedback recommenders"};
  app.require_subcommand(1);

  CommonOptions ingest_opts, train_opts, attack_opts, evaluate_opts, detect_opts, grid_opts;
  std::optional<std::string> train_dataset, train_model;
  std::optional<std::string> attack_dataset, attack_method;
  std::optional<std::string> eval_clean, eval_poisoned, eval_record, eval_victim;
  std::optional<std::string> detect_poisoned, detect_labels;
  std::string report_dir = "out";

  auto* ingest = app.add_subcommand("ingest", "Load, filter and dump a dataset");
  ingest_opts.attach(*ingest);

  auto* train = app.add_subcommand("train", "Train a recommender and write a checkpoint");
  train_opts.attach(*train);
  train->add_option("--dataset", train_dataset, "Dataset dump instead of the configured source");
  train->add_option("--model", train_model, "wrmf, item_ae or mult_vae");

  auto* attack_cmd = app.add_subcommand("attack", "Craft and inject fake users");
  attack_opts.attach(*attack_cmd);
  attack_cmd->add_option("--dataset", attack_dataset, "Dataset dump instead of the configured source");
  attack_cmd->add_option("--method", attack_method, "Attack method");

  auto* evaluate = app.add_subcommand("evaluate", "Compare clean and poisoned hit rates");
  evaluate_opts.attach(*evaluate);
  evaluate->add_option("--clean", eval_clean, "Clean dataset dump");
  evaluate->add_option("--poisoned", eval_poisoned, "Poisoned dataset dump");
  evaluate->add_option("--attack-record", eval_record, "attack.json from the attack command");
  evaluate->add_option("--victim", eval_victim, "Victim model family");

  auto* detect_cmd = app.add_subcommand("detect", "Score users with label propagation");
  detect_opts.attach(*detect_cmd);
  detect_cmd->add_option("--poisoned", detect_poisoned, "Poisoned dataset dump");
  detect_cmd->add_option("--labels", detect_labels, "Fake-user label file");

  auto* grid = app.add_subcommand("grid", "Run the full experiment grid");
  grid_opts.attach(*grid);

  auto* report = app.add_subcommand("report", "Summarize stored report records");
  report->add_option("--in,--out", report_dir, "Directory holding report records");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*ingest) return run_ingest(ingest_opts.load());
    if (*train) return run_train(train_opts.load(), train_dataset, train_model);
    if (*attack_cmd) return run_attack(attack_opts.load(), attack_dataset, attack_method);
    if (*evaluate) {
      return run_evaluate(evaluate_opts.load(), eval_clean, eval_poisoned, eval_record, eval_victim);
    }
    if (*detect_cmd) return run_detect(detect_opts.load(), detect_poisoned, detect_labels);
    if (*grid) return run_grid_command(grid_opts.load());
    if (*report) return run_report(report_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

int cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("trojanrec");
  for (const auto& a : args) argv.push_back(a.c_str());
  return cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace trojanrec::harness
