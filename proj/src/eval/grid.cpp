#include <chrono>
#include <future>
#include <iomanip>
#include <istream>
#include <ostream>
#include <set>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "trojanrec/error.hpp"
#include "trojanrec/eval.hpp"
#include "trojanrec/rng.hpp"

namespace trojanrec::eval {

using nlohmann::json;

std::size_t grid_size(const GridSpec& spec) {
  return spec.ratios.size() * spec.methods.size() * spec.victims.size() * spec.buckets.size() *
         spec.modes.size() * spec.seeds.size();
}

namespace {

struct Cell {
  std::size_t index;
  double ratio;
  attack::Method method;
  models::Family victim;
  data::PopularityBucket bucket;
  data::SelectionMode mode;
  std::uint64_t seed;
};

// Cells sharing everything but the victim share one poisoned dataset.
struct AttackGroup {
  std::vector<Cell> cells;
};

std::vector<AttackGroup> enumerate(const GridSpec& spec) {
  std::vector<AttackGroup> groups;
  std::size_t index = 0;
  for (double ratio : spec.ratios) {
    for (auto method : spec.methods) {
      const std::size_t first_group = groups.size();
      for (auto victim : spec.victims) {
        std::size_t local = 0;
        for (auto bucket : spec.buckets) {
          for (auto mode : spec.modes) {
            for (auto seed : spec.seeds) {
              if (groups.size() <= first_group + local) groups.emplace_back();
              groups[first_group + local].cells.push_back(
                  {index++, ratio, method, victim, bucket, mode, seed});
              ++local;
            }
          }
        }
      }
    }
  }
  return groups;
}

ExperimentReport blank_report(const GridSpec& spec, const Cell& cell) {
  ExperimentReport r;
  r.dataset = spec.dataset_name;
  r.victim = cell.victim;
  r.poisoning_ratio = cell.ratio;
  r.method = cell.method;
  r.bucket = cell.bucket;
  r.selection_mode = cell.mode;
  r.seed = cell.seed;
  return r;
}

models::TrainConfig victim_config(const GridSpec& spec, models::Family family, std::uint64_t seed) {
  auto it = spec.victim_configs.find(family);
  models::TrainConfig cfg =
      it != spec.victim_configs.end() ? it->second : models::default_train_config(family);
  cfg.seed = derive_seed(seed, "victim");
  return cfg;
}

void run_group(const GridSpec& spec, const AttackGroup& group, std::vector<ExperimentReport>& out) {
  const Cell& head = group.cells.front();
  const auto start = std::chrono::steady_clock::now();
  std::optional<data::TargetSpec> targets;
  std::optional<attack::AttackResult> attacked;
  std::string failure;
  try {
    targets = data::select_targets(spec.dataset, head.mode, head.bucket,
                                   derive_seed(head.seed, "targets"), spec.num_clusters);
    attack::AttackConfig cfg = spec.attack;
    cfg.poisoning_ratio = head.ratio;
    cfg.seed = derive_seed(head.seed, "attack");
    cfg.substitute.seed = derive_seed(head.seed, "substitute");
    attacked = attack::run_method(head.method, spec.dataset, *targets, cfg);
  } catch (const std::exception& e) {
    failure = e.what();
  }
  const double attack_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  for (const Cell& cell : group.cells) {
    ExperimentReport r = blank_report(spec, cell);
    const auto cell_start = std::chrono::steady_clock::now();
    if (!failure.empty()) {
      r.error = failure;
    } else {
      r.target_item = targets->target_item;
      r.trigger_item = attacked->trigger;
      r.num_fake_users = attacked->num_fake_users();
      try {
        data::InteractionMatrix m(attacked->poisoned);
        auto params = models::train(cell.victim, m, victim_config(spec, cell.victim, cell.seed));
        r.hr_at = hit_rates(params, m, targets->target_item, targets->target_users, spec.k_list);
      } catch (const std::exception& e) {
        r.error = e.what();
      }
    }
    r.runtime_seconds =
        attack_seconds +
        std::chrono::duration<double>(std::chrono::steady_clock::now() - cell_start).count();
    if (!r.error.empty()) spdlog::warn("grid cell {} failed: {}", cell.index, r.error);
    out[cell.index] = std::move(r);
  }
}

}  // namespace

std::vector<ExperimentReport> run_grid(const GridSpec& spec) {
  if (spec.k_list.empty()) throw ParameterError("grid needs at least one k");
  const auto groups = enumerate(spec);
  std::vector<ExperimentReport> reports(grid_size(spec));
  const std::size_t workers = std::max<std::size_t>(1, std::min(spec.workers, groups.size()));
  if (workers == 1) {
    for (const auto& g : groups) run_group(spec, g, reports);
  } else {
    std::vector<std::future<void>> jobs;
    for (std::size_t w = 0; w < workers; ++w) {
      jobs.push_back(std::async(std::launch::async, [&, w] {
        for (std::size_t g = w; g < groups.size(); g += workers) run_group(spec, groups[g], reports);
      }));
    }
    for (auto& job : jobs) job.get();
  }
  return reports;
}

json to_json(const ExperimentReport& r, bool with_timing) {
  json hr = json::object();
  for (const auto& [k, v] : r.hr_at) hr[std::to_string(k)] = v;
  json j = {{"dataset", r.dataset},
            {"victim", models::to_string(r.victim)},
            {"poisoning_ratio", r.poisoning_ratio},
            {"method", attack::to_string(r.method)},
            {"hr_at", hr},
            {"bucket", data::to_string(r.bucket)},
            {"selection_mode", data::to_string(r.selection_mode)},
            {"seed", r.seed},
            {"target_item", r.target_item},
            {"trigger_item", r.trigger_item ? json(*r.trigger_item) : json(nullptr)},
            {"num_fake_users", r.num_fake_users},
            {"error", r.error}};
  if (with_timing) j["runtime_seconds"] = r.runtime_seconds;
  return j;
}

ExperimentReport report_from_json(const json& j) {
  ExperimentReport r;
  r.dataset = j.at("dataset").get<std::string>();
  auto victim = models::parse_family(j.at("victim").get<std::string>());
  auto method = attack::parse_method(j.at("method").get<std::string>());
  auto bucket = data::parse_bucket(j.at("bucket").get<std::string>());
  auto mode = data::parse_selection_mode(j.at("selection_mode").get<std::string>());
  if (!victim || !method || !bucket || !mode) throw Error("unknown enum value in report");
  r.victim = *victim;
  r.method = *method;
  r.bucket = *bucket;
  r.selection_mode = *mode;
  r.poisoning_ratio = j.at("poisoning_ratio").get<double>();
  for (const auto& [k, v] : j.at("hr_at").items()) r.hr_at[std::stoul(k)] = v.get<double>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.target_item = j.at("target_item").get<std::size_t>();
  if (!j.at("trigger_item").is_null()) r.trigger_item = j.at("trigger_item").get<std::size_t>();
  r.num_fake_users = j.at("num_fake_users").get<std::size_t>();
  r.error = j.at("error").get<std::string>();
  if (j.contains("runtime_seconds")) r.runtime_seconds = j.at("runtime_seconds").get<double>();
  return r;
}

void write_reports(std::ostream& out, std::span<const ExperimentReport> reports, bool with_timing) {
  for (const auto& r : reports) out << to_json(r, with_timing).dump() << '\n';
}

std::vector<ExperimentReport> read_reports(std::istream& in) {
  std::vector<ExperimentReport> reports;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      reports.push_back(report_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw ParseError(std::string("bad report record: ") + e.what(), line_no);
    }
  }
  return reports;
}

void write_table(std::ostream& out, std::span<const ExperimentReport> reports) {
  std::set<std::size_t> ks;
  for (const auto& r : reports)
    for (const auto& [k, v] : r.hr_at) ks.insert(k);
  out << "ratio,dataset,model,method,bucket,mode,seed";
  for (std::size_t k : ks) out << ",HR@" << k;
  out << ",error\n";
  const auto flags = out.flags();
  const auto precision = out.precision();
  for (const auto& r : reports) {
    out << std::defaultfloat << r.poisoning_ratio << ',' << r.dataset << ','
        << models::to_string(r.victim) << ',' << attack::to_string(r.method) << ','
        << data::to_string(r.bucket) << ',' << data::to_string(r.selection_mode) << ',' << r.seed;
    out << std::fixed << std::setprecision(4);
    for (std::size_t k : ks) {
      out << ',';
      if (auto it = r.hr_at.find(k); it != r.hr_at.end()) out << it->second;
    }
    out << ',' << r.error << '\n';
    out.flags(flags);
    out.precision(precision);
  }
}

}  // namespace trojanrec::eval
