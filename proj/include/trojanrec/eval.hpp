#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "trojanrec/attack.hpp"
#include "trojanrec/data.hpp"
#include "trojanrec/models.hpp"

namespace trojanrec::eval {

struct ExperimentReport {
  std::string dataset;
  models::Family victim = models::Family::wrmf;
  double poisoning_ratio = 0.0;
  attack::Method method = attack::Method::clean;
  std::map<std::size_t, double> hr_at;  // k -> percent
  data::PopularityBucket bucket = data::PopularityBucket::upper_torso;
  data::SelectionMode selection_mode = data::SelectionMode::clustered;
  std::uint64_t seed = 0;
  std::size_t target_item = 0;
  std::optional<std::size_t> trigger_item;
  std::size_t num_fake_users = 0;
  std::string error;             // non-empty when the cell failed
  double runtime_seconds = 0.0;  // wall time; excluded from canonical output

  friend bool operator==(const ExperimentReport&, const ExperimentReport&) = default;
};

// 100 * (eligible users with `item` in their top-k) / (eligible users). Users
// who already consumed `item` are not eligible.
double hit_rate_at_k(const models::RecommenderParams& params, const data::InteractionMatrix& m,
                     std::size_t item, std::span<const std::size_t> users, std::size_t k);

// Same as hit_rate_at_k for several k, scoring each user once.
std::map<std::size_t, double> hit_rates(const models::RecommenderParams& params,
                                        const data::InteractionMatrix& m, std::size_t item,
                                        std::span<const std::size_t> users,
                                        std::span<const std::size_t> k_list);

// Fields copied into both reports produced by evaluate_attack.
struct ReportContext {
  std::string dataset;
  double poisoning_ratio = 0.0;
  attack::Method method = attack::Method::indirectad;
  data::PopularityBucket bucket = data::PopularityBucket::upper_torso;
  std::uint64_t seed = 0;
  std::optional<std::size_t> trigger_item;
};

// Trains the victim from scratch on the clean and on the poisoned data with the
// same config, then reports HR@k over the target users for both.
std::pair<ExperimentReport, ExperimentReport> evaluate_attack(
    const data::InteractionDataset& clean, const data::InteractionDataset& poisoned,
    const data::TargetSpec& targets, models::Family victim, const models::TrainConfig& cfg,
    std::span<const std::size_t> k_list, const ReportContext& context = {});

struct GridSpec {
  std::string dataset_name = "synthetic";
  data::InteractionDataset dataset;  // already filtered
  std::vector<double> ratios{0.001};
  std::vector<attack::Method> methods{attack::Method::clean, attack::Method::indirectad};
  std::vector<models::Family> victims{models::Family::wrmf};
  std::vector<data::PopularityBucket> buckets{data::PopularityBucket::upper_torso};
  std::vector<data::SelectionMode> modes{data::SelectionMode::clustered};
  std::vector<std::uint64_t> seeds{0};
  std::vector<std::size_t> k_list{10, 20, 50};
  std::size_t num_clusters = 10;
  std::size_t workers = 1;
  attack::AttackConfig attack;  // ratio and seed are set per cell
  std::map<models::Family, models::TrainConfig> victim_configs;
};

std::size_t grid_size(const GridSpec& spec);

// One report per cell in axis order (ratio, method, victim, bucket, mode, seed).
// A failing cell yields a report with `error` set; the grid continues.
std::vector<ExperimentReport> run_grid(const GridSpec& spec);

nlohmann::json to_json(const ExperimentReport& report, bool with_timing = false);
ExperimentReport report_from_json(const nlohmann::json& j);

void write_reports(std::ostream& out, std::span<const ExperimentReport> reports,
                   bool with_timing = false);
std::vector<ExperimentReport> read_reports(std::istream& in);

// Flat comma-separated table: ratio, dataset, model, method, then HR columns.
void write_table(std::ostream& out, std::span<const ExperimentReport> reports);

}  // namespace trojanrec::eval
