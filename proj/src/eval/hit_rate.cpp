#include <algorithm>
#include <chrono>

#include "trojanrec/error.hpp"
#include "trojanrec/eval.hpp"

namespace trojanrec::eval {

std::map<std::size_t, double> hit_rates(const models::RecommenderParams& params,
                                        const data::InteractionMatrix& m, std::size_t item,
                                        std::span<const std::size_t> users,
                                        std::span<const std::size_t> k_list) {
  if (users.empty()) throw ParameterError("hit rate needs at least one user");
  if (item >= m.cols()) throw ParameterError("item out of range");
  if (k_list.empty()) throw ParameterError("k list is empty");
  const std::size_t k_max = *std::max_element(k_list.begin(), k_list.end());

  std::map<std::size_t, std::size_t> hits;
  for (std::size_t k : k_list) {
    if (k < 1) throw ParameterError("k must be >= 1");
    hits[k] = 0;
  }
  std::size_t eligible = 0;
  for (std::size_t u : users) {
    if (u >= m.rows()) throw ParameterError("user out of range");
    if (m.contains(u, item)) continue;
    ++eligible;
    const auto scores = models::score_row(params, m.dense_row(u));
    const auto top = models::recommend_top_k(scores, m.user_items(u), k_max);
    const auto pos = std::find(top.begin(), top.end(), item);
    if (pos == top.end()) continue;
    const auto rank = static_cast<std::size_t>(pos - top.begin());
    for (auto& [k, count] : hits) {
      if (rank < k) ++count;
    }
  }
  if (eligible == 0) throw UndefinedMetricError("every evaluated user already consumed the item");

  std::map<std::size_t, double> out;
  for (const auto& [k, count] : hits) {
    out[k] = 100.0 * static_cast<double>(count) / static_cast<double>(eligible);
  }
  return out;
}

double hit_rate_at_k(const models::RecommenderParams& params, const data::InteractionMatrix& m,
                     std::size_t item, std::span<const std::size_t> users, std::size_t k) {
  const std::size_t ks[] = {k};
  return hit_rates(params, m, item, users, ks).at(k);
}

std::pair<ExperimentReport, ExperimentReport> evaluate_attack(
    const data::InteractionDataset& clean, const data::InteractionDataset& poisoned,
    const data::TargetSpec& targets, models::Family victim, const models::TrainConfig& cfg,
    std::span<const std::size_t> k_list, const ReportContext& context) {
  if (poisoned.item_ids != clean.item_ids || poisoned.num_users() < clean.num_users() ||
      !std::equal(clean.user_ids.begin(), clean.user_ids.end(), poisoned.user_ids.begin())) {
    throw ParameterError("poisoned dataset must extend the clean one with appended users");
  }
  for (std::size_t u : targets.target_users) {
    if (u >= clean.num_users()) throw ParameterError("target users must be real users");
  }

  auto run = [&](const data::InteractionDataset& ds, attack::Method method) {
    const auto start = std::chrono::steady_clock::now();
    data::InteractionMatrix m(ds);
    auto params = models::train(victim, m, cfg);
    ExperimentReport r;
    r.dataset = context.dataset;
    r.victim = victim;
    r.poisoning_ratio = context.poisoning_ratio;
    r.method = method;
    r.bucket = context.bucket;
    r.selection_mode = targets.selection_mode;
    r.seed = context.seed;
    r.target_item = targets.target_item;
    r.trigger_item = method == attack::Method::clean ? std::nullopt : context.trigger_item;
    r.num_fake_users = ds.num_users() - clean.num_users();
    r.hr_at = hit_rates(params, m, targets.target_item, targets.target_users, k_list);
    r.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
  };
  return {run(clean, attack::Method::clean), run(poisoned, context.method)};
}

}  // namespace trojanrec::eval
