#include <algorithm>
#include <future>
#include <numeric>

#include "trojanrec/attack.hpp"
#include "trojanrec/error.hpp"
#include "trojanrec/rng.hpp"

namespace trojanrec::attack {

using Eigen::Index;

namespace {

bool consumed_by_all(const data::InteractionMatrix& real, std::span<const std::size_t> users,
                     std::size_t item) {
  return std::all_of(users.begin(), users.end(),
                     [&](std::size_t u) { return real.contains(u, item); });
}

// The single user batch shared by every candidate's one-round update.
std::vector<std::size_t> scoring_batch(const data::TargetSpec& targets, const AttackConfig& cfg) {
  std::vector<std::size_t> users = targets.target_users;
  Rng rng(derive_seed(cfg.seed, "trigger_batch"));
  rng.shuffle(users);
  if (users.size() > cfg.batch_size) users.resize(cfg.batch_size);
  std::sort(users.begin(), users.end());
  return users;
}

}  // namespace

std::vector<std::size_t> candidate_pool(const data::InteractionMatrix& real,
                                        const data::TargetSpec& targets, std::size_t cap) {
  std::vector<std::size_t> pool;
  auto eligible = [&](std::size_t i) {
    return i != targets.target_item && !consumed_by_all(real, targets.target_users, i);
  };
  if (real.cols() <= cap) {
    for (std::size_t i = 0; i < real.cols(); ++i) {
      if (eligible(i)) pool.push_back(i);
    }
    return pool;
  }
  std::vector<std::size_t> counts(real.cols(), 0);
  for (std::size_t u : targets.target_users) {
    for (std::size_t i : real.user_items(u)) ++counts[i];
  }
  std::vector<std::size_t> order(real.cols());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return counts[a] > counts[b]; });
  for (std::size_t i : order) {
    if (pool.size() == cap) break;
    if (eligible(i)) pool.push_back(i);
  }
  std::sort(pool.begin(), pool.end());
  return pool;
}

TriggerScore trigger_delta_loss(const BlockSurrogate& surrogate, const data::InteractionMatrix& real,
                                std::size_t candidate, const data::TargetSpec& targets,
                                const AttackConfig& cfg) {
  if (candidate >= real.cols()) throw ParameterError("candidate item out of range");
  if (consumed_by_all(real, targets.target_users, candidate)) {
    throw ParameterError("candidate already consumed by every target user");
  }
  const std::size_t n_fake = cfg.num_fake(real.rows());
  const std::size_t budget = cfg.resolve_budget(real);
  const std::size_t forced[] = {candidate};
  const FakeUserBlock start =
      init_block(forced, n_fake, budget, real.cols(), real.col_sums(),
                 derive_seed(derive_seed(cfg.seed, "trigger_block"), candidate));
  const auto batch = scoring_batch(targets, cfg);

  const BlockObjective before =
      surrogate.evaluate(start, candidate, std::nullopt, batch, 1.0, cfg.top_k, true);
  const FakeUserBlock moved = pgd_step(start, before.gradient, cfg.eta);
  const BlockObjective after =
      surrogate.evaluate(moved, candidate, std::nullopt, batch, 1.0, cfg.top_k, false);
  return {candidate, before.composite - after.composite};
}

TriggerScore trigger_delta_loss(const models::WrmfParams& substitute,
                                const data::InteractionMatrix& real, std::size_t candidate,
                                const data::TargetSpec& targets, const AttackConfig& cfg) {
  BlockSurrogate surrogate(substitute, real);
  return trigger_delta_loss(surrogate, real, candidate, targets, cfg);
}

std::size_t select_trigger(const models::WrmfParams& substitute, const data::InteractionMatrix& real,
                           const data::TargetSpec& targets, const AttackConfig& cfg,
                           std::span<const std::size_t> pool, std::vector<TriggerScore>* scores) {
  if (pool.empty()) throw SelectionError("trigger candidate pool is empty");
  BlockSurrogate surrogate(substitute, real);
  std::vector<TriggerScore> results(pool.size());

  const std::size_t workers = std::max<std::size_t>(1, std::min(cfg.workers, pool.size()));
  auto score_range = [&](std::size_t begin, std::size_t end) {
    for (std::size_t j = begin; j < end; ++j) {
      results[j] = trigger_delta_loss(surrogate, real, pool[j], targets, cfg);
    }
  };
  if (workers == 1) {
    score_range(0, pool.size());
  } else {
    std::vector<std::future<void>> jobs;
    const std::size_t chunk = (pool.size() + workers - 1) / workers;
    for (std::size_t begin = 0; begin < pool.size(); begin += chunk) {
      jobs.push_back(std::async(std::launch::async, score_range, begin,
                                std::min(pool.size(), begin + chunk)));
    }
    for (auto& job : jobs) job.get();
  }

  std::size_t best = 0;
  for (std::size_t j = 1; j < results.size(); ++j) {
    const auto& r = results[j];
    const auto& b = results[best];
    if (r.delta_loss > b.delta_loss || (r.delta_loss == b.delta_loss && r.item < b.item)) best = j;
  }
  if (scores) *scores = results;
  return results[best].item;
}

std::size_t select_trigger(const models::WrmfParams& substitute, const data::InteractionMatrix& real,
                           const data::TargetSpec& targets, const AttackConfig& cfg,
                           std::vector<TriggerScore>* scores) {
  auto pool = candidate_pool(real, targets, cfg.candidate_cap);
  return select_trigger(substitute, real, targets, cfg, pool, scores);
}

std::size_t popularity_trigger(const models::RecommenderParams& params,
                               const data::InteractionMatrix& real,
                               const data::TargetSpec& targets) {
  std::vector<bool> in_target(real.rows(), false);
  for (std::size_t u : targets.target_users) in_target.at(u) = true;
  std::vector<std::size_t> complement;
  for (std::size_t u = 0; u < real.rows(); ++u) {
    if (!in_target[u]) complement.push_back(u);
  }
  if (targets.target_users.empty() || complement.empty()) {
    throw SelectionError("popularity trigger needs non-empty target and complement groups");
  }
  const std::size_t n_items = real.cols();
  if (n_items < 2) throw SelectionError("popularity trigger needs at least two items");

  auto mean_ranks = [&](std::span<const std::size_t> users) {
    Eigen::MatrixXd scores = models::score_users(params, real, users);
    std::vector<double> rank_sum(n_items, 0.0);
    std::vector<std::size_t> order(n_items);
    for (Index j = 0; j < scores.rows(); ++j) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scores(j, static_cast<Index>(a)) > scores(j, static_cast<Index>(b));
      });
      for (std::size_t pos = 0; pos < n_items; ++pos) {
        rank_sum[order[pos]] += static_cast<double>(pos + 1);
      }
    }
    for (double& r : rank_sum) r /= static_cast<double>(users.size());
    return rank_sum;
  };
  const auto target_rank = mean_ranks(targets.target_users);
  const auto other_rank = mean_ranks(complement);

  std::size_t best = n_items;
  double best_diff = 0.0;
  for (std::size_t i = 0; i < n_items; ++i) {
    if (i == targets.target_item) continue;
    const double diff = target_rank[i] - other_rank[i];
    if (best == n_items || diff < best_diff) {
      best = i;
      best_diff = diff;
    }
  }
  return best;
}

}  // namespace trojanrec::attack
