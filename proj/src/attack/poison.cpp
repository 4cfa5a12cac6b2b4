#include <algorithm>
#include <cmath>
#include <numeric>

#include "trojanrec/attack.hpp"
#include "trojanrec/error.hpp"
#include "trojanrec/rng.hpp"

namespace trojanrec::attack {

using Eigen::Index;

void AttackConfig::validate() const {
  if (!(poisoning_ratio > 0.0 && poisoning_ratio < 1.0)) {
    throw ParameterError("poisoning ratio must be in (0, 1)");
  }
  if (alpha < 0.0 || alpha > 1.0) throw ParameterError("alpha must be in [0, 1]");
  if (eta < 0.0) throw ParameterError("eta must be >= 0");
  if (t_adv < 1 || t_sub < 1) throw ParameterError("t_adv and t_sub must be >= 1");
  if (candidate_cap < 1 || batch_size < 1 || top_k < 1) {
    throw ParameterError("candidate_cap, batch_size and top_k must be >= 1");
  }
  substitute.validate();
}

std::size_t AttackConfig::num_fake(std::size_t num_users) const {
  const auto n = std::llround(poisoning_ratio * static_cast<double>(num_users));
  return static_cast<std::size_t>(std::max<long long>(1, n));
}

std::size_t AttackConfig::resolve_budget(const data::InteractionMatrix& real) const {
  if (budget_per_user > 0) return budget_per_user;
  if (real.rows() == 0) throw EmptyDatasetError("no real users to size fake profiles from");
  const double mean = static_cast<double>(real.nnz()) / static_cast<double>(real.rows());
  return std::max<std::size_t>(2, static_cast<std::size_t>(std::llround(mean)));
}

std::string_view to_string(Method method) {
  switch (method) {
    case Method::clean:
      return "clean";
    case Method::injection:
      return "injection";
    case Method::indirectad:
      return "indirectad";
    case Method::popularity_trigger:
      return "popularity_trigger";
    case Method::random_shilling:
      return "random_shilling";
  }
  return "clean";
}

std::optional<Method> parse_method(std::string_view name) {
  for (auto m : {Method::clean, Method::injection, Method::indirectad, Method::popularity_trigger,
                 Method::random_shilling}) {
    if (to_string(m) == name) return m;
  }
  return std::nullopt;
}

void FakeUserBlock::project() {
  rows = rows.cwiseMax(0.0).cwiseMin(1.0);
  for (std::size_t item : forced_items) rows.col(static_cast<Index>(item)).setOnes();
}

FakeUserBlock pgd_step(const FakeUserBlock& block, const Eigen::MatrixXd& grad, double eta) {
  if (grad.rows() != block.rows.rows() || grad.cols() != block.rows.cols()) {
    throw ShapeError("gradient shape does not match the fake block");
  }
  FakeUserBlock next = block;
  if (eta != 0.0) next.rows -= eta * grad;
  next.project();
  return next;
}

FakeUserBlock init_block(std::span<const std::size_t> forced, std::size_t n_fake,
                         std::size_t budget, std::size_t item_count,
                         std::span<const std::size_t> popularity, std::uint64_t seed) {
  if (n_fake < 1) throw ParameterError("need at least one fake user");
  if (budget > item_count) throw ParameterError("budget exceeds the number of items");
  if (budget < forced.size()) throw ParameterError("budget smaller than the forced item set");
  if (popularity.size() != item_count) throw ShapeError("popularity must cover every item");

  FakeUserBlock block;
  block.forced_items.assign(forced.begin(), forced.end());
  std::sort(block.forced_items.begin(), block.forced_items.end());
  block.forced_items.erase(std::unique(block.forced_items.begin(), block.forced_items.end()),
                           block.forced_items.end());
  for (std::size_t item : block.forced_items) {
    if (item >= item_count) throw ParameterError("forced item out of range");
  }
  block.budget_per_user = budget;
  block.rows = Eigen::MatrixXd::Zero(static_cast<Index>(n_fake), static_cast<Index>(item_count));

  std::vector<std::size_t> base_pool;
  for (std::size_t i = 0; i < item_count; ++i) {
    if (!std::binary_search(block.forced_items.begin(), block.forced_items.end(), i)) {
      base_pool.push_back(i);
    }
  }
  const std::size_t extra = budget - block.forced_items.size();
  Rng rng(seed);
  for (std::size_t f = 0; f < n_fake; ++f) {
    std::vector<std::size_t> pool = base_pool;
    std::vector<double> weight(pool.size());
    for (std::size_t j = 0; j < pool.size(); ++j) {
      weight[j] = static_cast<double>(popularity[pool[j]]);
    }
    for (std::size_t draw = 0; draw < extra; ++draw) {
      const double total = std::accumulate(weight.begin(), weight.end(), 0.0);
      std::size_t pick = 0;
      if (total > 0.0) {
        const double r = rng.uniform(0.0, total);
        double acc = 0.0;
        pick = pool.size();
        for (std::size_t j = 0; j < pool.size(); ++j) {
          acc += weight[j];
          if (weight[j] > 0.0 && r < acc) {
            pick = j;
            break;
          }
        }
        if (pick == pool.size()) {
          // rounding at the upper end: take the last positive weight
          for (std::size_t j = pool.size(); j-- > 0;) {
            if (weight[j] > 0.0) {
              pick = j;
              break;
            }
          }
        }
      } else {
        pick = rng.uniform_index(pool.size());
      }
      block.rows(static_cast<Index>(f), static_cast<Index>(pool[pick])) = 0.5;
      pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pick));
      weight.erase(weight.begin() + static_cast<std::ptrdiff_t>(pick));
    }
  }
  block.project();
  return block;
}

FakeUserBlock init_poison(const data::TargetSpec& targets, std::size_t trigger, std::size_t n_fake,
                          std::size_t budget, std::size_t item_count,
                          std::span<const std::size_t> popularity, std::uint64_t seed) {
  if (budget < 2) throw ParameterError("budget must cover target and trigger");
  if (trigger == targets.target_item) throw ParameterError("trigger must differ from the target");
  const std::size_t forced[] = {targets.target_item, trigger};
  return init_block(forced, n_fake, budget, item_count, popularity, seed);
}

std::vector<data::Event> discretize(const FakeUserBlock& block, std::size_t first_user,
                                    std::int64_t timestamp) {
  const std::size_t n_items = block.num_items();
  const std::size_t budget = std::min(block.budget_per_user, n_items);
  std::vector<data::Event> events;
  events.reserve(block.num_fake() * budget);
  std::vector<std::size_t> order(n_items);
  for (std::size_t f = 0; f < block.num_fake(); ++f) {
    const auto row = static_cast<Index>(f);
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto forced = [&](std::size_t i) {
      return std::binary_search(block.forced_items.begin(), block.forced_items.end(), i);
    };
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const bool fa = forced(a);
      const bool fb = forced(b);
      if (fa != fb) return fa;
      return block.rows(row, static_cast<Index>(a)) > block.rows(row, static_cast<Index>(b));
    });
    std::vector<std::size_t> kept(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(budget));
    std::sort(kept.begin(), kept.end());
    for (std::size_t item : kept) events.push_back({first_user + f, item, timestamp, 1.0});
  }
  return events;
}

data::InteractionDataset inject(const data::InteractionDataset& ds, const FakeUserBlock& block) {
  if (block.num_items() != ds.num_items()) throw ShapeError("fake block must span the item set");
  data::InteractionDataset out = ds;
  const std::size_t first = ds.num_users();
  for (std::size_t f = 0; f < block.num_fake(); ++f) {
    out.user_ids.push_back("fake_" + std::to_string(f));
  }
  auto events = discretize(block, first, ds.max_timestamp() + 1);
  out.events.insert(out.events.end(), events.begin(), events.end());
  out.canonicalize();
  return out;
}

std::vector<bool> AttackResult::fake_labels() const {
  std::vector<bool> labels(poisoned.num_users(), false);
  for (std::size_t u = num_real_users; u < labels.size(); ++u) labels[u] = true;
  return labels;
}

}  // namespace trojanrec::attack
