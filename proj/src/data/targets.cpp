#include <algorithm>
#include <numeric>

#include "trojanrec/data.hpp"
#include "trojanrec/error.hpp"
#include "trojanrec/rng.hpp"

namespace trojanrec::data {

std::string_view to_string(SelectionMode mode) {
  return mode == SelectionMode::clustered ? "clustered" : "random_third";
}

std::optional<SelectionMode> parse_selection_mode(std::string_view name) {
  if (name == "clustered") return SelectionMode::clustered;
  if (name == "random_third" || name == "random") return SelectionMode::random_third;
  return std::nullopt;
}

TargetSpec select_targets(const InteractionDataset& ds, SelectionMode mode,
                          PopularityBucket bucket, std::uint64_t seed,
                          std::size_t num_clusters) {
  if (ds.empty()) throw EmptyDatasetError("cannot select targets on an empty dataset");
  auto buckets = popularity_buckets(ds);
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < buckets.size(); ++i) {
    if (buckets[i] == bucket) pool.push_back(i);
  }
  if (pool.empty()) {
    throw SelectionError("popularity bucket '" + std::string(to_string(bucket)) + "' is empty");
  }

  Rng rng(seed);
  InteractionMatrix m(ds);
  TargetSpec spec;
  spec.selection_mode = mode;
  spec.seed = seed;

  if (mode == SelectionMode::clustered) {
    const std::size_t k = std::min(num_clusters, ds.num_users());
    auto assign = cluster_users(m, k, derive_seed(seed, "cluster_users"));
    const std::size_t chosen = rng.uniform_index(k);
    for (std::size_t u = 0; u < assign.size(); ++u) {
      if (assign[u] == chosen) spec.target_users.push_back(u);
    }
  } else {
    std::vector<std::size_t> users(ds.num_users());
    std::iota(users.begin(), users.end(), std::size_t{0});
    rng.shuffle(users);
    users.resize(ds.num_users() / 3);
    std::sort(users.begin(), users.end());
    spec.target_users = std::move(users);
  }
  if (spec.target_users.empty()) throw SelectionError("target user group is empty");

  // drop items every target user already consumed
  std::erase_if(pool, [&](std::size_t item) {
    return std::all_of(spec.target_users.begin(), spec.target_users.end(),
                       [&](std::size_t u) { return m.contains(u, item); });
  });
  if (pool.empty()) throw SelectionError("every bucket item is consumed by all target users");
  spec.target_item = pool[rng.uniform_index(pool.size())];
  return spec;
}

}  // namespace trojanrec::data
