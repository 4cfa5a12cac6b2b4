#include <algorithm>
#include <numeric>

#include "trojanrec/data.hpp"

namespace trojanrec::data {

std::string_view to_string(PopularityBucket bucket) {
  switch (bucket) {
    case PopularityBucket::head:
      return "head";
    case PopularityBucket::upper_torso:
      return "upper_torso";
    case PopularityBucket::lower_torso:
      return "lower_torso";
    case PopularityBucket::tail:
      return "tail";
  }
  return "tail";
}

std::optional<PopularityBucket> parse_bucket(std::string_view name) {
  for (auto b : {PopularityBucket::head, PopularityBucket::upper_torso,
                 PopularityBucket::lower_torso, PopularityBucket::tail}) {
    if (to_string(b) == name) return b;
  }
  return std::nullopt;
}

std::vector<std::size_t> item_counts(const InteractionDataset& ds) {
  std::vector<std::size_t> counts(ds.num_items(), 0);
  for (const auto& e : ds.events) ++counts[e.item];
  return counts;
}

std::vector<PopularityBucket> popularity_buckets(const InteractionDataset& ds) {
  auto counts = item_counts(ds);
  return popularity_buckets(counts);
}

// Items ranked by count descending, ties by ascending index. Cutoffs are the
// floors of 5%, 25% and 50% of the item count taken from the top.
std::vector<PopularityBucket> popularity_buckets(std::span<const std::size_t> counts) {
  const std::size_t n = counts.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return counts[a] > counts[b]; });

  const std::size_t head_end = n * 5 / 100;
  const std::size_t upper_end = n * 25 / 100;
  const std::size_t lower_end = n * 50 / 100;
  std::vector<PopularityBucket> buckets(n, PopularityBucket::tail);
  for (std::size_t rank = 0; rank < n; ++rank) {
    PopularityBucket b = PopularityBucket::tail;
    if (rank < head_end) {
      b = PopularityBucket::head;
    } else if (rank < upper_end) {
      b = PopularityBucket::upper_torso;
    } else if (rank < lower_end) {
      b = PopularityBucket::lower_torso;
    }
    buckets[order[rank]] = b;
  }
  return buckets;
}

}  // namespace trojanrec::data
