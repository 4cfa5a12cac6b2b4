#include <string>

#include "trojanrec/harness.hpp"
#include "trojanrec/rng.hpp"

namespace trojanrec::harness {

void SyntheticSpec::validate() const {
  if (n_clusters == 0) throw ConfigError("n_clusters must be >= 1");
  if (n_users < n_clusters || n_items < n_clusters) {
    throw ConfigError("every cluster needs at least one user and one item");
  }
  if (!(p_out >= 0.0 && p_out < p_in && p_in <= 1.0)) {
    throw ConfigError("probabilities must satisfy 0 <= p_out < p_in <= 1");
  }
}

double SyntheticSpec::expected_events() const {
  std::vector<double> users(n_clusters, 0.0);
  std::vector<double> items(n_clusters, 0.0);
  for (std::size_t u = 0; u < n_users; ++u) users[user_block(u)] += 1.0;
  for (std::size_t i = 0; i < n_items; ++i) items[item_block(i)] += 1.0;
  double within = 0.0;
  for (std::size_t c = 0; c < n_clusters; ++c) within += users[c] * items[c];
  const double all = static_cast<double>(n_users) * static_cast<double>(n_items);
  return within * p_in + (all - within) * p_out;
}

data::InteractionDataset generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  data::InteractionDataset ds;
  for (std::size_t u = 0; u < spec.n_users; ++u) ds.user_ids.push_back("u" + std::to_string(u));
  for (std::size_t i = 0; i < spec.n_items; ++i) ds.item_ids.push_back("i" + std::to_string(i));
  Rng rng(spec.seed);
  for (std::size_t u = 0; u < spec.n_users; ++u) {
    for (std::size_t i = 0; i < spec.n_items; ++i) {
      const double p = spec.user_block(u) == spec.item_block(i) ? spec.p_in : spec.p_out;
      if (rng.bernoulli(p)) ds.events.push_back({u, i, 0, 1.0});
    }
  }
  return ds;
}

}  // namespace trojanrec::harness
