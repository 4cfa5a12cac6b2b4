#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "trojanrec/data.hpp"
#include "trojanrec/rng.hpp"

namespace testing_support {

using trojanrec::data::Event;
using trojanrec::data::InteractionDataset;
using trojanrec::data::InteractionMatrix;

// Random binary dataset where every user has at least one consumed and two
// unconsumed items.
inline InteractionDataset random_dataset(std::size_t users, std::size_t items, double density,
                                         std::uint64_t seed) {
  trojanrec::Rng rng(seed);
  InteractionDataset ds;
  for (std::size_t u = 0; u < users; ++u) ds.user_ids.push_back("u" + std::to_string(u));
  for (std::size_t i = 0; i < items; ++i) ds.item_ids.push_back("i" + std::to_string(i));
  for (std::size_t u = 0; u < users; ++u) {
    std::vector<std::size_t> row;
    for (std::size_t i = 0; i < items; ++i) {
      if (rng.bernoulli(density)) row.push_back(i);
    }
    if (row.empty()) row.push_back(rng.uniform_index(items));
    while (row.size() + 2 > items) row.erase(row.begin() + static_cast<long>(rng.uniform_index(row.size())));
    for (std::size_t i : row) ds.events.push_back({u, i, static_cast<std::int64_t>(u + i), 1.0});
  }
  return ds;
}

inline InteractionMatrix random_matrix(std::size_t users, std::size_t items, double density,
                                       std::uint64_t seed) {
  return InteractionMatrix(random_dataset(users, items, density, seed));
}

inline Eigen::MatrixXd random_uniform(long rows, long cols, double lo, double hi,
                                      std::uint64_t seed) {
  trojanrec::Rng rng(seed);
  Eigen::MatrixXd m(rows, cols);
  for (long r = 0; r < rows; ++r)
    for (long c = 0; c < cols; ++c) m(r, c) = rng.uniform(lo, hi);
  return m;
}

inline double central_difference(const std::function<double()>& f, double& x, double h) {
  const double saved = x;
  x = saved + h;
  const double plus = f();
  x = saved - h;
  const double minus = f();
  x = saved;
  return (plus - minus) / (2.0 * h);
}

inline double relative_error(double analytic, double numeric, double floor = 1e-7) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

// Independent top-k: stable sort of unconsumed items by (score desc, index asc).
inline std::vector<std::size_t> brute_top_k(const Eigen::VectorXd& scores,
                                            const std::vector<std::size_t>& consumed,
                                            std::size_t k) {
  std::vector<std::size_t> items;
  for (std::size_t i = 0; i < static_cast<std::size_t>(scores.size()); ++i) {
    if (std::find(consumed.begin(), consumed.end(), i) == consumed.end()) items.push_back(i);
  }
  for (std::size_t a = 0; a < items.size(); ++a) {
    for (std::size_t b = a + 1; b < items.size(); ++b) {
      const bool swap = scores[items[b]] > scores[items[a]] ||
                        (scores[items[b]] == scores[items[a]] && items[b] < items[a]);
      if (swap) std::swap(items[a], items[b]);
    }
  }
  if (items.size() > k) items.resize(k);
  return items;
}

}  // namespace testing_support
