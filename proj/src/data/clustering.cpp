#include <algorithm>
#include <cmath>
#include <set>

#include "trojanrec/data.hpp"
#include "trojanrec/error.hpp"
#include "trojanrec/rng.hpp"

namespace trojanrec::data {

namespace {

// Cosine similarity between a binary row and a unit-norm dense centroid.
double row_similarity(const InteractionMatrix& m, std::size_t u, const Eigen::VectorXd& centroid) {
  auto items = m.user_items(u);
  if (items.empty()) return 0.0;
  double dot = 0.0;
  for (std::size_t i : items) dot += centroid[static_cast<Eigen::Index>(i)];
  return dot / std::sqrt(static_cast<double>(items.size()));
}

Eigen::VectorXd unit_row(const InteractionMatrix& m, std::size_t u) {
  Eigen::VectorXd row = m.dense_row(u);
  double norm = row.norm();
  if (norm > 0.0) row /= norm;
  return row;
}

std::size_t distinct_rows(const InteractionMatrix& m) {
  std::set<std::vector<std::size_t>> rows;
  for (std::size_t u = 0; u < m.rows(); ++u) {
    auto items = m.user_items(u);
    rows.emplace(items.begin(), items.end());
  }
  return rows.size();
}

}  // namespace

std::vector<std::size_t> cluster_users(const InteractionMatrix& m, std::size_t k,
                                       std::uint64_t seed, std::size_t max_iterations) {
  const std::size_t n = m.rows();
  if (k == 0 || k > n) throw ParameterError("cluster count must be in [1, |U|]");
  if (k > distinct_rows(m)) throw ParameterError("more clusters than distinct interaction rows");

  Rng rng(seed);
  std::vector<Eigen::VectorXd> centroids;
  centroids.reserve(k);

  // k-means++ seeding on cosine distance
  centroids.push_back(unit_row(m, rng.uniform_index(n)));
  std::vector<double> best_sim(n);
  for (std::size_t u = 0; u < n; ++u) best_sim[u] = row_similarity(m, u, centroids[0]);
  while (centroids.size() < k) {
    std::vector<double> weight(n);
    double total = 0.0;
    for (std::size_t u = 0; u < n; ++u) {
      double dist = std::max(0.0, 1.0 - best_sim[u]);
      weight[u] = dist * dist;
      total += weight[u];
    }
    std::size_t pick = n - 1;
    if (total > 0.0) {
      double r = rng.uniform(0.0, total);
      double acc = 0.0;
      for (std::size_t u = 0; u < n; ++u) {
        acc += weight[u];
        if (weight[u] > 0.0 && r < acc) {
          pick = u;
          break;
        }
      }
      // floating point slack: fall back to the last positive weight
      if (r >= acc) {
        for (std::size_t u = n; u-- > 0;) {
          if (weight[u] > 0.0) {
            pick = u;
            break;
          }
        }
      }
    } else {
      pick = rng.uniform_index(n);
    }
    centroids.push_back(unit_row(m, pick));
    for (std::size_t u = 0; u < n; ++u) {
      best_sim[u] = std::max(best_sim[u], row_similarity(m, u, centroids.back()));
    }
  }

  std::vector<std::size_t> assign(n, k);
  std::vector<double> sim(n, 0.0);
  auto assign_all = [&]() {
    bool changed = false;
    for (std::size_t u = 0; u < n; ++u) {
      std::size_t best = 0;
      double best_s = -1.0;
      for (std::size_t c = 0; c < k; ++c) {
        double s = row_similarity(m, u, centroids[c]);
        if (s > best_s) {
          best_s = s;
          best = c;
        }
      }
      sim[u] = best_s;
      if (assign[u] != best) {
        assign[u] = best;
        changed = true;
      }
    }
    return changed;
  };

  // Moves the point farthest from its centroid into each empty cluster.
  auto fill_empty = [&]() {
    bool filled = false;
    for (std::size_t c = 0; c < k; ++c) {
      std::vector<std::size_t> sizes(k, 0);
      for (std::size_t a : assign) ++sizes[a];
      if (sizes[c] > 0) continue;
      std::size_t far = n;
      for (std::size_t u = 0; u < n; ++u) {
        if (sizes[assign[u]] < 2) continue;
        if (far == n || sim[u] < sim[far]) far = u;
      }
      if (far == n) break;
      centroids[c] = unit_row(m, far);
      assign[far] = c;
      sim[far] = 1.0;
      filled = true;
    }
    return filled;
  };

  for (std::size_t iter = 0; iter < max_iterations; ++iter) {
    bool changed = assign_all();
    changed = fill_empty() || changed;
    if (!changed && iter > 0) break;
    for (std::size_t c = 0; c < k; ++c) {
      Eigen::VectorXd sum = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m.cols()));
      for (std::size_t u = 0; u < n; ++u) {
        if (assign[u] != c) continue;
        auto items = m.user_items(u);
        if (items.empty()) continue;
        double w = 1.0 / std::sqrt(static_cast<double>(items.size()));
        for (std::size_t i : items) sum[static_cast<Eigen::Index>(i)] += w;
      }
      double norm = sum.norm();
      if (norm > 0.0) centroids[c] = sum / norm;
    }
  }
  return assign;
}

}  // namespace trojanrec::data
