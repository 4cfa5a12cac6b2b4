#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

#include "trojanrec/detect.hpp"
#include "trojanrec/error.hpp"

namespace trojanrec::detect {

SuspicionScores propagate_suspicion(const data::InteractionMatrix& m,
                                    std::span<const double> initial, std::size_t iterations,
                                    double damping) {
  if (initial.size() != m.rows()) throw ShapeError("one initial score per user required");
  if (!(damping > 0.0 && damping < 1.0)) throw ParameterError("damping must lie in (0,1)");
  for (double s : initial) {
    if (!std::isfinite(s) || s < 0.0 || s > 1.0) throw ParameterError("initial scores must be in [0,1]");
  }
  std::vector<double> user(initial.begin(), initial.end());
  std::vector<double> item(m.cols(), 0.0);
  for (std::size_t it = 0; it < iterations; ++it) {
    for (std::size_t i = 0; i < m.cols(); ++i) {
      const auto users = m.item_users(i);
      if (users.empty()) continue;
      double sum = 0.0;
      for (std::size_t u : users) sum += user[u];
      item[i] = sum / static_cast<double>(users.size());
    }
    for (std::size_t u = 0; u < m.rows(); ++u) {
      const auto items = m.user_items(u);
      if (items.empty()) continue;
      double sum = 0.0;
      for (std::size_t i : items) sum += item[i];
      user[u] = damping * initial[u] + (1.0 - damping) * sum / static_cast<double>(items.size());
      user[u] = std::clamp(user[u], 0.0, 1.0);
    }
  }
  return {std::move(user), iterations, damping};
}

SuspicionScores propagate_suspicion(const data::InteractionDataset& ds,
                                    std::span<const double> initial, std::size_t iterations,
                                    double damping) {
  return propagate_suspicion(data::InteractionMatrix(ds), initial, iterations, damping);
}

std::string_view to_string(Heuristic h) {
  return h == Heuristic::degree_anomaly ? "degree_anomaly" : "co_rating_burst";
}

std::optional<Heuristic> parse_heuristic(std::string_view s) {
  if (s == "degree_anomaly") return Heuristic::degree_anomaly;
  if (s == "co_rating_burst") return Heuristic::co_rating_burst;
  return std::nullopt;
}

std::pair<std::size_t, std::size_t> most_co_rated_pair(const data::InteractionMatrix& m) {
  const std::size_t n = m.cols();
  std::vector<std::uint32_t> counts(n * n, 0);
  for (std::size_t u = 0; u < m.rows(); ++u) {
    const auto items = m.user_items(u);
    for (std::size_t a = 0; a < items.size(); ++a) {
      for (std::size_t b = a + 1; b < items.size(); ++b) ++counts[items[a] * n + items[b]];
    }
  }
  std::uint32_t best = 0;
  std::pair<std::size_t, std::size_t> pair{0, 0};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (counts[i * n + j] > best) {
        best = counts[i * n + j];
        pair = {i, j};
      }
    }
  }
  if (best == 0) throw ParameterError("no user has two items; co-rating is undefined");
  return pair;
}

namespace {

void scale_by_max(std::vector<double>& v) {
  const double top = v.empty() ? 0.0 : *std::max_element(v.begin(), v.end());
  if (top <= 0.0) return;
  for (double& x : v) x /= top;
}

}  // namespace

std::vector<double> seed_suspicion(const data::InteractionMatrix& m, Heuristic heuristic) {
  if (m.rows() == 0 || m.nnz() == 0) throw EmptyDatasetError("dataset has no events");
  std::vector<double> scores(m.rows(), 0.0);
  if (heuristic == Heuristic::degree_anomaly) {
    std::vector<double> len(m.row_sums().begin(), m.row_sums().end());
    std::vector<double> sorted = len;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    const double median = n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    for (std::size_t u = 0; u < n; ++u) scores[u] = std::abs(len[u] - median);
  } else {
    const auto [a, b] = most_co_rated_pair(m);
    for (std::size_t u = 0; u < m.rows(); ++u) {
      const auto items = m.user_items(u);
      if (items.empty()) continue;
      const double shared = (m.contains(u, a) ? 1.0 : 0.0) + (m.contains(u, b) ? 1.0 : 0.0);
      scores[u] = shared / static_cast<double>(items.size());
    }
  }
  scale_by_max(scores);
  return scores;
}

std::vector<double> seed_suspicion(const data::InteractionDataset& ds, Heuristic heuristic) {
  return seed_suspicion(data::InteractionMatrix(ds), heuristic);
}

double auc(std::span<const double> scores, const std::vector<bool>& fake) {
  if (scores.size() != fake.size()) throw ShapeError("one label per score required");
  std::vector<double> genuine;
  std::vector<double> positive;
  for (std::size_t u = 0; u < scores.size(); ++u) (fake[u] ? positive : genuine).push_back(scores[u]);
  if (genuine.empty() || positive.empty()) {
    throw UndefinedMetricError("AUC needs both fake and genuine users");
  }
  std::sort(genuine.begin(), genuine.end());
  // Twice the Mann-Whitney U, kept integral so ties stay exact.
  std::size_t twice_u = 0;
  for (double s : positive) {
    const auto lo = std::lower_bound(genuine.begin(), genuine.end(), s);
    const auto hi = std::upper_bound(lo, genuine.end(), s);
    twice_u += 2 * static_cast<std::size_t>(lo - genuine.begin()) + static_cast<std::size_t>(hi - lo);
  }
  return static_cast<double>(twice_u) /
         (2.0 * static_cast<double>(positive.size()) * static_cast<double>(genuine.size()));
}

DetectionResult run_detection(const data::InteractionDataset& ds, const std::vector<bool>& fake,
                              Heuristic heuristic, std::size_t iterations, double damping) {
  data::InteractionMatrix m(ds);
  DetectionResult result;
  result.heuristic = heuristic;
  result.suspicion = propagate_suspicion(m, seed_suspicion(m, heuristic), iterations, damping);
  result.auc = auc(result.suspicion.scores, fake);
  return result;
}

void write_scores(std::ostream& out, const data::InteractionDataset& ds,
                  const SuspicionScores& scores, const std::vector<bool>& fake) {
  if (scores.scores.size() != ds.num_users() || fake.size() != ds.num_users()) {
    throw ShapeError("one score and label per user required");
  }
  const auto precision = out.precision(17);
  for (std::size_t u = 0; u < ds.num_users(); ++u) {
    out << u << '\t' << ds.user_ids[u] << '\t' << scores.scores[u] << '\t' << (fake[u] ? 1 : 0)
        << '\n';
  }
  out.precision(precision);
}

}  // namespace trojanrec::detect
