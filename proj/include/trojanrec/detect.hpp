#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "trojanrec/data.hpp"

namespace trojanrec::detect {

struct SuspicionScores {
  std::vector<double> scores;  // per user, in [0,1]
  std::size_t iterations = 0;
  double damping = 0.5;
};

// Damped mean propagation over the user-item graph. Each round sets every item
// to the mean of its users, then every user with events to
// damping * initial + (1 - damping) * mean of its items.
SuspicionScores propagate_suspicion(const data::InteractionMatrix& m,
                                    std::span<const double> initial, std::size_t iterations = 10,
                                    double damping = 0.5);
SuspicionScores propagate_suspicion(const data::InteractionDataset& ds,
                                    std::span<const double> initial, std::size_t iterations = 10,
                                    double damping = 0.5);

enum class Heuristic { degree_anomaly, co_rating_burst };

std::string_view to_string(Heuristic h);
std::optional<Heuristic> parse_heuristic(std::string_view s);

// Item pair with the most common users; ties go to the lexicographically
// smallest pair. Throws when no user has two items.
std::pair<std::size_t, std::size_t> most_co_rated_pair(const data::InteractionMatrix& m);

// Initial per-user suspicion in [0,1]:
//   degree_anomaly   |len - median len| scaled by the largest deviation
//   co_rating_burst  share of the user's items inside the most co-rated pair,
//                    scaled by the largest share
std::vector<double> seed_suspicion(const data::InteractionMatrix& m, Heuristic heuristic);
std::vector<double> seed_suspicion(const data::InteractionDataset& ds, Heuristic heuristic);

// Mann-Whitney AUC of fake (true) over genuine (false), ties counted one half.
double auc(std::span<const double> scores, const std::vector<bool>& fake);

// Seeds, propagates and scores in one call.
struct DetectionResult {
  Heuristic heuristic = Heuristic::degree_anomaly;
  SuspicionScores suspicion;
  double auc = 0.0;
};
DetectionResult run_detection(const data::InteractionDataset& ds, const std::vector<bool>& fake,
                              Heuristic heuristic, std::size_t iterations = 10,
                              double damping = 0.5);

// Tab-separated (index, user id, score, label) rows.
void write_scores(std::ostream& out, const data::InteractionDataset& ds,
                  const SuspicionScores& scores, const std::vector<bool>& fake);

}  // namespace trojanrec::detect
