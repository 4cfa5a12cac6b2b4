#include <algorithm>
#include <cmath>

#include "trojanrec/attack.hpp"
#include "trojanrec/error.hpp"

namespace trojanrec::attack {

using Eigen::Index;

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

double promotion_loss_from_scores(const Eigen::MatrixXd& scores, const data::InteractionMatrix& real,
                                  std::span<const std::size_t> users, std::size_t item,
                                  std::size_t k, Eigen::MatrixXd* grad) {
  if (users.empty()) throw ParameterError("promotion loss needs at least one user");
  if (k < 1) throw ParameterError("k must be >= 1");
  if (static_cast<std::size_t>(scores.rows()) != users.size() ||
      static_cast<std::size_t>(scores.cols()) != real.cols()) {
    throw ShapeError("score matrix must be |users| x |I|");
  }
  if (item >= real.cols()) throw ParameterError("promoted item out of range");
  if (grad) grad->setZero(scores.rows(), scores.cols());

  struct Term {
    Index row;
    std::size_t kth;
    double margin;
  };
  std::vector<Term> terms;
  terms.reserve(users.size());
  std::vector<std::size_t> unseen;
  for (std::size_t j = 0; j < users.size(); ++j) {
    const std::size_t u = users[j];
    if (real.contains(u, item)) continue;
    const auto row = static_cast<Index>(j);
    unseen.clear();
    auto consumed = real.user_items(u);
    std::size_t next = 0;
    for (std::size_t i = 0; i < real.cols(); ++i) {
      while (next < consumed.size() && consumed[next] < i) ++next;
      if (i == item || (next < consumed.size() && consumed[next] == i)) continue;
      unseen.push_back(i);
    }
    if (unseen.empty()) continue;
    auto better = [&](std::size_t a, std::size_t b) {
      const double sa = scores(row, static_cast<Index>(a));
      const double sb = scores(row, static_cast<Index>(b));
      return sa != sb ? sa > sb : a < b;
    };
    // fewer than k unseen items: the weakest unseen score acts as s_k
    const std::size_t pos = std::min(k, unseen.size()) - 1;
    std::nth_element(unseen.begin(), unseen.begin() + static_cast<std::ptrdiff_t>(pos),
                     unseen.end(), better);
    const std::size_t kth = unseen[pos];
    terms.push_back({row, kth, scores(row, static_cast<Index>(kth)) -
                                   scores(row, static_cast<Index>(item))});
  }
  if (terms.empty()) return 0.0;

  const double n = static_cast<double>(terms.size());
  double loss = 0.0;
  for (const auto& t : terms) {
    loss += softplus(t.margin);
    if (grad) {
      const double g = sigmoid(t.margin) / n;
      (*grad)(t.row, static_cast<Index>(t.kth)) += g;
      (*grad)(t.row, static_cast<Index>(item)) -= g;
    }
  }
  return loss / n;
}

double promotion_loss(const models::RecommenderParams& params, const data::InteractionMatrix& real,
                      std::size_t item, std::span<const std::size_t> users, std::size_t k) {
  Eigen::MatrixXd scores = models::score_users(params, real, users);
  return promotion_loss_from_scores(scores, real, users, item, k);
}

double composite_loss(const models::RecommenderParams& params, const data::InteractionMatrix& real,
                      std::size_t target, std::size_t trigger, std::span<const std::size_t> users,
                      double alpha, std::size_t k) {
  if (alpha < 0.0 || alpha > 1.0) throw ParameterError("alpha must be in [0, 1]");
  Eigen::MatrixXd scores = models::score_users(params, real, users);
  const double lt = promotion_loss_from_scores(scores, real, users, target, k);
  const double lg = promotion_loss_from_scores(scores, real, users, trigger, k);
  return alpha * lt + (1.0 - alpha) * lg;
}

}  // namespace trojanrec::attack
