#include <algorithm>
#include <numeric>

#include "trojanrec/error.hpp"
#include "trojanrec/models.hpp"

namespace trojanrec::models {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

std::string_view to_string(Family family) {
  switch (family) {
    case Family::wrmf:
      return "wrmf";
    case Family::item_ae:
      return "item_ae";
    case Family::mult_vae:
      return "mult_vae";
  }
  return "wrmf";
}

std::optional<Family> parse_family(std::string_view name) {
  for (auto f : {Family::wrmf, Family::item_ae, Family::mult_vae}) {
    if (to_string(f) == name) return f;
  }
  return std::nullopt;
}

void TrainConfig::validate() const {
  if (latent_dim < 1) throw ParameterError("latent_dim must be >= 1");
  if (epochs < 1) throw ParameterError("epochs must be >= 1");
  if (batch_size < 1) throw ParameterError("batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw ParameterError("learning_rate must be > 0");
  if (l2_weight < 0.0) throw ParameterError("l2_weight must be >= 0");
  if (confidence_weight < 1.0) throw ParameterError("confidence_weight must be >= 1");
  if (beta_kl < 0.0 || beta_kl > 1.0) throw ParameterError("beta_kl must be in [0, 1]");
}

TrainConfig default_train_config(Family family) {
  TrainConfig cfg;
  switch (family) {
    case Family::wrmf:
      cfg.learning_rate = 0.01;
      cfg.batch_size = 2048;
      cfg.epochs = 20;
      break;
    case Family::item_ae:
      cfg.learning_rate = 0.001;
      cfg.batch_size = 2048;
      cfg.epochs = 50;
      break;
    case Family::mult_vae:
      cfg.learning_rate = 0.001;
      cfg.batch_size = 1024;
      cfg.epochs = 50;
      break;
  }
  return cfg;
}

Family family_of(const RecommenderParams& params) {
  return static_cast<Family>(params.index());
}

std::size_t num_items(const RecommenderParams& params) {
  return std::visit([](const auto& p) { return p.num_items(); }, params);
}

RecommenderParams train(Family family, const data::InteractionMatrix& m, const TrainConfig& cfg) {
  switch (family) {
    case Family::wrmf:
      return train_wrmf(m, cfg);
    case Family::item_ae:
      return train_item_ae(m, cfg);
    case Family::mult_vae:
      return train_mult_vae(m, cfg);
  }
  throw ParameterError("unknown model family");
}

namespace {

VectorXd forward(const WrmfParams& p, const VectorXd& row) {
  return p.item_factors * fold_in_user(p, row);
}

VectorXd forward(const ItemAeParams& p, const VectorXd& row) {
  VectorXd hidden = p.encoder_weight * row + p.encoder_bias;
  if (p.activation == Activation::tanh) hidden = hidden.array().tanh();
  return p.decoder_weight * hidden + p.decoder_bias;
}

// Posterior mean, no sampling; output is a softmax over items.
VectorXd forward(const MultVaeParams& p, const VectorXd& row) {
  VectorXd input = row;
  const double norm = input.norm();
  if (norm > 0.0) input /= norm;
  VectorXd hidden = (p.encoder_weight * input + p.encoder_bias).array().tanh();
  VectorXd mean = p.mean_weight * hidden + p.mean_bias;
  VectorXd logits = p.decoder_weight * mean + p.decoder_bias;
  const double mx = logits.maxCoeff();
  VectorXd e = (logits.array() - mx).exp();
  return e / e.sum();
}

}  // namespace

VectorXd score_row(const RecommenderParams& params, const VectorXd& row) {
  if (static_cast<std::size_t>(row.size()) != num_items(params)) {
    throw ShapeError("interaction row length does not match the model's item count");
  }
  return std::visit([&](const auto& p) { return forward(p, row); }, params);
}

ScoreRow score_user(const RecommenderParams& params, std::size_t user, const VectorXd& row) {
  return {user, score_row(params, row)};
}

MatrixXd score_users(const RecommenderParams& params, const data::InteractionMatrix& m,
                     std::span<const std::size_t> users) {
  if (m.cols() != num_items(params)) throw ShapeError("matrix and model disagree on item count");
  MatrixXd out(static_cast<Index>(users.size()), static_cast<Index>(m.cols()));
  for (std::size_t j = 0; j < users.size(); ++j) {
    out.row(static_cast<Index>(j)) = score_row(params, m.dense_row(users[j])).transpose();
  }
  return out;
}

std::vector<std::size_t> recommend_top_k(const VectorXd& scores,
                                         std::span<const std::size_t> consumed, std::size_t k) {
  const auto n = static_cast<std::size_t>(scores.size());
  std::vector<bool> seen(n, false);
  for (std::size_t i : consumed) {
    if (i < n) seen[i] = true;
  }
  std::vector<std::size_t> candidates;
  candidates.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!seen[i]) candidates.push_back(i);
  }
  auto better = [&](std::size_t a, std::size_t b) {
    const double sa = scores[static_cast<Index>(a)];
    const double sb = scores[static_cast<Index>(b)];
    return sa != sb ? sa > sb : a < b;
  };
  const std::size_t take = std::min(k, candidates.size());
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(take),
                    candidates.end(), better);
  candidates.resize(take);
  return candidates;
}

}  // namespace trojanrec::models
