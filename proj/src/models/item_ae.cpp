#include <cmath>
#include <numeric>

#include "adam.hpp"
#include "trojanrec/error.hpp"
#include "trojanrec/models.hpp"
#include "trojanrec/rng.hpp"

namespace trojanrec::models {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

void glorot(MatrixXd& w, Rng& rng) {
  const double s = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
  for (Index c = 0; c < w.cols(); ++c)
    for (Index r = 0; r < w.rows(); ++r) w(r, c) = rng.uniform(-s, s);
}

MatrixXd activate(const MatrixXd& pre, Activation act) {
  return act == Activation::tanh ? MatrixXd(pre.array().tanh()) : pre;
}

}  // namespace

ItemAeParams init_item_ae(std::size_t num_items, const TrainConfig& cfg) {
  cfg.validate();
  Rng rng(derive_seed(cfg.seed, "item_ae_init"));
  const auto d = static_cast<Index>(cfg.latent_dim);
  const auto n = static_cast<Index>(num_items);
  ItemAeParams p;
  p.activation = cfg.activation;
  p.encoder_weight.resize(d, n);
  p.decoder_weight.resize(n, d);
  glorot(p.encoder_weight, rng);
  glorot(p.decoder_weight, rng);
  p.encoder_bias = VectorXd::Zero(d);
  p.decoder_bias = VectorXd::Zero(n);
  return p;
}

double item_ae_loss(const ItemAeParams& p, const MatrixXd& batch, double l2_weight,
                    double confidence_weight, ItemAeParams* grad) {
  const double n_batch = static_cast<double>(batch.cols());
  MatrixXd pre = p.encoder_weight * batch;
  pre.colwise() += p.encoder_bias;
  MatrixXd hidden = activate(pre, p.activation);
  MatrixXd out = p.decoder_weight * hidden;
  out.colwise() += p.decoder_bias;

  const MatrixXd weight = (1.0 + (confidence_weight - 1.0) * batch.array()).matrix();
  const MatrixXd diff = out - batch;
  double loss = (weight.array() * diff.array().square()).sum() / n_batch +
                l2_weight * (p.encoder_weight.squaredNorm() + p.decoder_weight.squaredNorm());

  if (grad) {
    MatrixXd d_out = (2.0 / n_batch) * (weight.array() * diff.array()).matrix();
    grad->activation = p.activation;
    grad->decoder_weight = d_out * hidden.transpose() + 2.0 * l2_weight * p.decoder_weight;
    grad->decoder_bias = d_out.rowwise().sum();
    MatrixXd d_pre = p.decoder_weight.transpose() * d_out;
    if (p.activation == Activation::tanh) {
      d_pre.array() *= 1.0 - hidden.array().square();
    }
    grad->encoder_weight = d_pre * batch.transpose() + 2.0 * l2_weight * p.encoder_weight;
    grad->encoder_bias = d_pre.rowwise().sum();
  }
  return loss;
}

ItemAeParams train_item_ae(const data::InteractionMatrix& m, const TrainConfig& cfg,
                           std::vector<double>* loss_trace) {
  if (m.rows() == 0 || m.cols() == 0) throw EmptyDatasetError("cannot train on an empty matrix");
  ItemAeParams p = init_item_ae(m.cols(), cfg);
  Rng rng(derive_seed(cfg.seed, "item_ae_batches"));
  detail::Adam adam(cfg.learning_rate);
  std::vector<std::size_t> order(m.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  ItemAeParams g;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      MatrixXd batch = MatrixXd::Zero(static_cast<Index>(m.cols()), static_cast<Index>(end - start));
      for (std::size_t j = start; j < end; ++j) {
        for (std::size_t i : m.user_items(order[j])) {
          batch(static_cast<Index>(i), static_cast<Index>(j - start)) = 1.0;
        }
      }
      double loss = item_ae_loss(p, batch, cfg.l2_weight, cfg.confidence_weight, &g);
      if (!std::isfinite(loss)) throw DivergenceError("ItemAE loss is not finite");
      if (loss_trace) loss_trace->push_back(loss);
      adam.begin_step();
      adam.update(0, p.encoder_weight, g.encoder_weight);
      adam.update(1, p.encoder_bias, g.encoder_bias);
      adam.update(2, p.decoder_weight, g.decoder_weight);
      adam.update(3, p.decoder_bias, g.decoder_bias);
    }
  }
  return p;
}

}  // namespace trojanrec::models
