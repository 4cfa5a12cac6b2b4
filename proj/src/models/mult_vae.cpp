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

MatrixXd normalize_columns(const MatrixXd& batch) {
  MatrixXd out = batch;
  for (Index c = 0; c < out.cols(); ++c) {
    double norm = out.col(c).norm();
    if (norm > 0.0) out.col(c) /= norm;
  }
  return out;
}

// Column-wise log-softmax.
MatrixXd log_softmax(const MatrixXd& logits) {
  MatrixXd out(logits.rows(), logits.cols());
  for (Index c = 0; c < logits.cols(); ++c) {
    const double mx = logits.col(c).maxCoeff();
    const double lse = mx + std::log((logits.col(c).array() - mx).exp().sum());
    out.col(c) = logits.col(c).array() - lse;
  }
  return out;
}

std::size_t hidden_width(const TrainConfig& cfg) {
  return cfg.hidden_dim > 0 ? cfg.hidden_dim : 2 * cfg.latent_dim;
}

}  // namespace

MultVaeParams init_mult_vae(std::size_t num_items, const TrainConfig& cfg) {
  cfg.validate();
  Rng rng(derive_seed(cfg.seed, "mult_vae_init"));
  const auto d = static_cast<Index>(cfg.latent_dim);
  const auto h = static_cast<Index>(hidden_width(cfg));
  const auto n = static_cast<Index>(num_items);
  MultVaeParams p;
  p.encoder_weight.resize(h, n);
  p.mean_weight.resize(d, h);
  p.logvar_weight.resize(d, h);
  p.decoder_weight.resize(n, d);
  glorot(p.encoder_weight, rng);
  glorot(p.mean_weight, rng);
  glorot(p.logvar_weight, rng);
  glorot(p.decoder_weight, rng);
  p.encoder_bias = VectorXd::Zero(h);
  p.mean_bias = VectorXd::Zero(d);
  p.logvar_bias = VectorXd::Zero(d);
  p.decoder_bias = VectorXd::Zero(n);
  return p;
}

VaeLoss mult_vae_loss(const MultVaeParams& p, const MatrixXd& batch, const MatrixXd& noise,
                      double beta_kl, double l2_weight, MultVaeParams* grad) {
  if (noise.rows() != p.mean_weight.rows() || noise.cols() != batch.cols()) {
    throw ShapeError("noise must be latent_dim x batch");
  }
  const double n_batch = static_cast<double>(batch.cols());
  const MatrixXd input = normalize_columns(batch);

  MatrixXd hidden = p.encoder_weight * input;
  hidden.colwise() += p.encoder_bias;
  hidden = hidden.array().tanh();
  MatrixXd mean = p.mean_weight * hidden;
  mean.colwise() += p.mean_bias;
  MatrixXd logvar = p.logvar_weight * hidden;
  logvar.colwise() += p.logvar_bias;
  const MatrixXd stddev = (0.5 * logvar.array()).exp();
  const MatrixXd z = mean + (stddev.array() * noise.array()).matrix();
  MatrixXd logits = p.decoder_weight * z;
  logits.colwise() += p.decoder_bias;
  const MatrixXd logp = log_softmax(logits);

  VaeLoss loss;
  loss.nll = -(batch.array() * logp.array()).sum() / n_batch;
  loss.kl = 0.5 * (logvar.array().exp() + mean.array().square() - 1.0 - logvar.array()).sum() /
            n_batch;
  const double reg = p.encoder_weight.squaredNorm() + p.mean_weight.squaredNorm() +
                     p.logvar_weight.squaredNorm() + p.decoder_weight.squaredNorm();
  loss.total = loss.nll + beta_kl * loss.kl + l2_weight * reg;

  if (grad) {
    const Eigen::RowVectorXd counts = batch.colwise().sum();
    MatrixXd d_logits = logp.array().exp().matrix();
    for (Index c = 0; c < d_logits.cols(); ++c) d_logits.col(c) *= counts[c];
    d_logits = (d_logits - batch) / n_batch;
    grad->decoder_weight = d_logits * z.transpose() + 2.0 * l2_weight * p.decoder_weight;
    grad->decoder_bias = d_logits.rowwise().sum();

    const MatrixXd d_z = p.decoder_weight.transpose() * d_logits;
    const MatrixXd d_mean = d_z + (beta_kl / n_batch) * mean;
    const MatrixXd d_logvar =
        (d_z.array() * noise.array() * 0.5 * stddev.array() +
         (beta_kl / n_batch) * 0.5 * (logvar.array().exp() - 1.0))
            .matrix();
    grad->mean_weight = d_mean * hidden.transpose() + 2.0 * l2_weight * p.mean_weight;
    grad->mean_bias = d_mean.rowwise().sum();
    grad->logvar_weight = d_logvar * hidden.transpose() + 2.0 * l2_weight * p.logvar_weight;
    grad->logvar_bias = d_logvar.rowwise().sum();

    MatrixXd d_pre = p.mean_weight.transpose() * d_mean + p.logvar_weight.transpose() * d_logvar;
    d_pre.array() *= 1.0 - hidden.array().square();
    grad->encoder_weight = d_pre * input.transpose() + 2.0 * l2_weight * p.encoder_weight;
    grad->encoder_bias = d_pre.rowwise().sum();
  }
  return loss;
}

MultVaeParams train_mult_vae(const data::InteractionMatrix& m, const TrainConfig& cfg,
                             std::vector<VaeLoss>* loss_trace) {
  if (m.rows() == 0 || m.cols() == 0) throw EmptyDatasetError("cannot train on an empty matrix");
  MultVaeParams p = init_mult_vae(m.cols(), cfg);
  Rng rng(derive_seed(cfg.seed, "mult_vae_batches"));
  detail::Adam adam(cfg.learning_rate);
  std::vector<std::size_t> order(m.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto d = static_cast<Index>(cfg.latent_dim);
  MultVaeParams g;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const auto b = static_cast<Index>(end - start);
      MatrixXd batch = MatrixXd::Zero(static_cast<Index>(m.cols()), b);
      for (std::size_t j = start; j < end; ++j) {
        for (std::size_t i : m.user_items(order[j])) {
          batch(static_cast<Index>(i), static_cast<Index>(j - start)) = 1.0;
        }
      }
      MatrixXd noise(d, b);
      for (Index c = 0; c < b; ++c)
        for (Index r = 0; r < d; ++r) noise(r, c) = rng.normal();

      VaeLoss loss = mult_vae_loss(p, batch, noise, cfg.beta_kl, cfg.l2_weight, &g);
      if (!std::isfinite(loss.total)) throw DivergenceError("Mult-VAE loss is not finite");
      if (loss_trace) loss_trace->push_back(loss);
      adam.begin_step();
      adam.update(0, p.encoder_weight, g.encoder_weight);
      adam.update(1, p.encoder_bias, g.encoder_bias);
      adam.update(2, p.mean_weight, g.mean_weight);
      adam.update(3, p.mean_bias, g.mean_bias);
      adam.update(4, p.logvar_weight, g.logvar_weight);
      adam.update(5, p.logvar_bias, g.logvar_bias);
      adam.update(6, p.decoder_weight, g.decoder_weight);
      adam.update(7, p.decoder_bias, g.decoder_bias);
    }
  }
  return p;
}

}  // namespace trojanrec::models
