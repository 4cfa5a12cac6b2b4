#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "trojanrec/data.hpp"

namespace trojanrec::models {

enum class Family { wrmf, item_ae, mult_vae };
enum class Activation { tanh, identity };

std::string_view to_string(Family family);
std::optional<Family> parse_family(std::string_view name);

struct TrainConfig {
  std::size_t latent_dim = 64;
  double l2_weight = 0.01;
  double confidence_weight = 20.0;  // c_pos, confidence of an observed interaction
  std::size_t epochs = 20;
  std::size_t batch_size = 2048;
  double learning_rate = 0.01;
  std::uint64_t seed = 0;
  double beta_kl = 0.2;
  std::size_t hidden_dim = 0;  // Mult-VAE encoder width, 0 means 2 * latent_dim
  Activation activation = Activation::tanh;

  void validate() const;
};

// Per-family defaults (learning rate and batch size differ between families).
TrainConfig default_train_config(Family family);

struct WrmfParams {
  Eigen::MatrixXd user_factors;  // |U| x d
  Eigen::MatrixXd item_factors;  // |I| x d
  double l2_weight = 0.01;
  double confidence_weight = 20.0;

  std::size_t latent_dim() const { return static_cast<std::size_t>(item_factors.cols()); }
  std::size_t num_items() const { return static_cast<std::size_t>(item_factors.rows()); }
};

struct ItemAeParams {
  Eigen::MatrixXd encoder_weight;  // d x |I|
  Eigen::VectorXd encoder_bias;    // d
  Eigen::MatrixXd decoder_weight;  // |I| x d
  Eigen::VectorXd decoder_bias;    // |I|
  Activation activation = Activation::tanh;

  std::size_t num_items() const { return static_cast<std::size_t>(decoder_weight.rows()); }
};

struct MultVaeParams {
  Eigen::MatrixXd encoder_weight;  // H x |I|
  Eigen::VectorXd encoder_bias;    // H
  Eigen::MatrixXd mean_weight;     // d x H
  Eigen::VectorXd mean_bias;       // d
  Eigen::MatrixXd logvar_weight;   // d x H
  Eigen::VectorXd logvar_bias;     // d
  Eigen::MatrixXd decoder_weight;  // |I| x d
  Eigen::VectorXd decoder_bias;    // |I|

  std::size_t num_items() const { return static_cast<std::size_t>(decoder_weight.rows()); }
};

using RecommenderParams = std::variant<WrmfParams, ItemAeParams, MultVaeParams>;

Family family_of(const RecommenderParams& params);
std::size_t num_items(const RecommenderParams& params);

// ---------------------------------------------------------------------------
// WRMF (implicit ALS over all cells)

// Training input: the real binary matrix plus optional relaxed rows (entries in
// [0, 1]) appended as extra users after the real ones.
struct WrmfData {
  const data::InteractionMatrix& real;
  const Eigen::MatrixXd& extra;

  std::size_t num_users() const { return real.rows() + static_cast<std::size_t>(extra.rows()); }
};

// Confidence extended continuously to fractional interactions.
inline double confidence(double c_pos, double x) { return 1.0 + (c_pos - 1.0) * x; }

WrmfParams init_wrmf(std::size_t num_users, std::size_t num_items, const TrainConfig& cfg);

// sum over all cells of c(x) (x - u.v)^2 + l2 (|U|^2 + |V|^2)
double wrmf_objective(const WrmfData& data, const WrmfParams& params);
void wrmf_solve_users(const WrmfData& data, WrmfParams& params);
void wrmf_solve_items(const WrmfData& data, WrmfParams& params);

WrmfParams train_wrmf(const data::InteractionMatrix& m, const TrainConfig& cfg,
                      std::vector<double>* objective_trace = nullptr);

// Warm-started sweeps. Rows of user_factors beyond the current count are
// created by fold-in before the first sweep.
void refine_wrmf(const WrmfData& data, WrmfParams& params, std::size_t sweeps,
                 std::vector<double>* objective_trace = nullptr);

// Closed-form user embedding for a (possibly fractional) interaction row with
// the item factors held fixed.
Eigen::VectorXd fold_in_user(const WrmfParams& params, const Eigen::VectorXd& row);

// ---------------------------------------------------------------------------
// ItemAE

ItemAeParams init_item_ae(std::size_t num_items, const TrainConfig& cfg);

// Mean weighted squared reconstruction error over the batch columns plus L2 on
// weight matrices. Fills grad when non-null.
double item_ae_loss(const ItemAeParams& params, const Eigen::MatrixXd& batch, double l2_weight,
                    double confidence_weight, ItemAeParams* grad = nullptr);

ItemAeParams train_item_ae(const data::InteractionMatrix& m, const TrainConfig& cfg,
                           std::vector<double>* loss_trace = nullptr);

// ---------------------------------------------------------------------------
// Mult-VAE

MultVaeParams init_mult_vae(std::size_t num_items, const TrainConfig& cfg);

struct VaeLoss {
  double total = 0.0;
  double nll = 0.0;
  double kl = 0.0;
};

// Batch loss with a fixed reparameterisation noise matrix (d x B).
VaeLoss mult_vae_loss(const MultVaeParams& params, const Eigen::MatrixXd& batch,
                      const Eigen::MatrixXd& noise, double beta_kl, double l2_weight,
                      MultVaeParams* grad = nullptr);

MultVaeParams train_mult_vae(const data::InteractionMatrix& m, const TrainConfig& cfg,
                             std::vector<VaeLoss>* loss_trace = nullptr);

// ---------------------------------------------------------------------------
// Scoring

RecommenderParams train(Family family, const data::InteractionMatrix& m, const TrainConfig& cfg);

struct ScoreRow {
  std::size_t user = 0;
  Eigen::VectorXd scores;
};

Eigen::VectorXd score_row(const RecommenderParams& params, const Eigen::VectorXd& row);
ScoreRow score_user(const RecommenderParams& params, std::size_t user,
                    const Eigen::VectorXd& row);
// Rows of the result follow the order of `users`.
Eigen::MatrixXd score_users(const RecommenderParams& params, const data::InteractionMatrix& m,
                            std::span<const std::size_t> users);

// Highest-scoring unconsumed items, descending, ties by ascending index.
std::vector<std::size_t> recommend_top_k(const Eigen::VectorXd& scores,
                                         std::span<const std::size_t> consumed, std::size_t k);

// ---------------------------------------------------------------------------
// Checkpoints (text, hexfloat values, bit-exact round trip)

void save_checkpoint(std::ostream& out, const RecommenderParams& params);
RecommenderParams load_checkpoint(std::istream& in);

}  // namespace trojanrec::models
