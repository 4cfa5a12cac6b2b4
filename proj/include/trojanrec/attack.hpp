#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "trojanrec/data.hpp"
#include "trojanrec/models.hpp"

namespace trojanrec::attack {

// Continuous relaxation of the fake users' interaction rows. Forced columns
// (target, and trigger when present) are pinned to exactly 1.
struct FakeUserBlock {
  Eigen::MatrixXd rows;  // n_fake x |I|, entries in [0, 1]
  std::vector<std::size_t> forced_items;
  std::size_t budget_per_user = 0;

  std::size_t num_fake() const { return static_cast<std::size_t>(rows.rows()); }
  std::size_t num_items() const { return static_cast<std::size_t>(rows.cols()); }

  // Proj_Lambda: clip to [0, 1], then re-pin the forced columns.
  void project();
};

struct AttackConfig {
  double poisoning_ratio = 0.001;
  double alpha = 0.5;
  double eta = 1.0;
  std::size_t t_adv = 50;
  std::size_t t_sub = 100;
  std::size_t budget_per_user = 0;  // 0: round(mean real profile length)
  std::size_t candidate_cap = 500;
  std::size_t batch_size = 512;  // target users in the trigger-scoring batch
  std::size_t top_k = 20;        // display window the promotion loss aims at
  std::size_t workers = 1;
  std::uint64_t seed = 0;
  models::TrainConfig substitute = models::default_train_config(models::Family::wrmf);

  void validate() const;
  std::size_t num_fake(std::size_t num_users) const;
  std::size_t resolve_budget(const data::InteractionMatrix& real) const;
};

struct TriggerScore {
  std::size_t item = 0;
  double delta_loss = 0.0;
};

// ---------------------------------------------------------------------------
// Losses

double softplus(double x);

// Mean over eligible users of softplus(s_k(u) - score(u, item)); s_k(u) is the
// k-th best score among items the user has not consumed, excluding `item`.
// Users who already consumed `item` are not eligible. When `grad` is given it
// receives dLoss/dScores with the shape of `scores`.
double promotion_loss_from_scores(const Eigen::MatrixXd& scores, const data::InteractionMatrix& real,
                                  std::span<const std::size_t> users, std::size_t item,
                                  std::size_t k, Eigen::MatrixXd* grad = nullptr);

double promotion_loss(const models::RecommenderParams& params, const data::InteractionMatrix& real,
                      std::size_t item, std::span<const std::size_t> users, std::size_t k = 20);

double composite_loss(const models::RecommenderParams& params, const data::InteractionMatrix& real,
                      std::size_t target, std::size_t trigger, std::span<const std::size_t> users,
                      double alpha, std::size_t k = 20);

// ---------------------------------------------------------------------------
// One-step sensitivity surrogate of the retrained substitute.
//
// Fake rows are folded in against the substitute's item factors, then a single
// ridge item-solve over real and fake users yields updated item factors; the
// losses are evaluated with real users' factors held fixed. Gradients are the
// exact derivatives of that composition.

struct BlockObjective {
  double composite = 0.0;
  double target_loss = 0.0;
  double trigger_loss = 0.0;
  Eigen::MatrixXd gradient;  // empty unless requested
};

class BlockSurrogate {
 public:
  BlockSurrogate(const models::WrmfParams& substitute, const data::InteractionMatrix& real);

  BlockObjective evaluate(const FakeUserBlock& block, std::size_t target,
                          std::optional<std::size_t> trigger, std::span<const std::size_t> users,
                          double alpha, std::size_t k, bool with_gradient) const;

 private:
  const models::WrmfParams& substitute_;
  const data::InteractionMatrix& real_;
  Eigen::MatrixXd user_factors_;  // real users only
  Eigen::MatrixXd fold_in_base_;  // V^T V + l2 I
  std::vector<Eigen::MatrixXd> item_gram_;  // real-user part of each item's normal matrix
  Eigen::MatrixXd item_rhs_;                // |I| x d
};

Eigen::MatrixXd fake_block_gradient(const models::WrmfParams& substitute, const FakeUserBlock& block,
                                    const data::InteractionMatrix& real, std::size_t target,
                                    std::optional<std::size_t> trigger,
                                    std::span<const std::size_t> users, double alpha,
                                    std::size_t k = 20);

FakeUserBlock pgd_step(const FakeUserBlock& block, const Eigen::MatrixXd& grad, double eta);

// ---------------------------------------------------------------------------
// Poison initialisation and discretisation

// Rows get 1 at the forced items and 0.5 at (budget - |forced|) further items
// drawn without replacement proportionally to popularity.
FakeUserBlock init_block(std::span<const std::size_t> forced, std::size_t n_fake,
                         std::size_t budget, std::size_t item_count,
                         std::span<const std::size_t> popularity, std::uint64_t seed);

FakeUserBlock init_poison(const data::TargetSpec& targets, std::size_t trigger, std::size_t n_fake,
                          std::size_t budget, std::size_t item_count,
                          std::span<const std::size_t> popularity, std::uint64_t seed);

// Keeps the budget largest entries of each row (forced first, ties by lower
// index) as events for users first_user, first_user + 1, ...
std::vector<data::Event> discretize(const FakeUserBlock& block, std::size_t first_user,
                                    std::int64_t timestamp);

// D plus the discretised fake users appended after the real ones.
data::InteractionDataset inject(const data::InteractionDataset& ds, const FakeUserBlock& block);

// ---------------------------------------------------------------------------
// Trigger selection

std::vector<std::size_t> candidate_pool(const data::InteractionMatrix& real,
                                        const data::TargetSpec& targets, std::size_t cap);

TriggerScore trigger_delta_loss(const BlockSurrogate& surrogate, const data::InteractionMatrix& real,
                                std::size_t candidate, const data::TargetSpec& targets,
                                const AttackConfig& cfg);
TriggerScore trigger_delta_loss(const models::WrmfParams& substitute,
                                const data::InteractionMatrix& real, std::size_t candidate,
                                const data::TargetSpec& targets, const AttackConfig& cfg);

// Argmax of the loss reduction over `pool`, ties by ascending index.
std::size_t select_trigger(const models::WrmfParams& substitute, const data::InteractionMatrix& real,
                           const data::TargetSpec& targets, const AttackConfig& cfg,
                           std::span<const std::size_t> pool,
                           std::vector<TriggerScore>* scores = nullptr);
std::size_t select_trigger(const models::WrmfParams& substitute, const data::InteractionMatrix& real,
                           const data::TargetSpec& targets, const AttackConfig& cfg,
                           std::vector<TriggerScore>* scores = nullptr);

// argmin_i Rank(i, U_t) - Rank(i, complement), average 1-based rank positions.
std::size_t popularity_trigger(const models::RecommenderParams& params,
                               const data::InteractionMatrix& real, const data::TargetSpec& targets);

// ---------------------------------------------------------------------------
// Full pipelines

enum class Method { clean, injection, indirectad, popularity_trigger, random_shilling };

std::string_view to_string(Method method);
std::optional<Method> parse_method(std::string_view name);

struct TraceRecord {
  std::size_t iteration = 0;
  double composite = 0.0;
  double target_loss = 0.0;
  double trigger_loss = 0.0;
  double grad_norm = 0.0;

  friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

struct AttackResult {
  data::InteractionDataset poisoned;
  std::size_t num_real_users = 0;
  std::optional<std::size_t> trigger;
  std::vector<TraceRecord> trace;
  FakeUserBlock final_block;

  std::size_t num_fake_users() const { return poisoned.num_users() - num_real_users; }
  std::vector<bool> fake_labels() const;
};

// Called after initialisation (iteration 0) and after every projected step.
using IterationObserver = std::function<void(std::size_t iteration, const FakeUserBlock& block)>;

AttackResult run_indirectad(const data::InteractionDataset& ds, const data::TargetSpec& targets,
                            const AttackConfig& cfg, const IterationObserver& observer = {});
AttackResult run_injection_baseline(const data::InteractionDataset& ds,
                                    const data::TargetSpec& targets, const AttackConfig& cfg,
                                    const IterationObserver& observer = {});
AttackResult run_popularity_trigger_attack(const data::InteractionDataset& ds,
                                           const data::TargetSpec& targets, const AttackConfig& cfg,
                                           const IterationObserver& observer = {});
// Budget-matched naive profiles: target plus uniformly random items.
AttackResult run_random_shilling(const data::InteractionDataset& ds, const data::TargetSpec& targets,
                                 const AttackConfig& cfg);

AttackResult run_method(Method method, const data::InteractionDataset& ds,
                        const data::TargetSpec& targets, const AttackConfig& cfg,
                        const IterationObserver& observer = {});

// ---------------------------------------------------------------------------
// Records

void write_trace(std::ostream& out, std::span<const TraceRecord> trace);
std::vector<TraceRecord> read_trace(std::istream& in);

// Sidecar: user_index, user_id, is_fake (0/1) per line.
void write_labels(std::ostream& out, const data::InteractionDataset& ds,
                  const std::vector<bool>& fake);
std::vector<bool> read_labels(std::istream& in);

}  // namespace trojanrec::attack
