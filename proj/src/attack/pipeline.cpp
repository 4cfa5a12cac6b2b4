#include <spdlog/spdlog.h>

#include "trojanrec/attack.hpp"
#include "trojanrec/error.hpp"
#include "trojanrec/rng.hpp"

namespace trojanrec::attack {

namespace {

void check_targets(const data::InteractionDataset& ds, const data::TargetSpec& targets) {
  if (targets.target_users.empty()) throw ParameterError("target user set is empty");
  if (targets.target_item >= ds.num_items()) throw ParameterError("target item out of range");
  for (std::size_t u : targets.target_users) {
    if (u >= ds.num_users()) throw ParameterError("target user out of range");
  }
}

// Algorithm loop shared by every optimised method: retrain the substitute on
// real + current fake rows, take one projected gradient step, repeat.
AttackResult optimize(const data::InteractionDataset& ds, const data::InteractionMatrix& real,
                      models::WrmfParams substitute, const data::TargetSpec& targets,
                      std::optional<std::size_t> trigger, double alpha, const AttackConfig& cfg,
                      const IterationObserver& observer) {
  const std::size_t n_fake = cfg.num_fake(real.rows());
  const std::size_t budget = cfg.resolve_budget(real);
  const std::uint64_t init_seed = derive_seed(cfg.seed, "poison_init");
  FakeUserBlock block =
      trigger ? init_poison(targets, *trigger, n_fake, budget, real.cols(), real.col_sums(), init_seed)
              : init_block(std::span<const std::size_t>(&targets.target_item, 1), n_fake, budget,
                           real.cols(), real.col_sums(), init_seed);
  if (observer) observer(0, block);

  AttackResult result;
  result.trigger = trigger;
  result.num_real_users = ds.num_users();
  for (std::size_t iter = 1; iter <= cfg.t_adv; ++iter) {
    models::WrmfData train_data{real, block.rows};
    models::refine_wrmf(train_data, substitute, cfg.t_sub);
    BlockSurrogate surrogate(substitute, real);
    BlockObjective obj = surrogate.evaluate(block, targets.target_item, trigger,
                                            targets.target_users, alpha, cfg.top_k, true);
    result.trace.push_back(
        {iter, obj.composite, obj.target_loss, obj.trigger_loss, obj.gradient.norm()});
    spdlog::debug("iteration {}: composite {:.6g} grad norm {:.3g}", iter, obj.composite,
                  result.trace.back().grad_norm);
    block = pgd_step(block, obj.gradient, cfg.eta);
    if (observer) observer(iter, block);
  }
  result.poisoned = inject(ds, block);
  result.final_block = std::move(block);
  return result;
}

}  // namespace

AttackResult run_indirectad(const data::InteractionDataset& ds, const data::TargetSpec& targets,
                            const AttackConfig& cfg, const IterationObserver& observer) {
  cfg.validate();
  check_targets(ds, targets);
  data::InteractionMatrix real(ds);
  models::WrmfParams substitute = models::train_wrmf(real, cfg.substitute);
  const std::size_t trigger = select_trigger(substitute, real, targets, cfg);
  spdlog::info("selected trigger item {} for target {}", trigger, targets.target_item);
  return optimize(ds, real, std::move(substitute), targets, trigger, cfg.alpha, cfg, observer);
}

AttackResult run_injection_baseline(const data::InteractionDataset& ds,
                                    const data::TargetSpec& targets, const AttackConfig& cfg,
                                    const IterationObserver& observer) {
  cfg.validate();
  check_targets(ds, targets);
  data::InteractionMatrix real(ds);
  models::WrmfParams substitute = models::train_wrmf(real, cfg.substitute);
  return optimize(ds, real, std::move(substitute), targets, std::nullopt, 1.0, cfg, observer);
}

AttackResult run_popularity_trigger_attack(const data::InteractionDataset& ds,
                                           const data::TargetSpec& targets, const AttackConfig& cfg,
                                           const IterationObserver& observer) {
  cfg.validate();
  check_targets(ds, targets);
  data::InteractionMatrix real(ds);
  models::WrmfParams substitute = models::train_wrmf(real, cfg.substitute);
  const std::size_t trigger = popularity_trigger(substitute, real, targets);
  return optimize(ds, real, std::move(substitute), targets, trigger, cfg.alpha, cfg, observer);
}

AttackResult run_random_shilling(const data::InteractionDataset& ds, const data::TargetSpec& targets,
                                 const AttackConfig& cfg) {
  cfg.validate();
  check_targets(ds, targets);
  data::InteractionMatrix real(ds);
  const std::vector<std::size_t> uniform(real.cols(), 1);
  FakeUserBlock block = init_block(std::span<const std::size_t>(&targets.target_item, 1),
                                   cfg.num_fake(real.rows()), cfg.resolve_budget(real),
                                   real.cols(), uniform, derive_seed(cfg.seed, "random_shilling"));
  AttackResult result;
  result.num_real_users = ds.num_users();
  result.poisoned = inject(ds, block);
  result.final_block = std::move(block);
  return result;
}

AttackResult run_method(Method method, const data::InteractionDataset& ds,
                        const data::TargetSpec& targets, const AttackConfig& cfg,
                        const IterationObserver& observer) {
  switch (method) {
    case Method::clean: {
      AttackResult result;
      result.poisoned = ds;
      result.num_real_users = ds.num_users();
      return result;
    }
    case Method::injection:
      return run_injection_baseline(ds, targets, cfg, observer);
    case Method::indirectad:
      return run_indirectad(ds, targets, cfg, observer);
    case Method::popularity_trigger:
      return run_popularity_trigger_attack(ds, targets, cfg, observer);
    case Method::random_shilling:
      return run_random_shilling(ds, targets, cfg);
  }
  throw ParameterError("unknown attack method");
}

}  // namespace trojanrec::attack
