#include <algorithm>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "support.hpp"
#include "trojanrec/error.hpp"
#include "trojanrec/eval.hpp"
#include "trojanrec/harness.hpp"

using namespace trojanrec;
using namespace trojanrec::eval;

namespace {

data::InteractionDataset from_rows(const std::vector<std::vector<std::size_t>>& rows,
                                   std::size_t items) {
  data::InteractionDataset ds;
  for (std::size_t u = 0; u < rows.size(); ++u) ds.user_ids.push_back("u" + std::to_string(u));
  for (std::size_t i = 0; i < items; ++i) ds.item_ids.push_back("i" + std::to_string(i));
  for (std::size_t u = 0; u < rows.size(); ++u)
    for (std::size_t i : rows[u]) ds.events.push_back({u, i, 0, 1.0});
  ds.canonicalize();
  return ds;
}

// Every user gets the same score vector: the decoder bias.
models::RecommenderParams constant_scores(const Eigen::VectorXd& scores) {
  models::ItemAeParams p;
  const auto n = scores.size();
  p.encoder_weight = Eigen::MatrixXd::Zero(1, n);
  p.encoder_bias = Eigen::VectorXd::Zero(1);
  p.decoder_weight = Eigen::MatrixXd::Zero(n, 1);
  p.decoder_bias = scores;
  p.activation = models::Activation::identity;
  return p;
}

models::ItemAeParams random_linear_ae(std::size_t items, std::size_t d, std::uint64_t seed) {
  models::ItemAeParams p;
  const auto n = static_cast<long>(items);
  const auto h = static_cast<long>(d);
  p.encoder_weight = testing_support::random_uniform(h, n, -1, 1, seed);
  p.encoder_bias = testing_support::random_uniform(h, 1, -1, 1, seed + 1);
  p.decoder_weight = testing_support::random_uniform(n, h, -1, 1, seed + 2);
  p.decoder_bias = testing_support::random_uniform(n, 1, -1, 1, seed + 3);
  p.activation = models::Activation::identity;
  return p;
}

double oracle_hit_rate(const models::ItemAeParams& p, const data::InteractionMatrix& m,
                       std::size_t item, const std::vector<std::size_t>& users, std::size_t k) {
  const Eigen::MatrixXd w = p.decoder_weight * p.encoder_weight;
  const Eigen::VectorXd b = p.decoder_weight * p.encoder_bias + p.decoder_bias;
  int hits = 0;
  int eligible = 0;
  for (std::size_t u : users) {
    const auto span = m.user_items(u);
    const std::vector<std::size_t> consumed(span.begin(), span.end());
    if (std::find(consumed.begin(), consumed.end(), item) != consumed.end()) continue;
    ++eligible;
    const Eigen::VectorXd scores = w * m.dense_row(u) + b;
    const auto top = testing_support::brute_top_k(scores, consumed, k);
    if (std::find(top.begin(), top.end(), item) != top.end()) ++hits;
  }
  return 100.0 * hits / eligible;
}

GridSpec small_grid() {
  harness::SyntheticSpec syn;
  syn.n_users = 150;
  syn.n_items = 60;
  syn.p_in = 0.3;
  syn.p_out = 0.03;
  syn.seed = 4;
  GridSpec spec;
  spec.dataset = data::core_filter(harness::generate_synthetic(syn), 3, 3);
  spec.num_clusters = 3;
  spec.k_list = {5, 10, 20};
  spec.attack.t_adv = 2;
  spec.attack.t_sub = 1;
  spec.attack.candidate_cap = 8;
  spec.attack.batch_size = 32;
  spec.attack.substitute.latent_dim = 4;
  spec.attack.substitute.epochs = 2;
  for (auto family : {models::Family::wrmf, models::Family::item_ae, models::Family::mult_vae}) {
    auto cfg = models::default_train_config(family);
    cfg.latent_dim = 4;
    cfg.epochs = 2;
    spec.victim_configs[family] = cfg;
  }
  return spec;
}

}  // namespace

TEST(HitRate, HandExample) {
  Eigen::VectorXd scores(5);
  scores << 5, 4, 3, 2, 1;
  const auto params = constant_scores(scores);
  // User 0 has consumed everything above the target; the rest only item 0.
  data::InteractionMatrix m(from_rows({{0, 1, 2, 3}, {0}, {0}, {0}}, 5));
  const std::vector<std::size_t> users{0, 1, 2, 3};
  EXPECT_DOUBLE_EQ(hit_rate_at_k(params, m, 4, users, 1), 25.0);
  EXPECT_DOUBLE_EQ(hit_rate_at_k(params, m, 4, users, 3), 25.0);
  EXPECT_DOUBLE_EQ(hit_rate_at_k(params, m, 4, users, 4), 100.0);
  const std::vector<std::size_t> rest{1, 2, 3};
  EXPECT_DOUBLE_EQ(hit_rate_at_k(params, m, 4, rest, 1), 0.0);
}

TEST(HitRate, ConsumedUsersAreNotEligible) {
  Eigen::VectorXd scores(4);
  scores << 1, 2, 3, 4;
  const auto params = constant_scores(scores);
  data::InteractionMatrix m(from_rows({{3}, {0}, {0}}, 4));
  const std::vector<std::size_t> users{0, 1, 2};
  EXPECT_DOUBLE_EQ(hit_rate_at_k(params, m, 3, users, 1), 100.0);
}

TEST(HitRate, AllConsumedIsUndefined) {
  Eigen::VectorXd scores(3);
  scores << 1, 2, 3;
  const auto params = constant_scores(scores);
  data::InteractionMatrix m(from_rows({{2}, {1, 2}}, 3));
  const std::vector<std::size_t> users{0, 1};
  EXPECT_THROW(hit_rate_at_k(params, m, 2, users, 1), UndefinedMetricError);
  EXPECT_THROW(hit_rate_at_k(params, m, 2, {}, 1), ParameterError);
  EXPECT_THROW(hit_rate_at_k(params, m, 0, users, 0), ParameterError);
}

TEST(HitRate, TiesBreakByIndex) {
  const auto params = constant_scores(Eigen::VectorXd::Ones(4));
  data::InteractionMatrix m(from_rows({{0}, {0}}, 4));
  const std::vector<std::size_t> users{0, 1};
  EXPECT_DOUBLE_EQ(hit_rate_at_k(params, m, 1, users, 1), 100.0);
  EXPECT_DOUBLE_EQ(hit_rate_at_k(params, m, 2, users, 1), 0.0);
  EXPECT_DOUBLE_EQ(hit_rate_at_k(params, m, 2, users, 2), 100.0);
}

TEST(HitRate, MatchesBruteForceOnSmallToy) {
  const auto ds = testing_support::random_dataset(6, 8, 0.3, 11);
  data::InteractionMatrix m(ds);
  const auto p = random_linear_ae(8, 3, 12);
  const std::vector<std::size_t> users{0, 1, 2, 3, 4, 5};
  for (std::size_t item = 0; item < 8; ++item) {
    for (std::size_t k = 1; k <= 6; ++k) {
      bool all_consumed = true;
      for (auto u : users) all_consumed = all_consumed && m.contains(u, item);
      if (all_consumed) continue;
      EXPECT_NEAR(hit_rate_at_k(p, m, item, users, k), oracle_hit_rate(p, m, item, users, k),
                  1e-12);
    }
  }
}

TEST(HitRate, MatchesBruteForceOnHundredToys) {
  int checked = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    const std::size_t users_n = 5 + rng.uniform_index(20);
    const std::size_t items_n = 6 + rng.uniform_index(25);
    const auto ds = testing_support::random_dataset(users_n, items_n, 0.25, seed);
    data::InteractionMatrix m(ds);
    const auto p = random_linear_ae(items_n, 1 + rng.uniform_index(4), seed * 7 + 1);
    const std::size_t item = rng.uniform_index(items_n);
    std::vector<std::size_t> users;
    for (std::size_t u = 0; u < users_n; ++u) {
      if (rng.bernoulli(0.6)) users.push_back(u);
    }
    bool eligible = false;
    for (auto u : users) eligible = eligible || !m.contains(u, item);
    if (!eligible) continue;
    const std::size_t ks[] = {1, 3, 10};
    const auto rates = hit_rates(p, m, item, users, ks);
    for (std::size_t k : ks) {
      EXPECT_NEAR(rates.at(k), oracle_hit_rate(p, m, item, users, k), 1e-12) << "seed " << seed;
    }
    ++checked;
  }
  EXPECT_GE(checked, 90);
}

TEST(HitRate, MonotoneInK) {
  const auto ds = testing_support::random_dataset(30, 25, 0.2, 3);
  data::InteractionMatrix m(ds);
  const auto p = random_linear_ae(25, 3, 4);
  std::vector<std::size_t> users(30);
  for (std::size_t u = 0; u < 30; ++u) users[u] = u;
  for (std::size_t item = 0; item < 25; ++item) {
    const std::size_t ks[] = {1, 2, 5, 10, 20, 25};
    const auto rates = hit_rates(p, m, item, users, ks);
    double prev = 0.0;
    for (const auto& [k, r] : rates) {
      EXPECT_GE(r, prev);
      EXPECT_GE(r, 0.0);
      EXPECT_LE(r, 100.0);
      prev = r;
    }
  }
}

TEST(EvaluateAttack, IdenticalInputsGiveIdenticalRates) {
  const auto ds = testing_support::random_dataset(40, 20, 0.2, 8);
  data::TargetSpec targets;
  targets.target_item = 3;
  targets.target_users = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  auto cfg = models::default_train_config(models::Family::wrmf);
  cfg.latent_dim = 4;
  cfg.epochs = 3;
  const std::size_t ks[] = {5, 10};
  const auto [clean, poisoned] =
      evaluate_attack(ds, ds, targets, models::Family::wrmf, cfg, ks, {.dataset = "toy"});
  EXPECT_EQ(clean.hr_at, poisoned.hr_at);
  EXPECT_EQ(clean.method, attack::Method::clean);
  EXPECT_EQ(poisoned.num_fake_users, 0u);
  EXPECT_EQ(clean.dataset, "toy");
}

TEST(EvaluateAttack, RejectsUnrelatedDatasets) {
  const auto a = testing_support::random_dataset(10, 8, 0.3, 1);
  auto b = a;
  b.user_ids[0] = "other";
  data::TargetSpec targets{.target_item = 0, .target_users = {1}};
  const std::size_t ks[] = {5};
  EXPECT_THROW(evaluate_attack(a, b, targets, models::Family::wrmf,
                               models::default_train_config(models::Family::wrmf), ks),
               ParameterError);
}

TEST(Grid, SingleCell) {
  auto spec = small_grid();
  spec.methods = {attack::Method::clean};
  EXPECT_EQ(grid_size(spec), 1u);
  const auto reports = run_grid(spec);
  ASSERT_EQ(reports.size(), 1u);
  EXPECT_TRUE(reports[0].error.empty()) << reports[0].error;
  EXPECT_EQ(reports[0].hr_at.size(), 3u);
  EXPECT_EQ(reports[0].num_fake_users, 0u);
}

TEST(Grid, CountsAndOrder) {
  auto spec = small_grid();
  spec.ratios = {0.01, 0.02};
  spec.methods = {attack::Method::clean, attack::Method::injection};
  spec.victims = {models::Family::wrmf, models::Family::item_ae, models::Family::mult_vae};
  EXPECT_EQ(grid_size(spec), 12u);
  const auto reports = run_grid(spec);
  ASSERT_EQ(reports.size(), 12u);
  std::size_t idx = 0;
  for (double ratio : spec.ratios) {
    for (auto method : spec.methods) {
      for (auto victim : spec.victims) {
        const auto& r = reports[idx++];
        EXPECT_TRUE(r.error.empty()) << r.error;
        EXPECT_EQ(r.poisoning_ratio, ratio);
        EXPECT_EQ(r.method, method);
        EXPECT_EQ(r.victim, victim);
        EXPECT_EQ(r.num_fake_users == 0, method == attack::Method::clean);
      }
    }
  }
  // Clean cells do not depend on the ratio.
  EXPECT_EQ(reports[0].hr_at, reports[6].hr_at);
}

TEST(Grid, DeterministicAcrossWorkers) {
  auto spec = small_grid();
  spec.methods = {attack::Method::clean, attack::Method::indirectad};
  spec.seeds = {0, 1};
  const auto serial = run_grid(spec);
  spec.workers = 3;
  const auto parallel = run_grid(spec);
  std::ostringstream a, b;
  write_table(a, serial);
  write_table(b, parallel);
  EXPECT_EQ(a.str(), b.str());
  std::ostringstream c;
  write_table(c, run_grid(spec));
  EXPECT_EQ(a.str(), c.str());
}

TEST(Grid, FailingCellRecordsError) {
  auto spec = small_grid();
  spec.victims = {models::Family::wrmf, models::Family::item_ae};
  spec.victim_configs[models::Family::item_ae].latent_dim = 0;
  const auto reports = run_grid(spec);
  ASSERT_EQ(reports.size(), 4u);
  for (const auto& r : reports) {
    EXPECT_EQ(r.error.empty(), r.victim == models::Family::wrmf) << r.error;
  }
}

TEST(Reports, JsonRoundTrip) {
  ExperimentReport r;
  r.dataset = "ml-1m";
  r.victim = models::Family::mult_vae;
  r.poisoning_ratio = 0.003;
  r.method = attack::Method::indirectad;
  r.hr_at = {{10, 1.25}, {20, 2.5}, {50, 1.0 / 3.0}};
  r.bucket = data::PopularityBucket::tail;
  r.selection_mode = data::SelectionMode::random_third;
  r.seed = 123456789012345ULL;
  r.target_item = 17;
  r.trigger_item = 4;
  r.num_fake_users = 18;
  EXPECT_EQ(report_from_json(to_json(r)), r);

  ExperimentReport failed;
  failed.error = "boom";
  std::stringstream io;
  const ExperimentReport both[] = {r, failed};
  write_reports(io, both);
  const auto back = read_reports(io);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0], r);
  EXPECT_EQ(back[1], failed);
}

TEST(Reports, TableHeaderAndRows) {
  ExperimentReport r;
  r.dataset = "synthetic";
  r.poisoning_ratio = 0.01;
  r.hr_at = {{10, 12.5}, {20, 25.0}};
  std::ostringstream out;
  const ExperimentReport rows[] = {r};
  write_table(out, rows);
  std::istringstream in(out.str());
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  EXPECT_EQ(header, "ratio,dataset,model,method,bucket,mode,seed,HR@10,HR@20,error");
  EXPECT_NE(row.find("12.5000"), std::string::npos);
  EXPECT_NE(row.find("25.0000"), std::string::npos);
}
