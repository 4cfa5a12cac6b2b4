#include <cmath>

#include "trojanrec/error.hpp"
#include "trojanrec/models.hpp"
#include "trojanrec/rng.hpp"

namespace trojanrec::models {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

VectorXd solve_spd(const MatrixXd& a, const VectorXd& b) {
  Eigen::LDLT<MatrixXd> ldlt(a);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.rcond() < 1e-13) {
    throw SolverError("singular normal equations in least-squares solve");
  }
  return ldlt.solve(b);
}

MatrixXd ridge(const MatrixXd& gram, double l2) {
  MatrixXd a = gram;
  a.diagonal().array() += l2;
  return a;
}

}  // namespace

WrmfParams init_wrmf(std::size_t num_users, std::size_t num_items, const TrainConfig& cfg) {
  cfg.validate();
  Rng rng(derive_seed(cfg.seed, "wrmf_init"));
  const auto d = static_cast<Index>(cfg.latent_dim);
  WrmfParams p;
  p.l2_weight = cfg.l2_weight;
  p.confidence_weight = cfg.confidence_weight;
  p.user_factors.resize(static_cast<Index>(num_users), d);
  p.item_factors.resize(static_cast<Index>(num_items), d);
  for (Index r = 0; r < p.user_factors.rows(); ++r)
    for (Index c = 0; c < d; ++c) p.user_factors(r, c) = rng.uniform(-0.01, 0.01);
  for (Index r = 0; r < p.item_factors.rows(); ++r)
    for (Index c = 0; c < d; ++c) p.item_factors(r, c) = rng.uniform(-0.01, 0.01);
  return p;
}

double wrmf_objective(const WrmfData& data, const WrmfParams& p) {
  const double c_pos = p.confidence_weight;
  const MatrixXd& U = p.user_factors;
  const MatrixXd& V = p.item_factors;
  // every cell contributes s^2 when x = 0; correct the observed ones
  double total = ((U.transpose() * U) * (V.transpose() * V)).trace();
  for (std::size_t u = 0; u < data.real.rows(); ++u) {
    for (std::size_t i : data.real.user_items(u)) {
      double s = U.row(static_cast<Index>(u)).dot(V.row(static_cast<Index>(i)));
      total += c_pos * (1.0 - s) * (1.0 - s) - s * s;
    }
  }
  const auto offset = static_cast<Index>(data.real.rows());
  for (Index f = 0; f < data.extra.rows(); ++f) {
    for (Index i = 0; i < data.extra.cols(); ++i) {
      double x = data.extra(f, i);
      if (x == 0.0) continue;
      double s = U.row(offset + f).dot(V.row(i));
      total += confidence(c_pos, x) * (x - s) * (x - s) - s * s;
    }
  }
  total += p.l2_weight * (U.squaredNorm() + V.squaredNorm());
  return total;
}

void wrmf_solve_users(const WrmfData& data, WrmfParams& p) {
  const double c_pos = p.confidence_weight;
  const MatrixXd& V = p.item_factors;
  const MatrixXd base = ridge(V.transpose() * V, p.l2_weight);
  const Index d = V.cols();
  for (std::size_t u = 0; u < data.real.rows(); ++u) {
    MatrixXd a = base;
    VectorXd b = VectorXd::Zero(d);
    for (std::size_t i : data.real.user_items(u)) {
      auto v = V.row(static_cast<Index>(i)).transpose();
      a.noalias() += (c_pos - 1.0) * v * v.transpose();
      b += c_pos * v;
    }
    p.user_factors.row(static_cast<Index>(u)) = solve_spd(a, b).transpose();
  }
  const auto offset = static_cast<Index>(data.real.rows());
  for (Index f = 0; f < data.extra.rows(); ++f) {
    p.user_factors.row(offset + f) = fold_in_user(p, data.extra.row(f).transpose()).transpose();
  }
}

void wrmf_solve_items(const WrmfData& data, WrmfParams& p) {
  const double c_pos = p.confidence_weight;
  const MatrixXd& U = p.user_factors;
  const MatrixXd base = ridge(U.transpose() * U, p.l2_weight);
  const Index d = U.cols();
  const auto offset = static_cast<Index>(data.real.rows());
  for (std::size_t i = 0; i < data.real.cols(); ++i) {
    MatrixXd a = base;
    VectorXd b = VectorXd::Zero(d);
    for (std::size_t u : data.real.item_users(i)) {
      auto w = U.row(static_cast<Index>(u)).transpose();
      a.noalias() += (c_pos - 1.0) * w * w.transpose();
      b += c_pos * w;
    }
    for (Index f = 0; f < data.extra.rows(); ++f) {
      double x = data.extra(f, static_cast<Index>(i));
      if (x == 0.0) continue;
      auto w = U.row(offset + f).transpose();
      a.noalias() += (c_pos - 1.0) * x * w * w.transpose();
      b += confidence(c_pos, x) * x * w;
    }
    p.item_factors.row(static_cast<Index>(i)) = solve_spd(a, b).transpose();
  }
}

namespace {

void check_shapes(const WrmfData& data, const WrmfParams& p) {
  if (data.extra.rows() > 0 && static_cast<std::size_t>(data.extra.cols()) != data.real.cols()) {
    throw ShapeError("relaxed rows must span the item set");
  }
  if (p.num_items() != data.real.cols()) throw ShapeError("item factor count mismatch");
}

void sweep(const WrmfData& data, WrmfParams& p, std::vector<double>* trace) {
  // items first, so the final user factors are exact fold-ins
  wrmf_solve_items(data, p);
  wrmf_solve_users(data, p);
  double obj = wrmf_objective(data, p);
  if (!std::isfinite(obj)) throw DivergenceError("WRMF objective is not finite");
  if (trace) trace->push_back(obj);
}

}  // namespace

WrmfParams train_wrmf(const data::InteractionMatrix& m, const TrainConfig& cfg,
                      std::vector<double>* objective_trace) {
  if (m.rows() == 0 || m.cols() == 0) throw EmptyDatasetError("cannot train on an empty matrix");
  static const MatrixXd no_extra;
  WrmfData data{m, no_extra};
  WrmfParams p = init_wrmf(m.rows(), m.cols(), cfg);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) sweep(data, p, objective_trace);
  return p;
}

void refine_wrmf(const WrmfData& data, WrmfParams& p, std::size_t sweeps,
                 std::vector<double>* objective_trace) {
  check_shapes(data, p);
  const auto n_users = static_cast<Index>(data.num_users());
  const Index have = p.user_factors.rows();
  if (have != n_users) {
    MatrixXd grown(n_users, p.user_factors.cols());
    const Index keep = std::min(have, n_users);
    grown.topRows(keep) = p.user_factors.topRows(keep);
    for (Index r = keep; r < n_users; ++r) {
      const auto real_rows = static_cast<Index>(data.real.rows());
      VectorXd row = r < real_rows ? data.real.dense_row(static_cast<std::size_t>(r))
                                   : VectorXd(data.extra.row(r - real_rows).transpose());
      grown.row(r) = fold_in_user(p, row).transpose();
    }
    p.user_factors = std::move(grown);
  }
  for (std::size_t s = 0; s < sweeps; ++s) sweep(data, p, objective_trace);
}

Eigen::VectorXd fold_in_user(const WrmfParams& p, const Eigen::VectorXd& row) {
  const MatrixXd& V = p.item_factors;
  if (static_cast<std::size_t>(row.size()) != p.num_items()) {
    throw ShapeError("interaction row length does not match item count");
  }
  const double c_pos = p.confidence_weight;
  MatrixXd a = ridge(V.transpose() * V, p.l2_weight);
  VectorXd b = VectorXd::Zero(V.cols());
  for (Index i = 0; i < row.size(); ++i) {
    const double x = row[i];
    if (x == 0.0) continue;
    auto v = V.row(i).transpose();
    a.noalias() += (c_pos - 1.0) * x * v * v.transpose();
    b += confidence(c_pos, x) * x * v;
  }
  return solve_spd(a, b);
}

}  // namespace trojanrec::models
