#include "trojanrec/attack.hpp"
#include "trojanrec/error.hpp"

namespace trojanrec::attack {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using models::confidence;

namespace {

using Ldlt = Eigen::LDLT<MatrixXd>;

Ldlt factorize(const MatrixXd& a) {
  Ldlt ldlt(a);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.rcond() < 1e-13) {
    throw SolverError("singular normal equations in the sensitivity surrogate");
  }
  return ldlt;
}

}  // namespace

BlockSurrogate::BlockSurrogate(const models::WrmfParams& substitute,
                               const data::InteractionMatrix& real)
    : substitute_(substitute), real_(real) {
  if (static_cast<std::size_t>(substitute.user_factors.rows()) < real.rows() ||
      substitute.num_items() != real.cols()) {
    throw ShapeError("substitute model does not cover the real interaction matrix");
  }
  const MatrixXd& V = substitute.item_factors;
  const double c_pos = substitute.confidence_weight;
  const double l2 = substitute.l2_weight;
  const Index d = V.cols();
  user_factors_ = substitute.user_factors.topRows(static_cast<Index>(real.rows()));
  fold_in_base_ = V.transpose() * V;
  fold_in_base_.diagonal().array() += l2;

  MatrixXd base = user_factors_.transpose() * user_factors_;
  base.diagonal().array() += l2;
  item_gram_.assign(real.cols(), base);
  item_rhs_ = MatrixXd::Zero(static_cast<Index>(real.cols()), d);
  for (std::size_t i = 0; i < real.cols(); ++i) {
    for (std::size_t u : real.item_users(i)) {
      auto w = user_factors_.row(static_cast<Index>(u)).transpose();
      item_gram_[i].noalias() += (c_pos - 1.0) * w * w.transpose();
      item_rhs_.row(static_cast<Index>(i)) += c_pos * w.transpose();
    }
  }
}

namespace {

struct FakeEmbeddings {
  MatrixXd factors;  // n_fake x d
  std::vector<Ldlt> systems;
};

FakeEmbeddings fold_in_rows(const MatrixXd& V, const MatrixXd& base, double c_pos,
                            const MatrixXd& rows) {
  FakeEmbeddings out;
  out.factors.resize(rows.rows(), V.cols());
  out.systems.reserve(static_cast<std::size_t>(rows.rows()));
  for (Index f = 0; f < rows.rows(); ++f) {
    MatrixXd a = base;
    VectorXd b = VectorXd::Zero(V.cols());
    for (Index i = 0; i < rows.cols(); ++i) {
      const double x = rows(f, i);
      if (x == 0.0) continue;
      auto v = V.row(i).transpose();
      a.noalias() += (c_pos - 1.0) * x * v * v.transpose();
      b += confidence(c_pos, x) * x * v;
    }
    out.systems.push_back(factorize(a));
    out.factors.row(f) = out.systems.back().solve(b).transpose();
  }
  return out;
}

}  // namespace

BlockObjective BlockSurrogate::evaluate(const FakeUserBlock& block, std::size_t target,
                                        std::optional<std::size_t> trigger,
                                        std::span<const std::size_t> users, double alpha,
                                        std::size_t k, bool with_gradient) const {
  const MatrixXd& V = substitute_.item_factors;
  const MatrixXd& X = block.rows;
  const double c_pos = substitute_.confidence_weight;
  if (block.num_items() != real_.cols()) throw ShapeError("fake block must span the item set");
  const Index n_items = V.rows();
  const Index n_fake = X.rows();

  // forward: fold-in fake users, then one ridge solve per item
  FakeEmbeddings fake = fold_in_rows(V, fold_in_base_, c_pos, X);
  const MatrixXd& P = fake.factors;
  const MatrixXd ptp = P.transpose() * P;
  MatrixXd v_new(n_items, V.cols());
  std::vector<Ldlt> item_systems;
  if (with_gradient) item_systems.reserve(static_cast<std::size_t>(n_items));
  for (Index i = 0; i < n_items; ++i) {
    MatrixXd a = item_gram_[static_cast<std::size_t>(i)] + ptp;
    VectorXd b = item_rhs_.row(i).transpose();
    for (Index f = 0; f < n_fake; ++f) {
      const double x = X(f, i);
      if (x == 0.0) continue;
      auto p = P.row(f).transpose();
      a.noalias() += (c_pos - 1.0) * x * p * p.transpose();
      b += confidence(c_pos, x) * x * p;
    }
    Ldlt sys = factorize(a);
    v_new.row(i) = sys.solve(b).transpose();
    if (with_gradient) item_systems.push_back(std::move(sys));
  }

  MatrixXd user_rows(static_cast<Index>(users.size()), V.cols());
  for (std::size_t j = 0; j < users.size(); ++j) {
    if (users[j] >= real_.rows()) throw ParameterError("target user out of range");
    user_rows.row(static_cast<Index>(j)) = user_factors_.row(static_cast<Index>(users[j]));
  }
  const MatrixXd scores = user_rows * v_new.transpose();

  BlockObjective out;
  MatrixXd d_scores_target;
  MatrixXd d_scores_trigger;
  out.target_loss = promotion_loss_from_scores(scores, real_, users, target, k,
                                               with_gradient ? &d_scores_target : nullptr);
  const double w_target = trigger ? alpha : 1.0;
  if (trigger) {
    out.trigger_loss = promotion_loss_from_scores(scores, real_, users, *trigger, k,
                                                  with_gradient ? &d_scores_trigger : nullptr);
  }
  out.composite = w_target * out.target_loss + (1.0 - w_target) * out.trigger_loss;
  if (!with_gradient) return out;

  MatrixXd d_scores = w_target * d_scores_target;
  if (trigger) d_scores += (1.0 - w_target) * d_scores_trigger;
  const MatrixXd d_items = d_scores.transpose() * user_rows;  // dL/dV', |I| x d

  // backward through the item solves: v' = B^{-1} g
  out.gradient = MatrixXd::Zero(n_fake, n_items);
  MatrixXd d_fake = MatrixXd::Zero(n_fake, V.cols());
  for (Index i = 0; i < n_items; ++i) {
    if (d_items.row(i).isZero(0.0)) continue;
    const VectorXd w = item_systems[static_cast<std::size_t>(i)].solve(d_items.row(i).transpose());
    const VectorXd v = v_new.row(i).transpose();
    for (Index f = 0; f < n_fake; ++f) {
      const double x = X(f, i);
      const VectorXd p = P.row(f).transpose();
      const double wp = w.dot(p);
      const double vp = v.dot(p);
      const double c = confidence(c_pos, x);
      out.gradient(f, i) += (1.0 + 2.0 * (c_pos - 1.0) * x) * wp - (c_pos - 1.0) * wp * vp;
      d_fake.row(f) += (c * x * w - c * (vp * w + wp * v)).transpose();
    }
  }

  // backward through the fold-ins: p = A^{-1} b
  for (Index f = 0; f < n_fake; ++f) {
    const VectorXd z = fake.systems[static_cast<std::size_t>(f)].solve(d_fake.row(f).transpose());
    const VectorXd zv = V * z;
    const VectorXd pv = V * P.row(f).transpose();
    for (Index i = 0; i < n_items; ++i) {
      const double x = X(f, i);
      out.gradient(f, i) += (1.0 + 2.0 * (c_pos - 1.0) * x) * zv[i] - (c_pos - 1.0) * zv[i] * pv[i];
    }
  }
  return out;
}

MatrixXd fake_block_gradient(const models::WrmfParams& substitute, const FakeUserBlock& block,
                             const data::InteractionMatrix& real, std::size_t target,
                             std::optional<std::size_t> trigger, std::span<const std::size_t> users,
                             double alpha, std::size_t k) {
  BlockSurrogate surrogate(substitute, real);
  return surrogate.evaluate(block, target, trigger, users, alpha, k, true).gradient;
}

}  // namespace trojanrec::attack
