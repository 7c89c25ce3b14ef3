#include "souplab/offline.hpp"

#include <cmath>

namespace souplab {

namespace {

double softplus(double x) {
  return std::log1p(std::exp(-std::abs(x))) + std::max(x, 0.0);
}

// Per-step gradient of the log-policy-ratio sum for a linear adapter:
// beta * (psi(s_t, a_t) - E_{pi_theta} psi(s_t, .)) accumulated into grad.
void accumulate_return_grad(const LanguageMdp& mdp, const LogitAdapter& adapter,
                            const Trajectory& t, double beta, double weight,
                            Eigen::VectorXd& grad) {
  long long node = mdp.tree().node_of(t.prompt);
  for (int tok : t.tokens) {
    const Eigen::VectorXd pol = adapter.policy_row(mdp, node);
    Eigen::VectorXd expectation = Eigen::VectorXd::Zero(grad.size());
    for (int a = 0; a < mdp.vocab_size(); ++a) {
      expectation += pol[a] * mdp.features().psi_node(node, a);
    }
    grad += weight * beta * (mdp.features().psi_node(node, tok) - expectation);
    node = mdp.tree().child(node, tok);
  }
}

void require_linear(const LogitAdapter& adapter) {
  if (!adapter.is_linear()) {
    throw Error("loss gradients need a linear adapter");
  }
}

}  // namespace

LogitAdapter LogitAdapter::linear(const LanguageMdp& mdp,
                                  const Eigen::VectorXd& theta, double beta,
                                  int attribute_id) {
  if (theta.size() != mdp.features().dim()) {
    throw Error("adapter parameter dimension mismatch");
  }
  LogitAdapter ad;
  ad.attribute_id_ = attribute_id;
  ad.beta_ = beta;
  ad.theta_ = theta;
  ad.table_.resize(mdp.internal_count(), mdp.vocab_size());
  for (long long node = 0; node < mdp.internal_count(); ++node) {
    for (int a = 0; a < mdp.vocab_size(); ++a) {
      ad.table_(node, a) = mdp.features().psi_node(node, a).dot(theta);
    }
  }
  return ad;
}

LogitAdapter LogitAdapter::from_solution(const LanguageMdp& mdp,
                                         const SoftSolution& sol,
                                         int attribute_id) {
  LogitAdapter ad;
  ad.attribute_id_ = attribute_id;
  ad.beta_ = sol.beta;
  ad.table_ = sol.q / sol.beta;
  if (ad.table_.rows() != mdp.internal_count()) {
    throw Error("solution shape mismatch");
  }
  return ad;
}

LogitAdapter LogitAdapter::from_table(const LanguageMdp& mdp,
                                      Eigen::MatrixXd table, double beta,
                                      int attribute_id) {
  if (table.rows() != mdp.internal_count() ||
      table.cols() != mdp.vocab_size()) {
    throw Error("adapter table shape mismatch");
  }
  LogitAdapter ad;
  ad.attribute_id_ = attribute_id;
  ad.beta_ = beta;
  ad.table_ = std::move(table);
  return ad;
}

double LogitAdapter::log_z(const LanguageMdp& mdp, long long node) const {
  const Eigen::VectorXd exponent =
      mdp.ref().log_probs().row(node).transpose() +
      table_.row(node).transpose();
  return log_sum_exp(exponent);
}

Eigen::VectorXd LogitAdapter::policy_row(const LanguageMdp& mdp,
                                         long long node) const {
  const Eigen::VectorXd logits = mdp.ref().log_probs().row(node).transpose() +
                                 table_.row(node).transpose();
  return softmax_row(logits);
}

Eigen::MatrixXd LogitAdapter::policy_table(const LanguageMdp& mdp) const {
  Eigen::MatrixXd out(mdp.internal_count(), mdp.vocab_size());
  for (long long node = 0; node < mdp.internal_count(); ++node) {
    out.row(node) = policy_row(mdp, node).transpose();
  }
  return out;
}

Eigen::VectorXd pooled_psi(const LanguageMdp& mdp, long long node) {
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(mdp.features().dim());
  for (int a = 0; a < mdp.vocab_size(); ++a) {
    acc += mdp.features().psi_node(node, a);
  }
  return acc / mdp.vocab_size();
}

ValueModel::ValueModel(const LanguageMdp& mdp, Eigen::VectorXd phi)
    : phi_(std::move(phi)) {
  if (phi_.size() != mdp.features().dim()) {
    throw Error("value model dimension mismatch");
  }
  values_.resize(mdp.internal_count());
  for (long long node = 0; node < mdp.internal_count(); ++node) {
    values_[node] = pooled_psi(mdp, node).dot(phi_);
  }
}

ValueModel ValueModel::zero(const LanguageMdp& mdp) {
  return ValueModel(mdp, Eigen::VectorXd::Zero(mdp.features().dim()));
}

double trajectory_return(const LanguageMdp& mdp, const LogitAdapter& adapter,
                         const Trajectory& t, double beta) {
  double acc = 0.0;
  long long node = mdp.tree().node_of(t.prompt);
  for (int tok : t.tokens) {
    acc += adapter.qhat(node, tok) - adapter.log_z(mdp, node);
    node = mdp.tree().child(node, tok);
  }
  return beta * acc;
}

double trajectory_return_qv(const LanguageMdp& mdp, const LogitAdapter& adapter,
                            const Trajectory& t, double beta) {
  double acc = 0.0;
  long long node = mdp.tree().node_of(t.prompt);
  for (int tok : t.tokens) {
    acc += beta * adapter.qhat(node, tok);
    node = mdp.tree().child(node, tok);
    if (mdp.tree().depth_of(node) < mdp.horizon()) {
      acc -= beta * adapter.log_z(mdp, node);
    }
  }
  return acc;
}

LossGrad bt_loss_grad(const LanguageMdp& mdp, const LogitAdapter& adapter,
                      const std::vector<PreferencePair>& pairs, double beta) {
  if (pairs.empty()) throw EmptyDataset("no preference pairs");
  require_linear(adapter);
  LossGrad out;
  out.grad_theta = Eigen::VectorXd::Zero(adapter.theta().size());
  const double inv_n = 1.0 / pairs.size();
  for (const auto& pair : pairs) {
    const double diff = trajectory_return(mdp, adapter, pair.winner, beta) -
                        trajectory_return(mdp, adapter, pair.loser, beta);
    out.loss += inv_n * softplus(-diff);
    const double coeff = -inv_n * (1.0 - sigmoid(diff));
    accumulate_return_grad(mdp, adapter, pair.winner, beta, coeff,
                           out.grad_theta);
    accumulate_return_grad(mdp, adapter, pair.loser, beta, -coeff,
                           out.grad_theta);
  }
  return out;
}

LossGrad binary_loss_grad(const LanguageMdp& mdp, const LogitAdapter& adapter,
                          const std::vector<LabeledTrajectory>& data,
                          double beta) {
  if (data.empty()) throw EmptyDataset("no labeled trajectories");
  require_linear(adapter);
  LossGrad out;
  out.grad_theta = Eigen::VectorXd::Zero(adapter.theta().size());
  const double inv_n = 1.0 / data.size();
  for (const auto& item : data) {
    const double ret = trajectory_return(mdp, adapter, item.trajectory, beta);
    // -[l log sigma(R) + (1-l) log(1 - sigma(R))]
    out.loss += inv_n * (item.label ? softplus(-ret) : softplus(ret));
    const double coeff = inv_n * (sigmoid(ret) - item.label);
    accumulate_return_grad(mdp, adapter, item.trajectory, beta, coeff,
                           out.grad_theta);
  }
  return out;
}

LossGrad gumbel_loss_grad(const LanguageMdp& mdp, const LogitAdapter& adapter,
                          const ValueModel& value,
                          const std::vector<std::pair<long long, int>>& data,
                          double beta) {
  if (!(beta > 0.0)) throw Error("beta must be positive");
  require_linear(adapter);
  LossGrad out;
  out.grad_theta = Eigen::VectorXd::Zero(adapter.theta().size());
  out.grad_phi = Eigen::VectorXd::Zero(adapter.theta().size());
  if (data.empty()) return out;
  const double inv_n = 1.0 / data.size();
  for (const auto& [node, tok] : data) {
    const double advantage = beta * adapter.qhat(node, tok) - value.value(node);
    const double z = advantage / beta;
    out.loss += inv_n * (std::exp(z) - z - 1.0);
    const double da = inv_n * (std::exp(z) - 1.0) / beta;
    out.grad_theta += da * beta * mdp.features().psi_node(node, tok);
    out.grad_phi -= da * pooled_psi(mdp, node);
  }
  return out;
}

TrainResult train_specialized(const LanguageMdp& mdp,
                              const std::vector<PreferencePair>& pairs,
                              const std::vector<LabeledTrajectory>& labeled,
                              TrainMethod method, const TrainConfig& cfg,
                              double beta, int attribute_id) {
  if (method == TrainMethod::Bt && pairs.empty()) {
    throw EmptyDataset("BT training needs preference pairs");
  }
  if (method == TrainMethod::BinaryGumbel && labeled.empty()) {
    throw EmptyDataset("binary+gumbel training needs labeled trajectories");
  }
  const int d = mdp.features().dim();
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd phi = Eigen::VectorXd::Zero(d);

  std::vector<std::pair<long long, int>> gumbel_nodes;
  if (method == TrainMethod::BinaryGumbel) {
    for (const auto& item : labeled) {
      long long node = mdp.tree().node_of(item.trajectory.prompt);
      for (int tok : item.trajectory.tokens) {
        gumbel_nodes.emplace_back(node, tok);
        node = mdp.tree().child(node, tok);
      }
    }
  }

  auto objective = [&](const Eigen::VectorXd& th, const Eigen::VectorXd& ph) {
    LogitAdapter ad = LogitAdapter::linear(mdp, th, beta, attribute_id);
    LossGrad total;
    total.grad_theta = Eigen::VectorXd::Zero(d);
    total.grad_phi = Eigen::VectorXd::Zero(d);
    if (method == TrainMethod::Bt) {
      LossGrad g = bt_loss_grad(mdp, ad, pairs, beta);
      total.loss = g.loss;
      total.grad_theta = g.grad_theta;
    } else {
      ValueModel vm(mdp, ph);
      LossGrad gb = binary_loss_grad(mdp, ad, labeled, beta);
      LossGrad gg = gumbel_loss_grad(mdp, ad, vm, gumbel_nodes, beta);
      total.loss = gb.loss + gg.loss;
      total.grad_theta = gb.grad_theta + gg.grad_theta;
      total.grad_phi = gg.grad_phi;
    }
    total.loss += 0.5 * cfg.l2 * (th.squaredNorm() + ph.squaredNorm());
    total.grad_theta += cfg.l2 * th;
    total.grad_phi += cfg.l2 * ph;
    return total;
  };

  TrainResult result;
  Eigen::VectorXd best_theta = theta;
  Eigen::VectorXd best_phi = phi;
  double best_loss = std::numeric_limits<double>::infinity();
  for (int step = 0; step <= cfg.steps; ++step) {
    LossGrad g = objective(theta, phi);
    if (!std::isfinite(g.loss)) {
      throw Divergence("training loss became non-finite");
    }
    result.loss_trace.push_back(g.loss);
    if (g.loss < best_loss) {
      best_loss = g.loss;
      best_theta = theta;
      best_phi = phi;
    }
    if (step == cfg.steps) break;
    theta -= cfg.lr * g.grad_theta;
    if (method == TrainMethod::BinaryGumbel) phi -= cfg.lr * g.grad_phi;
  }
  result.adapter = LogitAdapter::linear(mdp, best_theta, beta, attribute_id);
  result.value = method == TrainMethod::BinaryGumbel
                     ? ValueModel(mdp, best_phi)
                     : ValueModel::zero(mdp);
  return result;
}

}  // namespace souplab
