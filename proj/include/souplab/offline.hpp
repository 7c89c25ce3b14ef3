#pragma once

#include <Eigen/Core>
#include <utility>
#include <vector>

#include "souplab/preference.hpp"

namespace souplab {

// Additive logit function q_hat(s,a). The induced policy is
// softmax(logit_ref + q_hat). By convention q_hat stores Q / beta, so an
// adapter loaded with an exact soft solution reproduces its optimal policy.
class LogitAdapter {
 public:
  // Linear form q_hat = psi' theta, materialized against the MDP.
  static LogitAdapter linear(const LanguageMdp& mdp,
                             const Eigen::VectorXd& theta, double beta,
                             int attribute_id = -1);
  // Exact specialist read off a soft solution: q_hat = Q* / beta.
  static LogitAdapter from_solution(const LanguageMdp& mdp,
                                    const SoftSolution& sol,
                                    int attribute_id = -1);
  // Tabular adapter from a raw q_hat table.
  static LogitAdapter from_table(const LanguageMdp& mdp, Eigen::MatrixXd table,
                                 double beta, int attribute_id = -1);

  int attribute_id() const { return attribute_id_; }
  double beta() const { return beta_; }
  bool is_linear() const { return theta_.size() > 0; }
  const Eigen::VectorXd& theta() const { return theta_; }
  const Eigen::MatrixXd& table() const { return table_; }
  double qhat(long long node, int token) const { return table_(node, token); }

  // log sum_b pi_ref(b|s) exp(q_hat(s,b)); the induced policy's log-partition.
  double log_z(const LanguageMdp& mdp, long long node) const;
  Eigen::VectorXd policy_row(const LanguageMdp& mdp, long long node) const;
  Eigen::MatrixXd policy_table(const LanguageMdp& mdp) const;

 private:
  int attribute_id_ = -1;
  double beta_ = 1.0;
  Eigen::VectorXd theta_;  // empty for tabular adapters
  Eigen::MatrixXd table_;  // internal x A
};

// State-value model V(s) = pooled_psi(s)' phi with pooled features averaging
// psi over actions.
class ValueModel {
 public:
  ValueModel() = default;
  ValueModel(const LanguageMdp& mdp, Eigen::VectorXd phi);
  static ValueModel zero(const LanguageMdp& mdp);

  const Eigen::VectorXd& phi() const { return phi_; }
  double value(long long node) const { return values_[node]; }

 private:
  Eigen::VectorXd phi_;
  Eigen::VectorXd values_;  // internal nodes
};

// Mean psi(s, .) over actions, the state feature used by ValueModel.
Eigen::VectorXd pooled_psi(const LanguageMdp& mdp, long long node);

// beta * sum_t log(pi_theta(a_t|s_t) / pi_ref(a_t|s_t)).
double trajectory_return(const LanguageMdp& mdp, const LogitAdapter& adapter,
                         const Trajectory& t, double beta);

// Same quantity expressed as sum_t Q(s_t,a_t) - sum_{t>=1} V(s_t) with
// Q = beta q_hat and V the induced policy's log-partition value. Differences
// of two same-prompt trajectories agree with trajectory_return differences.
double trajectory_return_qv(const LanguageMdp& mdp, const LogitAdapter& adapter,
                            const Trajectory& t, double beta);

struct LossGrad {
  double loss = 0.0;
  Eigen::VectorXd grad_theta;
  Eigen::VectorXd grad_phi;  // only populated by the Gumbel loss
};

LossGrad bt_loss_grad(const LanguageMdp& mdp, const LogitAdapter& adapter,
                      const std::vector<PreferencePair>& pairs, double beta);

LossGrad binary_loss_grad(const LanguageMdp& mdp, const LogitAdapter& adapter,
                          const std::vector<LabeledTrajectory>& data,
                          double beta);

// Data points are (node, token) pairs drawn from the offline dataset.
LossGrad gumbel_loss_grad(const LanguageMdp& mdp, const LogitAdapter& adapter,
                          const ValueModel& value,
                          const std::vector<std::pair<long long, int>>& data,
                          double beta);

enum class TrainMethod { Bt, BinaryGumbel };

struct TrainConfig {
  double lr = 0.3;
  int steps = 300;
  double l2 = 1e-3;
};

struct TrainResult {
  LogitAdapter adapter;
  ValueModel value;
  std::vector<double> loss_trace;
};

// Gradient descent on the chosen objective with L2 regularization; returns
// the best iterate seen.
TrainResult train_specialized(const LanguageMdp& mdp,
                              const std::vector<PreferencePair>& pairs,
                              const std::vector<LabeledTrajectory>& labeled,
                              TrainMethod method, const TrainConfig& cfg,
                              double beta, int attribute_id = -1);

}  // namespace souplab
