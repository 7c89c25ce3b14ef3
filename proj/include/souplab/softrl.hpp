#pragma once

#include <Eigen/Core>
#include <optional>

#include "souplab/mdp.hpp"

namespace souplab {

// Per-node reward r(s, a), optionally backed by a linear form psi(s,a)' nu.
class RewardFn {
 public:
  RewardFn() = default;  // empty; populate through a factory

  static RewardFn from_table(const LanguageMdp& mdp, Eigen::MatrixXd values);
  static RewardFn from_linear(const LanguageMdp& mdp,
                              const Eigen::VectorXd& nu);
  // Table given directly alongside the weight vector that generated it in
  // some (possibly non-feature) key space; nu is kept for bookkeeping only.
  static RewardFn from_table_with_weights(const LanguageMdp& mdp,
                                          Eigen::MatrixXd values,
                                          Eigen::VectorXd nu);

  double operator()(long long node, int token) const {
    return values_(node, token);
  }
  const Eigen::MatrixXd& values() const { return values_; }
  const std::optional<Eigen::VectorXd>& nu() const { return nu_; }

 private:
  Eigen::MatrixXd values_;  // internal x A
  std::optional<Eigen::VectorXd> nu_;
};

// Fixed point of the KL-regularized control problem on the token tree:
//   pi*(a|s)  = pi_ref(a|s) exp((Q(s,a) - V(s)) / beta)
//   Q(s,a)    = r(s,a) + V(concat(s,a))
//   V(s)      = beta log sum_a pi_ref(a|s) exp(Q(s,a) / beta)
// with V = 0 at depth-T leaves.
struct SoftSolution {
  Eigen::MatrixXd q;       // internal x A
  Eigen::VectorXd v;       // all nodes (leaves are zero)
  Eigen::MatrixXd policy;  // internal x A, rows normalized
  double beta = 1.0;
};

SoftSolution solve_soft(const LanguageMdp& mdp, const RewardFn& r, double beta);

// Independent oracle for V: the soft value equals the log-partition of
// exp(sum of rewards / beta) over complete paths under pi_ref.
double path_enum_value(const LanguageMdp& mdp, const RewardFn& r, double beta,
                       const State& s);

// Exact backward evaluation of E_policy[sum r - kl_coeff * KL(policy||ref)]
// from every node.
Eigen::VectorXd evaluate_policy(const LanguageMdp& mdp,
                                const Eigen::MatrixXd& policy,
                                const RewardFn& r, double kl_coeff);

struct MinLinearResult {
  Eigen::MatrixXd policy;  // deterministic rows (one-hot)
  Eigen::VectorXd value;   // all nodes
};

// Hard-min backward induction over cumulative psi(s,a)' weight; ties broken
// toward the lowest token id.
MinLinearResult min_linear_policy(const LanguageMdp& mdp,
                                  const Eigen::VectorXd& weight);

// KL divergence between two distributions over tokens; 0 log 0 = 0.
double kl_divergence(const Eigen::Ref<const Eigen::VectorXd>& p,
                     const Eigen::Ref<const Eigen::VectorXd>& q);

struct FeatureNorms {
  double per_action;  // sum_a policy(a|s) ||psi(s,a)||
  double cumulative;  // E_policy[ sum_t ||psi(s_t,a_t)|| | s_0 = s ]
};

FeatureNorms expected_feature_norms(const LanguageMdp& mdp,
                                    const Eigen::MatrixXd& policy,
                                    const State& s);

// Full table of cumulative expected feature norms for every node.
Eigen::VectorXd cumulative_feature_norms(const LanguageMdp& mdp,
                                         const Eigen::MatrixXd& policy);

}  // namespace souplab
