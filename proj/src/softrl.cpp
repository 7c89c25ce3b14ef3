#include "souplab/softrl.hpp"

#include <cmath>
#include <limits>

namespace souplab {

RewardFn RewardFn::from_table(const LanguageMdp& mdp, Eigen::MatrixXd values) {
  if (values.rows() != mdp.internal_count() ||
      values.cols() != mdp.vocab_size()) {
    throw Error("reward table shape mismatch");
  }
  if (!values.allFinite()) throw NonFiniteReward("reward table has non-finite entries");
  RewardFn r;
  r.values_ = std::move(values);
  return r;
}

RewardFn RewardFn::from_linear(const LanguageMdp& mdp,
                               const Eigen::VectorXd& nu) {
  if (nu.size() != mdp.features().dim()) {
    throw Error("reward weight dimension mismatch");
  }
  Eigen::MatrixXd values(mdp.internal_count(), mdp.vocab_size());
  for (long long node = 0; node < mdp.internal_count(); ++node) {
    for (int a = 0; a < mdp.vocab_size(); ++a) {
      values(node, a) = mdp.features().psi_node(node, a).dot(nu);
    }
  }
  RewardFn r = from_table(mdp, std::move(values));
  r.nu_ = nu;
  return r;
}

RewardFn RewardFn::from_table_with_weights(const LanguageMdp& mdp,
                                           Eigen::MatrixXd values,
                                           Eigen::VectorXd nu) {
  RewardFn r = from_table(mdp, std::move(values));
  r.nu_ = std::move(nu);
  return r;
}

SoftSolution solve_soft(const LanguageMdp& mdp, const RewardFn& r,
                        double beta) {
  if (!(beta > 0.0)) throw Error("beta must be positive");
  const auto& tree = mdp.tree();
  const int A = mdp.vocab_size();
  const int T = mdp.horizon();

  SoftSolution sol;
  sol.beta = beta;
  sol.v = Eigen::VectorXd::Zero(mdp.node_count());
  sol.q.resize(mdp.internal_count(), A);
  sol.policy.resize(mdp.internal_count(), A);

  for (int t = T - 1; t >= 0; --t) {
    for (long long node = tree.level_offset(t); node < tree.level_offset(t + 1);
         ++node) {
      for (int a = 0; a < A; ++a) {
        sol.q(node, a) = r(node, a) + sol.v[tree.child(node, a)];
      }
      const Eigen::VectorXd exponent =
          mdp.ref().log_probs().row(node).transpose() +
          sol.q.row(node).transpose() / beta;
      sol.v[node] = beta * log_sum_exp(exponent);
      Eigen::VectorXd row =
          mdp.ref().probs().row(node).transpose().array() *
          ((sol.q.row(node).transpose().array() - sol.v[node]) / beta).exp();
      sol.policy.row(node) = (row / row.sum()).transpose();
    }
  }
  return sol;
}

double path_enum_value(const LanguageMdp& mdp, const RewardFn& r, double beta,
                       const State& s) {
  if (!(beta > 0.0)) throw Error("beta must be positive");
  const auto& tree = mdp.tree();
  const long long start = tree.node_of(s);
  if (tree.depth_of(start) == mdp.horizon()) return 0.0;

  // Log-weight of each partial path: sum log pi_ref + sum r / beta.
  std::vector<std::pair<long long, double>> frontier{{start, 0.0}};
  std::vector<double> complete;
  while (!frontier.empty()) {
    auto [node, logw] = frontier.back();
    frontier.pop_back();
    for (int a = 0; a < mdp.vocab_size(); ++a) {
      const double w =
          logw + mdp.ref().log_probs()(node, a) + r(node, a) / beta;
      const long long next = tree.child(node, a);
      if (tree.depth_of(next) == mdp.horizon()) {
        complete.push_back(w);
      } else {
        frontier.emplace_back(next, w);
      }
    }
  }
  Eigen::Map<const Eigen::VectorXd> weights(complete.data(), complete.size());
  return beta * log_sum_exp(weights);
}

Eigen::VectorXd evaluate_policy(const LanguageMdp& mdp,
                                const Eigen::MatrixXd& policy,
                                const RewardFn& r, double kl_coeff) {
  const auto& tree = mdp.tree();
  Eigen::VectorXd value = Eigen::VectorXd::Zero(mdp.node_count());
  for (int t = mdp.horizon() - 1; t >= 0; --t) {
    for (long long node = tree.level_offset(t); node < tree.level_offset(t + 1);
         ++node) {
      double acc = 0.0;
      for (int a = 0; a < mdp.vocab_size(); ++a) {
        acc += policy(node, a) * (r(node, a) + value[tree.child(node, a)]);
      }
      if (kl_coeff != 0.0) {
        acc -= kl_coeff * kl_divergence(policy.row(node).transpose(),
                                        mdp.ref().probs().row(node).transpose());
      }
      value[node] = acc;
    }
  }
  return value;
}

MinLinearResult min_linear_policy(const LanguageMdp& mdp,
                                  const Eigen::VectorXd& weight) {
  if (!weight.allFinite()) throw Error("weight must be finite");
  const auto& tree = mdp.tree();
  MinLinearResult res;
  res.value = Eigen::VectorXd::Zero(mdp.node_count());
  res.policy = Eigen::MatrixXd::Zero(mdp.internal_count(), mdp.vocab_size());
  for (int t = mdp.horizon() - 1; t >= 0; --t) {
    for (long long node = tree.level_offset(t); node < tree.level_offset(t + 1);
         ++node) {
      double best = std::numeric_limits<double>::infinity();
      int best_a = 0;
      for (int a = 0; a < mdp.vocab_size(); ++a) {
        const double cost = mdp.features().psi_node(node, a).dot(weight) +
                            res.value[tree.child(node, a)];
        if (cost < best) {
          best = cost;
          best_a = a;
        }
      }
      res.value[node] = best;
      res.policy(node, best_a) = 1.0;
    }
  }
  return res;
}

double kl_divergence(const Eigen::Ref<const Eigen::VectorXd>& p,
                     const Eigen::Ref<const Eigen::VectorXd>& q) {
  double acc = 0.0;
  for (Eigen::Index a = 0; a < p.size(); ++a) {
    if (p[a] == 0.0) continue;
    if (q[a] <= 0.0) {
      throw SupportViolation("p has mass where q has none");
    }
    acc += p[a] * std::log(p[a] / q[a]);
  }
  // Rounding can leave a tiny negative residue for nearly identical rows;
  // the divergence of normalized distributions is nonnegative.
  return std::max(0.0, acc);
}

Eigen::VectorXd cumulative_feature_norms(const LanguageMdp& mdp,
                                         const Eigen::MatrixXd& policy) {
  const auto& tree = mdp.tree();
  Eigen::VectorXd cum = Eigen::VectorXd::Zero(mdp.node_count());
  for (int t = mdp.horizon() - 1; t >= 0; --t) {
    for (long long node = tree.level_offset(t); node < tree.level_offset(t + 1);
         ++node) {
      double acc = 0.0;
      for (int a = 0; a < mdp.vocab_size(); ++a) {
        acc += policy(node, a) *
               (mdp.psi_norms()(node, a) + cum[tree.child(node, a)]);
      }
      cum[node] = acc;
    }
  }
  return cum;
}

FeatureNorms expected_feature_norms(const LanguageMdp& mdp,
                                    const Eigen::MatrixXd& policy,
                                    const State& s) {
  const long long node = mdp.tree().node_of(s);
  FeatureNorms out{0.0, 0.0};
  if (mdp.tree().depth_of(node) == mdp.horizon()) return out;
  out.per_action = policy.row(node).dot(mdp.psi_norms().row(node));
  out.cumulative = cumulative_feature_norms(mdp, policy)[node];
  return out;
}

}  // namespace souplab
