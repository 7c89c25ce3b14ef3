#pragma once

#include <Eigen/Core>
#include <vector>

#include "souplab/adapt.hpp"

namespace souplab {

// Least-squares fit of Q*(s,a) on psi(s,a) over all node-action pairs.
struct SpectralFit {
  Eigen::VectorXd nu;
  double residual = 0.0;  // max-abs error over all nodes
  bool rank_deficient = false;
};

SpectralFit fit_spectral_weights(const LanguageMdp& mdp,
                                 const SoftSolution& sol);

// log(M_max + M_min - 1) - log(M_max * M_min) for the policy ratio
// specialist / reference at a state; nonnegative because the ratios average
// to one under the reference policy.
double policy_ratio_log_gap(const Eigen::Ref<const Eigen::VectorXd>& specialist,
                            const Eigen::Ref<const Eigen::VectorXd>& reference);

// A bound-verification problem: K exact specialists, a simplex preference,
// and a mixture vector to certify.
struct BoundInstance {
  const LanguageMdp* mdp = nullptr;
  const AttributeSet* attrs = nullptr;
  Eigen::VectorXd w;       // simplex preference
  double beta = 1.0;
  double beta_prime = 1.0;
  Eigen::VectorXd lambda;  // mixture weights under certification

  // Derived quantities, built by prepare().
  std::vector<SoftSolution> specialist_solutions;
  std::vector<LogitAdapter> adapters;
  Eigen::MatrixXd spectral_nus;  // d x K, one fitted nu per attribute
  SoftSolution personalized;     // solution for r_w at temperature beta
  SpectralFit personalized_fit;
  RewardFn r_w;

  double max_fit_residual = 0.0;
};

// Solves the K specialists and the personalized problem, fits all spectral
// weight vectors, and refuses feature maps where the fit is not exact.
BoundInstance prepare_bound_instance(const LanguageMdp& mdp,
                                     const AttributeSet& attrs,
                                     const Eigen::VectorXd& w, double beta,
                                     double beta_prime,
                                     const Eigen::VectorXd& lambda,
                                     double fit_tolerance = 1e-8);

struct KlBoundRow {
  long long node = 0;
  double lhs = 0.0;
  double rhs = 0.0;
  bool pass = false;
};

// Divergence bound at one state: KL(personalized || soup) against
// (1/beta')(E_pi*_w ||psi|| + E_ref ||psi||) ||(beta'/beta) nu_w - sum lambda_k nu_k||.
KlBoundRow kl_bound_check(const BoundInstance& inst, long long node,
                          double tol = 1e-7);

struct ValueBoundRow {
  long long node = 0;
  double gap = 0.0;
  double bound = 0.0;
  double term_reward = 0.0;    // reward-approximation error
  double term_negative = 0.0;  // penalty for negative mixture weights
  double term_logit = 0.0;     // logit-approximation error
  double soup_value = 0.0;
  double optimal_value = 0.0;
  bool degenerate_lambda = false;
  bool pass = false;
};

// Performance gap at one state against the three-term bound. The mixture in
// the instance must optimize the soup objective at this state for the bound
// to be guaranteed.
ValueBoundRow value_bound_check(const BoundInstance& inst, long long node,
                                double tol = 1e-7);

struct CertificationConfig {
  int instances = 100;
  std::uint64_t seed = 7;
  int max_vocab = 3;
  int max_horizon = 3;
  int max_attributes = 3;
  bool all_states = true;  // certify every internal state, not just the root
};

struct CertificationRow {
  int instance_id = 0;
  long long node = 0;
  int depth = 0;
  double beta = 0.0;
  double beta_prime = 0.0;
  Eigen::VectorXd preference;
  Eigen::VectorXd lambda;
  KlBoundRow kl;
  ValueBoundRow value;
};

struct CertificationReport {
  std::vector<CertificationRow> rows;
  int instances = 0;
  int kl_failures = 0;
  int value_failures = 0;
  int degenerate = 0;
  double max_fit_residual = 0.0;
};

// Randomized certification: random small instances, mixture weights solved
// per state, both bounds checked everywhere.
CertificationReport certify_random_instances(const CertificationConfig& cfg);

}  // namespace souplab
