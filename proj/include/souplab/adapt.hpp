#pragma once

#include <Eigen/Core>
#include <vector>

#include "souplab/souping.hpp"

namespace souplab {

// One preference outcome: per-attribute return differences
// delta_k = (R_k(winner) - R_k(loser)) / beta, winner preferred.
struct FeedbackEvent {
  Eigen::VectorXd delta;
};

// Gaussian belief over the soup weights.
struct VariationalPosterior {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;

  static VariationalPosterior standard(int k);
};

// MAP of -sum_i log sigma(lambda' delta_i) + (prior_precision/2) ||lambda||^2
// via damped Newton iterations; the returned gradient norm is below 1e-8.
Eigen::VectorXd lambda_bt_batch(const std::vector<FeedbackEvent>& events,
                                double prior_precision);

// One sequential update of the Gaussian posterior from a single event:
//   S_n^{-1}   = S_{n-1}^{-1} + sigma (1 - sigma) delta delta'
//   lambda_n   = lambda_{n-1} + (1 - sigma) S_n delta
// with sigma evaluated at the pre-update mean. Additional inner iterations
// re-evaluate sigma at the refreshed mean (iteratively reweighted least
// squares on the same event).
VariationalPosterior svi_update(const VariationalPosterior& post,
                                const FeedbackEvent& event, int inner_iters = 1);

// Expected feedback-event for two trajectories under a set of adapters.
FeedbackEvent make_feedback_event(const LanguageMdp& mdp,
                                  const std::vector<LogitAdapter>& adapters,
                                  const Trajectory& winner,
                                  const Trajectory& loser, double beta);

struct SoupObjectiveConfig {
  long long start_node = 0;       // state the objective is evaluated from
  int max_iters = 400;
  double init_step = 0.5;
  double min_step = 1e-10;
  double fd_step = 1e-4;          // central-difference step for gradients
  double abs_smooth_eps = 1e-8;   // smoothing of |lambda_k| in the objective
  int restarts = 8;               // includes +-one-hots and zero
  std::uint64_t seed = 1234;
};

struct SoupSolveResult {
  Eigen::VectorXd lambda;
  double value = 0.0;
  bool ascended = false;  // false: no start could be improved (best start kept)
};

// Objective of the constrained soup problem from a given state:
// E_soup[sum r_w - (beta' / sum_k |lambda_k|) KL(soup || ref)], with the
// absolute values eps-smoothed; at lambda = 0 the KL term vanishes and the
// value is the plain reference expectation of the reward.
double soup_objective(const LanguageMdp& mdp,
                      const std::vector<LogitAdapter>& adapters,
                      const RewardFn& r_w, const Eigen::VectorXd& lambda,
                      double beta, double beta_prime,
                      const SoupObjectiveConfig& cfg = {});

// Projected multi-start gradient ascent on the soup objective subject to
// beta * sum|lambda| <= beta'. The returned value is at least the value of
// every start (in particular every one-hot specialist).
SoupSolveResult solve_soup_weights(const LanguageMdp& mdp,
                                   const std::vector<LogitAdapter>& adapters,
                                   const RewardFn& r_w, double beta,
                                   double beta_prime,
                                   const SoupObjectiveConfig& cfg = {});

}  // namespace souplab
