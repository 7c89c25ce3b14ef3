#pragma once

#include <Eigen/Core>
#include <optional>
#include <vector>

#include "souplab/mdp.hpp"
#include "souplab/rng.hpp"

namespace souplab {

// Learned linear representation psi_W(s,a) = W psi_raw(s,a) over the raw
// tabular features.
struct PsiModel {
  Eigen::MatrixXd linear_map;  // d_out x d_raw
};

struct EmHalfStep {
  int iteration = 0;
  bool representation_step = false;  // true: W update, false: nu update
  double before = 0.0;               // own objective before the update
  double after = 0.0;                // own objective after the update
};

struct EmFitResult {
  PsiModel psi;
  Eigen::MatrixXd nus;            // d_out x K
  std::vector<EmHalfStep> trace;  // per half-step objective values
  double final_mse = 0.0;         // mean over attributes of step-(ii) MSE
  int iterations = 0;
  bool rank_deficient = false;
};

struct EmFitConfig {
  int max_iters = 200;
  int n_w_samples = 24;     // simplex draws for the mixture objective
  double min_improve = 1e-12;
  std::uint64_t seed = 5;
  // When set, the first iteration keeps this map and fits nu to it before
  // any representation update.
  std::optional<Eigen::MatrixXd> init_w;
};

// Alternating exact least squares: (i) fit W to reconstruct weighted reward
// mixtures over sampled simplex weights, (ii) fit each nu_k to reconstruct
// its attribute reward. The simplex sample is drawn once so the mixture
// objective stays fixed across iterations.
EmFitResult em_fit(const Eigen::MatrixXd& raw_features,  // n x d_raw
                   const Eigen::MatrixXd& rewards,       // n x K
                   int d_out, const EmFitConfig& cfg, Rng& rng);

// Raw tabular feature rows for every (node, action) pair of an MDP.
Eigen::MatrixXd raw_feature_matrix(const LanguageMdp& mdp);

}  // namespace souplab
