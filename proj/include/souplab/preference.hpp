#pragma once

#include <Eigen/Core>
#include <vector>

#include "souplab/rng.hpp"
#include "souplab/softrl.hpp"

namespace souplab {

// K nonnegative reward attributes r_k(s,a) = psi(s,a)' nu_k sharing one
// temperature. Weight vectors live on the tabular key grid of the MDP, which
// keeps every induced reward nonnegative by construction.
class AttributeSet {
 public:
  AttributeSet(const LanguageMdp& mdp, Eigen::MatrixXd nus, double beta);

  // Entrywise-nonnegative random weights, entries scale * U[0,1).
  static AttributeSet random(const LanguageMdp& mdp, int count, double scale,
                             double beta, Rng& rng);

  int count() const { return static_cast<int>(nus_.cols()); }
  double beta() const { return beta_; }
  const Eigen::MatrixXd& nus() const { return nus_; }
  Eigen::VectorXd nu(int k) const { return nus_.col(k); }
  const RewardFn& reward(int k) const { return rewards_[k]; }
  // True when the nu vectors live in the MDP's feature space (tabular maps).
  bool nus_in_feature_space() const { return in_feature_space_; }

 private:
  Eigen::MatrixXd nus_;  // key-space dim x K
  double beta_;
  std::vector<RewardFn> rewards_;
  bool in_feature_space_ = false;
};

// Simplex weights over attributes.
class PreferenceVector {
 public:
  explicit PreferenceVector(Eigen::VectorXd w);
  const Eigen::VectorXd& w() const { return w_; }
  int dim() const { return static_cast<int>(w_.size()); }

 private:
  Eigen::VectorXd w_;
};

// r_w = sum_k w_k r_k with nu_w = sum_k w_k nu_k.
RewardFn personalized_reward(const LanguageMdp& mdp, const AttributeSet& attrs,
                             const PreferenceVector& w);

// Rollout of length horizon - prompt depth. States are recoverable from the
// prompt plus the token list.
struct Trajectory {
  State prompt;
  std::vector<int> tokens;

  int length() const { return static_cast<int>(tokens.size()); }
};

// Node ids visited by the trajectory (one per emitted token).
std::vector<long long> trajectory_nodes(const LanguageMdp& mdp,
                                        const Trajectory& t);

double trajectory_reward(const LanguageMdp& mdp, const RewardFn& r,
                         const Trajectory& t);

Trajectory sample_trajectory(const LanguageMdp& mdp,
                             const Eigen::MatrixXd& policy, const State& prompt,
                             Rng& rng);

struct PreferencePair {
  Trajectory winner;
  Trajectory loser;
  int attribute_id = -1;
};

struct LabeledTrajectory {
  Trajectory trajectory;
  int label = 0;  // binary
};

enum class PairMode { DeterministicRank, BtSample };

// Pairs of independent pi_ref rollouts. DeterministicRank labels the higher
// cumulative reward as winner (first trajectory wins ties); BtSample labels
// the first trajectory winner with probability sigma(R1 - R2).
std::vector<PreferencePair> generate_pairs(const LanguageMdp& mdp,
                                           const RewardFn& r, int n,
                                           PairMode mode, Rng& rng,
                                           const State& prompt = State(),
                                           int attribute_id = -1);

// Binary-labeled pi_ref rollouts: label 1 iff the cumulative reward exceeds
// the dataset median.
std::vector<LabeledTrajectory> generate_labeled(const LanguageMdp& mdp,
                                                const RewardFn& r, int n,
                                                Rng& rng,
                                                const State& prompt = State());

// Training weight vectors sampled around the basis attributes:
// normalize(max(0, e_j + spread * noise)) with j cycling over bases.
std::vector<PreferenceVector> make_training_weights(int k_train, int n_base,
                                                    double spread, Rng& rng);

double sigmoid(double x);

}  // namespace souplab
