#include "souplab/preference.hpp"

#include <algorithm>
#include <cmath>

namespace souplab {

double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

namespace {

Eigen::MatrixXd reward_table_from_keys(const LanguageMdp& mdp,
                                       const FeatureMap& keys,
                                       const Eigen::VectorXd& nu) {
  Eigen::MatrixXd values(mdp.internal_count(), mdp.vocab_size());
  for (long long node = 0; node < mdp.internal_count(); ++node) {
    for (int a = 0; a < mdp.vocab_size(); ++a) {
      values(node, a) = nu[keys.tabular_index(node, a)];
    }
  }
  return values;
}

}  // namespace

AttributeSet::AttributeSet(const LanguageMdp& mdp, Eigen::MatrixXd nus,
                           double beta)
    : nus_(std::move(nus)), beta_(beta) {
  in_feature_space_ = mdp.features().is_tabular();
  const FeatureMap keys =
      in_feature_space_
          ? mdp.features()
          : FeatureMap::tabular_lgram(mdp.tree(), mdp.features().lgram());
  if (nus_.rows() != keys.raw_dim()) {
    throw Error("attribute weight dimension mismatch");
  }
  rewards_.reserve(nus_.cols());
  for (int k = 0; k < nus_.cols(); ++k) {
    Eigen::MatrixXd table = reward_table_from_keys(mdp, keys, nus_.col(k));
    if (table.minCoeff() < 0.0) {
      throw Error("attribute rewards must be nonnegative");
    }
    rewards_.push_back(
        RewardFn::from_table_with_weights(mdp, std::move(table), nus_.col(k)));
  }
}

AttributeSet AttributeSet::random(const LanguageMdp& mdp, int count,
                                  double scale, double beta, Rng& rng) {
  const FeatureMap keys =
      mdp.features().is_tabular()
          ? mdp.features()
          : FeatureMap::tabular_lgram(mdp.tree(), mdp.features().lgram());
  Eigen::MatrixXd nus(keys.raw_dim(), count);
  for (int k = 0; k < count; ++k) {
    for (Eigen::Index i = 0; i < nus.rows(); ++i) {
      nus(i, k) = scale * rng.uniform();
    }
  }
  return AttributeSet(mdp, std::move(nus), beta);
}

PreferenceVector::PreferenceVector(Eigen::VectorXd w) : w_(std::move(w)) {
  if (w_.minCoeff() < 0.0 || std::abs(w_.sum() - 1.0) > 1e-12) {
    throw SimplexViolation("preference vector must lie on the simplex");
  }
}

RewardFn personalized_reward(const LanguageMdp& mdp, const AttributeSet& attrs,
                             const PreferenceVector& w) {
  if (w.dim() != attrs.count()) {
    throw Error("preference vector dimension mismatch");
  }
  Eigen::MatrixXd table = Eigen::MatrixXd::Zero(mdp.internal_count(),
                                                mdp.vocab_size());
  for (int k = 0; k < attrs.count(); ++k) {
    table += w.w()[k] * attrs.reward(k).values();
  }
  Eigen::VectorXd nu_w = attrs.nus() * w.w();
  return RewardFn::from_table_with_weights(mdp, std::move(table),
                                           std::move(nu_w));
}

std::vector<long long> trajectory_nodes(const LanguageMdp& mdp,
                                        const Trajectory& t) {
  std::vector<long long> nodes;
  nodes.reserve(t.tokens.size());
  long long node = mdp.tree().node_of(t.prompt);
  for (int tok : t.tokens) {
    nodes.push_back(node);
    node = mdp.tree().child(node, tok);
  }
  return nodes;
}

double trajectory_reward(const LanguageMdp& mdp, const RewardFn& r,
                         const Trajectory& t) {
  double acc = 0.0;
  long long node = mdp.tree().node_of(t.prompt);
  for (int tok : t.tokens) {
    acc += r(node, tok);
    node = mdp.tree().child(node, tok);
  }
  return acc;
}

Trajectory sample_trajectory(const LanguageMdp& mdp,
                             const Eigen::MatrixXd& policy, const State& prompt,
                             Rng& rng) {
  if (prompt.depth() >= mdp.horizon()) {
    throw DepthExceeded("prompt must leave room for at least one token");
  }
  Trajectory t;
  t.prompt = prompt;
  long long node = mdp.tree().node_of(prompt);
  for (int depth = prompt.depth(); depth < mdp.horizon(); ++depth) {
    const int tok = rng.categorical(policy.row(node).transpose());
    t.tokens.push_back(tok);
    node = mdp.tree().child(node, tok);
  }
  return t;
}

std::vector<PreferencePair> generate_pairs(const LanguageMdp& mdp,
                                           const RewardFn& r, int n,
                                           PairMode mode, Rng& rng,
                                           const State& prompt,
                                           int attribute_id) {
  if (n < 1) throw Error("pair count must be at least 1");
  std::vector<PreferencePair> pairs;
  pairs.reserve(n);
  for (int i = 0; i < n; ++i) {
    Trajectory first = sample_trajectory(mdp, mdp.ref().probs(), prompt, rng);
    Trajectory second = sample_trajectory(mdp, mdp.ref().probs(), prompt, rng);
    const double r1 = trajectory_reward(mdp, r, first);
    const double r2 = trajectory_reward(mdp, r, second);
    bool first_wins = true;
    if (mode == PairMode::DeterministicRank) {
      first_wins = r1 >= r2;  // ties go to the first trajectory
    } else {
      first_wins = rng.uniform() < sigmoid(r1 - r2);
    }
    PreferencePair pair;
    pair.attribute_id = attribute_id;
    pair.winner = first_wins ? first : second;
    pair.loser = first_wins ? second : first;
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

std::vector<LabeledTrajectory> generate_labeled(const LanguageMdp& mdp,
                                                const RewardFn& r, int n,
                                                Rng& rng, const State& prompt) {
  if (n < 1) throw Error("dataset size must be at least 1");
  std::vector<LabeledTrajectory> data(n);
  std::vector<double> returns(n);
  for (int i = 0; i < n; ++i) {
    data[i].trajectory = sample_trajectory(mdp, mdp.ref().probs(), prompt, rng);
    returns[i] = trajectory_reward(mdp, r, data[i].trajectory);
  }
  std::vector<double> sorted = returns;
  std::nth_element(sorted.begin(), sorted.begin() + n / 2, sorted.end());
  const double median = sorted[n / 2];
  for (int i = 0; i < n; ++i) {
    data[i].label = returns[i] > median ? 1 : 0;
  }
  return data;
}

std::vector<PreferenceVector> make_training_weights(int k_train, int n_base,
                                                    double spread, Rng& rng) {
  if (k_train < n_base) throw Error("need at least one weight per base");
  std::vector<PreferenceVector> out;
  out.reserve(k_train);
  for (int i = 0; i < k_train; ++i) {
    const int j = i % n_base;
    Eigen::VectorXd w = Eigen::VectorXd::Zero(n_base);
    w[j] = 1.0;
    for (int k = 0; k < n_base; ++k) {
      w[k] = std::max(0.0, w[k] + spread * rng.normal());
    }
    const double total = w.sum();
    if (total <= 0.0) {
      w.setZero();
      w[j] = 1.0;
    } else {
      w /= total;
    }
    // Nudge any rounding drift back onto the simplex.
    w /= w.sum();
    out.emplace_back(std::move(w));
  }
  return out;
}

}  // namespace souplab
