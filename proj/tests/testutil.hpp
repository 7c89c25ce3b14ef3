#pragma once

#include <Eigen/Core>
#include <functional>

#include "souplab/harness.hpp"
#include "souplab/rng.hpp"

namespace souplab::testutil {

struct RandomMdp {
  LanguageMdp mdp;
  int lgram;
};

// Small random tabular-feature instance; the reference policy is either
// uniform or an L-gram softmax so the optimal Q stays L-gram measurable.
inline RandomMdp random_tabular_mdp(Rng& rng, int max_vocab = 4,
                                    int max_horizon = 4) {
  const int vocab = rng.uniform_int(2, max_vocab);
  const int horizon = rng.uniform_int(1, max_horizon);
  const int lgram = rng.uniform_int(1, horizon);
  const TreeIndex tree(Vocab{vocab}, horizon);
  FeatureMap features = FeatureMap::tabular_lgram(tree, lgram);
  ReferencePolicy ref =
      rng.uniform() < 0.5
          ? ReferencePolicy::uniform(tree)
          : ReferencePolicy::softmax_linear(tree, lgram, 0.8, rng.next_u64());
  return {LanguageMdp(Vocab{vocab}, horizon, std::move(features),
                      std::move(ref)),
          lgram};
}

inline RewardFn random_nonneg_reward(const LanguageMdp& mdp, Rng& rng,
                                     double scale = 1.0) {
  AttributeSet attrs = AttributeSet::random(mdp, 1, scale, 1.0, rng);
  return attrs.reward(0);
}

// Central finite differences of a scalar function.
inline Eigen::VectorXd finite_difference(
    const std::function<double(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& x, double h = 1e-5) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Eigen::VectorXd hi = x, lo = x;
    hi[i] += h;
    lo[i] -= h;
    g[i] = (f(hi) - f(lo)) / (2.0 * h);
  }
  return g;
}

inline double max_rel_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double scale = std::max({std::abs(a[i]), std::abs(b[i]), 1e-8});
    worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
  }
  return worst;
}

}  // namespace souplab::testutil
