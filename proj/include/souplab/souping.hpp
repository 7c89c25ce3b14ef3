#pragma once

#include <Eigen/Core>
#include <vector>

#include "souplab/offline.hpp"

namespace souplab {

// Mixture vector with the temperature constraint beta * sum|lambda| <= beta'.
struct SoupWeights {
  Eigen::VectorXd lambda;
  double beta = 1.0;
  double beta_prime = 1.0;

  double l1() const { return lambda.cwiseAbs().sum(); }
  bool feasible(double tol = 1e-9) const {
    return beta * l1() <= beta_prime * (1.0 + tol) + 1e-12;
  }
};

// Scales lambda back onto the constraint set when infeasible.
SoupWeights project_lambda(const Eigen::VectorXd& lambda, double beta,
                           double beta_prime);

// pi_ref(a|s) reweighted by exp((beta / beta') * sum_k lambda_k q_hat_k);
// with beta' = beta this is the (1 - sum lambda) logit_ref + sum lambda_k
// logit_k mixture. lambda = 0 returns the reference row verbatim.
Eigen::VectorXd soup_policy(const LanguageMdp& mdp,
                            const std::vector<LogitAdapter>& adapters,
                            const SoupWeights& sw, const State& s);

Eigen::MatrixXd soup_policy_table(const LanguageMdp& mdp,
                                  const std::vector<LogitAdapter>& adapters,
                                  const SoupWeights& sw);

enum class EnvelopeMode { KlHeuristic, ExactMax };
// Targeted scales the log-ratio sum by beta/beta' so the accepted
// distribution is the souped policy itself; Heuristic scales by 1/beta,
// matching the convention of the heuristic envelope.
enum class ExponentMode { Targeted, Heuristic };

// Per-action acceptance ratio of the implicit sampler.
Eigen::VectorXd acceptance_ratios(const LanguageMdp& mdp,
                                  const std::vector<LogitAdapter>& adapters,
                                  const SoupWeights& sw, long long node,
                                  ExponentMode exponent = ExponentMode::Targeted);

// Envelope M(s): ExactMax returns max_a of the acceptance ratio;
// KlHeuristic returns exp(-sum_k lambda_k KL(pi_ref || pi_k) / beta).
double acceptance_bound(const LanguageMdp& mdp,
                        const std::vector<LogitAdapter>& adapters,
                        const SoupWeights& sw, const State& s,
                        EnvelopeMode mode,
                        ExponentMode exponent = ExponentMode::Targeted);

struct RejectionOptions {
  EnvelopeMode envelope = EnvelopeMode::ExactMax;
  ExponentMode exponent = ExponentMode::Targeted;
  int max_tries = 64;
};

struct RejectionSample {
  int token = -1;
  int tries = 0;
  bool fell_back = false;  // max tries exhausted, sampled explicitly
  int clamped = 0;         // proposals whose ratio exceeded the envelope
};

// Propose from pi_ref, accept with probability min(1, ratio / M(s)). On
// exhaustion the sampler reports the failure and draws from the explicit
// souped distribution instead.
RejectionSample rejection_sample(const LanguageMdp& mdp,
                                 const std::vector<LogitAdapter>& adapters,
                                 const SoupWeights& sw, const State& s, Rng& rng,
                                 const RejectionOptions& opts = {});

// Distribution actually realized by the sampler at a state, in closed form:
// proportional to pi_ref(a) min(1, ratio(a) / M(s)).
Eigen::VectorXd rejection_distribution(const LanguageMdp& mdp,
                                       const std::vector<LogitAdapter>& adapters,
                                       const SoupWeights& sw, long long node,
                                       const RejectionOptions& opts = {});

// Probability that a single proposal is accepted at a state.
double acceptance_probability(const LanguageMdp& mdp,
                              const std::vector<LogitAdapter>& adapters,
                              const SoupWeights& sw, long long node,
                              const RejectionOptions& opts = {});

// Heuristic parameter average of linear adapters (tables are averaged when
// any adapter is tabular). With simplex weights at beta' = beta this equals
// the explicit soup.
LogitAdapter average_adapters(const LanguageMdp& mdp,
                              const std::vector<LogitAdapter>& adapters,
                              const Eigen::VectorXd& weights);

}  // namespace souplab
