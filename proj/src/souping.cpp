#include "souplab/souping.hpp"

#include <cmath>

#include "souplab/softrl.hpp"

namespace souplab {

namespace {

void check_soup(const std::vector<LogitAdapter>& adapters,
                const SoupWeights& sw) {
  if (static_cast<Eigen::Index>(adapters.size()) != sw.lambda.size()) {
    throw Error("soup weight count does not match adapter count");
  }
  if (!(sw.beta > 0.0) || !(sw.beta_prime > 0.0)) {
    throw ConstraintViolation("temperatures must be positive");
  }
  if (!sw.feasible()) {
    throw ConstraintViolation("beta * sum|lambda| exceeds beta_prime");
  }
}

// (beta / beta') * sum_k lambda_k q_hat_k(s, .)
Eigen::VectorXd soup_delta(const LanguageMdp& mdp,
                           const std::vector<LogitAdapter>& adapters,
                           const SoupWeights& sw, long long node) {
  Eigen::VectorXd delta = Eigen::VectorXd::Zero(mdp.vocab_size());
  for (std::size_t k = 0; k < adapters.size(); ++k) {
    if (sw.lambda[k] == 0.0) continue;
    delta += sw.lambda[k] * adapters[k].table().row(node).transpose();
  }
  return (sw.beta / sw.beta_prime) * delta;
}

Eigen::VectorXd soup_row(const LanguageMdp& mdp,
                         const std::vector<LogitAdapter>& adapters,
                         const SoupWeights& sw, long long node) {
  const Eigen::VectorXd delta = soup_delta(mdp, adapters, sw, node);
  if ((delta.array() == 0.0).all()) {
    return mdp.ref().probs().row(node).transpose();
  }
  const Eigen::VectorXd logits =
      mdp.ref().log_probs().row(node).transpose() + delta;
  return softmax_row(logits);
}

}  // namespace

SoupWeights project_lambda(const Eigen::VectorXd& lambda, double beta,
                           double beta_prime) {
  SoupWeights sw{lambda, beta, beta_prime};
  const double l1 = sw.l1();
  if (beta * l1 > beta_prime) {
    sw.lambda *= beta_prime / (beta * l1);
  }
  return sw;
}

Eigen::VectorXd soup_policy(const LanguageMdp& mdp,
                            const std::vector<LogitAdapter>& adapters,
                            const SoupWeights& sw, const State& s) {
  check_soup(adapters, sw);
  return soup_row(mdp, adapters, sw, mdp.tree().node_of(s));
}

Eigen::MatrixXd soup_policy_table(const LanguageMdp& mdp,
                                  const std::vector<LogitAdapter>& adapters,
                                  const SoupWeights& sw) {
  check_soup(adapters, sw);
  Eigen::MatrixXd out(mdp.internal_count(), mdp.vocab_size());
  for (long long node = 0; node < mdp.internal_count(); ++node) {
    out.row(node) = soup_row(mdp, adapters, sw, node).transpose();
  }
  return out;
}

Eigen::VectorXd acceptance_ratios(const LanguageMdp& mdp,
                                  const std::vector<LogitAdapter>& adapters,
                                  const SoupWeights& sw, long long node,
                                  ExponentMode exponent) {
  Eigen::VectorXd exponent_sum = Eigen::VectorXd::Zero(mdp.vocab_size());
  for (std::size_t k = 0; k < adapters.size(); ++k) {
    if (sw.lambda[k] == 0.0) continue;
    // log pi_k(a|s) - log pi_ref(a|s) = q_hat_k(s,a) - log_z_k(s)
    const double logz = adapters[k].log_z(mdp, node);
    exponent_sum +=
        sw.lambda[k] *
        (adapters[k].table().row(node).transpose().array() - logz).matrix();
  }
  const double scale = exponent == ExponentMode::Targeted
                           ? sw.beta / sw.beta_prime
                           : 1.0 / sw.beta;
  return (scale * exponent_sum).array().exp();
}

double acceptance_bound(const LanguageMdp& mdp,
                        const std::vector<LogitAdapter>& adapters,
                        const SoupWeights& sw, const State& s,
                        EnvelopeMode mode, ExponentMode exponent) {
  check_soup(adapters, sw);
  const long long node = mdp.tree().node_of(s);
  if (mode == EnvelopeMode::ExactMax) {
    return acceptance_ratios(mdp, adapters, sw, node, exponent).maxCoeff();
  }
  double kl_sum = 0.0;
  const Eigen::VectorXd ref = mdp.ref().probs().row(node).transpose();
  for (std::size_t k = 0; k < adapters.size(); ++k) {
    if (sw.lambda[k] == 0.0) continue;
    kl_sum +=
        sw.lambda[k] * kl_divergence(ref, adapters[k].policy_row(mdp, node));
  }
  return std::exp(-kl_sum / sw.beta);
}

Eigen::VectorXd rejection_distribution(const LanguageMdp& mdp,
                                       const std::vector<LogitAdapter>& adapters,
                                       const SoupWeights& sw, long long node,
                                       const RejectionOptions& opts) {
  const Eigen::VectorXd ratios =
      acceptance_ratios(mdp, adapters, sw, node, opts.exponent);
  const double bound =
      opts.envelope == EnvelopeMode::ExactMax
          ? ratios.maxCoeff()
          : acceptance_bound(mdp, adapters, sw,
                             mdp.tree().state_of(node), opts.envelope,
                             opts.exponent);
  Eigen::VectorXd accept =
      (ratios / bound).cwiseMin(1.0).cwiseProduct(
          mdp.ref().probs().row(node).transpose());
  return accept / accept.sum();
}

double acceptance_probability(const LanguageMdp& mdp,
                              const std::vector<LogitAdapter>& adapters,
                              const SoupWeights& sw, long long node,
                              const RejectionOptions& opts) {
  const Eigen::VectorXd ratios =
      acceptance_ratios(mdp, adapters, sw, node, opts.exponent);
  const double bound =
      opts.envelope == EnvelopeMode::ExactMax
          ? ratios.maxCoeff()
          : acceptance_bound(mdp, adapters, sw,
                             mdp.tree().state_of(node), opts.envelope,
                             opts.exponent);
  return mdp.ref()
      .probs()
      .row(node)
      .transpose()
      .dot((ratios / bound).cwiseMin(1.0));
}

RejectionSample rejection_sample(const LanguageMdp& mdp,
                                 const std::vector<LogitAdapter>& adapters,
                                 const SoupWeights& sw, const State& s, Rng& rng,
                                 const RejectionOptions& opts) {
  check_soup(adapters, sw);
  if (opts.max_tries < 1) throw Error("max_tries must be at least 1");
  const long long node = mdp.tree().node_of(s);
  const Eigen::VectorXd ratios =
      acceptance_ratios(mdp, adapters, sw, node, opts.exponent);
  const double bound =
      opts.envelope == EnvelopeMode::ExactMax
          ? ratios.maxCoeff()
          : acceptance_bound(mdp, adapters, sw, s, opts.envelope,
                             opts.exponent);
  const Eigen::VectorXd ref = mdp.ref().probs().row(node).transpose();

  RejectionSample out;
  for (int attempt = 0; attempt < opts.max_tries; ++attempt) {
    ++out.tries;
    const int candidate = rng.categorical(ref);
    const double raw = ratios[candidate] / bound;
    if (raw > 1.0) ++out.clamped;
    if (rng.uniform() <= std::min(1.0, raw)) {
      out.token = candidate;
      return out;
    }
  }
  out.fell_back = true;
  out.token = rng.categorical(soup_row(mdp, adapters, sw, node));
  return out;
}

LogitAdapter average_adapters(const LanguageMdp& mdp,
                              const std::vector<LogitAdapter>& adapters,
                              const Eigen::VectorXd& weights) {
  if (adapters.empty() ||
      static_cast<Eigen::Index>(adapters.size()) != weights.size()) {
    throw Error("weight count does not match adapter count");
  }
  bool all_linear = true;
  for (const auto& ad : adapters) all_linear &= ad.is_linear();
  const double beta = adapters.front().beta();
  if (all_linear) {
    Eigen::VectorXd theta =
        Eigen::VectorXd::Zero(adapters.front().theta().size());
    for (std::size_t k = 0; k < adapters.size(); ++k) {
      theta += weights[k] * adapters[k].theta();
    }
    return LogitAdapter::linear(mdp, theta, beta);
  }
  Eigen::MatrixXd table =
      Eigen::MatrixXd::Zero(mdp.internal_count(), mdp.vocab_size());
  for (std::size_t k = 0; k < adapters.size(); ++k) {
    table += weights[k] * adapters[k].table();
  }
  return LogitAdapter::from_table(mdp, std::move(table), beta);
}

}  // namespace souplab
