#include "souplab/bounds.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace souplab {

SpectralFit fit_spectral_weights(const LanguageMdp& mdp,
                                 const SoftSolution& sol) {
  const FeatureMap& fm = mdp.features();
  const int d = fm.dim();

  if (fm.is_tabular()) {
    // One-hot rows make the least-squares solution the per-key mean.
    Eigen::VectorXd sums = Eigen::VectorXd::Zero(d);
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(d);
    for (long long node = 0; node < mdp.internal_count(); ++node) {
      for (int a = 0; a < mdp.vocab_size(); ++a) {
        const long long key = fm.tabular_index(node, a);
        sums[key] += sol.q(node, a);
        counts[key] += 1.0;
      }
    }
    SpectralFit fit;
    fit.rank_deficient = counts.minCoeff() == 0.0;
    fit.nu = sums.cwiseQuotient(counts.cwiseMax(1.0));
    fit.residual = 0.0;
    for (long long node = 0; node < mdp.internal_count(); ++node) {
      for (int a = 0; a < mdp.vocab_size(); ++a) {
        fit.residual = std::max(
            fit.residual,
            std::abs(sol.q(node, a) - fit.nu[fm.tabular_index(node, a)]));
      }
    }
    return fit;
  }

  const long long rows = mdp.internal_count() * mdp.vocab_size();
  Eigen::MatrixXd design(rows, d);
  Eigen::VectorXd target(rows);
  long long row = 0;
  for (long long node = 0; node < mdp.internal_count(); ++node) {
    for (int a = 0; a < mdp.vocab_size(); ++a, ++row) {
      design.row(row) = fm.psi_node(node, a).transpose();
      target[row] = sol.q(node, a);
    }
  }
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(design);
  SpectralFit fit;
  fit.nu = cod.solve(target);
  fit.rank_deficient = cod.rank() < d;
  fit.residual = (design * fit.nu - target).cwiseAbs().maxCoeff();
  return fit;
}

double policy_ratio_log_gap(const Eigen::Ref<const Eigen::VectorXd>& specialist,
                            const Eigen::Ref<const Eigen::VectorXd>& reference) {
  if (specialist.minCoeff() <= 0.0 || reference.minCoeff() <= 0.0) {
    throw SupportViolation("policy ratio needs strictly positive rows");
  }
  const Eigen::ArrayXd ratio = specialist.array() / reference.array();
  const double hi = ratio.maxCoeff();
  const double lo = ratio.minCoeff();
  return std::log(hi + lo - 1.0) - std::log(hi * lo);
}

BoundInstance prepare_bound_instance(const LanguageMdp& mdp,
                                     const AttributeSet& attrs,
                                     const Eigen::VectorXd& w, double beta,
                                     double beta_prime,
                                     const Eigen::VectorXd& lambda,
                                     double fit_tolerance) {
  if (!attrs.nus_in_feature_space()) {
    throw FeatureNotExact("bound certification needs tabular features");
  }
  BoundInstance inst;
  inst.mdp = &mdp;
  inst.attrs = &attrs;
  inst.w = w;
  inst.beta = beta;
  inst.beta_prime = beta_prime;
  inst.lambda = lambda;

  const PreferenceVector pref(w);
  inst.r_w = personalized_reward(mdp, attrs, pref);
  if (inst.r_w.values().minCoeff() < 0.0) {
    throw Error("bound certification needs nonnegative rewards");
  }
  inst.personalized = solve_soft(mdp, inst.r_w, beta);
  inst.personalized_fit = fit_spectral_weights(mdp, inst.personalized);
  inst.max_fit_residual = inst.personalized_fit.residual;

  inst.spectral_nus.resize(mdp.features().dim(), attrs.count());
  for (int k = 0; k < attrs.count(); ++k) {
    inst.specialist_solutions.push_back(
        solve_soft(mdp, attrs.reward(k), beta));
    inst.adapters.push_back(
        LogitAdapter::from_solution(mdp, inst.specialist_solutions.back(), k));
    const SpectralFit fit =
        fit_spectral_weights(mdp, inst.specialist_solutions.back());
    inst.spectral_nus.col(k) = fit.nu;
    inst.max_fit_residual = std::max(inst.max_fit_residual, fit.residual);
  }
  if (inst.max_fit_residual > fit_tolerance) {
    throw FeatureNotExact("spectral fit residual " +
                          std::to_string(inst.max_fit_residual) +
                          " exceeds tolerance");
  }
  return inst;
}

KlBoundRow kl_bound_check(const BoundInstance& inst, long long node,
                          double tol) {
  const LanguageMdp& mdp = *inst.mdp;
  KlBoundRow row;
  row.node = node;

  const SoupWeights sw{inst.lambda, inst.beta, inst.beta_prime};
  const Eigen::VectorXd soup =
      soup_policy(mdp, inst.adapters, sw, mdp.tree().state_of(node));
  row.lhs = kl_divergence(inst.personalized.policy.row(node).transpose(), soup);

  const double norm_opt =
      inst.personalized.policy.row(node).dot(mdp.psi_norms().row(node));
  const double norm_ref =
      mdp.ref().probs().row(node).dot(mdp.psi_norms().row(node));
  const Eigen::VectorXd nu_diff =
      (inst.beta_prime / inst.beta) * inst.personalized_fit.nu -
      inst.spectral_nus * inst.lambda;
  row.rhs = (norm_opt + norm_ref) * nu_diff.norm() / inst.beta_prime;
  row.pass = row.lhs <= row.rhs + tol;
  return row;
}

ValueBoundRow value_bound_check(const BoundInstance& inst, long long node,
                                double tol) {
  const LanguageMdp& mdp = *inst.mdp;
  const AttributeSet& attrs = *inst.attrs;
  ValueBoundRow row;
  row.node = node;
  row.optimal_value = inst.personalized.v[node];

  const double l1 = inst.lambda.cwiseAbs().sum();
  row.degenerate_lambda = l1 < 1e-12;

  // Exact soup value from this state.
  if (row.degenerate_lambda) {
    row.soup_value =
        evaluate_policy(mdp, mdp.ref().probs(), inst.r_w, 0.0)[node];
  } else {
    const SoupWeights sw{inst.lambda, inst.beta, inst.beta_prime};
    const Eigen::MatrixXd policy = soup_policy_table(mdp, inst.adapters, sw);
    row.soup_value =
        evaluate_policy(mdp, policy, inst.r_w, inst.beta_prime / l1)[node];
  }
  row.gap = row.optimal_value - row.soup_value;

  // Normalized mixture magnitudes; at lambda = 0 the limit convention uses
  // the preference weights themselves (flagged as degenerate).
  const Eigen::VectorXd magnitudes =
      row.degenerate_lambda
          ? inst.w
          : Eigen::VectorXd(inst.lambda.cwiseAbs() / l1);

  // Reward-approximation term with the auxiliary hard-min policy.
  const Eigen::VectorXd nu_w = *inst.r_w.nu();
  Eigen::VectorXd min_weight = Eigen::VectorXd::Zero(nu_w.size());
  for (int k = 0; k < attrs.count(); ++k) {
    min_weight += std::abs(inst.lambda[k]) * (nu_w - attrs.nu(k));
  }
  const MinLinearResult aux = min_linear_policy(mdp, min_weight);
  const double cum_norm = cumulative_feature_norms(mdp, aux.policy)[node];
  row.term_reward = cum_norm * (attrs.nus() * (inst.w - magnitudes)).norm();

  // Penalty for negative mixture weights.
  double penalty = 0.0;
  for (int k = 0; k < attrs.count(); ++k) {
    if (inst.lambda[k] < 0.0) {
      const double gap_k = policy_ratio_log_gap(
          inst.specialist_solutions[k].policy.row(node).transpose(),
          mdp.ref().probs().row(node).transpose());
      penalty += gap_k * (-inst.lambda[k]);
    }
  }
  row.term_negative = (inst.beta * inst.beta / inst.beta_prime) * penalty;

  // Logit-approximation term.
  const double norm_ref =
      mdp.ref().probs().row(node).dot(mdp.psi_norms().row(node));
  const Eigen::VectorXd nu_diff =
      inst.personalized_fit.nu -
      (inst.beta / inst.beta_prime) * (inst.spectral_nus * inst.lambda);
  row.term_logit = norm_ref * nu_diff.norm();

  row.bound = row.term_reward + row.term_negative + row.term_logit;
  row.pass = row.gap >= -tol && row.gap <= row.bound + tol;
  return row;
}

CertificationReport certify_random_instances(const CertificationConfig& cfg) {
  CertificationReport report;
  Rng rng(cfg.seed);
  for (int id = 0; id < cfg.instances; ++id) {
    const int vocab = rng.uniform_int(2, cfg.max_vocab);
    const int horizon = rng.uniform_int(1, cfg.max_horizon);
    const int lgram = rng.uniform_int(1, horizon);
    const int n_attrs = rng.uniform_int(1, cfg.max_attributes);
    const double beta = rng.uniform(0.4, 1.6);
    const double beta_prime = beta * rng.uniform(0.8, 2.0);

    const TreeIndex tree(Vocab{vocab}, horizon);
    const FeatureMap features = FeatureMap::tabular_lgram(tree, lgram);
    ReferencePolicy ref =
        rng.uniform() < 0.5
            ? ReferencePolicy::uniform(tree)
            : ReferencePolicy::softmax_linear(tree, lgram, 0.7, rng.next_u64());
    const LanguageMdp mdp(Vocab{vocab}, horizon, features, std::move(ref));

    Rng attr_rng = rng.fork(id);
    const AttributeSet attrs =
        AttributeSet::random(mdp, n_attrs, 1.0, beta, attr_rng);
    const Eigen::VectorXd w = rng.simplex(n_attrs);

    BoundInstance inst =
        prepare_bound_instance(mdp, attrs, w, beta, beta_prime,
                               Eigen::VectorXd::Zero(n_attrs));
    report.max_fit_residual =
        std::max(report.max_fit_residual, inst.max_fit_residual);

    const long long last_node = cfg.all_states ? mdp.internal_count() : 1;
    for (long long node = 0; node < last_node; ++node) {
      SoupObjectiveConfig solve_cfg;
      solve_cfg.start_node = node;
      solve_cfg.seed = rng.next_u64();
      const SoupSolveResult solved = solve_soup_weights(
          mdp, inst.adapters, inst.r_w, beta, beta_prime, solve_cfg);
      inst.lambda = solved.lambda;

      CertificationRow row;
      row.instance_id = id;
      row.node = node;
      row.depth = mdp.tree().depth_of(node);
      row.beta = beta;
      row.beta_prime = beta_prime;
      row.preference = w;
      row.lambda = solved.lambda;
      row.kl = kl_bound_check(inst, node);
      row.value = value_bound_check(inst, node);
      if (!row.kl.pass) ++report.kl_failures;
      if (!row.value.pass) ++report.value_failures;
      if (row.value.degenerate_lambda) ++report.degenerate;
      report.rows.push_back(row);
    }
    ++report.instances;
  }
  return report;
}

}  // namespace souplab
