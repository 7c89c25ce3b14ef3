#include "souplab/adapt.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>

namespace souplab {

namespace {

double softplus(double x) {
  return std::log1p(std::exp(-std::abs(x))) + std::max(x, 0.0);
}

double smoothed_l1(const Eigen::VectorXd& lambda, double eps) {
  double acc = 0.0;
  for (Eigen::Index k = 0; k < lambda.size(); ++k) {
    acc += std::sqrt(lambda[k] * lambda[k] + eps * eps);
  }
  return acc;
}

}  // namespace

VariationalPosterior VariationalPosterior::standard(int k) {
  return {Eigen::VectorXd::Zero(k), Eigen::MatrixXd::Identity(k, k)};
}

Eigen::VectorXd lambda_bt_batch(const std::vector<FeedbackEvent>& events,
                                double prior_precision) {
  if (events.empty()) throw EmptyDataset("no feedback events");
  if (!(prior_precision > 0.0)) throw Error("prior precision must be positive");
  const int k = static_cast<int>(events.front().delta.size());
  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(k);

  auto objective = [&](const Eigen::VectorXd& l) {
    double acc = 0.5 * prior_precision * l.squaredNorm();
    for (const auto& e : events) acc += softplus(-l.dot(e.delta));
    return acc;
  };

  double current = objective(lambda);
  for (int iter = 0; iter < 500; ++iter) {
    Eigen::VectorXd grad = prior_precision * lambda;
    Eigen::MatrixXd hess =
        prior_precision * Eigen::MatrixXd::Identity(k, k);
    for (const auto& e : events) {
      const double s = sigmoid(lambda.dot(e.delta));
      grad -= (1.0 - s) * e.delta;
      hess += s * (1.0 - s) * e.delta * e.delta.transpose();
    }
    if (grad.norm() < 1e-9) break;
    const Eigen::VectorXd step = hess.ldlt().solve(grad);
    double damping = 1.0;
    // Backtrack until the (convex) objective decreases.
    while (damping > 1e-12) {
      const Eigen::VectorXd candidate = lambda - damping * step;
      const double value = objective(candidate);
      if (value <= current) {
        lambda = candidate;
        current = value;
        break;
      }
      damping *= 0.5;
    }
  }

  Eigen::VectorXd grad = prior_precision * lambda;
  for (const auto& e : events) {
    grad -= (1.0 - sigmoid(lambda.dot(e.delta))) * e.delta;
  }
  if (grad.norm() >= 1e-8) {
    throw Divergence("batch logistic regression failed to converge");
  }
  return lambda;
}

VariationalPosterior svi_update(const VariationalPosterior& post,
                                const FeedbackEvent& event, int inner_iters) {
  if (inner_iters < 1) throw Error("inner_iters must be at least 1");
  const Eigen::VectorXd& delta = event.delta;
  if (delta.size() != post.mean.size()) {
    throw Error("event dimension does not match posterior");
  }
  if (!delta.allFinite()) throw Error("event must be finite");

  Eigen::LLT<Eigen::MatrixXd> base_llt(post.cov);
  if (base_llt.info() != Eigen::Success) {
    throw SingularUpdate("posterior covariance is not positive definite");
  }

  VariationalPosterior next = post;
  for (int pass = 0; pass < inner_iters; ++pass) {
    const double s = sigmoid(next.mean.dot(delta));
    const double weight = s * (1.0 - s);
    // Covariance via Sherman-Morrison on the rank-1 precision update.
    const Eigen::VectorXd cd = post.cov * delta;
    const double denom = 1.0 + weight * delta.dot(cd);
    if (!(denom > 0.0)) {
      throw SingularUpdate("rank-1 update lost positive definiteness");
    }
    next.cov = post.cov - (weight / denom) * (cd * cd.transpose());
    next.cov = 0.5 * (next.cov + next.cov.transpose());
    // Newton step on the local objective from the previous posterior:
    // grad = (1 - sigma) delta - S_prev^{-1} (mean - mean_prev).
    const Eigen::VectorXd pull = base_llt.solve(next.mean - post.mean);
    next.mean = next.mean + next.cov * ((1.0 - s) * delta - pull);
  }

  Eigen::LLT<Eigen::MatrixXd> check(next.cov);
  if (check.info() != Eigen::Success) {
    throw SingularUpdate("updated covariance is not positive definite");
  }
  return next;
}

FeedbackEvent make_feedback_event(const LanguageMdp& mdp,
                                  const std::vector<LogitAdapter>& adapters,
                                  const Trajectory& winner,
                                  const Trajectory& loser, double beta) {
  FeedbackEvent e;
  e.delta.resize(adapters.size());
  for (std::size_t k = 0; k < adapters.size(); ++k) {
    e.delta[k] = (trajectory_return(mdp, adapters[k], winner, beta) -
                  trajectory_return(mdp, adapters[k], loser, beta)) /
                 beta;
  }
  return e;
}

double soup_objective(const LanguageMdp& mdp,
                      const std::vector<LogitAdapter>& adapters,
                      const RewardFn& r_w, const Eigen::VectorXd& lambda,
                      double beta, double beta_prime,
                      const SoupObjectiveConfig& cfg) {
  SoupWeights sw{lambda, beta, beta_prime};
  if (!sw.feasible()) {
    throw ConstraintViolation("lambda violates the temperature constraint");
  }
  const Eigen::MatrixXd policy = soup_policy_table(mdp, adapters, sw);
  const double kl_coeff =
      beta_prime / smoothed_l1(lambda, cfg.abs_smooth_eps);
  return evaluate_policy(mdp, policy, r_w, kl_coeff)[cfg.start_node];
}

SoupSolveResult solve_soup_weights(const LanguageMdp& mdp,
                                   const std::vector<LogitAdapter>& adapters,
                                   const RewardFn& r_w, double beta,
                                   double beta_prime,
                                   const SoupObjectiveConfig& cfg) {
  if (adapters.empty()) throw Error("need at least one adapter");
  const int k = static_cast<int>(adapters.size());
  const double radius = beta_prime / beta;

  auto value_of = [&](const Eigen::VectorXd& l) {
    return soup_objective(mdp, adapters, r_w, l, beta, beta_prime, cfg);
  };

  std::vector<Eigen::VectorXd> starts;
  starts.push_back(Eigen::VectorXd::Zero(k));
  for (int i = 0; i < k; ++i) {
    Eigen::VectorXd onehot = Eigen::VectorXd::Zero(k);
    onehot[i] = radius;
    starts.push_back(onehot);
    starts.push_back(-onehot);
  }
  Rng rng(cfg.seed);
  while (static_cast<int>(starts.size()) < cfg.restarts) {
    Eigen::VectorXd l = rng.normal_vector(k);
    starts.push_back(project_lambda(l, beta, beta_prime).lambda);
  }

  // Derivative-free refinement: coordinate probes with a shrinking radius,
  // each probe projected onto the constraint set. Cleans up the residual
  // error the projected-gradient phase leaves near the boundary.
  auto polish = [&](Eigen::VectorXd lambda, double value) {
    double radius = 0.05;
    int evals = 0;
    while (radius > 1e-8 && evals < 20000) {
      bool improved = false;
      for (int i = 0; i < k; ++i) {
        for (double sign : {1.0, -1.0}) {
          Eigen::VectorXd probe = lambda;
          probe[i] += sign * radius;
          probe = project_lambda(probe, beta, beta_prime).lambda;
          const double v = value_of(probe);
          ++evals;
          if (v > value) {
            lambda = std::move(probe);
            value = v;
            improved = true;
          }
        }
      }
      if (!improved) radius *= 0.5;
    }
    return std::pair<Eigen::VectorXd, double>{std::move(lambda), value};
  };

  SoupSolveResult best;
  best.value = -std::numeric_limits<double>::infinity();
  bool any_improved = false;

  for (const auto& start : starts) {
    Eigen::VectorXd lambda = start;
    double current = value_of(lambda);
    const double start_value = current;
    double step = cfg.init_step;
    for (int iter = 0; iter < cfg.max_iters && step > cfg.min_step; ++iter) {
      // Central-difference gradient; probes are projected back to the
      // feasible set so the objective stays defined.
      Eigen::VectorXd grad(k);
      for (int i = 0; i < k; ++i) {
        Eigen::VectorXd hi = lambda, lo = lambda;
        hi[i] += cfg.fd_step;
        lo[i] -= cfg.fd_step;
        const Eigen::VectorXd hi_p = project_lambda(hi, beta, beta_prime).lambda;
        const Eigen::VectorXd lo_p = project_lambda(lo, beta, beta_prime).lambda;
        const double denom = hi_p[i] - lo_p[i];
        grad[i] = denom != 0.0
                      ? (value_of(hi_p) - value_of(lo_p)) / denom
                      : 0.0;
      }
      const double gnorm = grad.norm();
      if (gnorm < 1e-12) break;
      const Eigen::VectorXd candidate =
          project_lambda(lambda + (step / gnorm) * grad, beta, beta_prime)
              .lambda;
      const double cand_value = value_of(candidate);
      if (cand_value > current + 1e-14) {
        lambda = candidate;
        current = cand_value;
        step *= 1.3;
      } else {
        step *= 0.5;
      }
    }
    if (current > start_value + 1e-12) any_improved = true;
    // Ties break toward nonzero mixtures so degenerate lambda = 0 solutions
    // only appear when they are strictly best.
    const bool better =
        current > best.value + 1e-12 ||
        (current > best.value - 1e-12 &&
         lambda.cwiseAbs().sum() > best.lambda.cwiseAbs().sum() + 1e-12);
    if (best.lambda.size() == 0 || better) {
      best.lambda = lambda;
      best.value = current;
    }
  }
  auto [polished, polished_value] = polish(best.lambda, best.value);
  if (polished_value > best.value) {
    best.lambda = std::move(polished);
    best.value = polished_value;
    any_improved = true;
  }
  best.ascended = any_improved;
  return best;
}

}  // namespace souplab
