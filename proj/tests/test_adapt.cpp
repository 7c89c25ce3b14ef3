#include <Eigen/Dense>
#include <cmath>

#include "doctest.h"
#include "souplab/adapt.hpp"
#include "testutil.hpp"

using namespace souplab;
using namespace souplab::testutil;

TEST_SUITE_BEGIN("adapt");

namespace {

FeedbackEvent event1(double x) {
  FeedbackEvent e;
  e.delta = Eigen::VectorXd::Constant(1, x);
  return e;
}

FeedbackEvent event2(double x, double y) {
  FeedbackEvent e;
  e.delta.resize(2);
  e.delta << x, y;
  return e;
}

struct OracleSetup {
  LanguageMdp mdp;
  AttributeSet attrs;
  std::vector<LogitAdapter> adapters;
  double beta;
};

OracleSetup oracle_setup(Rng& rng, int n_attrs, int vocab = 3,
                         int horizon = 3) {
  auto inst = random_tabular_mdp(rng, vocab, horizon);
  const double beta = rng.uniform(0.5, 1.5);
  AttributeSet attrs = AttributeSet::random(inst.mdp, n_attrs, 1.0, beta, rng);
  OracleSetup setup{std::move(inst.mdp), std::move(attrs), {}, beta};
  for (int k = 0; k < n_attrs; ++k) {
    setup.adapters.push_back(LogitAdapter::from_solution(
        setup.mdp, solve_soft(setup.mdp, setup.attrs.reward(k), beta), k));
  }
  return setup;
}

}  // namespace

TEST_CASE("single positive event: fixed point lambda = 1 - sigma(lambda)") {
  const Eigen::VectorXd lambda = lambda_bt_batch({event2(1.0, 0.0)}, 1.0);
  CHECK(lambda[0] == doctest::Approx(0.4011).epsilon(1e-3));
  CHECK(lambda[0] == doctest::Approx(1.0 - sigmoid(lambda[0])).epsilon(1e-9));
  CHECK(lambda[1] == 0.0);
}

TEST_CASE("symmetric events give lambda zero") {
  std::vector<FeedbackEvent> events;
  Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    const double x = rng.normal();
    const double y = rng.normal();
    events.push_back(event2(x, y));
    events.push_back(event2(-x, -y));
  }
  const Eigen::VectorXd lambda = lambda_bt_batch(events, 1.0);
  CHECK(lambda.cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("huge prior precision pins lambda near zero") {
  std::vector<FeedbackEvent> events;
  Rng rng(5);
  for (int i = 0; i < 100; ++i) events.push_back(event1(1.0 + rng.uniform()));
  const Eigen::VectorXd lambda = lambda_bt_batch(events, 1e6);
  CHECK(lambda.cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("batch MAP rejects empty input") {
  CHECK_THROWS_AS(lambda_bt_batch({}, 1.0), EmptyDataset);
}

TEST_CASE("damped Newton decreases the objective monotonically") {
  // Re-run the optimizer by hand and track the penalized objective.
  Rng rng(7);
  std::vector<FeedbackEvent> events;
  for (int i = 0; i < 60; ++i) {
    events.push_back(event2(rng.normal() + 0.8, rng.normal() - 0.2));
  }
  auto objective = [&](const Eigen::VectorXd& l) {
    double acc = 0.5 * l.squaredNorm();
    for (const auto& e : events) {
      const double z = l.dot(e.delta);
      acc += std::log1p(std::exp(-std::abs(z))) + std::max(-z, 0.0);
    }
    return acc;
  };
  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(2);
  double current = objective(lambda);
  for (int iter = 0; iter < 20; ++iter) {
    Eigen::VectorXd grad = lambda;
    Eigen::MatrixXd hess = Eigen::MatrixXd::Identity(2, 2);
    for (const auto& e : events) {
      const double s = sigmoid(lambda.dot(e.delta));
      grad -= (1.0 - s) * e.delta;
      hess += s * (1.0 - s) * e.delta * e.delta.transpose();
    }
    Eigen::VectorXd step = hess.ldlt().solve(grad);
    double damping = 1.0;
    while (objective(lambda - damping * step) > current && damping > 1e-9) {
      damping *= 0.5;
    }
    lambda -= damping * step;
    const double next = objective(lambda);
    CHECK(next <= current + 1e-12);
    current = next;
  }
  // And the library solution matches this optimum.
  const Eigen::VectorXd solved = lambda_bt_batch(events, 1.0);
  CHECK((solved - lambda).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("svi hand update from the standard prior") {
  VariationalPosterior prior = VariationalPosterior::standard(2);
  const VariationalPosterior post = svi_update(prior, event2(1.0, 0.0), 1);
  // sigma = 0.5, precision gains 0.25 on the first coordinate:
  // S = diag(0.8, 1), mean = (0.4, 0).
  CHECK(std::abs(post.cov(0, 0) - 0.8) < 1e-12);
  CHECK(std::abs(post.cov(1, 1) - 1.0) < 1e-12);
  CHECK(std::abs(post.cov(0, 1)) < 1e-12);
  CHECK(std::abs(post.mean[0] - 0.4) < 1e-12);
  CHECK(std::abs(post.mean[1]) < 1e-12);
}

TEST_CASE("svi single step matches direct precision-space computation") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const int k = rng.uniform_int(1, 4);
    // Random SPD covariance.
    Eigen::MatrixXd a(k, k);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = rng.normal();
    VariationalPosterior prior{rng.normal_vector(k),
                               a * a.transpose() +
                                   Eigen::MatrixXd::Identity(k, k)};
    FeedbackEvent e;
    e.delta = rng.normal_vector(k);

    const VariationalPosterior post = svi_update(prior, e, 1);

    const double s = sigmoid(prior.mean.dot(e.delta));
    const Eigen::MatrixXd prec_new =
        prior.cov.inverse() + s * (1.0 - s) * e.delta * e.delta.transpose();
    const Eigen::MatrixXd cov_new = prec_new.inverse();
    const Eigen::VectorXd mean_new = prior.mean + (1.0 - s) * cov_new * e.delta;
    CHECK((post.cov - cov_new).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((post.mean - mean_new).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("zero-delta events leave the posterior unchanged") {
  VariationalPosterior prior = VariationalPosterior::standard(2);
  const VariationalPosterior post = svi_update(prior, event2(0.0, 0.0), 1);
  CHECK(post.mean == prior.mean);
  CHECK(post.cov == prior.cov);
}

TEST_CASE("posterior covariance trace never grows") {
  Rng rng(13);
  VariationalPosterior post = VariationalPosterior::standard(3);
  double trace = post.cov.trace();
  for (int i = 0; i < 300; ++i) {
    FeedbackEvent e;
    e.delta = rng.normal_vector(3);
    post = svi_update(post, e, rng.uniform_int(1, 3));
    const double next = post.cov.trace();
    CHECK(next <= trace + 1e-12);
    trace = next;
    Eigen::LLT<Eigen::MatrixXd> llt(post.cov);
    CHECK(llt.info() == Eigen::Success);
  }
}

TEST_CASE("sequential posterior tracks the batch MAP on a long stream") {
  Rng rng(17);
  const double true_lambda = 1.5;
  std::vector<FeedbackEvent> events;
  VariationalPosterior post = VariationalPosterior::standard(1);
  for (int i = 0; i < 500; ++i) {
    const double x = rng.normal();
    const bool keep = rng.uniform() < sigmoid(true_lambda * x);
    const FeedbackEvent e = event1(keep ? x : -x);
    events.push_back(e);
    post = svi_update(post, e, 2);
  }
  const Eigen::VectorXd batch = lambda_bt_batch(events, 1.0);
  CHECK(std::abs(post.mean[0] - batch[0]) < 0.05);
}

TEST_CASE("feedback events from oracle adapters are the true return gaps") {
  Rng rng(19);
  OracleSetup setup = oracle_setup(rng, 2);
  for (int i = 0; i < 10; ++i) {
    const Trajectory w =
        sample_trajectory(setup.mdp, setup.mdp.ref().probs(), State(), rng);
    const Trajectory l =
        sample_trajectory(setup.mdp, setup.mdp.ref().probs(), State(), rng);
    const FeedbackEvent e =
        make_feedback_event(setup.mdp, setup.adapters, w, l, setup.beta);
    for (int k = 0; k < 2; ++k) {
      const double truth =
          trajectory_reward(setup.mdp, setup.attrs.reward(k), w) -
          trajectory_reward(setup.mdp, setup.attrs.reward(k), l);
      CHECK(e.delta[k] == doctest::Approx(truth / setup.beta).epsilon(1e-9));
    }
  }
}

TEST_CASE("solver dominates every one-hot specialist") {
  Rng rng(23);
  for (int trial = 0; trial < 5; ++trial) {
    OracleSetup setup = oracle_setup(rng, 3);
    const double beta_prime = setup.beta * rng.uniform(0.9, 1.8);
    const Eigen::VectorXd w = rng.simplex(3);
    const RewardFn r_w =
        personalized_reward(setup.mdp, setup.attrs, PreferenceVector(w));
    SoupObjectiveConfig cfg;
    cfg.seed = rng.next_u64();
    const SoupSolveResult best = solve_soup_weights(
        setup.mdp, setup.adapters, r_w, setup.beta, beta_prime, cfg);
    CHECK(setup.beta * best.lambda.cwiseAbs().sum() <= beta_prime + 1e-12);
    for (int k = 0; k < 3; ++k) {
      Eigen::VectorXd onehot = Eigen::VectorXd::Zero(3);
      onehot[k] = beta_prime / setup.beta;
      const double value = soup_objective(setup.mdp, setup.adapters, r_w,
                                          onehot, setup.beta, beta_prime, cfg);
      CHECK(best.value >= value - 1e-7);
    }
  }
}

TEST_CASE("one-hot preferences are solved by the matching specialist") {
  Rng rng(29);
  OracleSetup setup = oracle_setup(rng, 2);
  const double beta_prime = setup.beta;
  Eigen::VectorXd w(2);
  w << 1.0, 0.0;
  const RewardFn r_w =
      personalized_reward(setup.mdp, setup.attrs, PreferenceVector(w));
  SoupObjectiveConfig cfg;
  const SoupSolveResult best = solve_soup_weights(
      setup.mdp, setup.adapters, r_w, setup.beta, beta_prime, cfg);
  // The specialist's value is optimal for its own preference: the solver
  // must reach it (up to ascent tolerance).
  const SoftSolution tailored = solve_soft(setup.mdp, r_w, setup.beta);
  CHECK(best.value == doctest::Approx(tailored.v[0]).epsilon(1e-6));
}

TEST_CASE("zero reward is solved by lambda zero with value zero") {
  Rng rng(31);
  OracleSetup setup = oracle_setup(rng, 2);
  const RewardFn zero = RewardFn::from_table(
      setup.mdp, Eigen::MatrixXd::Zero(setup.mdp.internal_count(),
                                       setup.mdp.vocab_size()));
  SoupObjectiveConfig cfg;
  const SoupSolveResult best = solve_soup_weights(
      setup.mdp, setup.adapters, zero, setup.beta, setup.beta, cfg);
  CHECK(best.lambda.cwiseAbs().maxCoeff() == 0.0);
  CHECK(best.value == 0.0);
}

TEST_CASE("three-attribute solver is not beaten by random search") {
  Rng rng(41);
  for (int trial = 0; trial < 3; ++trial) {
    OracleSetup setup = oracle_setup(rng, 3, 3, 3);
    const double beta_prime = setup.beta * rng.uniform(0.9, 1.6);
    const Eigen::VectorXd w = rng.simplex(3);
    const RewardFn r_w =
        personalized_reward(setup.mdp, setup.attrs, PreferenceVector(w));
    SoupObjectiveConfig cfg;
    cfg.seed = rng.next_u64();
    const SoupSolveResult best = solve_soup_weights(
        setup.mdp, setup.adapters, r_w, setup.beta, beta_prime, cfg);
    double random_best = -std::numeric_limits<double>::infinity();
    for (int draw = 0; draw < 20000; ++draw) {
      Eigen::VectorXd lambda(3);
      for (int k = 0; k < 3; ++k) lambda[k] = rng.uniform(-1.2, 1.2);
      lambda = project_lambda(lambda, setup.beta, beta_prime).lambda;
      random_best = std::max(
          random_best, soup_objective(setup.mdp, setup.adapters, r_w, lambda,
                                      setup.beta, beta_prime, cfg));
    }
    CHECK(best.value >= random_best - 1e-6);
  }
}

TEST_CASE("two-attribute solver matches a dense grid oracle") {
  Rng rng(37);
  OracleSetup setup = oracle_setup(rng, 2, 3, 2);
  const double beta_prime = setup.beta * 1.3;
  const Eigen::VectorXd w = rng.simplex(2);
  const RewardFn r_w =
      personalized_reward(setup.mdp, setup.attrs, PreferenceVector(w));
  SoupObjectiveConfig cfg;
  const SoupSolveResult best = solve_soup_weights(
      setup.mdp, setup.adapters, r_w, setup.beta, beta_prime, cfg);

  const double radius = beta_prime / setup.beta;
  double grid_best = -std::numeric_limits<double>::infinity();
  const int n = 201;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      Eigen::VectorXd lambda(2);
      lambda << -radius + 2.0 * radius * i / (n - 1),
          -radius + 2.0 * radius * j / (n - 1);
      if (setup.beta * lambda.cwiseAbs().sum() > beta_prime) continue;
      grid_best = std::max(grid_best,
                           soup_objective(setup.mdp, setup.adapters, r_w,
                                          lambda, setup.beta, beta_prime, cfg));
    }
  }
  CHECK(grid_best - best.value < 1e-4);
}

TEST_SUITE_END();
