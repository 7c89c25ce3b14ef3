#include <cmath>

#include "doctest.h"
#include "souplab/souping.hpp"
#include "testutil.hpp"

using namespace souplab;
using namespace souplab::testutil;

TEST_SUITE_BEGIN("souping");

namespace {

LanguageMdp uniform_mdp(int vocab, int horizon, int lgram = 1) {
  TreeIndex tree(Vocab{vocab}, horizon);
  return LanguageMdp(Vocab{vocab}, horizon,
                     FeatureMap::tabular_lgram(tree, lgram),
                     ReferencePolicy::uniform(tree));
}

struct OracleSetup {
  LanguageMdp mdp;
  AttributeSet attrs;
  std::vector<SoftSolution> solutions;
  std::vector<LogitAdapter> adapters;
  double beta;
};

OracleSetup oracle_setup(Rng& rng, int n_attrs, int vocab = 3,
                         int horizon = 3) {
  auto inst = random_tabular_mdp(rng, vocab, horizon);
  const double beta = rng.uniform(0.5, 1.5);
  AttributeSet attrs = AttributeSet::random(inst.mdp, n_attrs, 1.0, beta, rng);
  OracleSetup setup{std::move(inst.mdp), std::move(attrs), {}, {}, beta};
  for (int k = 0; k < n_attrs; ++k) {
    setup.solutions.push_back(
        solve_soft(setup.mdp, setup.attrs.reward(k), beta));
    setup.adapters.push_back(
        LogitAdapter::from_solution(setup.mdp, setup.solutions.back(), k));
  }
  return setup;
}

}  // namespace

TEST_CASE("lambda zero returns the reference rows verbatim") {
  Rng rng(3);
  OracleSetup setup = oracle_setup(rng, 2);
  const SoupWeights sw{Eigen::VectorXd::Zero(2), setup.beta, setup.beta};
  for (long long node = 0; node < setup.mdp.internal_count(); ++node) {
    const State s = setup.mdp.tree().state_of(node);
    const Eigen::VectorXd row = soup_policy(setup.mdp, setup.adapters, sw, s);
    CHECK(row == setup.mdp.ref().probs().row(node).transpose());
  }
}

TEST_CASE("one-hot mixtures with magnitude beta'/beta recover specialists") {
  Rng rng(5);
  for (int trial = 0; trial < 8; ++trial) {
    OracleSetup setup = oracle_setup(rng, 3);
    const double beta_prime = setup.beta * rng.uniform(0.7, 2.0);
    for (int k = 0; k < 3; ++k) {
      Eigen::VectorXd lambda = Eigen::VectorXd::Zero(3);
      lambda[k] = beta_prime / setup.beta;
      const SoupWeights sw{lambda, setup.beta, beta_prime};
      const Eigen::MatrixXd soup =
          soup_policy_table(setup.mdp, setup.adapters, sw);
      CHECK((soup - setup.solutions[k].policy).cwiseAbs().maxCoeff() < 1e-9);
    }
  }
}

TEST_CASE("hand softmax for a half-weight adapter") {
  const LanguageMdp mdp = uniform_mdp(2, 1);
  Eigen::MatrixXd table(1, 2);
  table << 0.0, 1.0;
  std::vector<LogitAdapter> adapters{LogitAdapter::from_table(mdp, table, 1.0)};
  Eigen::VectorXd lambda(1);
  lambda << 0.5;
  const SoupWeights sw{lambda, 1.0, 1.0};
  const Eigen::VectorXd row = soup_policy(mdp, adapters, sw, State());
  CHECK(row[0] == doctest::Approx(0.37754).epsilon(1e-5));
  CHECK(row[1] == doctest::Approx(0.62246).epsilon(1e-5));
}

TEST_CASE("soup equals the mixed-logit form when temperatures match") {
  Rng rng(7);
  OracleSetup setup = oracle_setup(rng, 2);
  Eigen::VectorXd lambda(2);
  lambda << 0.4, -0.3;
  const SoupWeights sw{lambda, setup.beta, setup.beta};
  for (long long node = 0; node < setup.mdp.internal_count(); ++node) {
    // (1 - sum lambda) logit_ref + sum lambda_k (logit_ref + q_hat_k).
    Eigen::VectorXd logits =
        setup.mdp.ref().log_probs().row(node).transpose();
    for (int k = 0; k < 2; ++k) {
      logits += lambda[k] * setup.adapters[k].table().row(node).transpose();
    }
    const Eigen::VectorXd expected = softmax_row(logits);
    const Eigen::VectorXd actual = soup_policy(
        setup.mdp, setup.adapters, sw, setup.mdp.tree().state_of(node));
    CHECK((actual - expected).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("constraint violations are rejected") {
  Rng rng(9);
  OracleSetup setup = oracle_setup(rng, 2);
  Eigen::VectorXd lambda(2);
  lambda << 2.0, -2.0;
  const SoupWeights sw{lambda, setup.beta, setup.beta};  // sum|lambda| = 4 > 1
  CHECK_THROWS_AS(soup_policy(setup.mdp, setup.adapters, sw, State()),
                  ConstraintViolation);
}

TEST_CASE("project_lambda rescales onto the constraint") {
  Eigen::VectorXd feasible(2);
  feasible << 0.3, -0.2;
  CHECK(project_lambda(feasible, 1.0, 1.0).lambda == feasible);

  Eigen::VectorXd two(2);
  two << 2.0, 2.0;
  const SoupWeights a = project_lambda(two, 1.0, 2.0);
  CHECK(a.lambda[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(a.lambda[1] == doctest::Approx(1.0).epsilon(1e-15));

  Eigen::VectorXd mixed(2);
  mixed << 3.0, -1.0;
  const SoupWeights b = project_lambda(mixed, 1.0, 2.0);
  CHECK(b.lambda[0] == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(b.lambda[1] == doctest::Approx(-0.5).epsilon(1e-15));
  CHECK(b.feasible());
}

TEST_CASE("acceptance bound: identical policies give M = 1") {
  const LanguageMdp mdp = uniform_mdp(2, 2);
  Eigen::MatrixXd zero =
      Eigen::MatrixXd::Zero(mdp.internal_count(), mdp.vocab_size());
  std::vector<LogitAdapter> adapters{LogitAdapter::from_table(mdp, zero, 1.0)};
  Eigen::VectorXd lambda(1);
  lambda << 0.8;
  const SoupWeights sw{lambda, 1.0, 1.0};
  CHECK(acceptance_bound(mdp, adapters, sw, State(),
                         EnvelopeMode::KlHeuristic) ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK(acceptance_bound(mdp, adapters, sw, State(), EnvelopeMode::ExactMax) ==
        doctest::Approx(1.0).epsilon(1e-12));

  lambda << 0.0;
  const SoupWeights off{lambda, 1.0, 1.0};
  CHECK(acceptance_bound(mdp, adapters, off, State(),
                         EnvelopeMode::KlHeuristic) == 1.0);
  CHECK(acceptance_bound(mdp, adapters, off, State(), EnvelopeMode::ExactMax) ==
        1.0);
}

TEST_CASE("exact-max bound equals the hand ratio 2e/(1+e)") {
  const LanguageMdp mdp = uniform_mdp(2, 1);
  Eigen::MatrixXd table(1, 2);
  table << 0.0, 1.0;
  std::vector<LogitAdapter> adapters{LogitAdapter::from_table(mdp, table, 1.0)};
  Eigen::VectorXd lambda(1);
  lambda << 1.0;
  const SoupWeights sw{lambda, 1.0, 1.0};
  const double expected = 2.0 * std::exp(1.0) / (1.0 + std::exp(1.0));
  CHECK(acceptance_bound(mdp, adapters, sw, State(), EnvelopeMode::ExactMax) ==
        doctest::Approx(expected).epsilon(1e-12));
  CHECK(acceptance_bound(mdp, adapters, sw, State(), EnvelopeMode::ExactMax) ==
        doctest::Approx(1.46212).epsilon(1e-5));
}

TEST_CASE("exact-max dominates every per-action ratio") {
  Rng rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    OracleSetup setup = oracle_setup(rng, 2);
    Eigen::VectorXd lambda = rng.normal_vector(2);
    lambda = project_lambda(lambda, setup.beta, setup.beta).lambda;
    const SoupWeights sw{lambda, setup.beta, setup.beta};
    for (long long node = 0; node < setup.mdp.internal_count(); ++node) {
      const Eigen::VectorXd ratios =
          acceptance_ratios(setup.mdp, setup.adapters, sw, node);
      const double bound =
          acceptance_bound(setup.mdp, setup.adapters, sw,
                           setup.mdp.tree().state_of(node),
                           EnvelopeMode::ExactMax);
      CHECK(ratios.maxCoeff() <= bound * (1 + 1e-12));
    }
  }
}

TEST_CASE("rejection with lambda zero always accepts the reference draw") {
  const LanguageMdp mdp = uniform_mdp(3, 2);
  Eigen::MatrixXd zero =
      Eigen::MatrixXd::Zero(mdp.internal_count(), mdp.vocab_size());
  std::vector<LogitAdapter> adapters{LogitAdapter::from_table(mdp, zero, 1.0)};
  const SoupWeights sw{Eigen::VectorXd::Zero(1), 1.0, 1.0};
  Rng rng(13);
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(3);
  const int n = 30000;
  for (int i = 0; i < n; ++i) {
    const RejectionSample s = rejection_sample(mdp, adapters, sw, State(), rng);
    CHECK(s.tries == 1);
    CHECK(!s.fell_back);
    counts[s.token] += 1.0;
  }
  for (int a = 0; a < 3; ++a) {
    CHECK(std::abs(counts[a] / n - 1.0 / 3) < 0.01);
  }
}

TEST_CASE("rejection matches the explicit soup on the hand instance") {
  const LanguageMdp mdp = uniform_mdp(2, 1);
  Eigen::MatrixXd table(1, 2);
  table << 0.0, 1.0;
  std::vector<LogitAdapter> adapters{LogitAdapter::from_table(mdp, table, 1.0)};
  Eigen::VectorXd lambda(1);
  lambda << 1.0;
  const SoupWeights sw{lambda, 1.0, 1.0};
  Rng rng(17);
  int ones = 0;
  const int n = 100000;
  int clamped = 0;
  for (int i = 0; i < n; ++i) {
    const RejectionSample s = rejection_sample(mdp, adapters, sw, State(), rng);
    clamped += s.clamped;
    if (s.token == 1) ++ones;
  }
  const double sigma1 = 1.0 / (1.0 + std::exp(-1.0));
  CHECK(std::abs(ones / double(n) - sigma1) < 0.01);
  CHECK(clamped == 0);
}

TEST_CASE("empirical rejection distribution is close in total variation") {
  Rng rng(19);
  OracleSetup setup = oracle_setup(rng, 2);
  Eigen::VectorXd lambda(2);
  lambda << 0.6, -0.4;
  lambda = project_lambda(lambda, setup.beta, setup.beta).lambda;
  const SoupWeights sw{lambda, setup.beta, setup.beta};
  const Eigen::VectorXd target =
      soup_policy(setup.mdp, setup.adapters, sw, State());
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(setup.mdp.vocab_size());
  const int n = 50000;
  int clamped = 0;
  for (int i = 0; i < n; ++i) {
    const RejectionSample s =
        rejection_sample(setup.mdp, setup.adapters, sw, State(), rng);
    counts[s.token] += 1.0;
    clamped += s.clamped;
  }
  CHECK(clamped == 0);
  const double tv = 0.5 * (counts / n - target).cwiseAbs().sum();
  CHECK(tv < 0.02);
  // The closed-form realized distribution is the soup exactly.
  const Eigen::VectorXd realized =
      rejection_distribution(setup.mdp, setup.adapters, sw, 0);
  CHECK((realized - target).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("kl-heuristic envelope can clamp; bias is measured") {
  // A sharply-specialized adapter under a negative weight makes the heuristic
  // envelope undershoot the true ratio.
  const LanguageMdp mdp = uniform_mdp(2, 1);
  Eigen::MatrixXd table(1, 2);
  table << 0.0, 4.0;
  std::vector<LogitAdapter> adapters{LogitAdapter::from_table(mdp, table, 1.0)};
  Eigen::VectorXd lambda(1);
  lambda << -1.0;
  const SoupWeights sw{lambda, 1.0, 1.0};
  RejectionOptions opts;
  opts.envelope = EnvelopeMode::KlHeuristic;
  const Eigen::VectorXd ratios = acceptance_ratios(mdp, adapters, sw, 0);
  const double envelope =
      acceptance_bound(mdp, adapters, sw, State(), EnvelopeMode::KlHeuristic);
  REQUIRE(ratios.maxCoeff() > envelope);

  Rng rng(23);
  int clamped = 0;
  for (int i = 0; i < 5000; ++i) {
    clamped += rejection_sample(mdp, adapters, sw, State(), rng, opts).clamped;
  }
  CHECK(clamped > 0);
  const Eigen::VectorXd realized =
      rejection_distribution(mdp, adapters, sw, 0, opts);
  const Eigen::VectorXd target = soup_policy(mdp, adapters, sw, State());
  const double tv_gap = 0.5 * (realized - target).cwiseAbs().sum();
  CHECK(tv_gap > 0.0);  // recorded, not hidden
}

TEST_CASE("exhausted tries fall back to explicit sampling") {
  const LanguageMdp mdp = uniform_mdp(2, 1);
  Eigen::MatrixXd table(1, 2);
  table << 0.0, 8.0;
  std::vector<LogitAdapter> adapters{LogitAdapter::from_table(mdp, table, 1.0)};
  Eigen::VectorXd lambda(1);
  lambda << 1.0;
  const SoupWeights sw{lambda, 1.0, 1.0};
  RejectionOptions opts;
  opts.max_tries = 1;
  Rng rng(29);
  int fallbacks = 0;
  for (int i = 0; i < 2000; ++i) {
    const RejectionSample s =
        rejection_sample(mdp, adapters, sw, State(), rng, opts);
    CHECK(s.token >= 0);
    if (s.fell_back) ++fallbacks;
  }
  CHECK(fallbacks > 0);
}

TEST_CASE("heuristic exponent coincides with the targeted one at unit "
          "temperatures") {
  Rng rng(37);
  OracleSetup setup = oracle_setup(rng, 2);
  Eigen::VectorXd lambda(2);
  lambda << 0.5, -0.2;
  // At beta = beta' = 1 both scalings are the identity.
  const SoupWeights unit{lambda, 1.0, 1.0};
  for (long long node = 0; node < setup.mdp.internal_count(); ++node) {
    const Eigen::VectorXd targeted = acceptance_ratios(
        setup.mdp, setup.adapters, unit, node, ExponentMode::Targeted);
    const Eigen::VectorXd heuristic = acceptance_ratios(
        setup.mdp, setup.adapters, unit, node, ExponentMode::Heuristic);
    CHECK((targeted - heuristic).cwiseAbs().maxCoeff() < 1e-15);
  }
  // Away from unit temperatures the exponents differ by beta^2/beta' in the
  // log: ratio_h = ratio_t^(beta'/beta^2).
  const double beta = 0.6, beta_prime = 0.9;
  const SoupWeights scaled{lambda, beta, beta_prime};
  const Eigen::VectorXd targeted = acceptance_ratios(
      setup.mdp, setup.adapters, scaled, 0, ExponentMode::Targeted);
  const Eigen::VectorXd heuristic = acceptance_ratios(
      setup.mdp, setup.adapters, scaled, 0, ExponentMode::Heuristic);
  const double power = beta_prime / (beta * beta);
  for (int a = 0; a < setup.mdp.vocab_size(); ++a) {
    CHECK(heuristic[a] ==
          doctest::Approx(std::pow(targeted[a], power)).epsilon(1e-10));
  }
}

TEST_CASE("parameter averaging equals explicit souping for simplex weights") {
  Rng rng(31);
  const LanguageMdp mdp = uniform_mdp(3, 3);
  const double beta = 1.1;
  std::vector<LogitAdapter> adapters;
  for (int k = 0; k < 3; ++k) {
    adapters.push_back(LogitAdapter::linear(
        mdp, rng.normal_vector(mdp.features().dim()), beta, k));
  }
  const Eigen::VectorXd weights = rng.simplex(3);
  const LogitAdapter averaged = average_adapters(mdp, adapters, weights);
  const SoupWeights sw{weights, beta, beta};
  const Eigen::MatrixXd from_average = averaged.policy_table(mdp);
  const Eigen::MatrixXd from_soup = soup_policy_table(mdp, adapters, sw);
  CHECK((from_average - from_soup).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_SUITE_END();
