#include "souplab/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>

#include "json.hpp"

namespace souplab {

namespace {

using nlohmann::json;

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", x);
  return buf;
}

json vec_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

// Exact value of the souped policy from a node under the adaptive KL
// strength; lambda = 0 degenerates to the plain reference expectation.
double soup_value_exact(const LanguageMdp& mdp,
                        const std::vector<LogitAdapter>& adapters,
                        const RewardFn& r, const Eigen::VectorXd& lambda,
                        double beta, double beta_prime, long long node = 0) {
  const double l1 = lambda.cwiseAbs().sum();
  if (l1 < 1e-12) {
    return evaluate_policy(mdp, mdp.ref().probs(), r, 0.0)[node];
  }
  const SoupWeights sw{lambda, beta, beta_prime};
  const Eigen::MatrixXd policy = soup_policy_table(mdp, adapters, sw);
  return evaluate_policy(mdp, policy, r, beta_prime / l1)[node];
}

Eigen::MatrixXd rejection_policy_table(const LanguageMdp& mdp,
                                       const std::vector<LogitAdapter>& adapters,
                                       const SoupWeights& sw,
                                       const RejectionOptions& opts) {
  Eigen::MatrixXd out(mdp.internal_count(), mdp.vocab_size());
  for (long long node = 0; node < mdp.internal_count(); ++node) {
    out.row(node) =
        rejection_distribution(mdp, adapters, sw, node, opts).transpose();
  }
  return out;
}

}  // namespace

LanguageMdp make_mdp(const MdpSpec& spec, std::uint64_t seed) {
  const TreeIndex tree(Vocab{spec.vocab}, spec.horizon, spec.node_budget);
  FeatureMap features = [&] {
    if (spec.features == "random-linear") {
      return FeatureMap::random_linear(tree, spec.lgram, spec.feature_dim,
                                       seed ^ 0x5eedfeedULL);
    }
    if (spec.features == "composite") {
      return FeatureMap::composite(
          {FeatureMap::tabular_lgram(tree, spec.lgram),
           FeatureMap::random_linear(tree, spec.lgram, spec.feature_dim,
                                     seed ^ 0x5eedfeedULL)});
    }
    return FeatureMap::tabular_lgram(tree, spec.lgram);
  }();
  ReferencePolicy ref =
      spec.ref_policy == "softmax-linear"
          ? ReferencePolicy::softmax_linear(tree, spec.lgram, spec.ref_scale,
                                            seed ^ 0xafe110ULL)
          : ReferencePolicy::uniform(tree);
  return LanguageMdp(Vocab{spec.vocab}, spec.horizon, std::move(features),
                     std::move(ref), spec.node_budget);
}

ScenarioConfig scenario_config_from_json(const std::string& text) {
  const json j = json::parse(text);
  ScenarioConfig cfg;
  cfg.scenario_id = j.value("scenario_id", cfg.scenario_id);
  cfg.beta = j.value("beta", cfg.beta);
  cfg.beta_prime = j.value("beta_prime", cfg.beta_prime);
  cfg.seed = j.value("seed", cfg.seed);
  if (j.contains("mdp")) {
    const json& m = j["mdp"];
    cfg.mdp.vocab = m.value("vocab", cfg.mdp.vocab);
    cfg.mdp.horizon = m.value("horizon", cfg.mdp.horizon);
    cfg.mdp.lgram = m.value("lgram", cfg.mdp.lgram);
    cfg.mdp.features = m.value("features", cfg.mdp.features);
    cfg.mdp.feature_dim = m.value("feature_dim", cfg.mdp.feature_dim);
    cfg.mdp.ref_policy = m.value("ref_policy", cfg.mdp.ref_policy);
    cfg.mdp.ref_scale = m.value("ref_scale", cfg.mdp.ref_scale);
    cfg.mdp.node_budget = m.value("node_budget", cfg.mdp.node_budget);
  }
  if (j.contains("attributes")) {
    const json& a = j["attributes"];
    cfg.attributes.count = a.value("count", cfg.attributes.count);
    cfg.attributes.scale = a.value("scale", cfg.attributes.scale);
  }
  if (j.contains("offline")) {
    const json& o = j["offline"];
    cfg.offline.n_train_weights =
        o.value("n_train_weights", cfg.offline.n_train_weights);
    cfg.offline.spread = o.value("spread", cfg.offline.spread);
    cfg.offline.pairs_per_specialist =
        o.value("pairs_per_specialist", cfg.offline.pairs_per_specialist);
    cfg.offline.pair_mode = o.value("pair_mode", cfg.offline.pair_mode);
    cfg.offline.method = o.value("method", cfg.offline.method);
    cfg.offline.lr = o.value("lr", cfg.offline.lr);
    cfg.offline.steps = o.value("steps", cfg.offline.steps);
    cfg.offline.l2 = o.value("l2", cfg.offline.l2);
    cfg.offline.oracle = o.value("oracle", cfg.offline.oracle);
  }
  if (j.contains("online")) {
    const json& o = j["online"];
    cfg.online.n_users = o.value("n_users", cfg.online.n_users);
    cfg.online.events_per_user =
        o.value("events_per_user", cfg.online.events_per_user);
    cfg.online.checkpoint_every =
        o.value("checkpoint_every", cfg.online.checkpoint_every);
    cfg.online.adaptation = o.value("adaptation", cfg.online.adaptation);
    cfg.online.svi_inner_iters =
        o.value("svi_inner_iters", cfg.online.svi_inner_iters);
    cfg.online.prior_precision =
        o.value("prior_precision", cfg.online.prior_precision);
    cfg.online.feedback = o.value("feedback", cfg.online.feedback);
    cfg.online.user_mode = o.value("user_mode", cfg.online.user_mode);
  }
  if (j.contains("souping")) {
    const json& s = j["souping"];
    cfg.souping.psoups_weights =
        s.value("psoups_weights", cfg.souping.psoups_weights);
    cfg.souping.psoups_tuning_draws =
        s.value("psoups_tuning_draws", cfg.souping.psoups_tuning_draws);
    cfg.souping.implicit_envelope =
        s.value("implicit_envelope", cfg.souping.implicit_envelope);
  }
  if (j.contains("ablation")) {
    cfg.ablation.enabled = j["ablation"].value("enabled", cfg.ablation.enabled);
    cfg.ablation.repeats = j["ablation"].value("repeats", cfg.ablation.repeats);
  }
  if (j.contains("certification")) {
    cfg.certification.enabled =
        j["certification"].value("enabled", cfg.certification.enabled);
    cfg.certification.instances =
        j["certification"].value("instances", cfg.certification.instances);
  }
  return cfg;
}

std::string scenario_config_to_json(const ScenarioConfig& cfg) {
  json j;
  j["scenario_id"] = cfg.scenario_id;
  j["beta"] = cfg.beta;
  j["beta_prime"] = cfg.beta_prime;
  j["seed"] = cfg.seed;
  j["mdp"] = {{"vocab", cfg.mdp.vocab},
              {"horizon", cfg.mdp.horizon},
              {"lgram", cfg.mdp.lgram},
              {"features", cfg.mdp.features},
              {"feature_dim", cfg.mdp.feature_dim},
              {"ref_policy", cfg.mdp.ref_policy},
              {"ref_scale", cfg.mdp.ref_scale},
              {"node_budget", cfg.mdp.node_budget}};
  j["attributes"] = {{"count", cfg.attributes.count},
                     {"scale", cfg.attributes.scale}};
  j["offline"] = {{"n_train_weights", cfg.offline.n_train_weights},
                  {"spread", cfg.offline.spread},
                  {"pairs_per_specialist", cfg.offline.pairs_per_specialist},
                  {"pair_mode", cfg.offline.pair_mode},
                  {"method", cfg.offline.method},
                  {"lr", cfg.offline.lr},
                  {"steps", cfg.offline.steps},
                  {"l2", cfg.offline.l2},
                  {"oracle", cfg.offline.oracle}};
  j["online"] = {{"n_users", cfg.online.n_users},
                 {"events_per_user", cfg.online.events_per_user},
                 {"checkpoint_every", cfg.online.checkpoint_every},
                 {"adaptation", cfg.online.adaptation},
                 {"svi_inner_iters", cfg.online.svi_inner_iters},
                 {"prior_precision", cfg.online.prior_precision},
                 {"feedback", cfg.online.feedback},
                 {"user_mode", cfg.online.user_mode}};
  j["souping"] = {{"psoups_weights", cfg.souping.psoups_weights},
                  {"psoups_tuning_draws", cfg.souping.psoups_tuning_draws},
                  {"implicit_envelope", cfg.souping.implicit_envelope}};
  j["ablation"] = {{"enabled", cfg.ablation.enabled},
                   {"repeats", cfg.ablation.repeats}};
  j["certification"] = {{"enabled", cfg.certification.enabled},
                        {"instances", cfg.certification.instances}};
  return j.dump(2);
}

RunReport run_scenario(const ScenarioConfig& cfg) {
  if (cfg.attributes.count < 1 || cfg.offline.n_train_weights < 1 ||
      cfg.online.n_users < 0 || !(cfg.beta > 0.0) || !(cfg.beta_prime > 0.0)) {
    throw Error("invalid scenario configuration");
  }
  const LanguageMdp mdp = make_mdp(cfg.mdp, cfg.seed);
  Rng root_rng(cfg.seed);

  Rng attr_rng = root_rng.fork(1);
  const AttributeSet attrs = AttributeSet::random(
      mdp, cfg.attributes.count, cfg.attributes.scale, cfg.beta, attr_rng);

  Rng weight_rng = root_rng.fork(2);
  const std::vector<PreferenceVector> train_weights = make_training_weights(
      cfg.offline.n_train_weights, cfg.attributes.count, cfg.offline.spread,
      weight_rng);

  // Offline phase: one specialist per training weight.
  std::vector<LogitAdapter> specialists;
  for (int s = 0; s < cfg.offline.n_train_weights; ++s) {
    const RewardFn r_s = personalized_reward(mdp, attrs, train_weights[s]);
    if (cfg.offline.oracle) {
      specialists.push_back(
          LogitAdapter::from_solution(mdp, solve_soft(mdp, r_s, cfg.beta), s));
      continue;
    }
    Rng data_rng = root_rng.fork(100 + s);
    const PairMode mode = cfg.offline.pair_mode == "bt-sample"
                              ? PairMode::BtSample
                              : PairMode::DeterministicRank;
    TrainConfig tc{cfg.offline.lr, cfg.offline.steps, cfg.offline.l2};
    if (cfg.offline.method == "binary-gumbel") {
      const auto labeled = generate_labeled(
          mdp, r_s, cfg.offline.pairs_per_specialist, data_rng);
      specialists.push_back(train_specialized(mdp, {}, labeled,
                                              TrainMethod::BinaryGumbel, tc,
                                              cfg.beta, s)
                                .adapter);
    } else {
      const auto pairs = generate_pairs(
          mdp, r_s, cfg.offline.pairs_per_specialist, mode, data_rng);
      specialists.push_back(
          train_specialized(mdp, pairs, {}, TrainMethod::Bt, tc, cfg.beta, s)
              .adapter);
    }
  }
  const int n_spec = static_cast<int>(specialists.size());

  const RejectionOptions implicit_opts{
      cfg.souping.implicit_envelope == "kl-heuristic"
          ? EnvelopeMode::KlHeuristic
          : EnvelopeMode::ExactMax,
      ExponentMode::Targeted, 64};

  RunReport report;
  report.config = cfg;

  auto abort_with = [&](const std::string& what, int user_id,
                        const Eigen::VectorXd& w) {
    std::ostringstream msg;
    msg << what << " (scenario " << cfg.scenario_id << ", user " << user_id
        << ", w = " << vec_json(w).dump()
        << ", config = " << scenario_config_to_json(cfg) << ")";
    throw Error(msg.str());
  };

  for (int u = 0; u < cfg.online.n_users; ++u) {
    Rng user_rng = root_rng.fork(1000 + u);
    UserRecord rec;
    rec.user_id = u;
    if (cfg.online.user_mode == "one-hot") {
      rec.preference = Eigen::VectorXd::Zero(cfg.attributes.count);
      rec.preference[u % cfg.attributes.count] = 1.0;
    } else {
      rec.preference = user_rng.simplex(cfg.attributes.count);
    }
    const RewardFn r_u =
        personalized_reward(mdp, attrs, PreferenceVector(rec.preference));

    const SoftSolution oracle_sol = solve_soft(mdp, r_u, cfg.beta);
    rec.oracle_value = oracle_sol.v[0];
    rec.reference_value = evaluate_policy(mdp, mdp.ref().probs(), r_u, 0.0)[0];

    std::vector<double> specialist_values(n_spec);
    for (int s = 0; s < n_spec; ++s) {
      specialist_values[s] = evaluate_policy(
          mdp, specialists[s].policy_table(mdp), r_u, cfg.beta)[0];
    }
    rec.max_specialist_value =
        *std::max_element(specialist_values.begin(), specialist_values.end());
    if (u == 0) report.specialist_values_root = specialist_values;

    SoupObjectiveConfig solve_cfg;
    solve_cfg.seed = user_rng.next_u64();
    const SoupSolveResult exact = solve_soup_weights(
        mdp, specialists, r_u, cfg.beta, cfg.beta_prime, solve_cfg);
    rec.exact_lambda = exact.lambda;
    rec.exact_soup_value = soup_value_exact(mdp, specialists, r_u, exact.lambda,
                                            cfg.beta, cfg.beta_prime);

    if (rec.oracle_value < rec.exact_soup_value - 1e-7) {
      abort_with("tailored value fell below the souped value", u,
                 rec.preference);
    }
    if (rec.exact_soup_value < rec.max_specialist_value - 1e-7) {
      abort_with("souped value fell below the best specialist", u,
                 rec.preference);
    }
    if (rec.exact_soup_value < rec.reference_value - 1e-7) {
      abort_with("souped value fell below the reference value", u,
                 rec.preference);
    }

    // P-SOUPS baseline: fixed simplex average of specialist parameters.
    Eigen::VectorXd psoups_w =
        Eigen::VectorXd::Constant(n_spec, 1.0 / n_spec);
    if (cfg.souping.psoups_weights == "tuned") {
      Rng tune_rng = user_rng.fork(77);
      double best = -std::numeric_limits<double>::infinity();
      std::vector<Eigen::VectorXd> candidates{psoups_w};
      for (int s = 0; s < n_spec; ++s) {
        Eigen::VectorXd onehot = Eigen::VectorXd::Zero(n_spec);
        onehot[s] = 1.0;
        candidates.push_back(onehot);
      }
      for (int i = 0; i < cfg.souping.psoups_tuning_draws; ++i) {
        candidates.push_back(tune_rng.simplex(n_spec));
      }
      for (const auto& cand : candidates) {
        const double v = evaluate_policy(
            mdp, average_adapters(mdp, specialists, cand).policy_table(mdp),
            r_u, cfg.beta_prime)[0];
        if (v > best) {
          best = v;
          psoups_w = cand;
        }
      }
    }
    const double psoups_value = evaluate_policy(
        mdp, average_adapters(mdp, specialists, psoups_w).policy_table(mdp),
        r_u, cfg.beta_prime)[0];

    // Online phase.
    Rng feedback_rng = root_rng.fork(5000 + u);
    VariationalPosterior posterior = VariationalPosterior::standard(n_spec);
    std::vector<FeedbackEvent> batch_events;
    Eigen::VectorXd learned = Eigen::VectorXd::Zero(n_spec);

    auto record_checkpoint = [&](int n_feedback) {
      CheckpointRecord cp;
      cp.n_feedback = n_feedback;
      cp.values.push_back({"reference", rec.reference_value, -1.0});
      cp.values.push_back({"rlhf_oracle", rec.oracle_value, -1.0});
      cp.values.push_back({"ss_exact", rec.exact_soup_value, -1.0});

      const double explicit_value = soup_value_exact(
          mdp, specialists, r_u, learned, cfg.beta, cfg.beta_prime);
      cp.values.push_back({"ss_explicit", explicit_value, -1.0});

      double implicit_value = explicit_value;
      double acceptance = 1.0;
      if (learned.cwiseAbs().sum() >= 1e-12) {
        const SoupWeights sw{learned, cfg.beta, cfg.beta_prime};
        const Eigen::MatrixXd realized =
            rejection_policy_table(mdp, specialists, sw, implicit_opts);
        implicit_value = evaluate_policy(mdp, realized, r_u,
                                         cfg.beta_prime / sw.l1())[0];
        acceptance =
            acceptance_probability(mdp, specialists, sw, 0, implicit_opts);
      }
      cp.values.push_back({"ss_implicit", implicit_value, acceptance});
      if (implicit_opts.envelope == EnvelopeMode::ExactMax &&
          std::abs(implicit_value - explicit_value) > 1e-9) {
        abort_with("implicit and explicit souping diverged", u, rec.preference);
      }
      cp.values.push_back({"psoups", psoups_value, -1.0});
      rec.checkpoints.push_back(std::move(cp));
    };

    record_checkpoint(0);
    for (int e = 1; e <= cfg.online.events_per_user; ++e) {
      const auto pair =
          generate_pairs(mdp, r_u, 1,
                         cfg.online.feedback == "deterministic-rank"
                             ? PairMode::DeterministicRank
                             : PairMode::BtSample,
                         feedback_rng)
              .front();
      const FeedbackEvent event = make_feedback_event(
          mdp, specialists, pair.winner, pair.loser, cfg.beta);
      if (cfg.online.adaptation == "batch") {
        batch_events.push_back(event);
      } else {
        posterior = svi_update(posterior, event, cfg.online.svi_inner_iters);
      }
      const bool at_checkpoint = cfg.online.checkpoint_every > 0 &&
                                 (e % cfg.online.checkpoint_every == 0 ||
                                  e == cfg.online.events_per_user);
      if (!at_checkpoint) continue;
      Eigen::VectorXd raw = cfg.online.adaptation == "batch"
                                ? lambda_bt_batch(batch_events,
                                                  cfg.online.prior_precision)
                                : posterior.mean;
      learned = project_lambda(raw, cfg.beta, cfg.beta_prime).lambda;
      record_checkpoint(e);
    }
    rec.final_lambda = learned;
    report.users.push_back(std::move(rec));
  }

  // Leave-one-out ablation over the specialist basis.
  if (cfg.ablation.enabled && n_spec > 1) {
    std::vector<double> sums(n_spec + 1, 0.0);
    std::vector<int> counts(n_spec + 1, 0);
    for (const auto& rec : report.users) {
      sums[n_spec] += rec.exact_soup_value;
      ++counts[n_spec];
    }
    for (int rep = 0; rep < cfg.ablation.repeats; ++rep) {
      Rng perm_rng = root_rng.fork(9000 + rep);
      std::vector<int> order(n_spec);
      for (int i = 0; i < n_spec; ++i) order[i] = i;
      for (int i = n_spec - 1; i > 0; --i) {
        std::swap(order[i], order[perm_rng.uniform_int(0, i)]);
      }
      for (int keep = n_spec - 1; keep >= 1; --keep) {
        std::vector<LogitAdapter> subset;
        for (int i = 0; i < keep; ++i) subset.push_back(specialists[order[i]]);
        for (const auto& rec : report.users) {
          const RewardFn r_u = personalized_reward(
              mdp, attrs, PreferenceVector(rec.preference));
          SoupObjectiveConfig sc;
          sc.seed = perm_rng.next_u64();
          const SoupSolveResult sol = solve_soup_weights(
              mdp, subset, r_u, cfg.beta, cfg.beta_prime, sc);
          sums[keep] += soup_value_exact(mdp, subset, r_u, sol.lambda, cfg.beta,
                                         cfg.beta_prime);
          ++counts[keep];
        }
      }
    }
    for (int keep = n_spec; keep >= 1; --keep) {
      if (counts[keep] > 0) {
        report.ablation.push_back({keep, sums[keep] / counts[keep]});
      }
    }
  }

  report.certification_enabled = cfg.certification.enabled;
  if (cfg.certification.enabled) {
    CertificationConfig cert;
    cert.instances = cfg.certification.instances;
    cert.seed = cfg.seed ^ 0xb0b0ULL;
    report.certification = certify_random_instances(cert);
  }
  return report;
}

std::string results_csv(const RunReport& report) {
  std::ostringstream out;
  out << "scenario_id,user_id,method,n_feedback,eval_value,acceptance_rate,"
         "seed\n";
  for (const auto& user : report.users) {
    for (const auto& cp : user.checkpoints) {
      for (const auto& mv : cp.values) {
        out << report.config.scenario_id << ',' << user.user_id << ','
            << mv.method << ',' << cp.n_feedback << ',' << fmt(mv.value) << ',';
        if (mv.acceptance_rate >= 0.0) out << fmt(mv.acceptance_rate);
        out << ',' << report.config.seed << "\n";
      }
    }
  }
  return out.str();
}

std::string bounds_csv(const CertificationReport& report) {
  std::ostringstream out;
  out << "instance_id,node,depth,beta,beta_prime,lhs_kl,rhs_kl,kl_pass,"
         "value_gap,value_bound,term_reward,term_negative,term_logit,"
         "gap_pass,degenerate\n";
  for (const auto& row : report.rows) {
    out << row.instance_id << ',' << row.node << ',' << row.depth << ','
        << fmt(row.beta) << ',' << fmt(row.beta_prime) << ','
        << fmt(row.kl.lhs) << ',' << fmt(row.kl.rhs) << ',' << row.kl.pass
        << ',' << fmt(row.value.gap) << ',' << fmt(row.value.bound) << ','
        << fmt(row.value.term_reward) << ',' << fmt(row.value.term_negative)
        << ',' << fmt(row.value.term_logit) << ',' << row.value.pass << ','
        << row.value.degenerate_lambda << "\n";
  }
  return out.str();
}

std::string certification_to_json(const CertificationReport& report) {
  json rows = json::array();
  for (const auto& row : report.rows) {
    rows.push_back({{"instance_id", row.instance_id},
                    {"node", row.node},
                    {"depth", row.depth},
                    {"beta", row.beta},
                    {"beta_prime", row.beta_prime},
                    {"preference", vec_json(row.preference)},
                    {"lambda", vec_json(row.lambda)},
                    {"lhs_kl", row.kl.lhs},
                    {"rhs_kl", row.kl.rhs},
                    {"kl_pass", row.kl.pass},
                    {"value_gap", row.value.gap},
                    {"value_bound", row.value.bound},
                    {"term_reward", row.value.term_reward},
                    {"term_negative", row.value.term_negative},
                    {"term_logit", row.value.term_logit},
                    {"gap_pass", row.value.pass},
                    {"degenerate", row.value.degenerate_lambda}});
  }
  json j;
  j["instances"] = report.instances;
  j["kl_failures"] = report.kl_failures;
  j["value_failures"] = report.value_failures;
  j["degenerate"] = report.degenerate;
  j["max_fit_residual"] = report.max_fit_residual;
  j["rows"] = rows;
  return j.dump(2);
}

std::string report_to_json(const RunReport& report) {
  json j;
  j["config"] = json::parse(scenario_config_to_json(report.config));
  j["specialist_values_root"] = report.specialist_values_root;
  json users = json::array();
  for (const auto& user : report.users) {
    json ju;
    ju["user_id"] = user.user_id;
    ju["preference"] = vec_json(user.preference);
    ju["reference_value"] = user.reference_value;
    ju["oracle_value"] = user.oracle_value;
    ju["max_specialist_value"] = user.max_specialist_value;
    ju["exact_soup_value"] = user.exact_soup_value;
    ju["exact_lambda"] = vec_json(user.exact_lambda);
    ju["final_lambda"] = vec_json(user.final_lambda);
    json cps = json::array();
    for (const auto& cp : user.checkpoints) {
      json jc;
      jc["n_feedback"] = cp.n_feedback;
      for (const auto& mv : cp.values) {
        jc["values"][mv.method] = mv.value;
        if (mv.acceptance_rate >= 0.0) {
          jc["acceptance"][mv.method] = mv.acceptance_rate;
        }
      }
      cps.push_back(jc);
    }
    ju["checkpoints"] = cps;
    users.push_back(ju);
  }
  j["users"] = users;
  json ablation = json::array();
  for (const auto& row : report.ablation) {
    ablation.push_back(
        {{"k_remaining", row.k_remaining}, {"mean_value", row.mean_value}});
  }
  j["ablation"] = ablation;
  j["certification"] = {
      {"enabled", report.certification_enabled},
      {"instances", report.certification.instances},
      {"kl_failures", report.certification.kl_failures},
      {"value_failures", report.certification.value_failures},
      {"degenerate", report.certification.degenerate},
      {"max_fit_residual", report.certification.max_fit_residual},
      {"rows", report.certification.rows.size()}};
  return j.dump(2);
}

void emit_report(const RunReport& report, const std::string& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir);
  write_text_file(out_dir + "/results.csv", results_csv(report));
  write_text_file(out_dir + "/bounds.csv", bounds_csv(report.certification));
  write_text_file(out_dir + "/report.json", report_to_json(report));
}

}  // namespace souplab
