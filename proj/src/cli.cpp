#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "souplab/harness.hpp"

namespace souplab {

namespace {

using nlohmann::json;

std::uint64_t resolve_seed(std::uint64_t config_seed, bool cli_seed_set,
                           std::uint64_t cli_seed) {
  std::uint64_t seed = config_seed;
  if (const char* env = std::getenv("SOUPLAB_SEED")) {
    seed = std::strtoull(env, nullptr, 10);
  }
  if (cli_seed_set) seed = cli_seed;
  return seed;
}

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  return json::parse(read_text_file(path));
}

RewardFn reward_from_json(const LanguageMdp& mdp, const json& spec,
                          std::uint64_t seed) {
  const std::string kind = spec.value("kind", "token-bonus");
  if (kind == "zero") {
    return RewardFn::from_table(
        mdp, Eigen::MatrixXd::Zero(mdp.internal_count(), mdp.vocab_size()));
  }
  if (kind == "token-bonus") {
    const int token = spec.value("token", mdp.vocab_size() - 1);
    const double bonus = spec.value("bonus", 1.0);
    Eigen::MatrixXd table =
        Eigen::MatrixXd::Zero(mdp.internal_count(), mdp.vocab_size());
    table.col(token).setConstant(bonus);
    return RewardFn::from_table(mdp, std::move(table));
  }
  if (kind == "random-nonneg") {
    Rng rng(spec.value("seed", seed));
    AttributeSet one = AttributeSet::random(
        mdp, 1, spec.value("scale", 1.0), 1.0, rng);
    return one.reward(0);
  }
  if (kind == "linear" && spec.contains("nu")) {
    Eigen::VectorXd nu(spec["nu"].size());
    for (std::size_t i = 0; i < spec["nu"].size(); ++i) {
      nu[i] = spec["nu"][i].get<double>();
    }
    return RewardFn::from_linear(mdp, nu);
  }
  throw Error("unknown reward spec");
}

MdpSpec mdp_spec_from_json(const json& j) {
  json wrapper;
  wrapper["mdp"] = j;
  return scenario_config_from_json(wrapper.dump()).mdp;
}

int cmd_solve(const json& cfg, std::uint64_t seed, const std::string& out_dir) {
  const MdpSpec spec = mdp_spec_from_json(cfg.value("mdp", json::object()));
  const LanguageMdp mdp = make_mdp(spec, seed);
  const double beta = cfg.value("beta", 1.0);
  const RewardFn r =
      reward_from_json(mdp, cfg.value("reward", json::object()), seed);
  const SoftSolution sol = solve_soft(mdp, r, beta);

  std::cout << "state";
  for (int a = 0; a < mdp.vocab_size(); ++a) std::cout << "\tQ(a=" << a << ")";
  std::cout << "\tV";
  for (int a = 0; a < mdp.vocab_size(); ++a) std::cout << "\tpi(a=" << a << ")";
  std::cout << "\n";
  for (long long node = 0; node < mdp.internal_count(); ++node) {
    const State s = mdp.tree().state_of(node);
    std::ostringstream name;
    name << "[";
    for (std::size_t i = 0; i < s.tokens().size(); ++i) {
      name << (i ? "," : "") << s.tokens()[i];
    }
    name << "]";
    std::cout << name.str();
    for (int a = 0; a < mdp.vocab_size(); ++a) std::cout << '\t' << sol.q(node, a);
    std::cout << '\t' << sol.v[node];
    for (int a = 0; a < mdp.vocab_size(); ++a) {
      std::cout << '\t' << sol.policy(node, a);
    }
    std::cout << "\n";
  }
  std::cout << "root value: " << sol.v[0] << "\n";

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    json out;
    out["beta"] = beta;
    out["root_value"] = sol.v[0];
    json v = json::array();
    for (Eigen::Index i = 0; i < sol.v.size(); ++i) v.push_back(sol.v[i]);
    out["v"] = v;
    json q = json::array(), pi = json::array();
    for (long long node = 0; node < mdp.internal_count(); ++node) {
      json qr = json::array(), pr = json::array();
      for (int a = 0; a < mdp.vocab_size(); ++a) {
        qr.push_back(sol.q(node, a));
        pr.push_back(sol.policy(node, a));
      }
      q.push_back(qr);
      pi.push_back(pr);
    }
    out["q"] = q;
    out["policy"] = pi;
    write_text_file(out_dir + "/solution.json", out.dump(2));
  }
  return 0;
}

int cmd_train_offline(const json& raw, std::uint64_t seed,
                      const std::string& out_dir) {
  ScenarioConfig cfg = scenario_config_from_json(raw.dump());
  cfg.seed = seed;
  const LanguageMdp mdp = make_mdp(cfg.mdp, cfg.seed);
  Rng root_rng(cfg.seed);
  Rng attr_rng = root_rng.fork(1);
  const AttributeSet attrs = AttributeSet::random(
      mdp, cfg.attributes.count, cfg.attributes.scale, cfg.beta, attr_rng);
  Rng weight_rng = root_rng.fork(2);
  const auto train_weights = make_training_weights(
      cfg.offline.n_train_weights, cfg.attributes.count, cfg.offline.spread,
      weight_rng);

  std::filesystem::create_directories(out_dir);
  json attr_json;
  attr_json["beta"] = attrs.beta();
  json nus = json::array();
  for (int k = 0; k < attrs.count(); ++k) {
    json col = json::array();
    for (Eigen::Index i = 0; i < attrs.nu(k).size(); ++i) {
      col.push_back(attrs.nu(k)[i]);
    }
    nus.push_back(col);
  }
  attr_json["nus"] = nus;
  write_text_file(out_dir + "/attributes.json", attr_json.dump(2));

  for (int s = 0; s < cfg.offline.n_train_weights; ++s) {
    const RewardFn r_s = personalized_reward(mdp, attrs, train_weights[s]);
    LogitAdapter adapter = [&] {
      if (cfg.offline.oracle) {
        return LogitAdapter::from_solution(mdp, solve_soft(mdp, r_s, cfg.beta),
                                           s);
      }
      Rng data_rng = root_rng.fork(100 + s);
      TrainConfig tc{cfg.offline.lr, cfg.offline.steps, cfg.offline.l2};
      if (cfg.offline.method == "binary-gumbel") {
        const auto labeled = generate_labeled(
            mdp, r_s, cfg.offline.pairs_per_specialist, data_rng);
        return train_specialized(mdp, {}, labeled, TrainMethod::BinaryGumbel,
                                 tc, cfg.beta, s)
            .adapter;
      }
      const auto pairs = generate_pairs(
          mdp, r_s, cfg.offline.pairs_per_specialist,
          cfg.offline.pair_mode == "bt-sample" ? PairMode::BtSample
                                               : PairMode::DeterministicRank,
          data_rng);
      return train_specialized(mdp, pairs, {}, TrainMethod::Bt, tc, cfg.beta, s)
          .adapter;
    }();
    std::ostringstream name;
    name << out_dir << "/adapter_" << (s < 10 ? "0" : "") << s << ".json";
    write_text_file(name.str(), adapter_to_json(adapter));
    std::cout << "wrote " << name.str() << "\n";
  }
  return 0;
}

int cmd_adapt_online(const json& raw, std::uint64_t seed,
                     const std::string& out_dir,
                     const std::string& feedback_path,
                     const std::string& adapters_dir) {
  ScenarioConfig cfg = scenario_config_from_json(raw.dump());
  cfg.seed = seed;
  if (feedback_path.empty()) throw Error("adapt-online needs --feedback");
  const auto events = feedback_from_jsonl(read_text_file(feedback_path));
  if (events.empty()) throw EmptyDataset("feedback stream is empty");
  const int k = static_cast<int>(events.front().delta.size());

  if (!adapters_dir.empty()) {
    const LanguageMdp mdp = make_mdp(cfg.mdp, cfg.seed);
    int n_adapters = 0;
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(adapters_dir)) {
      if (entry.path().extension() == ".json" &&
          entry.path().filename().string().rfind("adapter_", 0) == 0) {
        files.push_back(entry.path());
      }
    }
    for (const auto& path : files) {
      adapter_from_json(mdp, read_text_file(path.string()));
      ++n_adapters;
    }
    if (n_adapters != k) {
      throw Error("feedback dimension " + std::to_string(k) +
                  " does not match " + std::to_string(n_adapters) +
                  " adapters");
    }
  }

  VariationalPosterior posterior = VariationalPosterior::standard(k);
  Eigen::VectorXd raw_lambda;
  if (cfg.online.adaptation == "batch") {
    raw_lambda = lambda_bt_batch(events, cfg.online.prior_precision);
  } else {
    for (const auto& e : events) {
      posterior = svi_update(posterior, e, cfg.online.svi_inner_iters);
    }
    raw_lambda = posterior.mean;
  }
  const SoupWeights sw = project_lambda(raw_lambda, cfg.beta, cfg.beta_prime);

  std::filesystem::create_directories(out_dir);
  write_text_file(out_dir + "/posterior.json", posterior_to_json(posterior));
  write_text_file(out_dir + "/soup_weights.json", soup_weights_to_json(sw));
  std::cout << "consumed " << events.size() << " events; lambda = [";
  for (int i = 0; i < k; ++i) std::cout << (i ? ", " : "") << sw.lambda[i];
  std::cout << "]\n";
  return 0;
}

int cmd_verify_bounds(int instances, std::uint64_t seed, bool all_states,
                      const std::string& out_dir) {
  CertificationConfig cfg;
  cfg.instances = instances;
  cfg.seed = seed;
  cfg.all_states = all_states;
  const CertificationReport report = certify_random_instances(cfg);
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    write_text_file(out_dir + "/bounds.csv", bounds_csv(report));
    write_text_file(out_dir + "/bounds.json", certification_to_json(report));
  }
  std::cout << "instances: " << report.instances << "\n"
            << "rows: " << report.rows.size() << "\n"
            << "kl failures: " << report.kl_failures << "\n"
            << "value failures: " << report.value_failures << "\n"
            << "degenerate mixtures: " << report.degenerate << "\n"
            << "max spectral-fit residual: " << report.max_fit_residual
            << "\n";
  return report.kl_failures == 0 && report.value_failures == 0 ? 0 : 1;
}

int cmd_scenario(const json& raw, std::uint64_t seed,
                 const std::string& out_dir) {
  ScenarioConfig cfg = scenario_config_from_json(raw.dump());
  cfg.seed = seed;
  const RunReport report = run_scenario(cfg);
  emit_report(report, out_dir.empty() ? "." : out_dir);
  for (const auto& user : report.users) {
    const auto& last = user.checkpoints.back();
    double learned = 0.0;
    for (const auto& mv : last.values) {
      if (mv.method == "ss_explicit") learned = mv.value;
    }
    std::cout << "user " << user.user_id << ": oracle " << user.oracle_value
              << ", soup(exact) " << user.exact_soup_value << ", soup(learned) "
              << learned << ", best specialist " << user.max_specialist_value
              << ", reference " << user.reference_value << "\n";
  }
  std::cout << "report written to " << (out_dir.empty() ? "." : out_dir)
            << "\n";
  return 0;
}

int cmd_em_fit(const json& raw, std::uint64_t seed, const std::string& out_dir) {
  ScenarioConfig cfg = scenario_config_from_json(raw.dump());
  cfg.seed = seed;
  const LanguageMdp mdp = make_mdp(cfg.mdp, cfg.seed);
  Rng rng(cfg.seed);
  Rng attr_rng = rng.fork(1);
  const AttributeSet attrs = AttributeSet::random(
      mdp, cfg.attributes.count, cfg.attributes.scale, cfg.beta, attr_rng);

  const Eigen::MatrixXd X = raw_feature_matrix(mdp);
  Eigen::MatrixXd R(X.rows(), attrs.count());
  for (int k = 0; k < attrs.count(); ++k) {
    long long row = 0;
    for (long long node = 0; node < mdp.internal_count(); ++node) {
      for (int a = 0; a < mdp.vocab_size(); ++a, ++row) {
        R(row, k) = attrs.reward(k)(node, a);
      }
    }
  }
  EmFitConfig em;
  const json je = raw.value("em", json::object());
  em.max_iters = je.value("iters", em.max_iters);
  em.n_w_samples = je.value("n_w_samples", em.n_w_samples);
  const int d_out = je.value("d_out", attrs.count());
  EmFitResult result = em_fit(X, R, d_out, em, rng);

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    write_text_file(out_dir + "/em_model.json", em_result_to_json(result));
  }
  std::cout << "iterations: " << result.iterations
            << ", final mse: " << result.final_mse << "\n";
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"Exact soft-RL souping lab: offline specialists, online "
               "mixture adaptation, and bound certification on token-tree "
               "MDPs"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::string out_dir;
  std::uint64_t cli_seed = 0;
  bool seed_set = false;
  app.add_option("--config", config_path, "JSON configuration file")
      ->envname("SOUPLAB_CONFIG");
  app.add_option("--out", out_dir, "output directory");
  auto* seed_opt = app.add_option("--seed", cli_seed, "seed override");

  auto* solve = app.add_subcommand("solve", "solve one MDP and print Q/V/pi");
  auto* train = app.add_subcommand("train-offline",
                                   "train specialist adapters, emit JSON");
  auto* adapt = app.add_subcommand(
      "adapt-online", "update soup weights from a feedback stream");
  std::string feedback_path;
  adapt->add_option("--feedback", feedback_path, "JSON-lines delta stream");
  std::string adapters_dir;
  adapt->add_option("--adapters", adapters_dir,
                    "directory of adapter JSONs (optional)");
  auto* verify =
      app.add_subcommand("verify-bounds", "randomized bound certification");
  int instances = 100;
  bool root_only = false;
  verify->add_option("--instances", instances, "number of random instances");
  verify->add_flag("--root-only", root_only, "certify only the root state");
  auto* scenario =
      app.add_subcommand("scenario", "full offline+online pipeline");
  auto* emfit = app.add_subcommand("em-fit", "alternating least-squares "
                                             "representation fit");

  std::vector<const char*> argv;
  argv.push_back("souplab");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  seed_set = seed_opt->count() > 0;

  try {
    const json cfg = load_config(config_path);
    const std::uint64_t seed =
        resolve_seed(cfg.value("seed", std::uint64_t{12345}), seed_set,
                     cli_seed);
    if (*solve) return cmd_solve(cfg, seed, out_dir);
    if (*train) return cmd_train_offline(cfg, seed, out_dir.empty() ? "." : out_dir);
    if (*adapt) {
      return cmd_adapt_online(cfg, seed, out_dir.empty() ? "." : out_dir,
                              feedback_path, adapters_dir);
    }
    if (*verify) return cmd_verify_bounds(instances, seed, !root_only, out_dir);
    if (*scenario) return cmd_scenario(cfg, seed, out_dir);
    if (*emfit) return cmd_em_fit(cfg, seed, out_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace souplab
