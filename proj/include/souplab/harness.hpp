#pragma once

#include <string>
#include <vector>

#include "souplab/bounds.hpp"
#include "souplab/serialize.hpp"

namespace souplab {

struct MdpSpec {
  int vocab = 3;
  int horizon = 3;
  int lgram = 1;
  std::string features = "tabular";  // "tabular" | "random-linear"
  int feature_dim = 8;
  std::string ref_policy = "uniform";  // "uniform" | "softmax-linear"
  double ref_scale = 1.0;
  long long node_budget = kDefaultNodeBudget;
};

struct AttributeSpec {
  int count = 4;
  double scale = 3.0;
};

struct OfflineSpec {
  int n_train_weights = 4;
  double spread = 0.0;
  int pairs_per_specialist = 500;
  std::string pair_mode = "bt-sample";  // offline dataset labels
  std::string method = "bt";                     // "bt" | "binary-gumbel"
  double lr = 0.3;
  int steps = 400;
  double l2 = 1e-3;
  bool oracle = false;  // exact specialists from the soft solver
};

struct OnlineSpec {
  int n_users = 5;
  int events_per_user = 500;
  int checkpoint_every = 50;
  std::string adaptation = "svi";  // "svi" | "batch"
  int svi_inner_iters = 1;
  double prior_precision = 1.0;
  std::string feedback = "bt-sample";  // "bt-sample" | "deterministic-rank"
  // "simplex" draws held-out users uniformly; "one-hot" cycles the basis
  // attributes (a debugging mode where the tailored optimum coincides with
  // one specialist).
  std::string user_mode = "simplex";
};

struct SoupingSpec {
  std::string psoups_weights = "uniform";  // "uniform" | "tuned"
  int psoups_tuning_draws = 50;
  std::string implicit_envelope = "exact-max";  // "exact-max" | "kl-heuristic"
};

struct AblationSpec {
  bool enabled = false;
  int repeats = 3;
};

struct CertificationSpec {
  bool enabled = false;
  int instances = 20;
};

struct ScenarioConfig {
  std::string scenario_id = "default";
  MdpSpec mdp;
  AttributeSpec attributes;
  OfflineSpec offline;
  OnlineSpec online;
  SoupingSpec souping;
  AblationSpec ablation;
  CertificationSpec certification;
  double beta = 1.0;
  double beta_prime = 1.0;
  std::uint64_t seed = 12345;
};

ScenarioConfig scenario_config_from_json(const std::string& text);
std::string scenario_config_to_json(const ScenarioConfig& cfg);

LanguageMdp make_mdp(const MdpSpec& spec, std::uint64_t seed);

struct MethodValue {
  std::string method;
  double value = 0.0;
  double acceptance_rate = -1.0;  // negative: not applicable
};

struct CheckpointRecord {
  int n_feedback = 0;
  std::vector<MethodValue> values;
};

struct UserRecord {
  int user_id = 0;
  Eigen::VectorXd preference;  // hidden from the learner
  double reference_value = 0.0;
  double oracle_value = 0.0;
  double max_specialist_value = 0.0;
  double exact_soup_value = 0.0;
  Eigen::VectorXd exact_lambda;
  Eigen::VectorXd final_lambda;
  std::vector<CheckpointRecord> checkpoints;
};

struct AblationRow {
  int k_remaining = 0;
  double mean_value = 0.0;
};

struct RunReport {
  ScenarioConfig config;
  std::vector<double> specialist_values_root;  // per trained specialist, under
                                               // the first user's reward
  std::vector<UserRecord> users;
  std::vector<AblationRow> ablation;
  CertificationReport certification;
  bool certification_enabled = false;
};

// Offline specialists -> per-user online adaptation -> exact evaluation.
// Deterministic given the config seed; sanity orderings are enforced and
// violations abort with the offending setup serialized into the message.
RunReport run_scenario(const ScenarioConfig& cfg);

std::string results_csv(const RunReport& report);
std::string bounds_csv(const CertificationReport& report);
std::string certification_to_json(const CertificationReport& report);
std::string report_to_json(const RunReport& report);

// Writes results.csv, bounds.csv and report.json into out_dir.
void emit_report(const RunReport& report, const std::string& out_dir);

// Command-line entry point shared by the binary and the tests.
int run_cli(const std::vector<std::string>& args);

}  // namespace souplab
