#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "souplab/harness.hpp"

namespace py = pybind11;
using namespace souplab;

namespace {

std::vector<double> to_std(const Eigen::VectorXd& v) {
  return {v.data(), v.data() + v.size()};
}

std::vector<std::vector<double>> to_std(const Eigen::MatrixXd& m) {
  std::vector<std::vector<double>> out(m.rows());
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    out[r].assign(m.cols(), 0.0);
    for (Eigen::Index c = 0; c < m.cols(); ++c) out[r][c] = m(r, c);
  }
  return out;
}

Eigen::VectorXd from_std(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), v.size());
}

Eigen::MatrixXd from_std(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) return {};
  Eigen::MatrixXd m(rows.size(), rows[0].size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) m(r, c) = rows[r][c];
  }
  return m;
}

// A solved workspace holding the MDP and whatever policies were derived from
// it; keeps the python surface small while exposing the main operations.
struct Lab {
  explicit Lab(const std::string& config_json, std::uint64_t seed)
      : cfg(scenario_config_from_json(config_json)),
        mdp(make_mdp(cfg.mdp, seed)) {}

  ScenarioConfig cfg;
  LanguageMdp mdp;
  std::vector<LogitAdapter> adapters;
};

}  // namespace

PYBIND11_MODULE(souplab, m) {
  m.doc() = "Exact KL-regularized control on token trees with policy souping";

  py::register_exception<Error>(m, "SouplabError");

  py::class_<Lab>(m, "Lab")
      .def(py::init<const std::string&, std::uint64_t>(), py::arg("config"),
           py::arg("seed") = 12345)
      .def_property_readonly(
          "node_count", [](const Lab& lab) { return lab.mdp.node_count(); })
      .def_property_readonly(
          "vocab_size", [](const Lab& lab) { return lab.mdp.vocab_size(); })
      .def_property_readonly(
          "horizon", [](const Lab& lab) { return lab.mdp.horizon(); })
      .def(
          "solve_token_bonus",
          [](Lab& lab, int token, double bonus, double beta) {
            Eigen::MatrixXd table = Eigen::MatrixXd::Zero(
                lab.mdp.internal_count(), lab.mdp.vocab_size());
            table.col(token).setConstant(bonus);
            const SoftSolution sol = solve_soft(
                lab.mdp, RewardFn::from_table(lab.mdp, std::move(table)), beta);
            py::dict out;
            out["v"] = to_std(sol.v);
            out["q"] = to_std(sol.q);
            out["policy"] = to_std(sol.policy);
            out["root_value"] = sol.v[0];
            return out;
          },
          py::arg("token"), py::arg("bonus") = 1.0, py::arg("beta") = 1.0,
          "Solve the KL-regularized problem for a per-token bonus reward")
      .def(
          "load_oracle_specialists",
          [](Lab& lab, int count, double scale, std::uint64_t seed) {
            Rng rng(seed);
            const AttributeSet attrs =
                AttributeSet::random(lab.mdp, count, scale, lab.cfg.beta, rng);
            lab.adapters.clear();
            for (int k = 0; k < count; ++k) {
              lab.adapters.push_back(LogitAdapter::from_solution(
                  lab.mdp, solve_soft(lab.mdp, attrs.reward(k), lab.cfg.beta),
                  k));
            }
            return count;
          },
          py::arg("count"), py::arg("scale") = 1.0, py::arg("seed") = 7,
          "Solve `count` random nonnegative attributes exactly and keep their "
          "adapters")
      .def(
          "soup_policy_row",
          [](Lab& lab, const std::vector<double>& lambda, double beta,
             double beta_prime, const std::vector<int>& state) {
            const SoupWeights sw{from_std(lambda), beta, beta_prime};
            return to_std(
                soup_policy(lab.mdp, lab.adapters, sw, State(state)));
          },
          py::arg("lambda_"), py::arg("beta") = 1.0, py::arg("beta_prime") = 1.0,
          py::arg("state") = std::vector<int>{},
          "Token distribution of the souped policy at a state");

  m.def(
      "project_lambda",
      [](const std::vector<double>& lambda, double beta, double beta_prime) {
        return to_std(project_lambda(from_std(lambda), beta, beta_prime).lambda);
      },
      py::arg("lambda_"), py::arg("beta"), py::arg("beta_prime"),
      "Rescale mixture weights onto beta * sum|lambda| <= beta_prime");

  m.def(
      "svi_update",
      [](const std::vector<double>& mean,
         const std::vector<std::vector<double>>& cov,
         const std::vector<double>& delta, int inner_iters) {
        VariationalPosterior post{from_std(mean), from_std(cov)};
        FeedbackEvent e;
        e.delta = from_std(delta);
        const VariationalPosterior next = svi_update(post, e, inner_iters);
        return py::make_tuple(to_std(next.mean), to_std(next.cov));
      },
      py::arg("mean"), py::arg("cov"), py::arg("delta"),
      py::arg("inner_iters") = 1,
      "One sequential Gaussian-posterior update from a feedback event");

  m.def(
      "lambda_bt_batch",
      [](const std::vector<std::vector<double>>& deltas,
         double prior_precision) {
        std::vector<FeedbackEvent> events;
        for (const auto& d : deltas) events.push_back({from_std(d)});
        return to_std(lambda_bt_batch(events, prior_precision));
      },
      py::arg("deltas"), py::arg("prior_precision") = 1.0,
      "Batch MAP mixture weights from preference feedback");

  m.def(
      "run_scenario_json",
      [](const std::string& config_json) {
        const RunReport report =
            run_scenario(scenario_config_from_json(config_json));
        return report_to_json(report);
      },
      py::arg("config"),
      "Run the offline+online pipeline and return the JSON report");
}
