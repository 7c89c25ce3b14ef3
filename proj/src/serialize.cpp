#include "souplab/serialize.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace souplab {

namespace {

using nlohmann::json;

json vector_to_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

Eigen::VectorXd vector_from_json(const json& arr) {
  Eigen::VectorXd v(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) v[i] = arr[i].get<double>();
  return v;
}

Eigen::MatrixXd matrix_from_json(const json& rows) {
  if (rows.empty()) return {};
  Eigen::MatrixXd m(rows.size(), rows[0].size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      m(r, c) = rows[r][c].get<double>();
    }
  }
  return m;
}

}  // namespace

std::string adapter_to_json(const LogitAdapter& adapter) {
  json j;
  j["attribute_id"] = adapter.attribute_id();
  j["beta"] = adapter.beta();
  if (adapter.is_linear()) {
    j["theta"] = vector_to_json(adapter.theta());
  } else {
    j["table"] = matrix_to_json(adapter.table());
  }
  return j.dump(2);
}

LogitAdapter adapter_from_json(const LanguageMdp& mdp,
                               const std::string& text) {
  const json j = json::parse(text);
  const int id = j.value("attribute_id", -1);
  const double beta = j.at("beta").get<double>();
  if (j.contains("theta")) {
    return LogitAdapter::linear(mdp, vector_from_json(j["theta"]), beta, id);
  }
  if (j.contains("table")) {
    return LogitAdapter::from_table(mdp, matrix_from_json(j["table"]), beta,
                                    id);
  }
  throw IoError("adapter JSON needs a theta or table field");
}

std::string soup_weights_to_json(const SoupWeights& sw) {
  json j;
  j["lambda"] = vector_to_json(sw.lambda);
  j["beta"] = sw.beta;
  j["beta_prime"] = sw.beta_prime;
  return j.dump(2);
}

SoupWeights soup_weights_from_json(const std::string& text) {
  const json j = json::parse(text);
  SoupWeights sw;
  sw.lambda = vector_from_json(j.at("lambda"));
  sw.beta = j.at("beta").get<double>();
  sw.beta_prime = j.at("beta_prime").get<double>();
  return sw;
}

std::string posterior_to_json(const VariationalPosterior& post) {
  json j;
  j["mean"] = vector_to_json(post.mean);
  j["covariance"] = matrix_to_json(post.cov);
  return j.dump(2);
}

VariationalPosterior posterior_from_json(const std::string& text) {
  const json j = json::parse(text);
  VariationalPosterior post;
  post.mean = vector_from_json(j.at("mean"));
  post.cov = matrix_from_json(j.at("covariance"));
  return post;
}

std::vector<FeedbackEvent> feedback_from_jsonl(const std::string& text) {
  std::vector<FeedbackEvent> events;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const json j = json::parse(line);
    FeedbackEvent e;
    e.delta = vector_from_json(j.is_array() ? j : j.at("delta"));
    events.push_back(std::move(e));
  }
  return events;
}

std::string feedback_to_jsonl(const std::vector<FeedbackEvent>& events) {
  std::ostringstream out;
  for (const auto& e : events) {
    out << vector_to_json(e.delta).dump() << "\n";
  }
  return out.str();
}

std::string em_result_to_json(const EmFitResult& result) {
  json j;
  j["W"] = matrix_to_json(result.psi.linear_map);
  j["nu"] = matrix_to_json(result.nus);
  j["final_mse"] = result.final_mse;
  j["iterations"] = result.iterations;
  j["rank_deficient"] = result.rank_deficient;
  return j.dump(2);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << content;
  if (!out) throw IoError("failed writing " + path);
}

}  // namespace souplab
