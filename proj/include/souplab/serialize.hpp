#pragma once

#include <string>
#include <vector>

#include "souplab/adapt.hpp"
#include "souplab/spectral.hpp"

namespace souplab {

// {attribute_id, beta, theta: [..]} for linear adapters,
// {attribute_id, beta, table: [[..]]} for tabular ones.
std::string adapter_to_json(const LogitAdapter& adapter);
LogitAdapter adapter_from_json(const LanguageMdp& mdp, const std::string& text);

// {lambda: [..], beta, beta_prime}
std::string soup_weights_to_json(const SoupWeights& sw);
SoupWeights soup_weights_from_json(const std::string& text);

// {mean: [..], covariance: [[..]]}
std::string posterior_to_json(const VariationalPosterior& post);
VariationalPosterior posterior_from_json(const std::string& text);

// JSON-lines stream of delta vectors; each line is either a bare array or an
// object with a "delta" field.
std::vector<FeedbackEvent> feedback_from_jsonl(const std::string& text);
std::string feedback_to_jsonl(const std::vector<FeedbackEvent>& events);

// {W: [[..]], nu: [[..]], final_mse, iterations}
std::string em_result_to_json(const EmFitResult& result);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace souplab
