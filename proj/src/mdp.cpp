#include "souplab/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "souplab/rng.hpp"

namespace souplab {

namespace {

long long ipow(long long base, int exp) {
  long long r = 1;
  for (int i = 0; i < exp; ++i) r *= base;
  return r;
}

}  // namespace

Eigen::VectorXd softmax_row(const Eigen::Ref<const Eigen::VectorXd>& logits) {
  const double shift = logits.maxCoeff();
  Eigen::VectorXd p = (logits.array() - shift).exp();
  return p / p.sum();
}

double log_sum_exp(const Eigen::Ref<const Eigen::VectorXd>& x) {
  const double shift = x.maxCoeff();
  return shift + std::log((x.array() - shift).exp().sum());
}

TreeIndex::TreeIndex(Vocab vocab, int horizon, long long node_budget)
    : vocab_(vocab), horizon_(horizon) {
  if (vocab_.size < 2) throw Error("vocabulary must have at least 2 tokens");
  if (horizon_ < 1) throw Error("horizon must be positive");
  offsets_.assign(horizon_ + 2, 0);
  long long level = 1;
  for (int t = 0; t <= horizon_; ++t) {
    offsets_[t + 1] = offsets_[t] + level;
    if (offsets_[t + 1] > node_budget) {
      throw BudgetExceeded("node count exceeds budget of " +
                           std::to_string(node_budget));
    }
    level *= vocab_.size;
  }
}

int TreeIndex::depth_of(long long node) const {
  for (int t = 0; t <= horizon_; ++t) {
    if (node < offsets_[t + 1]) return t;
  }
  throw Error("node index out of range");
}

long long TreeIndex::child(long long node, int token) const {
  const int t = depth_of(node);
  if (t >= horizon_) throw DepthExceeded("state is terminal");
  if (token < 0 || token >= vocab_.size) {
    throw TokenOutOfRange("token " + std::to_string(token) +
                          " not in vocabulary of size " +
                          std::to_string(vocab_.size));
  }
  return offsets_[t + 1] + (node - offsets_[t]) * vocab_.size + token;
}

long long TreeIndex::parent(long long node) const {
  const int t = depth_of(node);
  if (t == 0) throw Error("root has no parent");
  return offsets_[t - 1] + (node - offsets_[t]) / vocab_.size;
}

long long TreeIndex::node_of(const State& s) const {
  if (s.depth() > horizon_) throw DepthExceeded("state deeper than horizon");
  long long idx = 0;
  for (int tok : s.tokens()) {
    if (tok < 0 || tok >= vocab_.size) throw TokenOutOfRange("bad token");
    idx = idx * vocab_.size + tok;
  }
  return offsets_[s.depth()] + idx;
}

State TreeIndex::state_of(long long node) const {
  const int t = depth_of(node);
  long long j = node - offsets_[t];
  std::vector<int> tokens(t);
  for (int i = t - 1; i >= 0; --i) {
    tokens[i] = static_cast<int>(j % vocab_.size);
    j /= vocab_.size;
  }
  return State(std::move(tokens));
}

long long TreeIndex::gram_code(long long node, int lgram) const {
  const int t = depth_of(node);
  const int len = std::min(t, lgram);
  const long long j = node - offsets_[t];
  return j % ipow(vocab_.size, len);
}

FeatureMap FeatureMap::tabular_lgram(const TreeIndex& tree, int lgram) {
  if (lgram < 1) throw Error("lgram must be at least 1");
  FeatureMap fm;
  fm.kind_ = Kind::TabularLGram;
  fm.tree_ = tree;
  fm.lgram_ = lgram;
  fm.key_offsets_.assign(tree.horizon(), 0);
  long long total = 0;
  for (int t = 0; t < tree.horizon(); ++t) {
    fm.key_offsets_[t] = total;
    total += ipow(tree.vocab_size(), std::min(t, lgram)) * tree.vocab_size();
  }
  fm.raw_dim_ = total;
  fm.dim_ = static_cast<int>(total);
  return fm;
}

FeatureMap FeatureMap::random_linear(const TreeIndex& tree, int lgram, int dim,
                                     std::uint64_t seed) {
  FeatureMap fm = tabular_lgram(tree, lgram);
  fm.kind_ = Kind::RandomLinear;
  fm.dim_ = dim;
  Rng rng(seed);
  fm.projection_.resize(dim, fm.raw_dim_);
  for (Eigen::Index r = 0; r < fm.projection_.rows(); ++r) {
    for (Eigen::Index c = 0; c < fm.projection_.cols(); ++c) {
      fm.projection_(r, c) = rng.normal();
    }
  }
  return fm;
}

FeatureMap FeatureMap::composite(std::vector<FeatureMap> parts) {
  if (parts.empty()) throw Error("composite feature map needs parts");
  FeatureMap fm;
  fm.kind_ = Kind::Composite;
  fm.tree_ = parts.front().tree_;
  fm.lgram_ = 0;
  fm.dim_ = 0;
  fm.raw_dim_ = 0;
  for (const auto& p : parts) {
    fm.dim_ += p.dim();
    fm.lgram_ = std::max(fm.lgram_, p.lgram());
  }
  fm.parts_ = std::move(parts);
  return fm;
}

long long FeatureMap::tabular_index(long long node, int token) const {
  const int t = tree_.depth_of(node);
  if (t >= tree_.horizon()) throw DepthExceeded("no features at terminal depth");
  if (token < 0 || token >= tree_.vocab_size()) {
    throw TokenOutOfRange("bad token");
  }
  return key_offsets_[t] + tree_.gram_code(node, lgram_) * tree_.vocab_size() +
         token;
}

Eigen::VectorXd FeatureMap::psi_node(long long node, int token) const {
  switch (kind_) {
    case Kind::TabularLGram: {
      Eigen::VectorXd v = Eigen::VectorXd::Zero(dim_);
      v[tabular_index(node, token)] = 1.0;
      return v;
    }
    case Kind::RandomLinear:
      return projection_.col(tabular_index(node, token));
    case Kind::Composite: {
      Eigen::VectorXd v(dim_);
      Eigen::Index at = 0;
      for (const auto& p : parts_) {
        v.segment(at, p.dim()) = p.psi_node(node, token);
        at += p.dim();
      }
      return v;
    }
  }
  throw Error("unknown feature kind");
}

Eigen::VectorXd FeatureMap::psi(const State& s, int token) const {
  return psi_node(tree_.node_of(s), token);
}

void ReferencePolicy::finalize() {
  const auto n = logits_.rows();
  const auto a = logits_.cols();
  probs_.resize(n, a);
  log_probs_.resize(n, a);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd row = softmax_row(logits_.row(i).transpose());
    probs_.row(i) = row.transpose();
    if (probs_.row(i).minCoeff() <= 0.0) {
      throw Error("reference policy lost full support");
    }
    if (std::abs(probs_.row(i).sum() - 1.0) > 1e-12) {
      throw Error("reference policy row failed to normalize");
    }
    log_probs_.row(i) = probs_.row(i).array().log();
  }
}

ReferencePolicy ReferencePolicy::uniform(const TreeIndex& tree) {
  ReferencePolicy ref;
  ref.logits_ = Eigen::MatrixXd::Zero(tree.internal_count(), tree.vocab_size());
  ref.finalize();
  return ref;
}

ReferencePolicy ReferencePolicy::softmax_linear(const TreeIndex& tree,
                                                int lgram, double scale,
                                                std::uint64_t seed) {
  FeatureMap keys = FeatureMap::tabular_lgram(tree, lgram);
  Rng rng(seed);
  Eigen::VectorXd table(keys.raw_dim());
  for (Eigen::Index i = 0; i < table.size(); ++i) {
    table[i] = scale * rng.normal();
  }
  ReferencePolicy ref;
  ref.logits_.resize(tree.internal_count(), tree.vocab_size());
  for (long long node = 0; node < tree.internal_count(); ++node) {
    for (int a = 0; a < tree.vocab_size(); ++a) {
      ref.logits_(node, a) = table[keys.tabular_index(node, a)];
    }
  }
  ref.finalize();
  return ref;
}

LanguageMdp::LanguageMdp(Vocab vocab, int horizon, FeatureMap features,
                         ReferencePolicy ref, long long node_budget)
    : tree_(vocab, horizon, node_budget),
      features_(std::move(features)),
      ref_(std::move(ref)) {
  if (ref_.probs().rows() != tree_.internal_count() ||
      ref_.probs().cols() != vocab.size) {
    throw Error("reference policy shape does not match tree");
  }
  psi_norms_.resize(tree_.internal_count(), vocab.size);
  for (long long node = 0; node < tree_.internal_count(); ++node) {
    for (int a = 0; a < vocab.size; ++a) {
      psi_norms_(node, a) = features_.psi_node(node, a).norm();
    }
  }
}

State LanguageMdp::concat(const State& s, int token) const {
  if (s.depth() >= horizon()) {
    throw DepthExceeded("cannot extend a terminal state");
  }
  if (token < 0 || token >= vocab_size()) {
    throw TokenOutOfRange("token " + std::to_string(token) +
                          " not in vocabulary");
  }
  std::vector<int> tokens = s.tokens();
  tokens.push_back(token);
  return State(std::move(tokens));
}

std::vector<State> LanguageMdp::enumerate_nodes() const {
  std::vector<State> states;
  states.reserve(node_count());
  for (long long node = 0; node < node_count(); ++node) {
    states.push_back(tree_.state_of(node));
  }
  return states;
}

std::vector<int> LanguageMdp::available_tokens(const State& s) const {
  tree_.node_of(s);  // validates the state
  if (s.depth() >= horizon()) return {};
  std::vector<int> tokens(vocab_size());
  for (int a = 0; a < vocab_size(); ++a) tokens[a] = a;
  return tokens;
}

}  // namespace souplab
