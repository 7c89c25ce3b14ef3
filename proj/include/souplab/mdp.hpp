#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "souplab/errors.hpp"

namespace souplab {

constexpr long long kDefaultNodeBudget = 200000;

struct Vocab {
  int size = 2;  // tokens are integers in [0, size)
};

// Immutable token prefix. Depth equals the number of tokens.
class State {
 public:
  State() = default;
  explicit State(std::vector<int> tokens) : tokens_(std::move(tokens)) {}

  int depth() const { return static_cast<int>(tokens_.size()); }
  const std::vector<int>& tokens() const { return tokens_; }
  bool operator==(const State&) const = default;

 private:
  std::vector<int> tokens_;
};

// Index arithmetic for the complete A-ary token tree of height T.
// Nodes are numbered by depth, then lexicographically by token sequence,
// so the depth-t block starts at offset(t) = sum_{i<t} A^i and a node's
// within-block index encodes its tokens most-significant-first.
class TreeIndex {
 public:
  TreeIndex() = default;
  TreeIndex(Vocab vocab, int horizon, long long node_budget = kDefaultNodeBudget);

  int vocab_size() const { return vocab_.size; }
  int horizon() const { return horizon_; }
  long long node_count() const { return offsets_[horizon_ + 1]; }
  long long internal_count() const { return offsets_[horizon_]; }
  long long level_offset(int depth) const { return offsets_[depth]; }

  int depth_of(long long node) const;
  long long child(long long node, int token) const;
  long long parent(long long node) const;
  long long node_of(const State& s) const;
  State state_of(long long node) const;

  // Code of the last min(depth, lgram) tokens, in [0, A^min(depth, lgram)).
  long long gram_code(long long node, int lgram) const;

 private:
  Vocab vocab_;
  int horizon_ = 0;
  std::vector<long long> offsets_;  // size horizon+2
};

// Feature map psi(s, a). Tabular maps emit a one-hot over (depth,
// last-L-gram, action) keys; random-linear maps project that one-hot
// through a seeded Gaussian matrix; composite maps concatenate parts.
class FeatureMap {
 public:
  enum class Kind { TabularLGram, RandomLinear, Composite };

  static FeatureMap tabular_lgram(const TreeIndex& tree, int lgram);
  static FeatureMap random_linear(const TreeIndex& tree, int lgram, int dim,
                                  std::uint64_t seed);
  static FeatureMap composite(std::vector<FeatureMap> parts);

  Kind kind() const { return kind_; }
  int dim() const { return dim_; }
  int lgram() const { return lgram_; }
  bool is_tabular() const { return kind_ == Kind::TabularLGram; }

  Eigen::VectorXd psi(const State& s, int token) const;
  Eigen::VectorXd psi_node(long long node, int token) const;
  // One-hot coordinate for tabular maps.
  long long tabular_index(long long node, int token) const;
  // Dimension of the underlying one-hot key space.
  long long raw_dim() const { return raw_dim_; }

 private:
  FeatureMap() = default;

  Kind kind_ = Kind::TabularLGram;
  TreeIndex tree_;
  int lgram_ = 1;
  int dim_ = 0;
  long long raw_dim_ = 0;
  std::vector<long long> key_offsets_;  // per depth
  Eigen::MatrixXd projection_;          // dim x raw_dim, random-linear only
  std::vector<FeatureMap> parts_;       // composite only
};

// Per-state token distribution with full support. Rows are normalized and
// strictly positive.
class ReferencePolicy {
 public:
  static ReferencePolicy uniform(const TreeIndex& tree);
  // Logits drawn i.i.d. N(0, scale^2) per (depth, L-gram, action) key, so the
  // policy depends on at most the last `lgram` tokens.
  static ReferencePolicy softmax_linear(const TreeIndex& tree, int lgram,
                                        double scale, std::uint64_t seed);

  const Eigen::MatrixXd& probs() const { return probs_; }
  const Eigen::MatrixXd& logits() const { return logits_; }
  const Eigen::MatrixXd& log_probs() const { return log_probs_; }
  double prob(long long node, int token) const { return probs_(node, token); }

 private:
  ReferencePolicy() = default;
  void finalize();  // softmax + invariant checks

  Eigen::MatrixXd logits_;     // internal x A
  Eigen::MatrixXd probs_;      // internal x A
  Eigen::MatrixXd log_probs_;  // internal x A
};

// Deterministic finite-horizon token-generation MDP: transitions append one
// token and episodes terminate exactly at depth T.
class LanguageMdp {
 public:
  LanguageMdp(Vocab vocab, int horizon, FeatureMap features,
              ReferencePolicy ref, long long node_budget = kDefaultNodeBudget);

  int vocab_size() const { return tree_.vocab_size(); }
  int horizon() const { return tree_.horizon(); }
  const TreeIndex& tree() const { return tree_; }
  const FeatureMap& features() const { return features_; }
  const ReferencePolicy& ref() const { return ref_; }

  long long node_count() const { return tree_.node_count(); }
  long long internal_count() const { return tree_.internal_count(); }

  State concat(const State& s, int token) const;
  std::vector<State> enumerate_nodes() const;
  // Tokens available from a state: the whole vocabulary below the horizon,
  // nothing at terminal depth.
  std::vector<int> available_tokens(const State& s) const;

  Eigen::VectorXd psi(const State& s, int token) const {
    return features_.psi(s, token);
  }
  // Cached ||psi(s,a)||_2 per internal node and action.
  const Eigen::MatrixXd& psi_norms() const { return psi_norms_; }

 private:
  TreeIndex tree_;
  FeatureMap features_;
  ReferencePolicy ref_;
  Eigen::MatrixXd psi_norms_;
};

// Numerically stable row softmax used for every policy construction.
Eigen::VectorXd softmax_row(const Eigen::Ref<const Eigen::VectorXd>& logits);
// log(sum_i exp(x_i)) with max subtraction.
double log_sum_exp(const Eigen::Ref<const Eigen::VectorXd>& x);

}  // namespace souplab
