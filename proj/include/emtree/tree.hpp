#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "emtree/core_types.hpp"

namespace emtree {

// One feature a tree may split on. Split-value genes are scaled affinely
// into [lower, upper].
struct FeatureSpec {
  std::string name;
  double lower = 0.0;
  double upper = 1.0;
};

// Leaf output domain of one action channel.
struct ActionSpec {
  enum class Kind { Continuous, Discrete };

  std::string name;
  Kind kind = Kind::Continuous;
  double lo = 0.0;              // continuous range
  double hi = 1.0;
  std::vector<double> values;   // discrete ordered set

  static ActionSpec continuous(std::string name, double lo, double hi);
  static ActionSpec discrete(std::string name, std::vector<double> values);

  // Maps a leaf gene in [0,1] onto the action domain: affine for continuous,
  // floor-binned (with top clamp) for discrete.
  double from_gene(double gene) const;
};

constexpr int genes_per_tree(int n_splits) { return 3 * n_splits + 1; }

struct TreeNode {
  int feature = -1;        // < 0 marks a leaf
  double threshold = 0.0;  // in feature units
  double action = 0.0;     // leaf output
  std::int64_t visits = 0; // leaf visit counter (recording mode only)
  int left = -1;
  int right = -1;

  bool leaf() const { return feature < 0; }
};

// A single decision tree. decode() produces the complete heap-shaped form
// (slots 0..N-1 internal, N..2N leaves); pruned() produces an arbitrary-shape
// tree containing only visited leaves. Immutable after construction except
// for leaf visit counters.
class DecisionTree {
 public:
  DecisionTree() = default;
  DecisionTree(std::vector<TreeNode> nodes, int root);

  // Walks from the root: left child when obs[feature] < threshold, right
  // otherwise (ties go right). When `record` is set the reached leaf's visit
  // counter increments. Throws EvalError when the observation does not cover
  // the tree's features.
  double act(const Observation& obs, bool record = false);

  // Removes every zero-visit leaf, replacing each affected parent by its
  // surviving child, repeated until all remaining leaves have visits >= 1.
  // Throws EvalError when no leaf was ever visited.
  DecisionTree pruned() const;

  int leaf_count() const;
  int max_depth() const;  // nodes on the longest root-to-leaf path
  std::int64_t total_visits() const;
  void reset_visits();

  bool structurally_equal(const DecisionTree& other) const;

  const std::vector<TreeNode>& nodes() const { return nodes_; }
  int root() const { return root_; }

 private:
  std::vector<TreeNode> nodes_;
  int root_ = -1;
};

// Decodes one 3N+1 gene block: genes [0,N) pick split features (floor-binned
// over the catalog), [N,2N) place thresholds inside the feature ranges,
// [2N,3N] fill the N+1 leaves. Total and deterministic on [0,1]^(3N+1).
DecisionTree decode(std::span<const double> genome_block,
                    const std::vector<FeatureSpec>& features,
                    const ActionSpec& action, int n_splits);

struct TreeChannel {
  DecisionTree tree;
  ActionSpec action;
};

// One tree per action channel over a shared feature catalog.
class TreeEnsemble {
 public:
  TreeEnsemble() = default;
  TreeEnsemble(std::vector<FeatureSpec> features, std::vector<TreeChannel> channels);

  std::vector<double> act(const Observation& obs, bool record = false);
  TreeEnsemble pruned() const;
  void reset_visits();

  std::size_t channel_count() const { return channels_.size(); }
  const std::vector<FeatureSpec>& features() const { return features_; }
  const std::vector<TreeChannel>& channels() const { return channels_; }
  std::vector<TreeChannel>& channels() { return channels_; }

 private:
  std::vector<FeatureSpec> features_;
  std::vector<TreeChannel> channels_;
};

// Splits the genome into per-channel blocks (block k decodes channel k).
// Throws CodecError unless genome length = channels * (3N+1).
TreeEnsemble ensemble_decode(const Genome& genome,
                             const std::vector<FeatureSpec>& features,
                             const std::vector<ActionSpec>& actions,
                             int n_splits);

// Graphviz DOT text: internal nodes labelled "name < threshold" (thresholds
// with two decimals), edges labelled true/false, leaves labelled with the
// action value and visit count.
std::string to_dot(const DecisionTree& tree, const std::vector<FeatureSpec>& features,
                   const ActionSpec& action);
std::string to_dot(const TreeEnsemble& ensemble);

// Versioned JSON persistence, lossless including visit counts.
std::string ensemble_to_json(const TreeEnsemble& ensemble);
TreeEnsemble ensemble_from_json(const std::string& text);
void save_ensemble(const TreeEnsemble& ensemble, const std::filesystem::path& file);
TreeEnsemble load_ensemble(const std::filesystem::path& file);

// Genome files: flat CSV of reals, one value per line.
void write_genome_csv(const std::filesystem::path& file, const Genome& genome);
Genome read_genome_csv(const std::filesystem::path& file);

}  // namespace emtree
