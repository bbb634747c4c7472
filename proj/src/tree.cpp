#include "emtree/tree.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "emtree/format.hpp"

namespace emtree {

using json = nlohmann::ordered_json;

namespace {

constexpr int kSchemaVersion = 1;

int bin_index(double gene, int bins) {
  const int idx = static_cast<int>(std::floor(gene * bins));
  return std::clamp(idx, 0, bins - 1);
}

std::string escape_label(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  return out;
}

std::string fixed2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

void append_tree_dot(std::string& out, const DecisionTree& tree,
                     const std::vector<FeatureSpec>& features, const std::string& prefix,
                     const std::string& indent) {
  const auto& nodes = tree.nodes();
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const TreeNode& nd = nodes[i];
    const std::string id = prefix + std::to_string(i);
    if (nd.leaf()) {
      out += indent + id + " [shape=box, label=\"" + format_double(nd.action) +
             "\\n" + std::to_string(nd.visits) + " visits\"];\n";
    } else {
      out += indent + id + " [label=\"" + escape_label(features[nd.feature].name) +
             " < " + fixed2(nd.threshold) + "\"];\n";
      out += indent + id + " -> " + prefix + std::to_string(nd.left) +
             " [label=\"true\"];\n";
      out += indent + id + " -> " + prefix + std::to_string(nd.right) +
             " [label=\"false\"];\n";
    }
  }
}

json node_to_json(const TreeNode& nd) {
  json j;
  if (nd.leaf()) {
    j["action"] = nd.action;
    j["visits"] = nd.visits;
  } else {
    j["feature"] = nd.feature;
    j["threshold"] = nd.threshold;
    j["left"] = nd.left;
    j["right"] = nd.right;
  }
  return j;
}

TreeNode node_from_json(const json& j) {
  TreeNode nd;
  if (j.contains("feature")) {
    nd.feature = j.at("feature").get<int>();
    nd.threshold = j.at("threshold").get<double>();
    nd.left = j.at("left").get<int>();
    nd.right = j.at("right").get<int>();
  } else {
    nd.action = j.at("action").get<double>();
    nd.visits = j.at("visits").get<std::int64_t>();
  }
  return nd;
}

}  // namespace

ActionSpec ActionSpec::continuous(std::string name, double lo, double hi) {
  if (!(lo < hi)) throw std::invalid_argument("action '" + name + "': lo must be < hi");
  ActionSpec a;
  a.name = std::move(name);
  a.kind = Kind::Continuous;
  a.lo = lo;
  a.hi = hi;
  return a;
}

ActionSpec ActionSpec::discrete(std::string name, std::vector<double> values) {
  if (values.empty())
    throw std::invalid_argument("action '" + name + "': discrete set must be non-empty");
  ActionSpec a;
  a.name = std::move(name);
  a.kind = Kind::Discrete;
  a.values = std::move(values);
  return a;
}

double ActionSpec::from_gene(double gene) const {
  if (kind == Kind::Continuous) return lo + gene * (hi - lo);
  return values[bin_index(gene, static_cast<int>(values.size()))];
}

DecisionTree::DecisionTree(std::vector<TreeNode> nodes, int root)
    : nodes_(std::move(nodes)), root_(root) {
  if (root_ < 0 || root_ >= static_cast<int>(nodes_.size()))
    throw std::invalid_argument("decision tree: root out of range");
}

double DecisionTree::act(const Observation& obs, bool record) {
  if (root_ < 0) throw EvalError("decision tree: empty tree");
  int idx = root_;
  while (!nodes_[idx].leaf()) {
    const TreeNode& nd = nodes_[idx];
    if (nd.feature >= static_cast<int>(obs.values.size()))
      throw EvalError("decision tree: observation is missing feature index " +
                      std::to_string(nd.feature));
    idx = obs.values[nd.feature] < nd.threshold ? nd.left : nd.right;
  }
  if (record) ++nodes_[idx].visits;
  return nodes_[idx].action;
}

namespace {

// Copies the visited part of the subtree at `idx`; a parent with a single
// surviving child is replaced by that child. Returns -1 for a fully
// unvisited subtree.
int copy_visited(const std::vector<TreeNode>& src, int idx, std::vector<TreeNode>& dst) {
  const TreeNode& nd = src[idx];
  if (nd.leaf()) {
    if (nd.visits < 1) return -1;
    TreeNode leaf = nd;
    leaf.left = leaf.right = -1;
    dst.push_back(leaf);
    return static_cast<int>(dst.size()) - 1;
  }
  const int left = copy_visited(src, nd.left, dst);
  const int right = copy_visited(src, nd.right, dst);
  if (left < 0 && right < 0) return -1;
  if (left < 0) return right;
  if (right < 0) return left;
  TreeNode inner = nd;
  inner.left = left;
  inner.right = right;
  dst.push_back(inner);
  return static_cast<int>(dst.size()) - 1;
}

}  // namespace

DecisionTree DecisionTree::pruned() const {
  if (root_ < 0) throw EvalError("prune: empty tree");
  std::vector<TreeNode> kept;
  kept.reserve(nodes_.size());
  const int root = copy_visited(nodes_, root_, kept);
  if (root < 0) throw EvalError("prune: no recorded visits; run a recording episode first");
  return DecisionTree(std::move(kept), root);
}

int DecisionTree::leaf_count() const {
  int count = 0;
  for (const TreeNode& nd : nodes_)
    if (nd.leaf()) ++count;
  return count;
}

namespace {
int depth_below(const std::vector<TreeNode>& nodes, int idx) {
  const TreeNode& nd = nodes[idx];
  if (nd.leaf()) return 1;
  return 1 + std::max(depth_below(nodes, nd.left), depth_below(nodes, nd.right));
}
}  // namespace

int DecisionTree::max_depth() const { return root_ < 0 ? 0 : depth_below(nodes_, root_); }

std::int64_t DecisionTree::total_visits() const {
  std::int64_t total = 0;
  for (const TreeNode& nd : nodes_)
    if (nd.leaf()) total += nd.visits;
  return total;
}

void DecisionTree::reset_visits() {
  for (TreeNode& nd : nodes_)
    if (nd.leaf()) nd.visits = 0;
}

namespace {
bool equal_below(const std::vector<TreeNode>& a, int ia, const std::vector<TreeNode>& b,
                 int ib) {
  const TreeNode& na = a[ia];
  const TreeNode& nb = b[ib];
  if (na.leaf() != nb.leaf()) return false;
  if (na.leaf()) return na.action == nb.action && na.visits == nb.visits;
  if (na.feature != nb.feature || na.threshold != nb.threshold) return false;
  return equal_below(a, na.left, b, nb.left) && equal_below(a, na.right, b, nb.right);
}
}  // namespace

bool DecisionTree::structurally_equal(const DecisionTree& other) const {
  if (root_ < 0 || other.root_ < 0) return root_ == other.root_;
  return equal_below(nodes_, root_, other.nodes_, other.root_);
}

DecisionTree decode(std::span<const double> genome_block,
                    const std::vector<FeatureSpec>& features, const ActionSpec& action,
                    int n_splits) {
  if (n_splits < 1) throw CodecError("decode: need at least one split node");
  if (features.empty()) throw CodecError("decode: feature catalog is empty");
  for (const FeatureSpec& f : features)
    if (!(f.lower < f.upper))
      throw CodecError("decode: feature '" + f.name + "' has an empty range");
  const int expected = genes_per_tree(n_splits);
  if (static_cast<int>(genome_block.size()) != expected)
    throw CodecError("decode: genome block has " + std::to_string(genome_block.size()) +
                     " genes, expected " + std::to_string(expected));

  // Heap layout: slots 0..N-1 are internal with children 2i+1 and 2i+2,
  // slots N..2N are leaves.
  const int total = 2 * n_splits + 1;
  std::vector<TreeNode> nodes(total);
  const int feature_count = static_cast<int>(features.size());
  for (int i = 0; i < n_splits; ++i) {
    const int fidx = bin_index(genome_block[i], feature_count);
    const FeatureSpec& f = features[fidx];
    nodes[i].feature = fidx;
    nodes[i].threshold = f.lower + genome_block[n_splits + i] * (f.upper - f.lower);
    nodes[i].left = 2 * i + 1;
    nodes[i].right = 2 * i + 2;
  }
  for (int j = 0; j <= n_splits; ++j) {
    nodes[n_splits + j].action = action.from_gene(genome_block[2 * n_splits + j]);
  }
  return DecisionTree(std::move(nodes), 0);
}

TreeEnsemble::TreeEnsemble(std::vector<FeatureSpec> features,
                           std::vector<TreeChannel> channels)
    : features_(std::move(features)), channels_(std::move(channels)) {
  if (channels_.empty())
    throw std::invalid_argument("ensemble: need at least one action channel");
}

std::vector<double> TreeEnsemble::act(const Observation& obs, bool record) {
  if (obs.values.size() < features_.size())
    throw EvalError("ensemble: observation has " + std::to_string(obs.values.size()) +
                    " values, catalog needs " + std::to_string(features_.size()));
  std::vector<double> actions(channels_.size());
  for (std::size_t c = 0; c < channels_.size(); ++c)
    actions[c] = channels_[c].tree.act(obs, record);
  return actions;
}

TreeEnsemble TreeEnsemble::pruned() const {
  std::vector<TreeChannel> channels;
  channels.reserve(channels_.size());
  for (const TreeChannel& ch : channels_)
    channels.push_back(TreeChannel{ch.tree.pruned(), ch.action});
  return TreeEnsemble(features_, std::move(channels));
}

void TreeEnsemble::reset_visits() {
  for (TreeChannel& ch : channels_) ch.tree.reset_visits();
}

TreeEnsemble ensemble_decode(const Genome& genome,
                             const std::vector<FeatureSpec>& features,
                             const std::vector<ActionSpec>& actions, int n_splits) {
  if (actions.empty()) throw CodecError("ensemble decode: no action channels");
  const std::size_t block = static_cast<std::size_t>(genes_per_tree(n_splits));
  const std::size_t expected = actions.size() * block;
  if (genome.size() != expected)
    throw CodecError("ensemble decode: genome has " + std::to_string(genome.size()) +
                     " genes, expected " + std::to_string(expected) + " (" +
                     std::to_string(actions.size()) + " channels x " +
                     std::to_string(block) + ")");
  std::vector<TreeChannel> channels;
  channels.reserve(actions.size());
  for (std::size_t c = 0; c < actions.size(); ++c) {
    const std::span<const double> slice(genome.data() + c * block, block);
    channels.push_back(TreeChannel{decode(slice, features, actions[c], n_splits),
                                   actions[c]});
  }
  return TreeEnsemble(features, std::move(channels));
}

std::string to_dot(const DecisionTree& tree, const std::vector<FeatureSpec>& features,
                   const ActionSpec& action) {
  std::string out = "digraph decision_tree {\n";
  out += "  label=\"" + escape_label(action.name) + "\";\n";
  append_tree_dot(out, tree, features, "n", "  ");
  out += "}\n";
  return out;
}

std::string to_dot(const TreeEnsemble& ensemble) {
  std::string out = "digraph tree_ensemble {\n";
  const auto& channels = ensemble.channels();
  for (std::size_t c = 0; c < channels.size(); ++c) {
    out += "  subgraph cluster_" + std::to_string(c) + " {\n";
    out += "    label=\"" + escape_label(channels[c].action.name) + "\";\n";
    append_tree_dot(out, channels[c].tree, ensemble.features(),
                    "c" + std::to_string(c) + "_n", "    ");
    out += "  }\n";
  }
  out += "}\n";
  return out;
}

namespace {

json action_to_json(const ActionSpec& a) {
  json j;
  j["name"] = a.name;
  if (a.kind == ActionSpec::Kind::Continuous) {
    j["kind"] = "continuous";
    j["lo"] = a.lo;
    j["hi"] = a.hi;
  } else {
    j["kind"] = "discrete";
    j["values"] = a.values;
  }
  return j;
}

ActionSpec action_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "continuous")
    return ActionSpec::continuous(j.at("name").get<std::string>(),
                                  j.at("lo").get<double>(), j.at("hi").get<double>());
  if (kind == "discrete")
    return ActionSpec::discrete(j.at("name").get<std::string>(),
                                j.at("values").get<std::vector<double>>());
  throw ConfigError("ensemble file: unknown action kind '" + kind + "'");
}

}  // namespace

std::string ensemble_to_json(const TreeEnsemble& ensemble) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = "tree_ensemble";
  json feats = json::array();
  for (const FeatureSpec& f : ensemble.features())
    feats.push_back({{"name", f.name}, {"lower", f.lower}, {"upper", f.upper}});
  j["features"] = feats;
  json channels = json::array();
  for (const TreeChannel& ch : ensemble.channels()) {
    json nodes = json::array();
    for (const TreeNode& nd : ch.tree.nodes()) nodes.push_back(node_to_json(nd));
    channels.push_back({{"action", action_to_json(ch.action)},
                        {"tree", {{"root", ch.tree.root()}, {"nodes", nodes}}}});
  }
  j["channels"] = channels;
  return j.dump(2) + "\n";
}

TreeEnsemble ensemble_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("ensemble file: ") + e.what());
  }
  try {
    if (!j.contains("schema_version") || j.at("schema_version").get<int>() != kSchemaVersion)
      throw ConfigError("ensemble file: unsupported schema_version (expected " +
                        std::to_string(kSchemaVersion) + ")");
    std::vector<FeatureSpec> features;
    for (const json& f : j.at("features"))
      features.push_back(FeatureSpec{f.at("name").get<std::string>(),
                                     f.at("lower").get<double>(),
                                     f.at("upper").get<double>()});
    std::vector<TreeChannel> channels;
    for (const json& c : j.at("channels")) {
      std::vector<TreeNode> nodes;
      for (const json& nj : c.at("tree").at("nodes")) nodes.push_back(node_from_json(nj));
      channels.push_back(TreeChannel{
          DecisionTree(std::move(nodes), c.at("tree").at("root").get<int>()),
          action_from_json(c.at("action"))});
    }
    return TreeEnsemble(std::move(features), std::move(channels));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("ensemble file: ") + e.what());
  }
}

void save_ensemble(const TreeEnsemble& ensemble, const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw ConfigError("cannot write " + file.string());
  out << ensemble_to_json(ensemble);
}

TreeEnsemble load_ensemble(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot read " + file.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return ensemble_from_json(buf.str());
}

void write_genome_csv(const std::filesystem::path& file, const Genome& genome) {
  std::ofstream out(file);
  if (!out) throw ConfigError("cannot write " + file.string());
  for (double v : genome) out << format_double(v) << '\n';
}

Genome read_genome_csv(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot read " + file.string());
  Genome genome;
  std::string line;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      if (cell.empty()) continue;
      try {
        genome.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ConfigError("genome file " + file.string() + ": bad number '" + cell + "'");
      }
    }
  }
  return genome;
}

}  // namespace emtree
