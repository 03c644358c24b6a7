#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace silva {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Ternary nuclearity attribute of an internal discourse node. The enum
// order NN < NS < SN is the deterministic tie-breaking order.
enum class Nuclearity : std::uint8_t { NN = 0, NS = 1, SN = 2 };

inline const char* to_string(Nuclearity label) {
  switch (label) {
    case Nuclearity::NN: return "NN";
    case Nuclearity::NS: return "NS";
    case Nuclearity::SN: return "SN";
  }
  return "??";
}

inline constexpr Nuclearity kAllNuclearities[] = {Nuclearity::NN,
                                                  Nuclearity::NS,
                                                  Nuclearity::SN};

// Elementary discourse unit: one leaf of a discourse tree.
// sentiment in [-1, 1], attention in (0, 1] after ingestion.
struct Edu {
  int index = 0;  // 1-based position in the document
  std::string text;
  double sentiment = 0.0;
  double attention = 0.0;
};

// (sentiment, attention) pair carried by every tree node; the quantity the
// CKY pass aggregates bottom-up. attention is strictly positive.
struct NodeSignal {
  double sentiment = 0.0;
  double attention = 0.0;
};

struct Document {
  std::string doc_id;
  double gold_polarity = 0.0;
  std::vector<Edu> edus;

  int n_edus() const { return static_cast<int>(edus.size()); }
};

// Closed interval of 1-based EDU indices.
struct Span {
  int first = 0;
  int last = 0;

  friend bool operator==(const Span&, const Span&) = default;
  friend auto operator<=>(const Span&, const Span&) = default;
};

// Immutable binary tree over EDU indices. Internal nodes carry a nuclearity
// label. Substructure is shared: copies are cheap and thread-safe, which the
// beam search relies on (one subtree participates in many candidates).
class DiscourseTree {
 public:
  DiscourseTree() = default;

  static DiscourseTree leaf(int edu_index) {
    auto node = std::make_shared<Node>();
    node->first = edu_index;
    node->last = edu_index;
    node->height = 0;
    return DiscourseTree(std::move(node));
  }

  static DiscourseTree internal(Nuclearity label, DiscourseTree left,
                                DiscourseTree right) {
    if (!left.root_ || !right.root_)
      throw Error("internal(): child tree is empty");
    auto node = std::make_shared<Node>();
    node->label = label;
    node->first = left.root_->first;
    node->last = right.root_->last;
    node->height = 1 + std::max(left.root_->height, right.root_->height);
    node->left = std::move(left.root_);
    node->right = std::move(right.root_);
    return DiscourseTree(std::move(node));
  }

  explicit operator bool() const { return root_ != nullptr; }
  bool is_leaf() const { return root_ && !root_->left; }

  int first() const { return root_->first; }
  int last() const { return root_->last; }
  Span span() const { return {root_->first, root_->last}; }
  int n_leaves() const { return root_->last - root_->first + 1; }
  int height() const { return root_->height; }

  // Internal nodes only.
  Nuclearity label() const { return root_->label; }
  DiscourseTree left() const { return DiscourseTree(root_->left); }
  DiscourseTree right() const { return DiscourseTree(root_->right); }

  // Index of the last leaf of the left child; 0 for a leaf. Part of the
  // deterministic tie-breaking order.
  int split() const { return root_->left ? root_->left->last : 0; }

  friend bool operator==(const DiscourseTree& a, const DiscourseTree& b) {
    return equal(a.root_.get(), b.root_.get());
  }

 private:
  struct Node {
    std::shared_ptr<const Node> left;
    std::shared_ptr<const Node> right;
    int first = 0;
    int last = 0;
    int height = 0;
    Nuclearity label = Nuclearity::NN;
  };

  explicit DiscourseTree(std::shared_ptr<const Node> root)
      : root_(std::move(root)) {}

  static bool equal(const Node* a, const Node* b) {
    if (a == b) return true;
    if (!a || !b) return false;
    if (a->first != b->first || a->last != b->last) return false;
    if (!a->left != !b->left) return false;
    if (!a->left) return true;  // leaves with equal index
    return a->label == b->label && equal(a->left.get(), b->left.get()) &&
           equal(a->right.get(), b->right.get());
  }

  std::shared_ptr<const Node> root_;
};

// The beam element: a tree plus its root aggregate and its distance to the
// document gold polarity under the configured distance.
struct ScoredTree {
  DiscourseTree tree;
  NodeSignal signal;
  double distance = 0.0;
};

enum class TreeDefect {
  none,
  leaf_count_mismatch,
  non_contiguous_span,
  duplicate_leaf,
};

struct TreeValidation {
  TreeDefect defect = TreeDefect::none;
  Span where{0, 0};  // offending node span
  std::string message;

  explicit operator bool() const { return defect == TreeDefect::none; }
};

namespace detail {

inline void collect_leaves(const DiscourseTree& t, std::vector<int>& out) {
  if (t.is_leaf()) {
    out.push_back(t.first());
  } else {
    collect_leaves(t.left(), out);
    collect_leaves(t.right(), out);
  }
}

// First internal node (in-order) whose children are not adjacent.
inline bool find_gap(const DiscourseTree& t, Span& where) {
  if (t.is_leaf()) return false;
  if (find_gap(t.left(), where)) return true;
  if (t.left().last() + 1 != t.right().first()) {
    where = t.span();
    return true;
  }
  return find_gap(t.right(), where);
}

}  // namespace detail

// Checks the structural invariants: binary shape is guaranteed by
// construction; leaves must be exactly 1..n in left-to-right order and every
// internal node must join two adjacent spans.
inline TreeValidation validate_tree(const DiscourseTree& tree, int n_leaves) {
  if (!tree) {
    return {TreeDefect::leaf_count_mismatch, {0, 0}, "empty tree"};
  }
  std::vector<int> leaves;
  // A corrupted tree can carry an inverted span, so n_leaves() is a hint only.
  leaves.reserve(static_cast<std::size_t>(std::max(tree.n_leaves(), 0)));
  detail::collect_leaves(tree, leaves);

  std::set<int> seen;
  for (int leaf : leaves) {
    if (!seen.insert(leaf).second) {
      return {TreeDefect::duplicate_leaf,
              {leaf, leaf},
              "leaf " + std::to_string(leaf) + " occurs more than once"};
    }
  }
  Span gap;
  if (detail::find_gap(tree, gap)) {
    return {TreeDefect::non_contiguous_span, gap,
            "children of node (" + std::to_string(gap.first) + ", " +
                std::to_string(gap.last) + ") are not adjacent"};
  }
  if (static_cast<int>(leaves.size()) != n_leaves || leaves.front() != 1) {
    return {TreeDefect::leaf_count_mismatch,
            tree.span(),
            "expected leaves 1.." + std::to_string(n_leaves) + ", got " +
                std::to_string(leaves.size()) + " starting at " +
                std::to_string(leaves.front())};
  }
  return {};
}

namespace detail {

inline void collect_internal_spans(const DiscourseTree& t,
                                   std::set<Span>& out) {
  if (t.is_leaf()) return;
  out.insert(t.span());
  collect_internal_spans(t.left(), out);
  collect_internal_spans(t.right(), out);
}

}  // namespace detail

// The n-1 spans of internal nodes, root included; these constituents are the
// unit of the structure/nuclearity metric.
inline std::set<Span> internal_spans(const DiscourseTree& tree) {
  std::set<Span> spans;
  detail::collect_internal_spans(tree, spans);
  return spans;
}

// ceil(log2(n)) for n >= 1; the minimal height of a binary tree over n leaves.
inline int ceil_log2(int n) {
  return n <= 1 ? 0 : std::bit_width(static_cast<unsigned>(n - 1));
}

struct TreeStats {
  int n_edus = 0;
  int height = 0;
  double balance = 0.0;
};

// balance = height / minimal possible height: 1.0 is perfectly balanced,
// (n-1)/ceil(log2 n) is a chain. A single leaf counts as balanced.
inline TreeStats tree_stats(const DiscourseTree& tree) {
  TreeStats stats;
  stats.n_edus = tree.n_leaves();
  stats.height = tree.height();
  stats.balance = stats.n_edus <= 1 ? 1.0
                                    : static_cast<double>(stats.height) /
                                          ceil_log2(stats.n_edus);
  return stats;
}

}  // namespace silva
