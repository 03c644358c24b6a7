#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "silva/core.hpp"
#include "silva/rng.hpp"
#include "silva/treebank.hpp"

namespace silva {

class CorpusMismatchError : public Error {
 public:
  using Error::Error;
};

class EduCountMismatchError : public Error {
 public:
  using Error::Error;
};

enum class EvalMode { structure, nuclearity };

inline const char* to_string(EvalMode mode) {
  return mode == EvalMode::structure ? "structure" : "nuclearity";
}

struct PrecisionReport {
  EvalMode mode = EvalMode::structure;
  bool exclude_root = false;
  std::uint64_t matched = 0;
  std::uint64_t total = 0;
  double precision = 0.0;  // percentage
  std::size_t n_docs = 0;
};

namespace detail {

inline void collect_labeled_spans(const DiscourseTree& t,
                                  std::map<Span, Nuclearity>& out) {
  if (t.is_leaf()) return;
  out.emplace(t.span(), t.label());
  collect_labeled_spans(t.left(), out);
  collect_labeled_spans(t.right(), out);
}

}  // namespace detail

inline std::map<Span, Nuclearity> labeled_spans(const DiscourseTree& tree) {
  std::map<Span, Nuclearity> spans;
  detail::collect_labeled_spans(tree, spans);
  return spans;
}

// Micro-averaged precision over constituents, pooled across the corpus
// before dividing. Both sides contribute exactly n-1 constituents per
// document (n-2 with the root excluded), so micro precision equals micro
// recall. In nuclearity mode a constituent matches only if span and label
// both agree. Vacuously 100 when there are no constituents at all.
inline PrecisionReport micro_precision(
    const std::vector<TreebankRecord>& pred,
    const std::vector<TreebankRecord>& ref, EvalMode mode,
    bool exclude_root = false) {
  std::map<std::string, const TreebankRecord*> ref_by_id;
  for (const TreebankRecord& r : ref) ref_by_id.emplace(r.doc_id, &r);
  if (ref_by_id.size() != ref.size()) {
    throw CorpusMismatchError("reference treebank has duplicate doc_ids");
  }
  std::set<std::string> pred_ids;
  for (const TreebankRecord& p : pred) pred_ids.insert(p.doc_id);
  if (pred_ids.size() != pred.size()) {
    throw CorpusMismatchError("predicted treebank has duplicate doc_ids");
  }
  if (pred.size() != ref.size()) {
    throw CorpusMismatchError(
        "treebanks differ in size: " + std::to_string(pred.size()) + " vs " +
        std::to_string(ref.size()) + " documents");
  }

  PrecisionReport report;
  report.mode = mode;
  report.exclude_root = exclude_root;
  report.n_docs = pred.size();

  for (const TreebankRecord& p : pred) {
    auto it = ref_by_id.find(p.doc_id);
    if (it == ref_by_id.end()) {
      throw CorpusMismatchError("doc_id '" + p.doc_id +
                                "' missing from reference treebank");
    }
    const TreebankRecord& r = *it->second;
    if (p.n_edus != r.n_edus) {
      throw EduCountMismatchError(
          "doc_id '" + p.doc_id + "': " + std::to_string(p.n_edus) + " vs " +
          std::to_string(r.n_edus) + " EDUs");
    }
    const Span root{1, p.n_edus};
    auto pred_spans = labeled_spans(p.tree);
    auto ref_spans = labeled_spans(r.tree);
    if (exclude_root) {
      pred_spans.erase(root);
      ref_spans.erase(root);
    }
    report.total += pred_spans.size();
    for (const auto& [span, label] : pred_spans) {
      auto hit = ref_spans.find(span);
      if (hit == ref_spans.end()) continue;
      if (mode == EvalMode::structure || hit->second == label) {
        ++report.matched;
      }
    }
  }

  report.precision =
      report.total == 0
          ? 100.0
          : 100.0 * static_cast<double>(report.matched) / report.total;
  return report;
}

// Baseline chains, all internal nodes carrying `fill`.
inline DiscourseTree right_branching(int n, Nuclearity fill = Nuclearity::NN) {
  if (n < 1) throw Error("right_branching: n must be >= 1");
  DiscourseTree t = DiscourseTree::leaf(n);
  for (int i = n - 1; i >= 1; --i) {
    t = DiscourseTree::internal(fill, DiscourseTree::leaf(i), std::move(t));
  }
  return t;
}

inline DiscourseTree left_branching(int n, Nuclearity fill = Nuclearity::NN) {
  if (n < 1) throw Error("left_branching: n must be >= 1");
  DiscourseTree t = DiscourseTree::leaf(1);
  for (int i = 2; i <= n; ++i) {
    t = DiscourseTree::internal(fill, std::move(t), DiscourseTree::leaf(i));
  }
  return t;
}

namespace detail {

inline double log_catalan(int m) {
  // Catalan(m) = (2m)! / ((m+1)! m!); small values come from a table.
  static const std::vector<double> table = [] {
    std::vector<double> t(4096);
    for (int i = 0; i < 4096; ++i) {
      t[static_cast<std::size_t>(i)] = std::lgamma(2.0 * i + 1.0) -
                                       std::lgamma(i + 2.0) -
                                       std::lgamma(i + 1.0);
    }
    return t;
  }();
  if (m >= 0 && m < static_cast<int>(table.size())) {
    return table[static_cast<std::size_t>(m)];
  }
  return std::lgamma(2.0 * m + 1.0) - std::lgamma(m + 2.0) -
         std::lgamma(m + 1.0);
}

inline DiscourseTree random_tree_over(int first, int n_leaves, Rng& rng,
                                      const std::optional<Nuclearity>& fixed) {
  if (n_leaves == 1) return DiscourseTree::leaf(first);
  // Left part gets k leaves with probability proportional to
  // Catalan(k-1) * Catalan(n-k-1), which makes the draw uniform over the
  // Catalan(n-1) shapes. Weights are formed in log space to avoid overflow.
  std::vector<double> weights(static_cast<std::size_t>(n_leaves - 1));
  double max_log = -1e300;
  for (int k = 1; k < n_leaves; ++k) {
    double lw = log_catalan(k - 1) + log_catalan(n_leaves - k - 1);
    weights[static_cast<std::size_t>(k - 1)] = lw;
    max_log = std::max(max_log, lw);
  }
  double sum = 0.0;
  for (double& w : weights) {
    w = std::exp(w - max_log);
    sum += w;
  }
  double u = rng.uniform() * sum;
  int k = n_leaves - 1;
  double acc = 0.0;
  for (int i = 1; i < n_leaves; ++i) {
    acc += weights[static_cast<std::size_t>(i - 1)];
    if (u < acc) {
      k = i;
      break;
    }
  }
  Nuclearity label =
      fixed ? *fixed : kAllNuclearities[rng.below(3)];
  DiscourseTree left = random_tree_over(first, k, rng, fixed);
  DiscourseTree right = random_tree_over(first + k, n_leaves - k, rng, fixed);
  return DiscourseTree::internal(label, std::move(left), std::move(right));
}

}  // namespace detail

// Uniform sample over binary shapes; labels drawn uniformly from the ternary
// set unless a fixed label is given. Reproducible for a fixed rng seed.
inline DiscourseTree random_tree(
    int n, Rng& rng, std::optional<Nuclearity> fixed_label = std::nullopt) {
  if (n < 1) throw Error("random_tree: n must be >= 1");
  return detail::random_tree_over(1, n, rng, fixed_label);
}

}  // namespace silva
