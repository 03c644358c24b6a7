#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "silva/aggregation.hpp"
#include "silva/core.hpp"
#include "silva/rng.hpp"

namespace silva {

class TooLargeError : public Error {
 public:
  using Error::Error;
};

class CountOverflowError : public Error {
 public:
  using Error::Error;
};

class EmptyDocumentError : public Error {
 public:
  using Error::Error;
};

struct GenerationConfig {
  int beam_size = 10;
  double epsilon_max = 0.5;
  double temperature = 0.1;
  std::uint64_t seed = 0;
  AggregationConfig aggregation{};
  DistanceKind distance_kind = DistanceKind::absolute;

  // Negative control for oracle-check: inverts the tie order so the beam
  // deliberately keeps and returns the worst candidates.
  bool invert_tie_order_for_tests = false;

  bool valid() const {
    return beam_size >= 1 && temperature > 0.0 && epsilon_max >= 0.0 &&
           epsilon_max <= 1.0 && aggregation.valid();
  }
};

struct ChartCell {
  Span span{0, 0};
  std::vector<ScoredTree> beam;  // sorted best-first, length <= beam_size
};

namespace detail {

inline std::optional<std::uint64_t> try_count_labeled_trees(int n) {
  // Catalan(n-1) shapes, 3^(n-1) labelings. Catalan(m) = Catalan(m-1)*2(2m-1)/(m+1).
  unsigned __int128 count = 1;
  const unsigned __int128 limit = std::numeric_limits<std::uint64_t>::max();
  for (int m = 1; m <= n - 1; ++m) {
    count = count * static_cast<unsigned>(2 * (2 * m - 1)) /
            static_cast<unsigned>(m + 1);
    if (count > limit) return std::nullopt;
  }
  for (int i = 0; i < n - 1; ++i) {
    count *= 3;
    if (count > limit) return std::nullopt;
  }
  return static_cast<std::uint64_t>(count);
}

}  // namespace detail

// Catalan(n-1) * 3^(n-1): distinct nuclearity-labeled binary trees over n
// leaves. This is the unpruned CKY search space.
inline std::uint64_t count_labeled_trees(int n) {
  if (n < 1) throw Error("count_labeled_trees: n must be >= 1");
  if (auto count = detail::try_count_labeled_trees(n)) return *count;
  static const int max_n = [] {
    int m = 1;
    while (detail::try_count_labeled_trees(m + 1)) ++m;
    return m;
  }();
  throw CountOverflowError("count_labeled_trees: n=" + std::to_string(n) +
                           " overflows 64 bits (largest representable n is " +
                           std::to_string(max_n) + ")");
}

// Exploration probability for a chart cell. Decays linearly from epsilon_max
// at the smallest merged span (length 2) down to 0 at the root, so deep
// subtrees stay diverse while the document-level pick is pure exploitation.
inline double exploration_rate(int span_len, int n,
                               const GenerationConfig& cfg) {
  if (span_len < 2 || span_len > n) {
    throw Error("exploration_rate: requires 2 <= span_len <= n");
  }
  if (n <= 2) return 0.0;
  return cfg.epsilon_max *
         (1.0 - static_cast<double>(span_len - 2) / static_cast<double>(n - 2));
}

namespace detail {

// Deterministic candidate preference: distance, then shape balance, then
// leftmost split, then label (NN < NS < SN), then generation order. Within
// one chart cell all candidates cover the same span, so comparing raw
// heights is order-identical to comparing the balance statistic.
struct TieKey {
  double distance = 0.0;
  std::int32_t height = 0;
  std::int32_t split = 0;
  std::int8_t label_rank = -1;  // -1 for a leaf
  std::uint32_t ordinal = 0;

  friend bool operator<(const TieKey& a, const TieKey& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    if (a.height != b.height) return a.height < b.height;
    if (a.split != b.split) return a.split < b.split;
    if (a.label_rank != b.label_rank) return a.label_rank < b.label_rank;
    return a.ordinal < b.ordinal;
  }
};

inline TieKey tie_key(const ScoredTree& scored, std::uint32_t ordinal) {
  const DiscourseTree& t = scored.tree;
  return TieKey{scored.distance, t.height(), t.split(),
                t.is_leaf() ? std::int8_t{-1}
                            : static_cast<std::int8_t>(t.label()),
                ordinal};
}

// Selects up to beam_size indices from keys. Exploitation keeps the best by
// tie order. Exploration (one coin per cell) keeps the single best candidate
// and fills the remaining slots by sampling without replacement with
// probability proportional to softmax(-distance / temperature); the draw is
// realized with the Gumbel top-k equivalence, one pass over the candidates.
// Selected indices are returned sorted by tie order.
inline std::vector<std::uint32_t> select_beam(const std::vector<TieKey>& keys,
                                              double epsilon,
                                              const GenerationConfig& cfg,
                                              Rng& rng) {
  const std::uint32_t count = static_cast<std::uint32_t>(keys.size());
  const std::uint32_t want =
      std::min<std::uint64_t>(static_cast<std::uint64_t>(cfg.beam_size), count);

  const bool invert = cfg.invert_tie_order_for_tests;
  auto key_less = [&keys, invert](std::uint32_t a, std::uint32_t b) {
    return invert ? keys[b] < keys[a] : keys[a] < keys[b];
  };

  bool explore = false;
  if (epsilon > 0.0) explore = rng.uniform() < epsilon;

  std::vector<std::uint32_t> selected;
  if (count <= want) {
    selected.resize(count);
    std::iota(selected.begin(), selected.end(), 0u);
    std::sort(selected.begin(), selected.end(), key_less);
    return selected;
  }

  if (!explore) {
    selected.resize(count);
    std::iota(selected.begin(), selected.end(), 0u);
    std::nth_element(selected.begin(), selected.begin() + want, selected.end(),
                     key_less);
    selected.resize(want);
    std::sort(selected.begin(), selected.end(), key_less);
    return selected;
  }

  std::uint32_t elite = 0;
  for (std::uint32_t i = 1; i < count; ++i) {
    if (key_less(i, elite)) elite = i;
  }
  std::vector<double> gumbel_key(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    gumbel_key[i] = -keys[i].distance / cfg.temperature + rng.gumbel();
  }
  auto gumbel_better = [&gumbel_key](std::uint32_t a, std::uint32_t b) {
    if (gumbel_key[a] != gumbel_key[b]) return gumbel_key[a] > gumbel_key[b];
    return a < b;
  };
  selected.reserve(count - 1);
  for (std::uint32_t i = 0; i < count; ++i) {
    if (i != elite) selected.push_back(i);
  }
  std::nth_element(selected.begin(), selected.begin() + (want - 1),
                   selected.end(), gumbel_better);
  selected.resize(want - 1);
  selected.push_back(elite);
  std::sort(selected.begin(), selected.end(), key_less);
  return selected;
}

// Candidate record inside one chart cell: everything selection and the
// later tree materialization need, with no tree allocated yet.
struct Cand {
  double distance;
  double sentiment;
  double attention;
  std::uint32_t left_idx;
  std::uint32_t right_idx;
  std::uint32_t left_len;
  std::uint32_t ordinal;  // generation order within the cell
  std::int32_t height;
  Nuclearity label;
};

// Same order as TieKey for candidates of one cell: heights compare like the
// balance statistic on a fixed span, left_len like the absolute split index
// for a fixed start.
inline bool cand_less(const Cand& a, const Cand& b) {
  if (a.distance != b.distance) return a.distance < b.distance;
  if (a.height != b.height) return a.height < b.height;
  if (a.left_len != b.left_len) return a.left_len < b.left_len;
  if (a.label != b.label) {
    return static_cast<std::uint8_t>(a.label) <
           static_cast<std::uint8_t>(b.label);
  }
  return a.ordinal < b.ordinal;
}

struct GumbelSlot {
  double key;
  Cand cand;
};

inline bool gumbel_better(const GumbelSlot& a, const GumbelSlot& b) {
  if (a.key != b.key) return a.key > b.key;
  return a.cand.ordinal < b.cand.ordinal;
}

}  // namespace detail

// D-TIE preference between two scored trees covering the same span (residual
// exact ties fall back to generation order inside the engine).
inline bool tie_less(const ScoredTree& a, const ScoredTree& b) {
  return detail::tie_key(a, 0) < detail::tie_key(b, 0);
}

// All |left.beam| x |right.beam| x 3 merges of two adjacent cells, scored
// against the document gold polarity. Enumeration order: left beam index,
// right beam index, label.
inline std::vector<ScoredTree> cell_candidates(const ChartCell& left,
                                               const ChartCell& right,
                                               const Document& doc,
                                               const GenerationConfig& cfg) {
  if (left.span.last + 1 != right.span.first) {
    throw Error("cell_candidates: cells are not adjacent");
  }
  std::vector<ScoredTree> out;
  out.reserve(left.beam.size() * right.beam.size() * 3);
  for (const ScoredTree& l : left.beam) {
    for (const ScoredTree& r : right.beam) {
      for (Nuclearity label : kAllNuclearities) {
        NodeSignal signal = combine_node(l.signal, r.signal, label,
                                         cfg.aggregation);
        double distance = distance_value(doc.gold_polarity, signal.sentiment,
                                         cfg.distance_kind);
        out.push_back({DiscourseTree::internal(label, l.tree, r.tree), signal,
                       distance});
      }
    }
  }
  return out;
}

// Prunes one cell's candidates to the beam. One exploration coin per call;
// see detail::select_beam for the two regimes. The returned beam always
// contains the tie-best candidate, is sorted by tie order, and has length
// min(beam_size, |candidates|).
inline std::vector<ScoredTree> prune_beam(
    const std::vector<ScoredTree>& candidates, int span_len, int n,
    const GenerationConfig& cfg, Rng& rng) {
  if (candidates.empty()) throw Error("prune_beam: candidates must be non-empty");
  if (!cfg.valid()) throw Error("prune_beam: invalid GenerationConfig");
  const double epsilon =
      span_len >= 2 ? exploration_rate(span_len, n, cfg) : 0.0;
  std::vector<detail::TieKey> keys;
  keys.reserve(candidates.size());
  for (std::uint32_t i = 0; i < candidates.size(); ++i) {
    keys.push_back(detail::tie_key(candidates[i], i));
  }
  std::vector<std::uint32_t> chosen = detail::select_beam(keys, epsilon, cfg, rng);
  std::vector<ScoredTree> beam;
  beam.reserve(chosen.size());
  for (std::uint32_t i : chosen) beam.push_back(candidates[i]);
  return beam;
}

// The chart of a full beam-pruned CKY run over one document. Cells are
// filled in order of increasing span length; each cell's candidate set is
// the union over split points of all child-beam pairs under all three
// labels, pruned once. Deterministic given (doc, cfg): the random stream is
// seeded from (cfg.seed, doc.doc_id).
class BeamChart {
 public:
  BeamChart(const Document& doc, const GenerationConfig& cfg)
      : n_(doc.n_edus()) {
    if (!cfg.valid()) throw Error("beam_generate: invalid GenerationConfig");
    if (n_ < 1) {
      throw EmptyDocumentError("document '" + doc.doc_id + "' has no EDUs");
    }
    Rng rng(mix_seed(cfg.seed, doc.doc_id));
    cells_.resize(static_cast<std::size_t>(n_) * (n_ + 1) / 2);

    for (int i = 1; i <= n_; ++i) {
      const Edu& edu = doc.edus[static_cast<std::size_t>(i - 1)];
      NodeSignal signal{edu.sentiment, edu.attention};
      double distance = distance_value(doc.gold_polarity, signal.sentiment,
                                       cfg.distance_kind);
      ChartCell& cell = at(i, 1);
      cell.span = {i, i};
      cell.beam.push_back({DiscourseTree::leaf(i), signal, distance});
    }

    const std::size_t beam_size = static_cast<std::size_t>(cfg.beam_size);
    std::vector<detail::Cand> survivors;  // reused per cell
    std::vector<detail::GumbelSlot> gumbel_top;

    for (int len = 2; len <= n_; ++len) {
      const double epsilon = exploration_rate(len, n_, cfg);
      for (int start = 1; start + len - 1 <= n_; ++start) {
        std::size_t total = 0;
        for (int k = 1; k < len; ++k) {
          total += at(start, k).beam.size() *
                   at(start + k, len - k).beam.size() * 3;
        }

        // One exploration coin per cell; a cell whose candidates all fit in
        // the beam needs no pruning, so the coin (if drawn) has no effect.
        bool explore = false;
        if (epsilon > 0.0) explore = rng.uniform() < epsilon;

        const bool invert = cfg.invert_tie_order_for_tests;
        auto better = [invert](const detail::Cand& a, const detail::Cand& b) {
          return invert ? detail::cand_less(b, a) : detail::cand_less(a, b);
        };

        survivors.clear();
        if (total <= beam_size) {
          enumerate_cell(start, len, doc, cfg, [&](const detail::Cand& c) {
            survivors.push_back(c);
          });
          std::sort(survivors.begin(), survivors.end(), better);
        } else if (!explore) {
          // Exploitation: streaming top-k under the tie order. Rejected
          // candidates never touch memory, which keeps the pass bandwidth-
          // light. The tie order is total (ordinal last), so the surviving
          // set is unique no matter how the selection is implemented.
          enumerate_cell(start, len, doc, cfg, [&](const detail::Cand& c) {
            if (survivors.size() < beam_size) {
              survivors.push_back(c);
              std::push_heap(survivors.begin(), survivors.end(), better);
            } else if (better(c, survivors.front())) {
              std::pop_heap(survivors.begin(), survivors.end(), better);
              survivors.back() = c;
              std::push_heap(survivors.begin(), survivors.end(), better);
            }
          });
          std::sort(survivors.begin(), survivors.end(), better);
        } else {
          // Exploration: keep the tie-best candidate, fill the remaining
          // slots by softmax(-distance/temperature) sampling without
          // replacement via the Gumbel top-k equivalence. One Gumbel variate
          // per candidate, drawn in generation order.
          detail::Cand elite{};
          bool have_elite = false;
          gumbel_top.clear();
          auto slot_worse = [](const detail::GumbelSlot& a,
                               const detail::GumbelSlot& b) {
            return detail::gumbel_better(a, b);  // worst slot at the heap top
          };
          enumerate_cell(start, len, doc, cfg, [&](const detail::Cand& c) {
            const double g = -c.distance / cfg.temperature + rng.gumbel();
            if (!have_elite || better(c, elite)) {
              elite = c;
              have_elite = true;
            }
            if (gumbel_top.size() < beam_size) {
              gumbel_top.push_back({g, c});
              std::push_heap(gumbel_top.begin(), gumbel_top.end(), slot_worse);
            } else if (detail::gumbel_better({g, c}, gumbel_top.front())) {
              std::pop_heap(gumbel_top.begin(), gumbel_top.end(), slot_worse);
              gumbel_top.back() = {g, c};
              std::push_heap(gumbel_top.begin(), gumbel_top.end(), slot_worse);
            }
          });
          // survivors = elite + top beam_size-1 Gumbel slots among the rest.
          std::sort(gumbel_top.begin(), gumbel_top.end(),
                    [](const detail::GumbelSlot& a, const detail::GumbelSlot& b) {
                      return detail::gumbel_better(a, b);
                    });
          survivors.push_back(elite);
          for (const detail::GumbelSlot& slot : gumbel_top) {
            if (survivors.size() >= beam_size) break;
            if (slot.cand.ordinal == elite.ordinal) continue;
            survivors.push_back(slot.cand);
          }
          std::sort(survivors.begin(), survivors.end(), better);
        }

        ChartCell& cell = at(start, len);
        cell.span = {start, start + len - 1};
        cell.beam.reserve(survivors.size());
        for (const detail::Cand& c : survivors) {
          const int left_len = static_cast<int>(c.left_len);
          const ChartCell& left = at(start, left_len);
          const ChartCell& right = at(start + left_len, len - left_len);
          cell.beam.push_back(
              {DiscourseTree::internal(c.label, left.beam[c.left_idx].tree,
                                       right.beam[c.right_idx].tree),
               {c.sentiment, c.attention},
               c.distance});
        }
      }
    }
  }

  int n() const { return n_; }

  const ChartCell& cell(int start, int len) const { return at(start, len); }

  const ScoredTree& best() const { return at(1, n_).beam.front(); }

 private:
  // Candidates of a cell in generation order: split point ascending, then
  // left beam index, right beam index, label. cell_candidates follows the
  // same nesting, so the two paths see identical sequences.
  template <class Emit>
  void enumerate_cell(int start, int len, const Document& doc,
                      const GenerationConfig& cfg, Emit&& emit) const {
    std::uint32_t ordinal = 0;
    for (int left_len = 1; left_len < len; ++left_len) {
      const ChartCell& left = at(start, left_len);
      const ChartCell& right = at(start + left_len, len - left_len);
      for (std::uint32_t li = 0; li < left.beam.size(); ++li) {
        const ScoredTree& l = left.beam[li];
        const std::int32_t left_height = l.tree.height();
        for (std::uint32_t ri = 0; ri < right.beam.size(); ++ri) {
          const ScoredTree& r = right.beam[ri];
          const std::int32_t height = 1 + std::max(left_height, r.tree.height());
          for (Nuclearity label : kAllNuclearities) {
            NodeSignal signal =
                combine_node(l.signal, r.signal, label, cfg.aggregation);
            double distance = distance_value(doc.gold_polarity,
                                             signal.sentiment,
                                             cfg.distance_kind);
            emit(detail::Cand{distance, signal.sentiment, signal.attention,
                              li, ri, static_cast<std::uint32_t>(left_len),
                              ordinal++, height, label});
          }
        }
      }
    }
  }

  ChartCell& at(int start, int len) {
    return cells_[index(start, len)];
  }
  const ChartCell& at(int start, int len) const {
    return cells_[index(start, len)];
  }
  std::size_t index(int start, int len) const {
    // Rows by length: length m has n-m+1 cells.
    std::size_t row = static_cast<std::size_t>(len - 1);
    return row * static_cast<std::size_t>(n_) - row * (row - 1) / 2 +
           static_cast<std::size_t>(start - 1);
  }

  int n_;
  std::vector<ChartCell> cells_;
};

// Best discourse tree for one document under beam-pruned stochastic CKY.
inline ScoredTree beam_generate(const Document& doc,
                                const GenerationConfig& cfg) {
  return BeamChart(doc, cfg).best();
}

// Exhaustive enumeration of every labeled binary tree (the intractable
// baseline the beam approximates). Kept independent of the beam machinery so
// it can serve as the correctness oracle; shares only the aggregation
// semantics and the tie order, which define the objective itself.
inline ScoredTree exhaustive_best(const Document& doc,
                                  const GenerationConfig& cfg,
                                  std::uint64_t tree_limit = 1'000'000) {
  const int n = doc.n_edus();
  if (n < 1) {
    throw EmptyDocumentError("document '" + doc.doc_id + "' has no EDUs");
  }
  std::uint64_t count;
  try {
    count = count_labeled_trees(n);
  } catch (const CountOverflowError&) {
    throw TooLargeError("exhaustive_best: " + std::to_string(n) +
                        " EDUs is far beyond the oracle limit");
  }
  if (count > tree_limit) {
    throw TooLargeError("exhaustive_best: " + std::to_string(count) +
                        " labeled trees over " + std::to_string(n) +
                        " EDUs exceeds the limit of " +
                        std::to_string(tree_limit));
  }

  struct Entry {
    DiscourseTree tree;
    NodeSignal signal;
  };
  // all_over[span index] = every labeled tree over that span.
  auto span_index = [n](int start, int len) {
    std::size_t row = static_cast<std::size_t>(len - 1);
    return row * static_cast<std::size_t>(n) - row * (row - 1) / 2 +
           static_cast<std::size_t>(start - 1);
  };
  std::vector<std::vector<Entry>> all_over(
      static_cast<std::size_t>(n) * (n + 1) / 2);

  for (int i = 1; i <= n; ++i) {
    const Edu& edu = doc.edus[static_cast<std::size_t>(i - 1)];
    all_over[span_index(i, 1)].push_back(
        {DiscourseTree::leaf(i), {edu.sentiment, edu.attention}});
  }
  for (int len = 2; len <= n; ++len) {
    for (int start = 1; start + len - 1 <= n; ++start) {
      std::vector<Entry>& out = all_over[span_index(start, len)];
      for (int left_len = 1; left_len < len; ++left_len) {
        const auto& lefts = all_over[span_index(start, left_len)];
        const auto& rights =
            all_over[span_index(start + left_len, len - left_len)];
        for (const Entry& l : lefts) {
          for (const Entry& r : rights) {
            for (Nuclearity label : kAllNuclearities) {
              out.push_back(
                  {DiscourseTree::internal(label, l.tree, r.tree),
                   combine_node(l.signal, r.signal, label, cfg.aggregation)});
            }
          }
        }
      }
    }
  }

  const std::vector<Entry>& roots = all_over[span_index(1, n)];
  ScoredTree best_scored{
      roots[0].tree, roots[0].signal,
      distance_value(doc.gold_polarity, roots[0].signal.sentiment,
                     cfg.distance_kind)};
  detail::TieKey best_key = detail::tie_key(best_scored, 0);
  for (std::uint32_t i = 1; i < roots.size(); ++i) {
    ScoredTree scored{
        roots[i].tree, roots[i].signal,
        distance_value(doc.gold_polarity, roots[i].signal.sentiment,
                       cfg.distance_kind)};
    detail::TieKey key = detail::tie_key(scored, i);
    if (key < best_key) {
      best_key = key;
      best_scored = std::move(scored);
    }
  }
  return best_scored;
}

struct GenerationResult {
  std::string doc_id;
  std::optional<ScoredTree> tree;  // engaged on success
  std::string error;               // non-empty on failure
};

// Runs beam_generate over a corpus, optionally across worker threads.
// Each document draws from its own (cfg.seed, doc_id)-derived stream, so the
// output is identical for any parallelism or document order. Per-document
// failures are reported in the result slot without aborting the stream.
inline std::vector<GenerationResult> generate_corpus(
    const std::vector<Document>& docs, const GenerationConfig& cfg,
    unsigned parallelism = std::thread::hardware_concurrency()) {
  std::set<std::string_view> ids;
  for (const Document& doc : docs) {
    if (!ids.insert(doc.doc_id).second) {
      throw Error("generate_corpus: duplicate doc_id '" + doc.doc_id + "'");
    }
  }
  std::vector<GenerationResult> results(docs.size());
  auto work = [&](std::size_t i) {
    results[i].doc_id = docs[i].doc_id;
    try {
      results[i].tree = beam_generate(docs[i], cfg);
    } catch (const std::exception& e) {
      results[i].error = e.what();
    }
  };
  const std::size_t n_docs = docs.size();
  unsigned workers = std::max(1u, parallelism);
  workers = static_cast<unsigned>(
      std::min<std::size_t>(workers, std::max<std::size_t>(n_docs, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n_docs; ++i) work(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i; (i = next.fetch_add(1)) < n_docs;) work(i);
      });
    }
    for (std::thread& t : pool) t.join();
  }
  return results;
}

}  // namespace silva
