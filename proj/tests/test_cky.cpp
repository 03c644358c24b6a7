#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <silva/cky.hpp>
#include <silva/synthetic.hpp>
#include <silva/treebank.hpp>

using silva::BeamChart;
using silva::ChartCell;
using silva::DiscourseTree;
using silva::Document;
using silva::GenerationConfig;
using silva::NodeSignal;
using silva::Nuclearity;
using silva::Rng;
using silva::ScoredTree;

namespace {

Document make_doc(std::string id, double gold,
                  std::vector<std::pair<double, double>> scores) {
  Document doc;
  doc.doc_id = std::move(id);
  doc.gold_polarity = gold;
  int i = 0;
  for (auto [s, a] : scores) {
    doc.edus.push_back({++i, "", s, a});
  }
  return doc;
}

ChartCell leaf_cell(int index, NodeSignal signal, double gold) {
  ChartCell cell;
  cell.span = {index, index};
  cell.beam.push_back({DiscourseTree::leaf(index), signal,
                       silva::distance_value(gold, signal.sentiment,
                                             silva::DistanceKind::absolute)});
  return cell;
}

// D-TIE with first-wins ordinal, mirroring the engine's residual tie rule.
const ScoredTree& tie_best(const std::vector<ScoredTree>& candidates) {
  const ScoredTree* best = &candidates.front();
  for (const ScoredTree& c : candidates) {
    if (silva::tie_less(c, *best)) best = &c;
  }
  return *best;
}

}  // namespace

TEST_CASE("count_labeled_trees") {
  CHECK(silva::count_labeled_trees(1) == 1);
  CHECK(silva::count_labeled_trees(2) == 3);
  CHECK(silva::count_labeled_trees(4) == 135);  // Catalan(3)=5 shapes x 27 labelings
  CHECK(silva::count_labeled_trees(8) == 938'223);
  CHECK(silva::count_labeled_trees(20) == 2'054'021'907'784'499'730ull);
  CHECK_THROWS_AS(silva::count_labeled_trees(0), silva::Error);
  try {
    silva::count_labeled_trees(21);
    FAIL("expected CountOverflowError");
  } catch (const silva::CountOverflowError& e) {
    CHECK(std::string(e.what()).find("20") != std::string::npos);
  }
}

TEST_CASE("exploration_rate decays linearly with span length") {
  GenerationConfig cfg;  // epsilon_max 0.5
  CHECK(silva::exploration_rate(10, 10, cfg) == 0.0);
  CHECK(silva::exploration_rate(2, 10, cfg) == 0.5);
  CHECK(silva::exploration_rate(6, 10, cfg) == Catch::Approx(0.25));
  CHECK(silva::exploration_rate(2, 2, cfg) == 0.0);
  CHECK_THROWS_AS(silva::exploration_rate(1, 10, cfg), silva::Error);
  CHECK_THROWS_AS(silva::exploration_rate(11, 10, cfg), silva::Error);
}

TEST_CASE("cell_candidates enumerates all pairs under all labels") {
  GenerationConfig cfg;
  Document doc = make_doc("d", 1.0, {{0.5, 0.2}, {-0.5, 0.2}});
  ChartCell left = leaf_cell(1, {0.5, 0.2}, doc.gold_polarity);
  ChartCell right = leaf_cell(2, {-0.5, 0.2}, doc.gold_polarity);

  auto singles = silva::cell_candidates(left, right, doc, cfg);
  REQUIRE(singles.size() == 3);
  // Order is (left, right, label) with labels NN, NS, SN; the NS candidate
  // must match the combine_node worked example.
  CHECK(singles[1].tree.label() == Nuclearity::NS);
  CHECK(singles[1].signal.sentiment == Catch::Approx((0.1 - 0.05) / 0.3));
  CHECK(singles[1].signal.attention == Catch::Approx(0.3));
  CHECK(singles[1].distance ==
        Catch::Approx(std::abs(1.0 - (0.1 - 0.05) / 0.3)));

  // Widened beams multiply out: 10 x 10 x 3.
  ChartCell wide_left = left;
  ChartCell wide_right = right;
  Rng rng(3);
  while (wide_left.beam.size() < 10) {
    wide_left.beam.push_back(
        {DiscourseTree::leaf(1), {rng.uniform_range(-1, 1), rng.uniform_open()}, 0.0});
    wide_right.beam.push_back(
        {DiscourseTree::leaf(2), {rng.uniform_range(-1, 1), rng.uniform_open()}, 0.0});
  }
  CHECK(silva::cell_candidates(wide_left, wide_right, doc, cfg).size() == 300);

  ChartCell far = leaf_cell(4, {0.1, 0.1}, doc.gold_polarity);
  CHECK_THROWS_AS(silva::cell_candidates(left, far, doc, cfg), silva::Error);
}

TEST_CASE("prune_beam exploitation keeps the beam_size tie-best candidates") {
  GenerationConfig cfg;
  cfg.epsilon_max = 0.0;
  Document doc = make_doc("d", 0.8, {{0.0, 0.0}, {0.0, 0.0}});
  (void)doc;

  // 300 synthetic candidates over one span.
  Rng rng(41);
  std::vector<ScoredTree> candidates;
  for (int i = 0; i < 300; ++i) {
    NodeSignal signal{rng.uniform_range(-1, 1), rng.uniform_open()};
    candidates.push_back({DiscourseTree::internal(Nuclearity::NN,
                                                  DiscourseTree::leaf(1),
                                                  DiscourseTree::leaf(2)),
                          signal, std::abs(0.8 - signal.sentiment)});
  }

  Rng prune_rng(7);
  auto beam = silva::prune_beam(candidates, 2, 10, cfg, prune_rng);
  REQUIRE(beam.size() == 10);

  // Reference: stable sort of all candidates under D-TIE.
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return silva::tie_less(candidates[a], candidates[b]);
  });
  for (std::size_t i = 0; i < beam.size(); ++i) {
    REQUIRE(beam[i].distance == candidates[order[i]].distance);
    REQUIRE(beam[i].tree == candidates[order[i]].tree);
  }

  // A single candidate passes through untouched whatever epsilon does.
  std::vector<ScoredTree> one{candidates[0]};
  cfg.epsilon_max = 1.0;
  auto single = silva::prune_beam(one, 2, 10, cfg, prune_rng);
  REQUIRE(single.size() == 1);
  CHECK(single[0].tree == one[0].tree);

  CHECK_THROWS_AS(silva::prune_beam({}, 2, 10, cfg, prune_rng), silva::Error);
}

TEST_CASE("prune_beam exploration keeps the tie-best candidate (elitism)") {
  GenerationConfig cfg;
  cfg.epsilon_max = 1.0;  // span_len 2 of n 10 explores every time
  cfg.beam_size = 4;
  cfg.temperature = 1.0;

  Rng rng(99);
  std::vector<ScoredTree> candidates;
  for (int i = 0; i < 60; ++i) {
    NodeSignal signal{rng.uniform_range(-1, 1), rng.uniform_open()};
    candidates.push_back({DiscourseTree::internal(Nuclearity::NN,
                                                  DiscourseTree::leaf(1),
                                                  DiscourseTree::leaf(2)),
                          signal, std::abs(0.5 - signal.sentiment)});
  }
  const ScoredTree& best = tie_best(candidates);

  Rng prune_rng(123);
  for (int trial = 0; trial < 200; ++trial) {
    auto beam = silva::prune_beam(candidates, 2, 10, cfg, prune_rng);
    REQUIRE(beam.size() == 4);
    bool has_best = false;
    for (const ScoredTree& kept : beam) {
      has_best = has_best || kept.distance == best.distance;
    }
    REQUIRE(has_best);
    for (std::size_t i = 1; i < beam.size(); ++i) {
      REQUIRE_FALSE(silva::tie_less(beam[i], beam[i - 1]));
    }
  }
}

TEST_CASE("softmax sampling concentrates on minimal distance as tau -> 0") {
  // Candidates with well-separated distances; beam of 2 = elite slot plus
  // one sampled slot. In the zero-temperature limit the sampled slot must be
  // the best of the remaining candidates, i.e. the global second-best.
  std::vector<silva::detail::TieKey> keys;
  for (int i = 0; i < 50; ++i) {
    keys.push_back({0.005 * i, 0, 0, 0, static_cast<std::uint32_t>(i)});
  }

  GenerationConfig cold;
  cold.beam_size = 2;
  cold.temperature = 1e-4;
  Rng rng(2025);
  int second_best = 0;
  const int trials = 10'000;
  for (int t = 0; t < trials; ++t) {
    auto picked = silva::detail::select_beam(keys, 1.0, cold, rng);
    REQUIRE(picked.size() == 2);
    REQUIRE(picked[0] == 0);  // elite
    if (picked[1] == 1) ++second_best;
  }
  CHECK(static_cast<double>(second_best) / trials > 0.99);

  // At a hot temperature the sampled slot scatters widely.
  GenerationConfig hot = cold;
  hot.temperature = 1000.0;
  second_best = 0;
  for (int t = 0; t < trials; ++t) {
    auto picked = silva::detail::select_beam(keys, 1.0, hot, rng);
    if (picked[1] == 1) ++second_best;
  }
  CHECK(static_cast<double>(second_best) / trials < 0.2);
}

TEST_CASE("exhaustive_best examples") {
  GenerationConfig cfg;

  SECTION("single EDU") {
    Document doc = make_doc("one", 0.7, {{0.3, 1.0}});
    ScoredTree best = silva::exhaustive_best(doc, cfg);
    CHECK(best.tree == DiscourseTree::leaf(1));
    CHECK(best.distance == Catch::Approx(0.4));
  }

  SECTION("two EDUs: minimum over the three labelings") {
    Document doc = make_doc("two", 0.9, {{0.5, 0.2}, {-0.5, 0.2}});
    double expected = 2.0;
    for (Nuclearity label : silva::kAllNuclearities) {
      NodeSignal merged =
          silva::combine_node({0.5, 0.2}, {-0.5, 0.2}, label, cfg.aggregation);
      expected = std::min(expected, std::abs(0.9 - merged.sentiment));
    }
    ScoredTree best = silva::exhaustive_best(doc, cfg);
    CHECK(best.distance == expected);
    CHECK(best.tree.label() == Nuclearity::NS);
  }

  SECTION("frozen regression fixture over four EDUs") {
    // Fixed by running this enumeration itself; values are exact doubles.
    Document doc = make_doc(
        "four", 1.0, {{1.0, 0.25}, {-1.0, 0.25}, {1.0, 0.25}, {-1.0, 0.25}});
    ScoredTree best = silva::exhaustive_best(doc, cfg);
    CHECK(silva::serialize_tree(best.tree) ==
          "(NS (leaf 1) (SN (leaf 2) (NS (leaf 3) (leaf 4))))");
    CHECK(best.distance == 0.5);
    CHECK(best.signal.sentiment == 0.5);
    CHECK(best.signal.attention == 0.5);
  }

  SECTION("oracle limit") {
    Rng rng(8);
    Document nine = silva::synthesize_document(9, rng, "nine");
    CHECK_THROWS_AS(silva::exhaustive_best(nine, cfg), silva::TooLargeError);
    Document four = silva::synthesize_document(4, rng, "four");
    CHECK_THROWS_AS(silva::exhaustive_best(four, cfg, /*tree_limit=*/100),
                    silva::TooLargeError);
  }
}

TEST_CASE("beam_generate basics") {
  GenerationConfig cfg;

  Document one = make_doc("one", 0.7, {{0.3, 1.0}});
  ScoredTree best = silva::beam_generate(one, cfg);
  CHECK(best.tree == DiscourseTree::leaf(1));
  CHECK(best.signal.sentiment == 0.3);
  CHECK(best.signal.attention == 1.0);

  Document empty;
  empty.doc_id = "empty";
  CHECK_THROWS_AS(silva::beam_generate(empty, cfg), silva::EmptyDocumentError);

  GenerationConfig bad;
  bad.beam_size = 0;
  CHECK_THROWS_AS(silva::beam_generate(one, bad), silva::Error);
}

TEST_CASE("oracle equivalence: full-width beam matches exhaustive search") {
  Rng rng(60601);
  for (int trial = 0; trial < 200; ++trial) {
    int n = 2 + static_cast<int>(rng.below(4));  // 2..5
    Document doc =
        silva::synthesize_document(n, rng, "oracle-" + std::to_string(trial));
    GenerationConfig cfg;
    cfg.epsilon_max = 0.0;
    cfg.beam_size = static_cast<int>(silva::count_labeled_trees(n));
    cfg.seed = trial;
    double beam = silva::beam_generate(doc, cfg).distance;
    double oracle = silva::exhaustive_best(doc, cfg).distance;
    REQUIRE(beam == oracle);
  }
}

TEST_CASE("full-width beam is optimal even with exploration enabled") {
  // Without pruning pressure the exploration coin changes nothing: cells
  // whose candidates all fit in the beam are never sampled.
  Rng rng(77007);
  Document doc = silva::synthesize_document(5, rng, "wide");
  GenerationConfig wide;
  wide.epsilon_max = 0.5;
  wide.beam_size = static_cast<int>(silva::count_labeled_trees(5));
  GenerationConfig off = wide;
  off.epsilon_max = 0.0;
  CHECK(silva::beam_generate(doc, wide).distance ==
        silva::beam_generate(doc, off).distance);

  // An unpruned chart enumerates every labeled tree exactly once, so each
  // cell's beam size equals the closed-form count for its span length.
  BeamChart chart(doc, off);
  for (int len = 1; len <= 5; ++len) {
    for (int start = 1; start + len - 1 <= 5; ++start) {
      REQUIRE(chart.cell(start, len).beam.size() ==
              silva::count_labeled_trees(len));
    }
  }
}

TEST_CASE("beam bound and per-cell elitism hold across the chart") {
  GenerationConfig cfg;
  cfg.beam_size = 4;
  cfg.epsilon_max = 0.7;
  cfg.temperature = 0.2;

  Rng rng(515);
  for (int round = 0; round < 20; ++round) {
    int n = 4 + static_cast<int>(rng.below(7));  // 4..10
    Document doc =
        silva::synthesize_document(n, rng, "chart-" + std::to_string(round));
    cfg.seed = round;
    BeamChart chart(doc, cfg);

    for (int len = 2; len <= n; ++len) {
      for (int start = 1; start + len - 1 <= n; ++start) {
        const ChartCell& cell = chart.cell(start, len);
        REQUIRE(cell.span == silva::Span{start, start + len - 1});
        REQUIRE(cell.beam.size() <=
                static_cast<std::size_t>(cfg.beam_size));
        REQUIRE_FALSE(cell.beam.empty());

        // Recompute the candidate set through the public surface: union of
        // cell_candidates over all split points, in split order.
        std::vector<ScoredTree> candidates;
        for (int k = 1; k < len; ++k) {
          auto part = silva::cell_candidates(chart.cell(start, k),
                                             chart.cell(start + k, len - k),
                                             doc, cfg);
          candidates.insert(candidates.end(), part.begin(), part.end());
        }
        REQUIRE(candidates.size() <=
                3u * static_cast<std::size_t>(cfg.beam_size) *
                    static_cast<std::size_t>(cfg.beam_size) *
                    static_cast<std::size_t>(len - 1));

        // Elitism: the tie-best candidate survived whatever the coin did.
        const ScoredTree& best = tie_best(candidates);
        bool survived = false;
        for (const ScoredTree& kept : cell.beam) {
          survived = survived || kept.tree == best.tree;
        }
        REQUIRE(survived);

        // Beam is sorted by the tie order, every member covers the span,
        // every member validates.
        for (std::size_t i = 0; i < cell.beam.size(); ++i) {
          if (i > 0) REQUIRE_FALSE(silva::tie_less(cell.beam[i], cell.beam[i - 1]));
          REQUIRE(cell.beam[i].tree.span() == cell.span);
        }
      }
    }
    REQUIRE(silva::validate_tree(chart.best().tree, n));
  }
}

TEST_CASE("fuzz: every generated tree is well-formed") {
  GenerationConfig cfg;
  Rng rng(31007);
  for (int trial = 0; trial < 500; ++trial) {
    int n = 1 + static_cast<int>(rng.below(12));
    Document doc =
        silva::synthesize_document(n, rng, "wf-" + std::to_string(trial));
    cfg.seed = trial;
    ScoredTree best = silva::beam_generate(doc, cfg);
    REQUIRE(silva::validate_tree(best.tree, n));
    REQUIRE(best.distance >= 0.0);
    REQUIRE(best.distance <= 2.0);
  }
}

TEST_CASE("determinism of beam_generate") {
  Rng rng(1000);
  Document doc = silva::synthesize_document(25, rng, "det");

  GenerationConfig cfg;
  cfg.seed = 42;
  ScoredTree a = silva::beam_generate(doc, cfg);
  ScoredTree b = silva::beam_generate(doc, cfg);
  CHECK(a.tree == b.tree);
  CHECK(a.distance == b.distance);
  CHECK(a.signal.sentiment == b.signal.sentiment);

  SECTION("epsilon_max = 0 makes the seed irrelevant") {
    GenerationConfig off = cfg;
    off.epsilon_max = 0.0;
    off.seed = 1;
    ScoredTree first = silva::beam_generate(doc, off);
    off.seed = 2;
    ScoredTree second = silva::beam_generate(doc, off);
    CHECK(first.tree == second.tree);
    CHECK(first.distance == second.distance);
  }

  SECTION("with exploration the seed matters") {
    GenerationConfig on = cfg;
    on.beam_size = 5;
    bool any_differ = false;
    for (int d = 0; d < 5 && !any_differ; ++d) {
      Document probe =
          silva::synthesize_document(40, rng, "seed-probe-" + std::to_string(d));
      on.seed = 1;
      ScoredTree first = silva::beam_generate(probe, on);
      on.seed = 2;
      ScoredTree second = silva::beam_generate(probe, on);
      any_differ = !(first.tree == second.tree);
    }
    CHECK(any_differ);
  }
}

TEST_CASE("D-TIE end to end: all-tied candidates fall back to balance") {
  // Equal sentiments make every tree's distance identical, so the tie order
  // decides: minimal height, then leftmost split, then NN.
  Document doc = make_doc("tied", 0.3,
                          {{0.3, 0.25}, {0.3, 0.25}, {0.3, 0.25}, {0.3, 0.25}});
  GenerationConfig cfg;
  cfg.epsilon_max = 0.0;
  ScoredTree best = silva::beam_generate(doc, cfg);
  CHECK(silva::serialize_tree(best.tree) ==
        "(NN (NN (leaf 1) (leaf 2)) (NN (leaf 3) (leaf 4)))");
  CHECK(best.distance == 0.0);
}

TEST_CASE("generate_corpus composes beam_generate per document") {
  Rng rng(222);
  std::vector<Document> docs;
  for (int d = 0; d < 3; ++d) {
    docs.push_back(
        silva::synthesize_document(3 + d, rng, "doc-" + std::to_string(d)));
  }
  GenerationConfig cfg;
  auto results = silva::generate_corpus(docs, cfg, 2);
  REQUIRE(results.size() == 3);
  for (std::size_t i = 0; i < docs.size(); ++i) {
    REQUIRE(results[i].tree.has_value());
    CHECK(results[i].doc_id == docs[i].doc_id);
    ScoredTree direct = silva::beam_generate(docs[i], cfg);
    CHECK(results[i].tree->tree == direct.tree);
    CHECK(results[i].tree->distance == direct.distance);
  }
}

TEST_CASE("generate_corpus is independent of parallelism") {
  Rng rng(333);
  std::vector<Document> docs;
  for (int d = 0; d < 12; ++d) {
    docs.push_back(silva::synthesize_document(
        2 + static_cast<int>(rng.below(15)), rng, "p-" + std::to_string(d)));
  }
  GenerationConfig cfg;
  auto serial = silva::generate_corpus(docs, cfg, 1);
  auto parallel = silva::generate_corpus(docs, cfg, 8);
  REQUIRE(serial.size() == parallel.size());
  for (std::size_t i = 0; i < serial.size(); ++i) {
    REQUIRE(serial[i].tree->tree == parallel[i].tree->tree);
    REQUIRE(serial[i].tree->distance == parallel[i].tree->distance);
  }
}

TEST_CASE("generate_corpus edge cases") {
  GenerationConfig cfg;
  CHECK(silva::generate_corpus({}, cfg, 4).empty());

  Rng rng(9);
  std::vector<Document> dup{silva::synthesize_document(3, rng, "same"),
                            silva::synthesize_document(4, rng, "same")};
  CHECK_THROWS_AS(silva::generate_corpus(dup, cfg, 1), silva::Error);

  // A failing document reports its error without aborting the stream.
  std::vector<Document> mixed{silva::synthesize_document(3, rng, "ok")};
  Document broken;
  broken.doc_id = "broken";
  mixed.push_back(broken);
  auto results = silva::generate_corpus(mixed, cfg, 2);
  REQUIRE(results.size() == 2);
  CHECK(results[0].tree.has_value());
  CHECK_FALSE(results[1].tree.has_value());
  CHECK_FALSE(results[1].error.empty());
}

TEST_CASE("scaling every attention leaves the generated tree unchanged") {
  // Power-of-two scaling is exact in floating point, so the candidate
  // ranking (and hence the chosen tree) is bitwise identical.
  Rng rng(2112);
  Document doc = silva::synthesize_document(18, rng, "scaled");
  Document scaled = doc;
  for (silva::Edu& edu : scaled.edus) edu.attention *= 4.0;

  GenerationConfig cfg;
  cfg.seed = 5;
  ScoredTree base = silva::beam_generate(doc, cfg);
  ScoredTree wide = silva::beam_generate(scaled, cfg);
  CHECK(base.tree == wide.tree);
  CHECK(base.distance == wide.distance);
  CHECK(wide.signal.attention == base.signal.attention * 4.0);
}

TEST_CASE("squared distance kind changes the objective") {
  Rng rng(404);
  Document doc = silva::synthesize_document(5, rng, "sq");
  GenerationConfig cfg;
  cfg.epsilon_max = 0.0;
  cfg.distance_kind = silva::DistanceKind::squared;
  cfg.beam_size = static_cast<int>(silva::count_labeled_trees(5));
  ScoredTree best = silva::beam_generate(doc, cfg);
  double diff = std::abs(doc.gold_polarity - best.signal.sentiment);
  CHECK(best.distance == diff * diff);
  ScoredTree oracle = silva::exhaustive_best(doc, cfg);
  CHECK(best.distance == oracle.distance);
}

TEST_CASE("72-EDU document generates a valid tree") {
  Rng rng(72);
  Document doc = silva::synthesize_document(72, rng, "teaser-72");
  GenerationConfig cfg;
  ScoredTree best = silva::beam_generate(doc, cfg);
  REQUIRE(silva::validate_tree(best.tree, 72));
  CHECK(best.distance >= 0.0);
  CHECK(best.distance <= 2.0);
}
