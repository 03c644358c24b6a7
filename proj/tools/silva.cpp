// silva command-line driver: generate / evaluate / oracle-check / bench.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <silva/silva.hpp>

namespace {

struct GenerateArgs {
  std::string input;
  std::string output;
  std::string lexicon;
  silva::GenerationConfig cfg;
  unsigned jobs = std::max(1u, std::thread::hardware_concurrency());
};

std::string metadata_json(const GenerateArgs& args) {
  std::string m = "{\"tool\":\"silva\",\"command\":\"generate\"";
  m += ",\"input\":" + nlohmann::json(args.input).dump();
  m += ",\"lexicon\":";
  m += args.lexicon.empty() ? std::string("null")
                            : nlohmann::json(args.lexicon).dump();
  m += ",\"beam_size\":" + std::to_string(args.cfg.beam_size);
  m += ",\"epsilon_max\":" + silva::format_exact(args.cfg.epsilon_max);
  m += ",\"temperature\":" + silva::format_exact(args.cfg.temperature);
  m += ",\"seed\":" + std::to_string(args.cfg.seed);
  m += ",\"w_nucleus\":" + silva::format_exact(args.cfg.aggregation.w_nucleus);
  m += ",\"w_satellite\":" +
       silva::format_exact(args.cfg.aggregation.w_satellite);
  m += ",\"distance\":\"";
  m += silva::to_string(args.cfg.distance_kind);
  m += "\"}";
  return m;
}

int run_generate(const GenerateArgs& args) {
  if (!args.cfg.valid()) {
    std::cerr << "error: w_satellite must satisfy 0 < w_satellite <= w_nucleus\n";
    return 2;
  }

  std::ifstream in(args.input);
  if (!in) {
    std::cerr << "error: cannot open input file: " << args.input << "\n";
    return 1;
  }
  std::vector<silva::RawDocumentRecord> records;
  try {
    records = silva::read_records(in);
  } catch (const std::exception& e) {
    std::cerr << "error: " << args.input << ": " << e.what() << "\n";
    return 1;
  }

  silva::SentimentLexicon lexicon;
  const silva::SentimentLexicon* lexicon_ptr = nullptr;
  if (!args.lexicon.empty()) {
    try {
      lexicon = silva::SentimentLexicon::load(args.lexicon);
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 1;
    }
    lexicon_ptr = &lexicon;
  }

  std::size_t failures = 0;
  std::vector<silva::Document> docs;
  docs.reserve(records.size());
  std::set<std::string> seen_ids;
  for (const silva::RawDocumentRecord& record : records) {
    if (!record.doc_id.empty() && !seen_ids.insert(record.doc_id).second) {
      std::cerr << "error: " << record.doc_id << ": duplicate doc_id, skipped\n";
      ++failures;
      continue;
    }
    try {
      docs.push_back(silva::normalize_document(record, lexicon_ptr));
    } catch (const std::exception& e) {
      std::cerr << "error: " << record.doc_id << ": " << e.what() << "\n";
      ++failures;
    }
  }

  std::vector<silva::GenerationResult> results =
      silva::generate_corpus(docs, args.cfg, args.jobs);

  std::vector<silva::TreebankRecord> out_records;
  out_records.reserve(results.size());
  for (const silva::GenerationResult& result : results) {
    if (!result.tree) {
      std::cerr << "error: " << result.doc_id << ": " << result.error << "\n";
      ++failures;
      continue;
    }
    out_records.push_back(silva::make_treebank_record(result.doc_id, *result.tree));
  }

  std::ofstream out(args.output, std::ios::binary);
  if (!out) {
    std::cerr << "error: cannot open output file: " << args.output << "\n";
    return 1;
  }
  try {
    silva::write_treebank(out, out_records, metadata_json(args));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  std::cerr << "generated " << out_records.size() << "/" << records.size()
            << " trees -> " << args.output << "\n";
  return failures == 0 ? 0 : 1;
}

struct EvaluateArgs {
  std::string pred;
  std::string ref;
  silva::EvalMode mode = silva::EvalMode::structure;
  bool exclude_root = false;
};

int run_evaluate(const EvaluateArgs& args) {
  auto load = [](const std::string& path) {
    std::ifstream in(path);
    if (!in) throw silva::Error("cannot open treebank file: " + path);
    return silva::read_treebank(in);
  };
  try {
    silva::Treebank pred = load(args.pred);
    silva::Treebank ref = load(args.ref);
    silva::PrecisionReport report = silva::micro_precision(
        pred.records, ref.records, args.mode, args.exclude_root);
    std::printf("mode          %s%s\n", silva::to_string(report.mode),
                report.exclude_root ? " (root excluded)" : "");
    std::printf("documents     %zu\n", report.n_docs);
    std::printf("matched       %llu\n",
                static_cast<unsigned long long>(report.matched));
    std::printf("total         %llu\n",
                static_cast<unsigned long long>(report.total));
    std::printf("precision     %.2f\n", report.precision);
    std::printf(
        "{\"mode\":\"%s\",\"matched\":%llu,\"total\":%llu,\"precision\":%s}\n",
        silva::to_string(report.mode),
        static_cast<unsigned long long>(report.matched),
        static_cast<unsigned long long>(report.total),
        silva::format_g9(report.precision).c_str());
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

struct OracleArgs {
  int trials = 1000;
  int max_edus = 6;
  std::uint64_t seed = 0;
  bool inject_tie_fault = false;
};

int run_oracle_check(const OracleArgs& args) {
  int passed = 0;
  int failed = 0;
  for (int trial = 0; trial < args.trials; ++trial) {
    std::string id = "oracle-" + std::to_string(trial);
    silva::Rng rng(silva::mix_seed(args.seed, id));
    int n = args.max_edus >= 2
                ? 2 + static_cast<int>(rng.below(
                          static_cast<std::uint32_t>(args.max_edus - 1)))
                : 1;
    silva::Document doc = silva::synthesize_document(n, rng, id);

    silva::GenerationConfig cfg;
    cfg.seed = args.seed;
    cfg.epsilon_max = 0.0;
    cfg.beam_size = static_cast<int>(silva::count_labeled_trees(n));
    cfg.invert_tie_order_for_tests = args.inject_tie_fault;

    double beam = silva::beam_generate(doc, cfg).distance;
    double oracle = silva::exhaustive_best(doc, cfg).distance;
    if (beam == oracle) {
      ++passed;
    } else {
      ++failed;
      if (failed <= 10) {
        std::printf("FAIL trial=%d n=%d beam=%s oracle=%s\n", trial, n,
                    silva::format_exact(beam).c_str(),
                    silva::format_exact(oracle).c_str());
      }
    }
  }
  std::printf("oracle-check: %d/%d passed, %d failed\n", passed, args.trials,
              failed);
  return failed == 0 ? 0 : 1;
}

struct BenchArgs {
  std::vector<int> sizes = {20, 40, 80, 160};
  int reps = 5;
  silva::GenerationConfig cfg;
};

int run_bench(const BenchArgs& args) {
  std::vector<std::pair<double, double>> points;
  std::printf("n,mean_ms,stddev_ms\n");
  for (int n : args.sizes) {
    std::string id = "bench-" + std::to_string(n);
    silva::Rng rng(silva::mix_seed(args.cfg.seed, id));
    silva::Document doc = silva::synthesize_document(n, rng, id);
    silva::BenchRow row = silva::time_beam_generate(doc, args.cfg, args.reps);
    std::printf("%d,%s,%s\n", row.n_edus,
                silva::format_g9(row.mean_ms).c_str(),
                silva::format_g9(row.stddev_ms).c_str());
    points.emplace_back(static_cast<double>(n),
                        std::max(row.mean_ms, 1e-6));
  }
  if (points.size() >= 2) {
    std::printf("# loglog_slope=%.4f\n", silva::loglog_slope(points));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"silva: distant-supervision discourse treebank generation"};
  app.require_subcommand(1);

  const std::map<std::string, silva::DistanceKind> distance_names{
      {"absolute", silva::DistanceKind::absolute},
      {"squared", silva::DistanceKind::squared}};

  GenerateArgs gen;
  CLI::App* cmd_generate =
      app.add_subcommand("generate", "Generate a discourse treebank");
  cmd_generate->add_option("--input", gen.input, "Input corpus (JSONL records)")
      ->required();
  cmd_generate->add_option("--output", gen.output, "Output treebank file")
      ->required();
  cmd_generate
      ->add_option("--beam-size", gen.cfg.beam_size, "Trees kept per CKY cell")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  cmd_generate
      ->add_option("--epsilon-max", gen.cfg.epsilon_max,
                   "Exploration probability at the smallest spans")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  cmd_generate
      ->add_option("--temperature", gen.cfg.temperature,
                   "Softmax temperature for exploration sampling")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  cmd_generate->add_option("--seed", gen.cfg.seed, "Master RNG seed")
      ->capture_default_str()
      ->envname("SILVA_SEED");
  cmd_generate
      ->add_option("--w-nucleus", gen.cfg.aggregation.w_nucleus,
                   "Aggregation weight of nucleus children")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  cmd_generate
      ->add_option("--w-satellite", gen.cfg.aggregation.w_satellite,
                   "Aggregation weight of satellite children")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  cmd_generate
      ->add_option("--distance", gen.cfg.distance_kind,
                   "Distance kind: absolute or squared")
      ->transform(CLI::CheckedTransformer(distance_names, CLI::ignore_case))
      ->default_str("absolute");
  cmd_generate->add_option("--lexicon", gen.lexicon,
                           "Sentiment lexicon (token<TAB>polarity)");
  cmd_generate->add_option("--jobs", gen.jobs, "Worker threads")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);

  EvaluateArgs eval;
  CLI::App* cmd_evaluate = app.add_subcommand(
      "evaluate", "Micro precision between two treebanks");
  cmd_evaluate->add_option("--pred", eval.pred, "Predicted treebank")
      ->required();
  cmd_evaluate->add_option("--ref", eval.ref, "Reference treebank")->required();
  const std::map<std::string, silva::EvalMode> mode_names{
      {"structure", silva::EvalMode::structure},
      {"nuclearity", silva::EvalMode::nuclearity}};
  cmd_evaluate->add_option("--mode", eval.mode, "structure or nuclearity")
      ->transform(CLI::CheckedTransformer(mode_names, CLI::ignore_case))
      ->default_str("structure");
  cmd_evaluate->add_flag("--exclude-root", eval.exclude_root,
                         "Do not count the root constituent");

  OracleArgs oracle;
  CLI::App* cmd_oracle = app.add_subcommand(
      "oracle-check",
      "Check full-width beam search against exhaustive enumeration");
  cmd_oracle->add_option("--trials", oracle.trials, "Random documents to test")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  cmd_oracle
      ->add_option("--max-edus", oracle.max_edus, "Largest document size")
      ->capture_default_str()
      ->check(CLI::Range(1, 8));
  cmd_oracle->add_option("--seed", oracle.seed, "Master RNG seed")
      ->capture_default_str()
      ->envname("SILVA_SEED");
  cmd_oracle
      ->add_flag("--inject-tie-fault", oracle.inject_tie_fault,
                 "Invert the tie order (negative control; must fail)")
      ->group("");

  BenchArgs bench;
  CLI::App* cmd_bench = app.add_subcommand(
      "bench", "Time beam_generate across document sizes");
  cmd_bench->add_option("--sizes", bench.sizes, "Document sizes to time")
      ->delimiter(',')
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  cmd_bench->add_option("--reps", bench.reps, "Repetitions per size")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  cmd_bench
      ->add_option("--beam-size", bench.cfg.beam_size, "Trees kept per CKY cell")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  cmd_bench->add_option("--seed", bench.cfg.seed, "Master RNG seed")
      ->capture_default_str()
      ->envname("SILVA_SEED");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (app.got_subcommand(cmd_generate)) return run_generate(gen);
    if (app.got_subcommand(cmd_evaluate)) return run_evaluate(eval);
    if (app.got_subcommand(cmd_oracle)) return run_oracle_check(oracle);
    if (app.got_subcommand(cmd_bench)) return run_bench(bench);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
