#pragma once

#include <charconv>
#include <cstddef>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "silva/core.hpp"
#include "silva/format.hpp"

namespace silva {

class TreeSyntaxError : public Error {
 public:
  TreeSyntaxError(const std::string& what, std::size_t offset)
      : Error(what + " at byte " + std::to_string(offset)), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

class TreeValidationError : public Error {
 public:
  explicit TreeValidationError(const TreeValidation& v)
      : Error("invalid tree: " + v.message), defect_(v.defect) {}
  TreeDefect defect() const { return defect_; }

 private:
  TreeDefect defect_;
};

class TreebankIoError : public Error {
 public:
  TreebankIoError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

namespace detail {

inline void serialize_into(const DiscourseTree& t, std::string& out) {
  if (t.is_leaf()) {
    out += "(leaf ";
    out += std::to_string(t.first());
    out += ')';
  } else {
    out += '(';
    out += to_string(t.label());
    out += ' ';
    serialize_into(t.left(), out);
    out += ' ';
    serialize_into(t.right(), out);
    out += ')';
  }
}

}  // namespace detail

// Canonical bracketed form:
//   TREE := "(leaf " INDEX ")" | "(" LABEL " " TREE " " TREE ")"
// Single spaces, no trailing whitespace; bijective with the tree.
inline std::string serialize_tree(const DiscourseTree& tree) {
  if (!tree) throw Error("serialize_tree: empty tree");
  std::string out;
  out.reserve(static_cast<std::size_t>(tree.n_leaves()) * 12);
  detail::serialize_into(tree, out);
  return out;
}

namespace detail {

class TreeParser {
 public:
  explicit TreeParser(std::string_view text) : text_(text) {}

  DiscourseTree run() {
    DiscourseTree tree = parse_node();
    skip_ws();
    if (pos_ != text_.size()) {
      throw TreeSyntaxError("trailing input after tree", pos_);
    }
    return tree;
  }

 private:
  void skip_ws() {
    while (pos_ < text_.size() &&
           (text_[pos_] == ' ' || text_[pos_] == '\t' || text_[pos_] == '\n' ||
            text_[pos_] == '\r')) {
      ++pos_;
    }
  }

  void expect(char c) {
    if (pos_ >= text_.size() || text_[pos_] != c) {
      throw TreeSyntaxError(std::string("expected '") + c + "'", pos_);
    }
    ++pos_;
  }

  std::string_view token() {
    std::size_t start = pos_;
    while (pos_ < text_.size() && text_[pos_] != ' ' && text_[pos_] != '\t' &&
           text_[pos_] != '\n' && text_[pos_] != '\r' && text_[pos_] != '(' &&
           text_[pos_] != ')') {
      ++pos_;
    }
    if (pos_ == start) throw TreeSyntaxError("expected a token", pos_);
    return text_.substr(start, pos_ - start);
  }

  DiscourseTree parse_node() {
    skip_ws();
    std::size_t open = pos_;
    expect('(');
    skip_ws();
    std::string_view head = token();
    if (head == "leaf") {
      skip_ws();
      std::size_t num_at = pos_;
      std::string_view num = token();
      int index = 0;
      auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), index);
      if (ec != std::errc{} || ptr != num.data() + num.size() || index < 1) {
        throw TreeSyntaxError("expected a positive leaf index", num_at);
      }
      skip_ws();
      expect(')');
      return DiscourseTree::leaf(index);
    }
    Nuclearity label;
    if (head == "NN") {
      label = Nuclearity::NN;
    } else if (head == "NS") {
      label = Nuclearity::NS;
    } else if (head == "SN") {
      label = Nuclearity::SN;
    } else {
      throw TreeSyntaxError("expected leaf or NN/NS/SN label", open + 1);
    }
    DiscourseTree left = parse_node();
    DiscourseTree right = parse_node();
    skip_ws();
    expect(')');
    return DiscourseTree::internal(label, std::move(left), std::move(right));
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace detail

// Inverse of serialize_tree on its image; tolerates arbitrary whitespace
// between tokens. The result is validated (leaves 1..n in order).
inline DiscourseTree parse_tree(std::string_view text) {
  DiscourseTree tree = detail::TreeParser(text).run();
  if (TreeValidation v = validate_tree(tree, tree.n_leaves()); !v) {
    throw TreeValidationError(v);
  }
  return tree;
}

// One generated tree as persisted in a treebank file.
struct TreebankRecord {
  std::string doc_id;
  int n_edus = 0;
  DiscourseTree tree;
  double root_sentiment = 0.0;
  double root_attention = 0.0;
  double distance = 0.0;
  int height = 0;
  double balance = 0.0;
};

inline TreebankRecord make_treebank_record(std::string doc_id,
                                           const ScoredTree& scored) {
  TreeStats stats = tree_stats(scored.tree);
  return {std::move(doc_id),       stats.n_edus,
          scored.tree,             scored.signal.sentiment,
          scored.signal.attention, scored.distance,
          stats.height,            stats.balance};
}

inline std::string treebank_line(const TreebankRecord& r) {
  std::string line;
  line += "{\"doc_id\":";
  line += nlohmann::json(r.doc_id).dump();
  line += ",\"n_edus\":";
  line += std::to_string(r.n_edus);
  line += ",\"tree\":";
  line += nlohmann::json(serialize_tree(r.tree)).dump();
  line += ",\"root_sentiment\":";
  line += format_g9(r.root_sentiment);
  line += ",\"root_attention\":";
  line += format_g9(r.root_attention);
  line += ",\"distance\":";
  line += format_g9(r.distance);
  line += ",\"height\":";
  line += std::to_string(r.height);
  line += ",\"balance\":";
  line += format_g9(r.balance);
  line += "}";
  return line;
}

// Newline-delimited records, one JSON object per line, LF endings. Lines
// starting with '#' carry run metadata and are skipped by readers.
inline void write_treebank(std::ostream& out,
                           const std::vector<TreebankRecord>& records,
                           std::string_view metadata_json = {}) {
  if (!metadata_json.empty()) {
    out << '#' << metadata_json << '\n';
  }
  for (const TreebankRecord& r : records) {
    out << treebank_line(r) << '\n';
  }
  if (!out) throw Error("write_treebank: stream failure");
}

inline TreebankRecord parse_treebank_line(const std::string& line,
                                          std::size_t line_no) {
  nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw TreebankIoError("not a JSON object", line_no);
  }
  try {
    TreebankRecord r;
    r.doc_id = j.at("doc_id").get<std::string>();
    r.n_edus = j.at("n_edus").get<int>();
    r.tree = parse_tree(j.at("tree").get<std::string>());
    r.root_sentiment = j.at("root_sentiment").get<double>();
    r.root_attention = j.at("root_attention").get<double>();
    r.distance = j.at("distance").get<double>();
    r.height = j.at("height").get<int>();
    r.balance = j.at("balance").get<double>();
    if (r.tree.n_leaves() != r.n_edus) {
      throw TreebankIoError("n_edus does not match the tree", line_no);
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw TreebankIoError(e.what(), line_no);
  } catch (const TreeSyntaxError& e) {
    throw TreebankIoError(std::string("bad tree: ") + e.what(), line_no);
  } catch (const TreeValidationError& e) {
    throw TreebankIoError(std::string("bad tree: ") + e.what(), line_no);
  }
}

struct Treebank {
  std::vector<std::string> metadata;  // '#' lines, prefix stripped
  std::vector<TreebankRecord> records;
};

inline Treebank read_treebank(std::istream& in) {
  Treebank tb;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line[0] == '#') {
      tb.metadata.push_back(line.substr(1));
      continue;
    }
    tb.records.push_back(parse_treebank_line(line, line_no));
  }
  if (in.bad()) throw Error("read_treebank: stream failure");
  return tb;
}

}  // namespace silva
