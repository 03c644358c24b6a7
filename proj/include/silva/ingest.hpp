#pragma once

#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "silva/core.hpp"
#include "silva/format.hpp"

namespace silva {

class IngestError : public Error {
 public:
  enum class Kind {
    missing_scores,
    invalid_range,
    empty_document,
    out_of_range,
    bad_record,
  };

  IngestError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct StarRating {
  int stars = 0;
  int scale_lo = 1;
  int scale_hi = 5;
};

// Gold supervision in exactly one of two forms.
struct RawGold {
  std::optional<StarRating> stars;
  std::optional<double> polarity;
};

struct RawEdu {
  std::string text;
  std::optional<double> sentiment;
  std::optional<double> attention;
};

struct RawDocumentRecord {
  std::string doc_id;
  RawGold gold;
  std::vector<RawEdu> edus;
};

// Linear map of a star rating onto [-1, 1]: lo -> -1, midpoint -> 0, hi -> 1.
inline double stars_to_polarity(int stars, int scale_lo, int scale_hi) {
  if (scale_lo >= scale_hi) {
    throw IngestError(IngestError::Kind::bad_record,
                      "star scale must satisfy lo < hi");
  }
  if (stars < scale_lo || stars > scale_hi) {
    throw IngestError(IngestError::Kind::out_of_range,
                      "stars=" + std::to_string(stars) + " outside scale [" +
                          std::to_string(scale_lo) + ", " +
                          std::to_string(scale_hi) + "]");
  }
  return static_cast<double>(2 * stars - scale_lo - scale_hi) /
         static_cast<double>(scale_hi - scale_lo);
}

// Token -> polarity table; a plumbing stand-in for the neural scorer so the
// pipeline runs end to end on plain text.
class SentimentLexicon {
 public:
  void insert(std::string token, double polarity) {
    for (char& c : token) {
      c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    table_[std::move(token)] = polarity;
  }

  std::optional<double> lookup(const std::string& normalized_token) const {
    auto it = table_.find(normalized_token);
    if (it == table_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t size() const { return table_.size(); }

  // Two-column tab-separated `token<TAB>polarity`; '#' lines are comments.
  // Later duplicates overwrite earlier ones.
  static SentimentLexicon parse(std::istream& in) {
    SentimentLexicon lexicon;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty() || line[0] == '#') continue;
      std::size_t tab = line.find('\t');
      if (tab == std::string::npos || tab == 0) {
        throw IngestError(IngestError::Kind::bad_record,
                          "lexicon line " + std::to_string(line_no) +
                              ": expected token<TAB>polarity");
      }
      std::string token = line.substr(0, tab);
      double polarity = 0.0;
      try {
        polarity = std::stod(line.substr(tab + 1));
      } catch (const std::exception&) {
        throw IngestError(IngestError::Kind::bad_record,
                          "lexicon line " + std::to_string(line_no) +
                              ": polarity is not a number");
      }
      if (!std::isfinite(polarity) || polarity < -1.0 || polarity > 1.0) {
        throw IngestError(IngestError::Kind::invalid_range,
                          "lexicon line " + std::to_string(line_no) +
                              ": polarity outside [-1, 1]");
      }
      lexicon.insert(std::move(token), polarity);
    }
    return lexicon;
  }

  static SentimentLexicon load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open lexicon file: " + path);
    return parse(in);
  }

 private:
  std::unordered_map<std::string, double> table_;
};

// Lowercase and strip leading/trailing ASCII non-alphanumerics. Bytes >= 0x80
// are kept as-is so UTF-8 sequences survive untouched.
inline std::string normalize_token(std::string_view raw) {
  auto is_word_byte = [](unsigned char c) {
    return c >= 0x80 || std::isalnum(c);
  };
  std::size_t begin = 0;
  std::size_t end = raw.size();
  while (begin < end && !is_word_byte(static_cast<unsigned char>(raw[begin]))) {
    ++begin;
  }
  while (end > begin && !is_word_byte(static_cast<unsigned char>(raw[end - 1]))) {
    --end;
  }
  std::string token;
  token.reserve(end - begin);
  for (std::size_t i = begin; i < end; ++i) {
    token.push_back(static_cast<char>(
        std::tolower(static_cast<unsigned char>(raw[i]))));
  }
  return token;
}

struct LexiconScore {
  double sentiment = 0.0;   // mean polarity of matched tokens, 0 with no match
  double raw_weight = 1.0;  // 1 + matched token count: always positive
};

inline LexiconScore lexicon_annotate(std::string_view text,
                                     const SentimentLexicon& lexicon) {
  LexiconScore score;
  double sum = 0.0;
  int matches = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() &&
           std::isspace(static_cast<unsigned char>(text[i]))) {
      ++i;
    }
    std::size_t start = i;
    while (i < text.size() &&
           !std::isspace(static_cast<unsigned char>(text[i]))) {
      ++i;
    }
    if (i == start) break;
    std::string token = normalize_token(text.substr(start, i - start));
    if (token.empty()) continue;
    if (auto polarity = lexicon.lookup(token)) {
      sum += *polarity;
      ++matches;
    }
  }
  if (matches > 0) score.sentiment = sum / matches;
  score.raw_weight = 1.0 + matches;
  return score;
}

// Resolves a raw record into a Document: fills missing EDU scores from the
// lexicon, converts star gold to polarity, and rescales attentions into a
// document-level distribution (sum 1, all strictly positive). Already
// normalized attentions are left untouched, which makes the operation
// idempotent.
inline Document normalize_document(const RawDocumentRecord& record,
                                   const SentimentLexicon* lexicon = nullptr) {
  if (record.doc_id.empty()) {
    throw IngestError(IngestError::Kind::bad_record, "doc_id must be non-empty");
  }
  if (record.edus.empty()) {
    throw IngestError(IngestError::Kind::empty_document,
                      "document '" + record.doc_id + "' has no EDUs");
  }
  if (record.gold.stars.has_value() == record.gold.polarity.has_value()) {
    throw IngestError(IngestError::Kind::bad_record,
                      "document '" + record.doc_id +
                          "': gold must be given as stars or polarity, not both");
  }

  Document doc;
  doc.doc_id = record.doc_id;
  if (record.gold.stars) {
    doc.gold_polarity = stars_to_polarity(
        record.gold.stars->stars, record.gold.stars->scale_lo,
        record.gold.stars->scale_hi);
  } else {
    doc.gold_polarity = *record.gold.polarity;
  }
  if (!std::isfinite(doc.gold_polarity) || doc.gold_polarity < -1.0 ||
      doc.gold_polarity > 1.0) {
    throw IngestError(IngestError::Kind::invalid_range,
                      "document '" + record.doc_id +
                          "': gold polarity outside [-1, 1]");
  }

  doc.edus.reserve(record.edus.size());
  int index = 0;
  for (const RawEdu& raw : record.edus) {
    ++index;
    double sentiment;
    double attention;
    if (raw.sentiment && raw.attention) {
      sentiment = *raw.sentiment;
      attention = *raw.attention;
    } else {
      if (!lexicon) {
        throw IngestError(IngestError::Kind::missing_scores,
                          "document '" + record.doc_id + "' EDU " +
                              std::to_string(index) +
                              " lacks scores and no lexicon is configured");
      }
      LexiconScore score = lexicon_annotate(raw.text, *lexicon);
      sentiment = raw.sentiment ? *raw.sentiment : score.sentiment;
      attention = raw.attention ? *raw.attention : score.raw_weight;
    }
    if (!std::isfinite(sentiment) || sentiment < -1.0 || sentiment > 1.0) {
      throw IngestError(IngestError::Kind::invalid_range,
                        "document '" + record.doc_id + "' EDU " +
                            std::to_string(index) +
                            ": sentiment outside [-1, 1]");
    }
    if (!std::isfinite(attention) || attention <= 0.0) {
      throw IngestError(IngestError::Kind::invalid_range,
                        "document '" + record.doc_id + "' EDU " +
                            std::to_string(index) +
                            ": attention must be strictly positive");
    }
    doc.edus.push_back({index, raw.text, sentiment, attention});
  }

  double sum = 0.0;
  for (const Edu& edu : doc.edus) sum += edu.attention;
  if (std::abs(sum - 1.0) > 1e-9) {
    for (Edu& edu : doc.edus) edu.attention /= sum;
  }
  return doc;
}

inline RawDocumentRecord record_from_json(const nlohmann::json& j) {
  auto bad = [](const std::string& what) {
    return IngestError(IngestError::Kind::bad_record, what);
  };
  if (!j.is_object()) throw bad("record is not a JSON object");
  RawDocumentRecord record;
  if (!j.contains("doc_id") || !j["doc_id"].is_string()) {
    throw bad("missing string field 'doc_id'");
  }
  record.doc_id = j["doc_id"].get<std::string>();
  if (!j.contains("gold") || !j["gold"].is_object()) {
    throw bad("missing object field 'gold'");
  }
  const nlohmann::json& gold = j["gold"];
  if (gold.contains("stars")) {
    if (!gold["stars"].is_number_integer()) throw bad("'stars' must be an integer");
    StarRating rating;
    rating.stars = gold["stars"].get<int>();
    if (!gold.contains("scale") || !gold["scale"].is_array() ||
        gold["scale"].size() != 2 || !gold["scale"][0].is_number_integer() ||
        !gold["scale"][1].is_number_integer()) {
      throw bad("'scale' must be a two-integer array [lo, hi]");
    }
    rating.scale_lo = gold["scale"][0].get<int>();
    rating.scale_hi = gold["scale"][1].get<int>();
    record.gold.stars = rating;
  }
  if (gold.contains("polarity")) {
    if (!gold["polarity"].is_number()) throw bad("'polarity' must be a number");
    record.gold.polarity = gold["polarity"].get<double>();
  }
  if (!j.contains("edus") || !j["edus"].is_array()) {
    throw bad("missing array field 'edus'");
  }
  for (const nlohmann::json& e : j["edus"]) {
    if (!e.is_object()) throw bad("every EDU must be a JSON object");
    RawEdu edu;
    if (e.contains("text")) {
      if (!e["text"].is_string()) throw bad("EDU 'text' must be a string");
      edu.text = e["text"].get<std::string>();
    }
    if (e.contains("sentiment")) {
      if (!e["sentiment"].is_number()) throw bad("EDU 'sentiment' must be a number");
      edu.sentiment = e["sentiment"].get<double>();
    }
    if (e.contains("attention")) {
      if (!e["attention"].is_number()) throw bad("EDU 'attention' must be a number");
      edu.attention = e["attention"].get<double>();
    }
    record.edus.push_back(std::move(edu));
  }
  return record;
}

// Newline-delimited RawDocumentRecord objects; blank lines and '#' comments
// are skipped. Errors carry 1-based line numbers.
inline std::vector<RawDocumentRecord> read_records(std::istream& in) {
  std::vector<RawDocumentRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      throw IngestError(IngestError::Kind::bad_record,
                        "line " + std::to_string(line_no) + ": invalid JSON");
    }
    try {
      records.push_back(record_from_json(j));
    } catch (const IngestError& e) {
      throw IngestError(e.kind(), "line " + std::to_string(line_no) + ": " +
                                      e.what());
    }
  }
  if (in.bad()) throw Error("read_records: stream failure");
  return records;
}

// Normalized document as a JSONL line (gold as polarity, scores resolved,
// full double precision). Re-ingesting the output reproduces the Document.
inline std::string document_json_line(const Document& doc) {
  std::string line;
  line += "{\"doc_id\":";
  line += nlohmann::json(doc.doc_id).dump();
  line += ",\"gold\":{\"polarity\":";
  line += format_exact(doc.gold_polarity);
  line += "},\"edus\":[";
  bool first = true;
  for (const Edu& edu : doc.edus) {
    if (!first) line += ',';
    first = false;
    line += "{\"text\":";
    line += nlohmann::json(edu.text).dump();
    line += ",\"sentiment\":";
    line += format_exact(edu.sentiment);
    line += ",\"attention\":";
    line += format_exact(edu.attention);
    line += '}';
  }
  line += "]}";
  return line;
}

inline void write_documents(std::ostream& out,
                            const std::vector<Document>& docs) {
  for (const Document& doc : docs) {
    out << document_json_line(doc) << '\n';
  }
  if (!out) throw Error("write_documents: stream failure");
}

}  // namespace silva
