#pragma once

#include <zlib.h>

#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "mave/core.hpp"
#include "mave/errors.hpp"

// JSONL wire format: UTF-8, one example per line, with the schema
//   {"id": ..., "category": ..., "paragraphs": [{"text", "source"}],
//    "attributes": [{"key", "value"?, "evidences": [{"value","pid","begin","end"}]}]}
// "value" on an attribute entry is the normalized value; it is omitted for
// negatives. Files whose name ends in .gz are transparently (de)compressed.

namespace mave::jsonl {

using json = nlohmann::ordered_json;

/// Span end convention used on the wire. Canonical form everywhere in this
/// library is half-open (exclusive); inclusive export writes end-1.
enum class SpanEnd { exclusive, inclusive };

namespace detail {

inline json profile_to_json(const ProductProfile& p) {
  json paragraphs = json::array();
  for (const auto& s : p.sources)
    paragraphs.push_back({{"text", s.text}, {"source", std::string(to_string(s.kind))}});
  return paragraphs;
}

inline ProductProfile profile_from_json(const std::string& id, const json& paragraphs) {
  ProductProfile p;
  p.id = id;
  int pid = 0;
  for (const auto& par : paragraphs) {
    if (!par.contains("text") || !par.contains("source"))
      throw ValidationError("paragraph entry missing text or source");
    Source s;
    s.pid = pid++;
    s.kind = source_kind_from_string(par.at("source").get<std::string>());
    s.text = par.at("text").get<std::string>();
    p.sources.push_back(std::move(s));
  }
  return p;
}

inline json evidence_to_json(const Span& sp, SpanEnd mode) {
  const std::size_t end = mode == SpanEnd::inclusive ? sp.end - 1 : sp.end;
  return {{"value", sp.value}, {"pid", sp.pid}, {"begin", sp.begin}, {"end", end}};
}

inline Span evidence_from_json(const json& ev, SpanEnd mode) {
  Span sp;
  sp.value = ev.at("value").get<std::string>();
  sp.pid = ev.at("pid").get<int>();
  sp.begin = ev.at("begin").get<std::size_t>();
  sp.end = ev.at("end").get<std::size_t>();
  if (mode == SpanEnd::inclusive) sp.end += 1;
  return sp;
}

}  // namespace detail

inline std::string serialize_example(const AttributeExample& ex,
                                     SpanEnd mode = SpanEnd::exclusive) {
  json attr;
  attr["key"] = ex.attribute;
  if (ex.normalized_value) attr["value"] = *ex.normalized_value;
  attr["evidences"] = json::array();
  for (const auto& sp : ex.evidences)
    attr["evidences"].push_back(detail::evidence_to_json(sp, mode));

  json line;
  line["id"] = ex.profile.id;
  line["category"] = ex.category;
  line["paragraphs"] = detail::profile_to_json(ex.profile);
  line["attributes"] = json::array({attr});
  return line.dump();
}

/// Parses every attribute entry of one line. Lines from the public release
/// may carry several attributes per product; each becomes its own example.
/// An entry without a "value" key falls back to its first evidence's surface
/// form as the normalized value.
inline std::vector<AttributeExample> examples_from_line(const std::string& line,
                                                        SpanEnd mode = SpanEnd::exclusive,
                                                        std::size_t line_no = 0) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
  }
  try {
    if (!j.contains("id")) throw ValidationError("missing id");
    ProductProfile profile =
        detail::profile_from_json(j.at("id").get<std::string>(),
                                  j.value("paragraphs", json::array()));
    const std::string category = j.value("category", "");
    std::vector<AttributeExample> out;
    for (const auto& attr : j.value("attributes", json::array())) {
      AttributeExample ex;
      ex.profile = profile;
      ex.category = category;
      ex.attribute = attr.at("key").get<std::string>();
      for (const auto& ev : attr.value("evidences", json::array()))
        ex.evidences.push_back(detail::evidence_from_json(ev, mode));
      if (attr.contains("value"))
        ex.normalized_value = attr.at("value").get<std::string>();
      else if (!ex.evidences.empty())
        ex.normalized_value = ex.evidences.front().value;
      validate_example(ex);
      out.push_back(std::move(ex));
    }
    return out;
  } catch (const json::exception& e) {
    throw ValidationError("line " + std::to_string(line_no) + ": " + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError("line " + std::to_string(line_no) + ": " + e.what());
  }
}

/// Strict inverse of serialize_example: the line must hold exactly one
/// attribute entry.
inline AttributeExample deserialize_example(const std::string& line,
                                            SpanEnd mode = SpanEnd::exclusive,
                                            std::size_t line_no = 0) {
  auto parsed = examples_from_line(line, mode, line_no);
  if (parsed.size() != 1)
    throw ValidationError("line " + std::to_string(line_no) + ": expected exactly one attribute entry, got " +
                          std::to_string(parsed.size()));
  return std::move(parsed.front());
}

inline std::string serialize_profile(const ProductProfile& p) {
  json line;
  line["id"] = p.id;
  line["paragraphs"] = detail::profile_to_json(p);
  return line.dump();
}

inline ProductProfile deserialize_profile(const std::string& line, std::size_t line_no = 0) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
  }
  try {
    ProductProfile p = detail::profile_from_json(j.at("id").get<std::string>(),
                                                 j.value("paragraphs", json::array()));
    validate_profile(p);
    return p;
  } catch (const json::exception& e) {
    throw ValidationError("line " + std::to_string(line_no) + ": " + e.what());
  }
}

inline bool has_gz_suffix(std::string_view path) {
  return path.size() > 3 && path.substr(path.size() - 3) == ".gz";
}

/// Line-oriented reader; transparently gunzips *.gz files.
class LineReader {
 public:
  explicit LineReader(const std::string& path) : path_(path) {
    if (has_gz_suffix(path)) {
      gz_ = gzopen(path.c_str(), "rb");
      if (!gz_) throw IoError("cannot open " + path);
    } else {
      file_.open(path, std::ios::binary);
      if (!file_) throw IoError("cannot open " + path);
    }
  }
  ~LineReader() {
    if (gz_) gzclose(gz_);
  }
  LineReader(const LineReader&) = delete;
  LineReader& operator=(const LineReader&) = delete;

  /// Reads the next line (without trailing newline). Returns false at EOF.
  bool next(std::string& line) {
    ++line_no_;
    if (gz_) {
      line.clear();
      char buf[4096];
      for (;;) {
        if (gzgets(gz_, buf, sizeof buf) == nullptr) return !line.empty();
        line += buf;
        if (!line.empty() && line.back() == '\n') {
          line.pop_back();
          if (!line.empty() && line.back() == '\r') line.pop_back();
          return true;
        }
      }
    }
    if (!std::getline(file_, line)) return false;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  }

  std::size_t line_no() const { return line_no_; }
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::ifstream file_;
  gzFile gz_ = nullptr;
  std::size_t line_no_ = 0;
};

/// Line-oriented writer; transparently gzips *.gz files. zlib writes a fixed
/// header (mtime 0), so output bytes depend only on content.
class LineWriter {
 public:
  explicit LineWriter(const std::string& path) : path_(path) {
    if (has_gz_suffix(path)) {
      gz_ = gzopen(path.c_str(), "wb");
      if (!gz_) throw IoError("cannot open " + path + " for writing");
    } else {
      file_.open(path, std::ios::binary | std::ios::trunc);
      if (!file_) throw IoError("cannot open " + path + " for writing");
    }
  }
  ~LineWriter() { close(); }
  LineWriter(const LineWriter&) = delete;
  LineWriter& operator=(const LineWriter&) = delete;

  void write(std::string_view line) {
    if (gz_) {
      if (gzwrite(gz_, line.data(), static_cast<unsigned>(line.size())) !=
              static_cast<int>(line.size()) ||
          gzwrite(gz_, "\n", 1) != 1)
        throw IoError("write failed: " + path_);
      return;
    }
    file_.write(line.data(), static_cast<std::streamsize>(line.size()));
    file_.put('\n');
    if (!file_) throw IoError("write failed: " + path_);
  }

  void close() {
    if (gz_) {
      gzclose(gz_);
      gz_ = nullptr;
    }
    if (file_.is_open()) file_.close();
  }

 private:
  std::string path_;
  std::ofstream file_;
  gzFile gz_ = nullptr;
};

inline std::vector<AttributeExample> read_examples(const std::string& path,
                                                   SpanEnd mode = SpanEnd::exclusive) {
  LineReader reader(path);
  std::vector<AttributeExample> out;
  std::string line;
  while (reader.next(line)) {
    if (line.empty()) continue;
    for (auto& ex : examples_from_line(line, mode, reader.line_no()))
      out.push_back(std::move(ex));
  }
  return out;
}

inline void write_examples(const std::string& path,
                           const std::vector<AttributeExample>& examples,
                           SpanEnd mode = SpanEnd::exclusive) {
  LineWriter writer(path);
  for (const auto& ex : examples) writer.write(serialize_example(ex, mode));
}

/// Loads a dataset from a positives file and an optional negatives file and
/// checks the cross-list invariant.
inline Dataset read_dataset(const std::string& pos_path, const std::string& neg_path = "",
                            SpanEnd mode = SpanEnd::exclusive) {
  Dataset ds;
  ds.positives = read_examples(pos_path, mode);
  if (!neg_path.empty()) ds.negatives = read_examples(neg_path, mode);
  validate_dataset(ds);
  return ds;
}

}  // namespace mave::jsonl
