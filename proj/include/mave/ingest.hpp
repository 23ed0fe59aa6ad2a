#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "mave/core.hpp"
#include "mave/errors.hpp"
#include "mave/tokenize.hpp"
#include "mave/utf8.hpp"

// Cleans raw product records into ProductProfiles. The markup rule set is
// deliberately closed and documented here rather than delegated to an HTML
// parser, so that cleaning is bit-reproducible:
//   - <...> tag structures are removed; block-level tags become one space,
//     inline tags nothing; a tag left open at end of input swallows the rest
//   - script/style element contents are removed entirely
//   - <!-- comments --> are removed
//   - &amp; &lt; &gt; &quot; &apos; &nbsp; and &#NN;/&#xNN; are decoded
// Unbalanced markup is tolerated; stripping never fails.

namespace mave::ingest {

struct RawProduct {
  std::string id;
  std::optional<std::string> title;
  std::vector<std::string> descriptions;
  std::vector<std::string> features;
  std::optional<std::string> price;
  std::optional<std::string> brand;
};

enum class RejectCode { no_title, too_few_words, empty_after_cleaning };

inline std::string_view to_string(RejectCode c) {
  switch (c) {
    case RejectCode::no_title: return "no_title";
    case RejectCode::too_few_words: return "too_few_words";
    case RejectCode::empty_after_cleaning: return "empty_after_cleaning";
  }
  return "no_title";
}

struct RejectionReason {
  RejectCode code;
  std::string detail;
};

namespace detail {

inline bool is_block_tag(std::string_view name) {
  static constexpr std::array kBlock = {
      "address",    "article", "aside", "blockquote", "br",     "center",
      "dd",         "div",     "dl",    "dt",         "fieldset", "figcaption",
      "figure",     "footer",  "form",  "h1",         "h2",     "h3",
      "h4",         "h5",      "h6",    "header",     "hr",     "li",
      "main",       "nav",     "ol",    "p",          "pre",    "section",
      "table",      "tbody",   "td",    "tfoot",      "th",     "thead",
      "tr",         "ul"};
  for (const auto* b : kBlock)
    if (name == b) return true;
  return false;
}

/// Lowercased tag name starting at s[i] (i points just past '<' and any '/').
inline std::string tag_name_at(std::string_view s, std::size_t i) {
  std::string name;
  while (i < s.size() && (std::isalnum(static_cast<unsigned char>(s[i])) != 0)) {
    name.push_back(static_cast<char>(utf8::ascii_lower(static_cast<char32_t>(
        static_cast<unsigned char>(s[i])))));
    ++i;
  }
  return name;
}

/// Index just past the closing '>' of the tag at s[i]=='<', honoring quoted
/// attribute values. Returns s.size() when the tag never closes.
inline std::size_t skip_tag(std::string_view s, std::size_t i) {
  char quote = '\0';
  for (++i; i < s.size(); ++i) {
    const char c = s[i];
    if (quote != '\0') {
      if (c == quote) quote = '\0';
    } else if (c == '"' || c == '\'') {
      quote = c;
    } else if (c == '>') {
      return i + 1;
    }
  }
  return s.size();
}

/// Index just past "</name...>" searched case-insensitively from i, or
/// s.size() when the element never closes.
inline std::size_t skip_element_content(std::string_view s, std::size_t i,
                                        std::string_view name) {
  while (i < s.size()) {
    if (s[i] == '<' && i + 1 < s.size() && s[i + 1] == '/') {
      if (tag_name_at(s, i + 2) == name) return skip_tag(s, i);
    }
    ++i;
  }
  return s.size();
}

inline bool decode_entity(std::string_view s, std::size_t i, std::string& out,
                          std::size_t& next) {
  const std::size_t semi = s.find(';', i + 1);
  if (semi == std::string_view::npos || semi - i > 12) return false;
  const std::string_view body = s.substr(i + 1, semi - i - 1);
  next = semi + 1;
  if (body == "amp") out += '&';
  else if (body == "lt") out += '<';
  else if (body == "gt") out += '>';
  else if (body == "quot") out += '"';
  else if (body == "apos") out += '\'';
  else if (body == "nbsp") out += ' ';
  else if (body.size() >= 2 && body[0] == '#') {
    char32_t cp = 0;
    bool ok = true;
    if (body[1] == 'x' || body[1] == 'X') {
      if (body.size() < 3) return false;
      for (std::size_t k = 2; k < body.size() && ok; ++k) {
        const char c = body[k];
        int digit;
        if (c >= '0' && c <= '9') digit = c - '0';
        else if (c >= 'a' && c <= 'f') digit = c - 'a' + 10;
        else if (c >= 'A' && c <= 'F') digit = c - 'A' + 10;
        else { ok = false; break; }
        cp = cp * 16 + static_cast<char32_t>(digit);
      }
    } else {
      for (std::size_t k = 1; k < body.size() && ok; ++k) {
        const char c = body[k];
        if (c < '0' || c > '9') { ok = false; break; }
        cp = cp * 10 + static_cast<char32_t>(c - '0');
      }
    }
    if (!ok || cp == 0 || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return false;
    utf8::append(out, cp);
  } else {
    return false;
  }
  return true;
}

}  // namespace detail

/// Removes markup per the rule set above. Best-effort: never throws.
inline std::string strip_markup(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  std::size_t i = 0;
  while (i < raw.size()) {
    const char c = raw[i];
    if (c == '<' && i + 1 < raw.size()) {
      const char n = raw[i + 1];
      if (n == '!') {
        if (raw.substr(i, 4) == "<!--") {
          const std::size_t close = raw.find("-->", i + 4);
          i = close == std::string_view::npos ? raw.size() : close + 3;
        } else {
          i = detail::skip_tag(raw, i);
        }
        continue;
      }
      const bool is_tag = n == '/' || n == '?' ||
                          (std::isalpha(static_cast<unsigned char>(n)) != 0);
      if (is_tag) {
        const bool closing = n == '/';
        const std::string name = detail::tag_name_at(raw, closing ? i + 2 : i + 1);
        std::size_t after = detail::skip_tag(raw, i);
        if (!closing && (name == "script" || name == "style"))
          after = detail::skip_element_content(raw, after, name);
        if (detail::is_block_tag(name)) out += ' ';
        i = after;
        continue;
      }
    }
    if (c == '&') {
      std::size_t next = 0;
      if (detail::decode_entity(raw, i, out, next)) {
        i = next;
        continue;
      }
    }
    out.push_back(c);
    ++i;
  }
  return out;
}

/// Drops invalid UTF-8 and control characters (newlines count as spaces),
/// collapses whitespace runs, trims. Idempotent.
inline std::string sanitize_text(std::string_view raw) {
  std::string filtered;
  filtered.reserve(raw.size());
  std::size_t i = 0;
  while (i < raw.size()) {
    const char32_t cp = utf8::decode_next(raw, i);
    if (cp == utf8::kInvalid) continue;
    if (cp == 0xFFFE || cp == 0xFFFF || cp == 0xFFFD) continue;
    if (utf8::is_space(cp)) {
      filtered.push_back(' ');
      continue;
    }
    if (utf8::is_control(cp)) continue;
    utf8::append(filtered, cp);
  }
  return utf8::collapse_ws(filtered);
}

inline std::string clean_field(std::string_view raw) {
  return sanitize_text(strip_markup(raw));
}

/// Assembles a profile in source order title, descriptions, features, price,
/// brand. Rejections, in priority order: no_title (title missing or empty
/// after cleaning), empty_after_cleaning (title was present in the raw record
/// but every source cleaned to nothing), too_few_words (< 20 words total).
inline std::variant<ProductProfile, RejectionReason> build_profile(const RawProduct& raw) {
  ProductProfile p;
  p.id = raw.id;

  const std::string title_text = raw.title ? clean_field(*raw.title) : std::string();
  auto add = [&p](SourceKind kind, std::string text) {
    if (text.empty()) return;
    p.sources.push_back(Source{static_cast<int>(p.sources.size()), kind, std::move(text)});
  };
  add(SourceKind::title, title_text);
  for (const auto& d : raw.descriptions) add(SourceKind::description, clean_field(d));
  for (const auto& f : raw.features) add(SourceKind::feature, clean_field(f));
  if (raw.price) add(SourceKind::price, clean_field(*raw.price));
  if (raw.brand) add(SourceKind::brand, clean_field(*raw.brand));

  if (title_text.empty()) {
    if (raw.title && !p.sources.empty())
      return RejectionReason{RejectCode::no_title, "title empty after cleaning"};
    if (raw.title)
      return RejectionReason{RejectCode::empty_after_cleaning,
                             "all sources empty after cleaning"};
    return RejectionReason{RejectCode::no_title, "missing title"};
  }

  std::size_t words = 0;
  for (const auto& s : p.sources) words += tokenize::whitespace_tokenize(s.text).size();
  if (words < 20)
    return RejectionReason{RejectCode::too_few_words,
                           std::to_string(words) + " words, need 20"};
  return p;
}

/// Raw record schema: {"id", "title"?, "descriptions"?: [...], "features"?:
/// [...], "price"?, "brand"?}. Numeric prices are stringified.
inline RawProduct parse_raw_product(const std::string& line, std::size_t line_no = 0) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
  }
  try {
    RawProduct raw;
    if (!j.contains("id")) throw ValidationError("missing id");
    raw.id = j.at("id").get<std::string>();
    if (j.contains("title") && !j.at("title").is_null())
      raw.title = j.at("title").get<std::string>();
    for (const auto& d : j.value("descriptions", nlohmann::json::array()))
      raw.descriptions.push_back(d.get<std::string>());
    for (const auto& f : j.value("features", nlohmann::json::array()))
      raw.features.push_back(f.get<std::string>());
    if (j.contains("price") && !j.at("price").is_null()) {
      const auto& v = j.at("price");
      raw.price = v.is_string() ? v.get<std::string>() : v.dump();
    }
    if (j.contains("brand") && !j.at("brand").is_null())
      raw.brand = j.at("brand").get<std::string>();
    return raw;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("line " + std::to_string(line_no) + ": " + e.what());
  }
}

}  // namespace mave::ingest
