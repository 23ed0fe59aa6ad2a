#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "mave/errors.hpp"
#include "mave/utf8.hpp"

// Canonical data types shared by every stage of the pipeline. All types are
// immutable values after construction and safe to share across workers.

namespace mave {

enum class SourceKind { title, description, feature, price, brand };

inline std::string_view to_string(SourceKind k) {
  switch (k) {
    case SourceKind::title: return "title";
    case SourceKind::description: return "description";
    case SourceKind::feature: return "feature";
    case SourceKind::price: return "price";
    case SourceKind::brand: return "brand";
  }
  return "title";
}

inline SourceKind source_kind_from_string(std::string_view s) {
  if (s == "title") return SourceKind::title;
  if (s == "description") return SourceKind::description;
  if (s == "feature") return SourceKind::feature;
  if (s == "price") return SourceKind::price;
  if (s == "brand") return SourceKind::brand;
  throw ValidationError("unknown source kind: " + std::string(s));
}

/// One text field of a product. `pid` equals the source's position in the
/// profile; text is cleaned UTF-8 (no control characters, no 2+ space runs).
struct Source {
  int pid = 0;
  SourceKind kind = SourceKind::title;
  std::string text;

  bool operator==(const Source&) const = default;
};

/// Ordered multi-source text record for one product.
struct ProductProfile {
  std::string id;
  std::vector<Source> sources;

  bool operator==(const ProductProfile&) const = default;

  const Source* title() const {
    for (const auto& s : sources)
      if (s.kind == SourceKind::title) return &s;
    return nullptr;
  }
};

/// Half-open character interval [begin, end) within source `pid`. `value` is
/// the verbatim surface text of the interval.
struct Span {
  int pid = 0;
  std::size_t begin = 0;
  std::size_t end = 0;
  std::string value;

  bool operator==(const Span&) const = default;
  auto operator<=>(const Span&) const = default;

  bool overlaps(const Span& o) const {
    return pid == o.pid && begin < o.end && o.begin < end;
  }
};

/// A (product, category, attribute) tuple with its evidence spans. An empty
/// evidence list means a verified negative (no value for this attribute).
struct AttributeExample {
  ProductProfile profile;
  std::string category;
  std::string attribute;
  std::optional<std::string> normalized_value;
  std::vector<Span> evidences;

  bool operator==(const AttributeExample&) const = default;

  bool is_negative() const { return evidences.empty(); }
};

struct Dataset {
  std::vector<AttributeExample> positives;
  std::vector<AttributeExample> negatives;

  std::size_t size() const { return positives.size() + negatives.size(); }
};

/// Identity of an example within a dataset: (profile id, attribute).
inline std::string example_key(const AttributeExample& ex) {
  std::string k = ex.profile.id;
  k.push_back('\x1F');
  k += ex.attribute;
  return k;
}

/// Key for normalized-value comparison: lowercased, whitespace collapsed.
inline std::string value_key(std::string_view s) {
  return utf8::ascii_lower(utf8::collapse_ws(s));
}

inline void validate_source(const Source& s, int expected_pid) {
  if (s.pid != expected_pid)
    throw ValidationError("source pid " + std::to_string(s.pid) +
                          " does not equal its position " + std::to_string(expected_pid));
  char prev = '\0';
  std::size_t i = 0;
  while (i < s.text.size()) {
    const char32_t cp = utf8::decode_next(s.text, i);
    if (cp == utf8::kInvalid)
      throw ValidationError("source text contains invalid UTF-8");
    if (utf8::is_control(cp))
      throw ValidationError("source text contains a control character");
    if (cp == ' ' && prev == ' ')
      throw ValidationError("source text contains a run of spaces");
    prev = (cp == ' ') ? ' ' : '\0';
  }
}

inline void validate_profile(const ProductProfile& p) {
  if (p.id.empty()) throw ValidationError("profile id is empty");
  for (std::size_t i = 0; i < p.sources.size(); ++i)
    validate_source(p.sources[i], static_cast<int>(i));
  if (p.title() == nullptr)
    throw ValidationError("profile " + p.id + " has no title source");
}

inline void validate_span(const Span& sp, const ProductProfile& p) {
  if (sp.pid < 0 || static_cast<std::size_t>(sp.pid) >= p.sources.size())
    throw ValidationError("span pid " + std::to_string(sp.pid) + " out of range");
  const std::string& text = p.sources[static_cast<std::size_t>(sp.pid)].text;
  const std::size_t len = utf8::length(text);
  if (sp.begin >= sp.end)
    throw ValidationError("span begin " + std::to_string(sp.begin) +
                          " must be less than end " + std::to_string(sp.end));
  if (sp.end > len)
    throw ValidationError("span end " + std::to_string(sp.end) +
                          " exceeds source length " + std::to_string(len));
  if (utf8::substr(text, sp.begin, sp.end) != sp.value)
    throw ValidationError("span value \"" + sp.value +
                          "\" does not match source text slice");
}

inline void validate_example(const AttributeExample& ex) {
  validate_profile(ex.profile);
  if (ex.attribute.empty()) throw ValidationError("attribute is empty");
  if (ex.evidences.empty() != !ex.normalized_value.has_value())
    throw ValidationError("normalized_value must be present iff evidences are non-empty");
  const Span* prev = nullptr;
  for (const auto& sp : ex.evidences) {
    validate_span(sp, ex.profile);
    if (prev) {
      if (std::pair(prev->pid, prev->begin) > std::pair(sp.pid, sp.begin))
        throw ValidationError("evidences are not sorted by (pid, begin)");
      if (prev->overlaps(sp))
        throw ValidationError("evidences overlap within pid " + std::to_string(sp.pid));
    }
    prev = &sp;
  }
}

/// Checks the cross-list invariant: no (profile id, attribute) pair may be
/// both positive and negative.
inline void validate_dataset(const Dataset& ds) {
  std::unordered_set<std::string> pos_keys;
  pos_keys.reserve(ds.positives.size());
  for (const auto& ex : ds.positives) pos_keys.insert(example_key(ex));
  for (const auto& ex : ds.negatives)
    if (pos_keys.count(example_key(ex)))
      throw ValidationError("example (" + ex.profile.id + ", " + ex.attribute +
                            ") appears in both positive and negative sets");
}

}  // namespace mave
