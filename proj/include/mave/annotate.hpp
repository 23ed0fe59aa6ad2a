#pragma once

#include <algorithm>
#include <map>
#include <memory>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "mave/core.hpp"
#include "mave/errors.hpp"
#include "mave/hash.hpp"
#include "mave/jsonl.hpp"
#include "mave/tokenize.hpp"

// Turns ProductProfiles into positive/negative AttributeExamples: category
// gating, rule extraction, five-way ensemble aggregation, token-to-character
// span mapping, overlap resolution, and seeded negative downsampling.

namespace mave::annotate {

/// Case-insensitive pattern over source text plus a surface-form to
/// normalized-value map. Surfaces are compared lowercased and
/// whitespace-collapsed; a match with no normalization entry is dropped.
struct ExtractionRule {
  std::string category;
  std::string attribute;
  std::string pattern;
  std::map<std::string, std::string> normalization;

  const std::regex& compiled() const {
    if (!compiled_) {
      try {
        compiled_ = std::regex(pattern, std::regex::ECMAScript | std::regex::icase);
      } catch (const std::regex_error& e) {
        throw ConfigError("rule (" + category + ", " + attribute + "): bad pattern \"" +
                          pattern + "\": " + e.what());
      }
    }
    return *compiled_;
  }

 private:
  mutable std::optional<std::regex> compiled_;
};

/// Rule file: JSONL of {"category", "attribute", "pattern",
/// "normalization": {"surface": "value"}}.
inline ExtractionRule parse_rule(const std::string& line, std::size_t line_no = 0) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("rule line " + std::to_string(line_no) + ": " + e.what());
  }
  try {
    ExtractionRule r;
    r.category = j.at("category").get<std::string>();
    r.attribute = j.at("attribute").get<std::string>();
    r.pattern = j.at("pattern").get<std::string>();
    for (const auto& [surface, value] : j.at("normalization").items()) {
      if (value.get<std::string>().empty())
        throw ValidationError("empty normalization value for surface \"" + surface + "\"");
      r.normalization[value_key(surface)] = value.get<std::string>();
    }
    r.compiled();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("rule line " + std::to_string(line_no) + ": " + e.what());
  }
}

inline std::vector<ExtractionRule> load_rules(const std::string& path) {
  jsonl::LineReader reader(path);
  std::vector<ExtractionRule> rules;
  std::string line;
  while (reader.next(line)) {
    if (line.empty()) continue;
    rules.push_back(parse_rule(line, reader.line_no()));
  }
  return rules;
}

struct CategoryPrediction {
  std::string category;
  double probability = 0.0;
};

enum class Gate { keep, drop };

/// Drop iff probability < threshold; "lower than" is strict, so the boundary
/// is kept.
inline Gate gate_category(const CategoryPrediction& pred, double threshold = 0.5) {
  return pred.probability < threshold ? Gate::drop : Gate::keep;
}

/// Pluggable product-category classifier.
class CategoryClassifier {
 public:
  virtual ~CategoryClassifier() = default;
  virtual CategoryPrediction predict(const ProductProfile& profile) const = 0;
};

/// Toy stand-in: counts case-insensitive whole-word keyword hits per
/// category; probability is the winning category's share of all hits. Ties
/// break to the lexicographically smallest category.
class KeywordCategoryClassifier : public CategoryClassifier {
 public:
  explicit KeywordCategoryClassifier(std::map<std::string, std::vector<std::string>> keywords)
      : keywords_(std::move(keywords)) {
    for (auto& [cat, words] : keywords_)
      for (auto& w : words) w = value_key(w);
  }

  /// Keyword file: JSONL of {"category", "keywords": [...]}.
  static KeywordCategoryClassifier from_file(const std::string& path) {
    jsonl::LineReader reader(path);
    std::map<std::string, std::vector<std::string>> keywords;
    std::string line;
    while (reader.next(line)) {
      if (line.empty()) continue;
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + " line " + std::to_string(reader.line_no()) + ": " + e.what());
      }
      auto& list = keywords[j.at("category").get<std::string>()];
      for (const auto& w : j.at("keywords")) list.push_back(w.get<std::string>());
    }
    return KeywordCategoryClassifier(std::move(keywords));
  }

  CategoryPrediction predict(const ProductProfile& profile) const override {
    std::map<std::string, long> hits;
    long total = 0;
    for (const auto& src : profile.sources) {
      for (const auto& tok : tokenize::whitespace_tokenize(src.text)) {
        const std::string w = value_key(tok.text);
        for (const auto& [cat, words] : keywords_) {
          if (std::find(words.begin(), words.end(), w) != words.end()) {
            ++hits[cat];
            ++total;
          }
        }
      }
    }
    CategoryPrediction best;
    for (const auto& [cat, n] : hits) {
      if (n > 0 && (best.category.empty() || n > hits.at(best.category))) best.category = cat;
    }
    if (!best.category.empty() && total > 0)
      best.probability = static_cast<double>(hits.at(best.category)) / static_cast<double>(total);
    return best;
  }

 private:
  std::map<std::string, std::vector<std::string>> keywords_;
};

/// Sorts by (pid, begin, end) and greedily keeps each span iff it does not
/// overlap an already-kept span in the same pid, i.e. the overlap winner is
/// the smallest begin index (ties to the smaller end).
inline std::vector<Span> resolve_overlaps(std::vector<Span> spans) {
  std::sort(spans.begin(), spans.end(), [](const Span& a, const Span& b) {
    return std::tie(a.pid, a.begin, a.end, a.value) < std::tie(b.pid, b.begin, b.end, b.value);
  });
  std::vector<Span> kept;
  for (auto& sp : spans) {
    bool clear = true;
    for (const auto& k : kept)
      if (k.overlaps(sp)) {
        clear = false;
        break;
      }
    if (clear) kept.push_back(std::move(sp));
  }
  return kept;
}

struct RuleMatches {
  std::vector<Span> spans;
  std::optional<std::string> normalized_value;

  bool empty() const { return spans.empty(); }
};

/// All non-overlapping matches of the (category, attribute) rules across all
/// sources, mapped through normalization. When matches normalize to several
/// distinct values, the value of the first match in (pid, begin) order wins
/// and only its spans are kept.
inline RuleMatches apply_rules(const ProductProfile& profile, const std::string& category,
                               const std::string& attribute,
                               const std::vector<ExtractionRule>& rules) {
  struct Hit {
    Span span;
    std::string value;
  };
  std::vector<Hit> hits;
  for (const auto& rule : rules) {
    if (rule.category != category || rule.attribute != attribute) continue;
    for (const auto& src : profile.sources) {
      auto begin_it = std::sregex_iterator(src.text.begin(), src.text.end(), rule.compiled());
      for (auto it = begin_it; it != std::sregex_iterator(); ++it) {
        const std::smatch& m = *it;
        const auto norm = rule.normalization.find(value_key(m.str()));
        if (norm == rule.normalization.end()) continue;
        Span sp;
        sp.pid = src.pid;
        // regex positions are byte offsets; spans use code point offsets
        sp.begin = utf8::length(std::string_view(src.text).substr(0, static_cast<std::size_t>(m.position())));
        sp.end = sp.begin + utf8::length(m.str());
        sp.value = m.str();
        hits.push_back(Hit{std::move(sp), norm->second});
      }
    }
  }
  std::sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) {
    return std::tie(a.span.pid, a.span.begin, a.span.end) <
           std::tie(b.span.pid, b.span.begin, b.span.end);
  });
  RuleMatches out;
  for (auto& h : hits) {
    if (!out.normalized_value) out.normalized_value = h.value;
    if (h.value == *out.normalized_value) out.spans.push_back(std::move(h.span));
  }
  out.spans = resolve_overlaps(std::move(out.spans));
  return out;
}

/// Token index range within source `pid`; `first` and `last` are inclusive
/// indices into that source's token list.
struct TokenSpan {
  int pid = 0;
  int first = 0;
  int last = 0;

  bool operator==(const TokenSpan&) const = default;
};

/// Output of one ensemble member for one (profile, category, attribute).
struct ModelExtraction {
  int extractor_id = 0;
  std::vector<TokenSpan> token_spans;
  std::optional<std::string> normalized_value;

  bool empty() const { return token_spans.empty(); }
};

/// Char span (tokens[first].begin, tokens[last].end), half-open; value is the
/// text slice.
inline Span map_token_span_to_char(const TokenSpan& ts,
                                   const std::vector<tokenize::Token>& tokens,
                                   const std::string& source_text) {
  if (ts.first < 0 || ts.last < ts.first ||
      static_cast<std::size_t>(ts.last) >= tokens.size())
    throw ContractError("token span [" + std::to_string(ts.first) + ", " +
                        std::to_string(ts.last) + "] out of range for " +
                        std::to_string(tokens.size()) + " tokens");
  Span sp;
  sp.pid = ts.pid;
  sp.begin = tokens[static_cast<std::size_t>(ts.first)].begin;
  sp.end = tokens[static_cast<std::size_t>(ts.last)].end;
  sp.value = utf8::substr(source_text, sp.begin, sp.end);
  return sp;
}

inline std::vector<Span> map_token_spans_to_char(
    const std::vector<TokenSpan>& token_spans,
    const std::vector<std::vector<tokenize::Token>>& tokens_per_source,
    const ProductProfile& profile) {
  std::vector<Span> out;
  out.reserve(token_spans.size());
  for (const auto& ts : token_spans) {
    if (ts.pid < 0 || static_cast<std::size_t>(ts.pid) >= profile.sources.size())
      throw ContractError("token span pid " + std::to_string(ts.pid) + " out of range");
    out.push_back(map_token_span_to_char(ts, tokens_per_source[static_cast<std::size_t>(ts.pid)],
                                         profile.sources[static_cast<std::size_t>(ts.pid)].text));
  }
  return out;
}

enum class OutcomeTag { positive, negative, discard };

struct AggregationOutcome {
  OutcomeTag tag = OutcomeTag::discard;
  std::optional<AttributeExample> example;
  std::string detail;
};

/// The aggregation rule, applied to exactly five ensemble outputs:
///   - positive iff all five normalized values are present and identical
///     (lowercased, whitespace-collapsed comparison); evidences are the
///     overlap-resolved union of all five models' char-mapped spans
///   - negative iff all five are empty and the rule output is empty
///   - discard otherwise
inline AggregationOutcome aggregate_ensemble(
    const std::vector<ModelExtraction>& model_outputs, const RuleMatches& rule_output,
    const ProductProfile& profile, const std::string& category, const std::string& attribute,
    const std::vector<std::vector<tokenize::Token>>& tokens_per_source) {
  if (model_outputs.size() != 5)
    throw ContractError("ensemble aggregation requires exactly 5 model outputs, got " +
                        std::to_string(model_outputs.size()));

  bool all_present = true;
  bool all_empty = true;
  std::optional<std::string> agreed_key;
  bool identical = true;
  for (const auto& m : model_outputs) {
    if (m.normalized_value && !m.empty()) {
      all_empty = false;
      const std::string key = value_key(*m.normalized_value);
      if (!agreed_key)
        agreed_key = key;
      else if (*agreed_key != key)
        identical = false;
    } else {
      all_present = false;
    }
  }

  AggregationOutcome out;
  if (all_present && identical) {
    AttributeExample ex;
    ex.profile = profile;
    ex.category = category;
    ex.attribute = attribute;
    ex.normalized_value = model_outputs.front().normalized_value;
    std::vector<Span> united;
    for (const auto& m : model_outputs) {
      auto spans = map_token_spans_to_char(m.token_spans, tokens_per_source, profile);
      united.insert(united.end(), spans.begin(), spans.end());
    }
    ex.evidences = resolve_overlaps(std::move(united));
    out.tag = OutcomeTag::positive;
    out.example = std::move(ex);
    return out;
  }
  if (all_empty && rule_output.empty()) {
    AttributeExample ex;
    ex.profile = profile;
    ex.category = category;
    ex.attribute = attribute;
    out.tag = OutcomeTag::negative;
    out.example = std::move(ex);
    return out;
  }
  out.tag = OutcomeTag::discard;
  if (!all_empty && !all_present)
    out.detail = "models disagree on extraction presence";
  else if (!identical)
    out.detail = "models disagree on normalized value";
  else
    out.detail = "models empty but rules matched";
  return out;
}

/// Pluggable ensemble member.
class Extractor {
 public:
  virtual ~Extractor() = default;
  virtual ModelExtraction extract(const ProductProfile& profile, const std::string& category,
                                  const std::string& attribute,
                                  const std::vector<std::vector<tokenize::Token>>& tokens_per_source,
                                  const std::vector<ExtractionRule>& rules) const = 0;
};

namespace detail {

/// Smallest token range whose character interval covers [begin, end), or
/// nullopt when no token overlaps.
inline std::optional<TokenSpan> covering_token_span(const Span& sp,
                                                    const std::vector<tokenize::Token>& tokens) {
  int first = -1, last = -1;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto& t = tokens[i];
    if (t.begin < sp.end && sp.begin < t.end) {
      if (first < 0) first = static_cast<int>(i);
      last = static_cast<int>(i);
    }
  }
  if (first < 0) return std::nullopt;
  return TokenSpan{sp.pid, first, last};
}

}  // namespace detail

/// Ensemble member backed by the rule engine itself.
class RuleExtractor : public Extractor {
 public:
  explicit RuleExtractor(int id) : id_(id) {}

  ModelExtraction extract(const ProductProfile& profile, const std::string& category,
                          const std::string& attribute,
                          const std::vector<std::vector<tokenize::Token>>& tokens_per_source,
                          const std::vector<ExtractionRule>& rules) const override {
    ModelExtraction m;
    m.extractor_id = id_;
    const RuleMatches matches = apply_rules(profile, category, attribute, rules);
    for (const auto& sp : matches.spans) {
      const auto ts =
          detail::covering_token_span(sp, tokens_per_source[static_cast<std::size_t>(sp.pid)]);
      if (ts) m.token_spans.push_back(*ts);
    }
    if (!m.token_spans.empty()) m.normalized_value = matches.normalized_value;
    return m;
  }

 private:
  int id_;
};

/// Rule engine that deterministically drops each match with probability
/// drop_prob, keyed by (seed, profile, attribute, span). Produces ensemble
/// disagreements for tests and demos.
class NoisyRuleExtractor : public Extractor {
 public:
  NoisyRuleExtractor(int id, double drop_prob, std::uint64_t seed)
      : id_(id), drop_prob_(drop_prob), seed_(seed) {}

  ModelExtraction extract(const ProductProfile& profile, const std::string& category,
                          const std::string& attribute,
                          const std::vector<std::vector<tokenize::Token>>& tokens_per_source,
                          const std::vector<ExtractionRule>& rules) const override {
    ModelExtraction m;
    m.extractor_id = id_;
    const RuleMatches matches = apply_rules(profile, category, attribute, rules);
    for (const auto& sp : matches.spans) {
      const std::uint64_t h =
          stable_hash(seed_ + static_cast<std::uint64_t>(id_),
                      {profile.id, attribute, std::to_string(sp.pid),
                       std::to_string(sp.begin), std::to_string(sp.end)});
      if (unit_interval(h) < drop_prob_) continue;
      const auto ts =
          detail::covering_token_span(sp, tokens_per_source[static_cast<std::size_t>(sp.pid)]);
      if (ts) m.token_spans.push_back(*ts);
    }
    if (!m.token_spans.empty()) m.normalized_value = matches.normalized_value;
    return m;
  }

 private:
  int id_;
  double drop_prob_;
  std::uint64_t seed_;
};

/// Runs the five-member ensemble plus the rule check for one attribute.
inline AggregationOutcome annotate_example(
    const ProductProfile& profile, const std::string& category, const std::string& attribute,
    const std::vector<std::unique_ptr<Extractor>>& ensemble,
    const std::vector<ExtractionRule>& rules,
    const std::vector<std::vector<tokenize::Token>>& tokens_per_source) {
  std::vector<ModelExtraction> outputs;
  outputs.reserve(ensemble.size());
  for (const auto& e : ensemble)
    outputs.push_back(e->extract(profile, category, attribute, tokens_per_source, rules));
  const RuleMatches rule_output = apply_rules(profile, category, attribute, rules);
  return aggregate_ensemble(outputs, rule_output, profile, category, attribute,
                            tokens_per_source);
}

/// For each (category, attribute) pair with more than `cap` negatives,
/// retains the `cap` entries with the lowest seeded hash of (category,
/// attribute, example id). Positives are untouched. Sharded runs reproduce
/// the same retention because the decision is a pure function of the seed
/// and the example identity.
inline Dataset downsample_negatives(const Dataset& dataset, std::size_t cap,
                                    std::uint64_t seed) {
  if (cap == 0) throw ContractError("downsample cap must be positive");
  struct PairState {
    std::vector<std::uint64_t> hashes;
  };
  std::map<std::pair<std::string, std::string>, PairState> pairs;
  std::vector<std::uint64_t> hash_of(dataset.negatives.size());
  for (std::size_t i = 0; i < dataset.negatives.size(); ++i) {
    const auto& ex = dataset.negatives[i];
    hash_of[i] = stable_hash(seed, {ex.category, ex.attribute, example_key(ex)});
    pairs[{ex.category, ex.attribute}].hashes.push_back(hash_of[i]);
  }
  std::map<std::pair<std::string, std::string>, std::uint64_t> threshold;
  std::map<std::pair<std::string, std::string>, std::size_t> tied_budget;
  for (auto& [key, st] : pairs) {
    if (st.hashes.size() <= cap) continue;
    std::nth_element(st.hashes.begin(), st.hashes.begin() + static_cast<std::ptrdiff_t>(cap - 1),
                     st.hashes.end());
    const std::uint64_t t = st.hashes[cap - 1];
    const std::size_t below =
        static_cast<std::size_t>(std::count_if(st.hashes.begin(), st.hashes.end(),
                                               [t](std::uint64_t h) { return h < t; }));
    threshold[key] = t;
    tied_budget[key] = cap - below;
  }
  Dataset out;
  out.positives = dataset.positives;
  for (std::size_t i = 0; i < dataset.negatives.size(); ++i) {
    const auto& ex = dataset.negatives[i];
    const auto key = std::make_pair(ex.category, ex.attribute);
    const auto it = threshold.find(key);
    if (it == threshold.end()) {
      out.negatives.push_back(ex);
      continue;
    }
    if (hash_of[i] < it->second) {
      out.negatives.push_back(ex);
    } else if (hash_of[i] == it->second && tied_budget[key] > 0) {
      --tied_budget[key];
      out.negatives.push_back(ex);
    }
  }
  return out;
}

}  // namespace mave::annotate
