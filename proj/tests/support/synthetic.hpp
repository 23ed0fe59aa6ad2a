#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mave/core.hpp"
#include "mave/hash.hpp"
#include "mave/utf8.hpp"

// Deterministic synthetic product corpus with planted attribute values. The
// generator tracks exactly where it plants each value, so the gold examples
// are derived independently of the extraction pipeline under test. Raw lines
// optionally carry markup noise that cleans back to the tracked text.

namespace testsupport {

/// splitmix64-chained RNG; identical streams on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    state_ = mave::splitmix64(state_ + 0x632BE59BD9B4E019ull);
    return state_;
  }

  std::size_t pick(std::size_t n) { return n == 0 ? 0 : next() % n; }

  bool chance(double p) { return mave::unit_interval(next()) < p; }

  template <typename T>
  const T& choose(const std::vector<T>& items) {
    return items[pick(items.size())];
  }
};

struct AttributeSpec {
  std::string name;
  std::vector<std::string> values;      // lowercase surface forms
  std::vector<std::string> normalized;  // parallel normalized values
  std::string lead_in;                  // words planted before the value
};

struct CategorySpec {
  std::string name;
  std::vector<std::string> keywords;
  std::vector<std::string> attributes;
};

inline const std::vector<AttributeSpec>& attribute_specs() {
  static const std::vector<AttributeSpec> specs = {
      {"Color",
       {"crimson", "azure", "emerald", "amber"},
       {"Crimson", "Azure", "Emerald", "Amber"},
       "available in"},
      {"Material",
       {"velvet", "leather", "walnut", "titanium"},
       {"Velvet", "Leather", "Walnut", "Titanium"},
       "made of"},
      {"Maker",
       {"zorblax", "quixolana", "vantreda", "prindel"},
       {"Zorblax", "Quixolana", "Vantreda", "Prindel"},
       "by"},
      {"Battery Life",
       {"4 hours", "9 hours", "16 hours"},
       {"4 Hours", "9 Hours", "16 Hours"},
       "battery life"},
      {"Screen Size",
       {"11 inch", "14 inch", "17 inch"},
       {"11 Inch", "14 Inch", "17 Inch"},
       "screen size"}};
  return specs;
}

inline const std::vector<CategorySpec>& category_specs() {
  static const std::vector<CategorySpec> specs = {
      {"electronics", {"laptop", "tablet", "headset"}, {"Battery Life", "Maker", "Screen Size"}},
      {"footwear", {"boot", "sandal", "sneaker"}, {"Color", "Maker", "Material"}},
      {"toys", {"figurine", "plush", "puzzle"}, {"Color", "Maker", "Material"}}};
  return specs;
}

inline const std::vector<std::string>& filler_words() {
  static const std::vector<std::string> words = {
      "about",   "added",   "along",   "around",  "basic",   "bring",  "budget", "built",
      "carry",   "choice",  "classic", "clean",   "comfort", "compact", "corner", "crafted",
      "daily",   "design",  "detail",  "durable", "early",   "enjoy",  "every",  "extra",
      "family",  "finish",  "fresh",   "friendly", "gentle",  "grand",  "handy",  "happy",
      "holds",   "home",    "ideal",   "inside",  "keeps",   "light",  "lively", "lovely",
      "modern",  "months",  "nicely",  "offers",  "outdoor", "packed", "perfect", "place",
      "popular", "premium", "pretty",  "quality", "quick",   "range",  "ready",  "roomy",
      "rugged",  "seasons", "secure",  "series",  "shape",   "simple", "smooth", "solid",
      "special", "sturdy",  "style",   "subtle",  "super",   "sweet",  "tidy",   "touch",
      "travel",  "trusty",  "useful",  "value",   "warm",    "weekend", "while",  "works"};
  return words;
}

/// Words the WordPiece vocab must cover beyond fillers, values and keywords.
inline const std::vector<std::string>& template_words() {
  static const std::vector<std::string> words = {
      "available", "in",     "made",  "of",     "by",   "battery", "life", "screen",
      "size",      "color",  "maker", "material", "the",  "a",       "and",  "with",
      "for",       "hours",  "inch",  "great",  "this", "new"};
  return words;
}

/// ~200-entry WordPiece vocab covering the whole synthetic corpus.
inline std::vector<std::string> synthetic_vocab() {
  std::set<std::string> pieces;
  auto add_words = [&pieces](const std::vector<std::string>& words) {
    for (const auto& w : words)
      for (const auto& part : {w.substr(0, w.find(' ')),
                               w.find(' ') == std::string::npos ? "" : w.substr(w.find(' ') + 1)})
        if (!part.empty()) pieces.insert(mave::utf8::ascii_lower(part));
  };
  add_words(filler_words());
  add_words(template_words());
  for (const auto& a : attribute_specs()) add_words(a.values);
  for (const auto& c : category_specs()) {
    add_words(c.keywords);
    add_words({c.name});
  }
  for (char d = '0'; d <= '9'; ++d) {
    pieces.insert(std::string(1, d));
    pieces.insert(std::string("##") + d);
  }
  for (const char* p : {"$", ".", ",", "!", "-", "electronics", "footwear", "toys"})
    pieces.insert(p);
  std::vector<std::string> vocab = {"[PAD]", "[UNK]"};
  vocab.insert(vocab.end(), pieces.begin(), pieces.end());
  return vocab;
}

struct SynthProduct {
  mave::ProductProfile profile;  // cleaned text, the span ground truth
  std::string category;
  std::string raw_line;          // raw JSONL (with markup noise when enabled)
  // attribute -> (normalized value, spans); absence = negative
  std::map<std::string, std::pair<std::string, std::vector<mave::Span>>> planted;
};

struct SynthConfig {
  int n_products = 500;
  std::uint64_t seed = 42;
  bool markup_noise = false;
  double plant_prob = 0.75;
  int n_reject_records = 0;  // appended raw-only records that clean must drop
};

struct SynthCorpus {
  std::vector<SynthProduct> products;
  std::vector<std::string> raw_lines;     // products + reject records
  std::vector<std::string> rule_lines;    // extraction rules JSONL
  std::vector<std::string> keyword_lines; // keyword classifier JSONL
  std::vector<std::string> vocab;         // WordPiece vocab entries
  mave::Dataset gold;                     // derived from `planted`
};

namespace detail {

/// Builds one source text from word groups, recording the span of each
/// planted group. All words are ASCII, so code point offsets equal counts.
class SourceBuilder {
 public:
  void add_words(const std::string& words) {
    if (!text_.empty()) text_ += ' ';
    text_ += words;
  }

  /// Appends lead-in + value, returning the value's span offsets.
  std::pair<std::size_t, std::size_t> plant(const std::string& lead_in,
                                            const std::string& value) {
    if (!lead_in.empty()) add_words(lead_in);
    if (!text_.empty()) text_ += ' ';
    const std::size_t begin = mave::utf8::length(text_);
    text_ += value;
    return {begin, begin + mave::utf8::length(value)};
  }

  const std::string& text() const { return text_; }
  bool empty() const { return text_.empty(); }

 private:
  std::string text_;
};

inline std::string decorate_markup(const std::string& clean, Rng& rng) {
  std::string raw = clean;
  if (rng.chance(0.5)) {
    // bolding the first word strips back to the identical text
    const auto space = raw.find(' ');
    const std::string head = space == std::string::npos ? raw : raw.substr(0, space);
    const std::string tail = space == std::string::npos ? "" : raw.substr(space);
    raw = "<b>" + head + "</b>" + tail;
  }
  if (rng.chance(0.4)) raw = "<p>" + raw + "</p>";
  if (rng.chance(0.3)) raw += "<script>var tracker = 1;</script>";
  if (rng.chance(0.3)) raw = " " + raw + "  ";
  if (rng.chance(0.25)) {
    const auto space = raw.rfind(' ');
    if (space != std::string::npos && space + 1 < raw.size())
      raw = raw.substr(0, space) + "&nbsp;" + raw.substr(space + 1);
  }
  return raw;
}

}  // namespace detail

inline SynthCorpus make_synthetic_corpus(const SynthConfig& cfg) {
  SynthCorpus corpus;
  corpus.vocab = synthetic_vocab();
  Rng rng(cfg.seed);

  const auto& cats = category_specs();
  std::map<std::string, const AttributeSpec*> attr_by_name;
  for (const auto& a : attribute_specs()) attr_by_name[a.name] = &a;

  for (const auto& c : cats) {
    nlohmann::ordered_json kw;
    kw["category"] = c.name;
    kw["keywords"] = c.keywords;
    corpus.keyword_lines.push_back(kw.dump());
    for (const auto& attr_name : c.attributes) {
      const AttributeSpec& a = *attr_by_name.at(attr_name);
      std::string pattern = "\\b(";
      for (std::size_t i = 0; i < a.values.size(); ++i) {
        if (i) pattern += '|';
        pattern += a.values[i];
      }
      pattern += ")\\b";
      nlohmann::ordered_json rule;
      rule["category"] = c.name;
      rule["attribute"] = a.name;
      rule["pattern"] = pattern;
      nlohmann::ordered_json norm = nlohmann::ordered_json::object();
      for (std::size_t i = 0; i < a.values.size(); ++i) norm[a.values[i]] = a.normalized[i];
      rule["normalization"] = norm;
      corpus.rule_lines.push_back(rule.dump());
    }
  }

  const auto& fillers = filler_words();
  auto filler_run = [&rng, &fillers](int n) {
    std::string out;
    for (int i = 0; i < n; ++i) {
      if (!out.empty()) out += ' ';
      out += rng.choose(fillers);
    }
    return out;
  };

  for (int pi = 0; pi < cfg.n_products; ++pi) {
    const CategorySpec& cat = cats[static_cast<std::size_t>(pi) % cats.size()];
    SynthProduct product;
    product.category = cat.name;
    product.profile.id = "prod-" + std::to_string(1000 + pi);

    // choose planted attributes and their values up front
    struct Plant {
      const AttributeSpec* spec;
      std::size_t value_idx;
    };
    std::vector<Plant> plants;
    for (const auto& attr_name : cat.attributes) {
      if (!rng.chance(cfg.plant_prob)) continue;
      const AttributeSpec& spec = *attr_by_name.at(attr_name);
      plants.push_back(Plant{&spec, rng.pick(spec.values.size())});
    }

    struct PendingSource {
      mave::SourceKind kind;
      detail::SourceBuilder builder;
      std::vector<std::pair<std::string, std::pair<std::size_t, std::size_t>>> spans;
    };
    std::vector<PendingSource> sources;

    PendingSource title{mave::SourceKind::title, {}, {}};
    title.builder.add_words(rng.choose(cat.keywords));
    title.builder.add_words(filler_run(2 + static_cast<int>(rng.pick(3))));
    sources.push_back(std::move(title));

    const int n_desc = 1 + static_cast<int>(rng.pick(2));
    for (int i = 0; i < n_desc; ++i) {
      PendingSource desc{mave::SourceKind::description, {}, {}};
      desc.builder.add_words("this " + rng.choose(cat.keywords));
      desc.builder.add_words(filler_run(6 + static_cast<int>(rng.pick(6))));
      sources.push_back(std::move(desc));
    }
    const int n_feat = 1 + static_cast<int>(rng.pick(2));
    for (int i = 0; i < n_feat; ++i) {
      PendingSource feat{mave::SourceKind::feature, {}, {}};
      feat.builder.add_words(filler_run(3 + static_cast<int>(rng.pick(3))));
      sources.push_back(std::move(feat));
    }

    std::optional<std::string> brand_value;
    for (const auto& plant : plants) {
      const std::string& value = plant.spec->values[plant.value_idx];
      const std::string& normalized = plant.spec->normalized[plant.value_idx];
      // plant in 1-2 of the description/feature sources
      const int copies = rng.chance(0.35) ? 2 : 1;
      std::set<std::size_t> used;
      for (int c = 0; c < copies; ++c) {
        const std::size_t si = 1 + rng.pick(sources.size() - 1);
        if (used.count(si)) continue;
        used.insert(si);
        auto span = sources[si].builder.plant(plant.spec->lead_in, value);
        sources[si].spans.emplace_back(normalized, span);
      }
      if (plant.spec->name == "Maker") {
        brand_value = plant.spec->normalized[plant.value_idx];
        if (rng.chance(0.5)) {
          auto span = sources[0].builder.plant(plant.spec->lead_in, value);
          sources[0].spans.emplace_back(normalized, span);
        }
      }
    }

    // pad until the 20-word floor comfortably clears
    sources[1].builder.add_words(filler_run(10));

    PendingSource price{mave::SourceKind::price, {}, {}};
    price.builder.add_words("$" + std::to_string(2 + rng.pick(60)) + "." +
                            std::to_string(10 + rng.pick(90)));
    sources.push_back(std::move(price));
    if (brand_value) {
      PendingSource brand{mave::SourceKind::brand, {}, {}};
      const std::string lower = mave::utf8::ascii_lower(*brand_value);
      auto span = brand.builder.plant("", lower);
      brand.spans.emplace_back(*brand_value, span);
      sources.push_back(std::move(brand));
    }

    // assemble profile + spans, then map spans back to attribute names
    std::map<std::string, std::vector<mave::Span>> spans_by_value;
    for (std::size_t si = 0; si < sources.size(); ++si) {
      auto& src = sources[si];
      product.profile.sources.push_back(
          mave::Source{static_cast<int>(si), src.kind, src.builder.text()});
      for (const auto& [normalized, range] : src.spans) {
        mave::Span sp;
        sp.pid = static_cast<int>(si);
        sp.begin = range.first;
        sp.end = range.second;
        sp.value = mave::utf8::substr(src.builder.text(), sp.begin, sp.end);
        spans_by_value[normalized].push_back(sp);
      }
    }
    for (const auto& plant : plants) {
      const std::string& normalized = plant.spec->normalized[plant.value_idx];
      auto it = spans_by_value.find(normalized);
      if (it == spans_by_value.end()) continue;  // copies collided, nothing planted
      product.planted[plant.spec->name] = {normalized, it->second};
    }

    // raw record
    nlohmann::ordered_json raw;
    raw["id"] = product.profile.id;
    Rng deco(mave::stable_hash(cfg.seed, {"deco", product.profile.id}));
    std::vector<std::string> descriptions, features;
    std::optional<std::string> price_text, brand_text;
    for (const auto& src : product.profile.sources) {
      const std::string content =
          cfg.markup_noise ? detail::decorate_markup(src.text, deco) : src.text;
      switch (src.kind) {
        case mave::SourceKind::title: raw["title"] = content; break;
        case mave::SourceKind::description: descriptions.push_back(content); break;
        case mave::SourceKind::feature: features.push_back(content); break;
        case mave::SourceKind::price: price_text = content; break;
        case mave::SourceKind::brand: brand_text = content; break;
      }
    }
    raw["descriptions"] = descriptions;
    raw["features"] = features;
    if (price_text) raw["price"] = *price_text;
    if (brand_text) raw["brand"] = *brand_text;
    product.raw_line = raw.dump();

    corpus.raw_lines.push_back(product.raw_line);
    corpus.products.push_back(std::move(product));
  }

  for (auto& product : corpus.products) {
    const CategorySpec* cat = nullptr;
    for (const auto& c : cats)
      if (c.name == product.category) cat = &c;
    for (const auto& attr_name : cat->attributes) {
      mave::AttributeExample ex;
      ex.profile = product.profile;
      ex.category = product.category;
      ex.attribute = attr_name;
      const auto it = product.planted.find(attr_name);
      if (it != product.planted.end()) {
        ex.normalized_value = it->second.first;
        ex.evidences = it->second.second;
        std::sort(ex.evidences.begin(), ex.evidences.end());
        corpus.gold.positives.push_back(std::move(ex));
      } else {
        corpus.gold.negatives.push_back(std::move(ex));
      }
    }
  }

  for (int ri = 0; ri < cfg.n_reject_records; ++ri) {
    nlohmann::ordered_json raw;
    raw["id"] = "reject-" + std::to_string(ri);
    switch (ri % 3) {
      case 0:  // no title at all
        raw["descriptions"] = {filler_run(25)};
        break;
      case 1:  // too few words
        raw["title"] = filler_run(3);
        break;
      case 2:  // title empty after cleaning
        raw["title"] = "<p></p>";
        raw["descriptions"] = {filler_run(25)};
        break;
    }
    corpus.raw_lines.push_back(raw.dump());
  }

  return corpus;
}

}  // namespace testsupport
