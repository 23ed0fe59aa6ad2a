#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mave/core.hpp"
#include "mave/errors.hpp"
#include "mave/hash.hpp"
#include "mave/tokenize.hpp"

// The evaluation protocol: five-way outcome classification, P/R/F1,
// sequence-length buckets, dataset statistics, and the three split builders
// (random, zero-shot holdout, few-shot sampling). MetricsCounts add
// componentwise, so shard-level counts merge associatively.

namespace mave::evalkit {

enum class Outcome { NN, NV, VN, VC, VW };

inline std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::NN: return "NN";
    case Outcome::NV: return "NV";
    case Outcome::VN: return "VN";
    case Outcome::VC: return "VC";
    case Outcome::VW: return "VW";
  }
  return "NN";
}

struct MetricsCounts {
  long nn = 0, nv = 0, vn = 0, vc = 0, vw = 0;

  long total() const { return nn + nv + vn + vc + vw; }

  void add(Outcome o) {
    switch (o) {
      case Outcome::NN: ++nn; break;
      case Outcome::NV: ++nv; break;
      case Outcome::VN: ++vn; break;
      case Outcome::VC: ++vc; break;
      case Outcome::VW: ++vw; break;
    }
  }

  MetricsCounts& operator+=(const MetricsCounts& o) {
    nn += o.nn;
    nv += o.nv;
    vn += o.vn;
    vc += o.vc;
    vw += o.vw;
    return *this;
  }

  bool operator==(const MetricsCounts&) const = default;
};

/// Gold negative: NN if the prediction is empty, else NV. Gold positive: VN
/// if empty, VC if the normalized predicted value set equals the normalized
/// gold evidence value set, else VW.
inline Outcome classify_outcome(const AttributeExample& gold,
                                const std::vector<Span>& predicted) {
  if (gold.is_negative()) return predicted.empty() ? Outcome::NN : Outcome::NV;
  if (predicted.empty()) return Outcome::VN;
  std::set<std::string> gold_values, pred_values;
  for (const auto& ev : gold.evidences) gold_values.insert(value_key(ev.value));
  for (const auto& sp : predicted) pred_values.insert(value_key(sp.value));
  return gold_values == pred_values ? Outcome::VC : Outcome::VW;
}

struct MetricsReport {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  MetricsCounts counts;
  bool precision_degenerate = false;  // denominator was zero
  bool recall_degenerate = false;
};

/// P = VC/(NV+VC+VW), R = VC/(VN+VC+VW), F1 = 2PR/(P+R); zero denominators
/// yield 0 with the degenerate flag set.
inline MetricsReport compute_metrics(const MetricsCounts& counts) {
  MetricsReport r;
  r.counts = counts;
  const long pd = counts.nv + counts.vc + counts.vw;
  const long rd = counts.vn + counts.vc + counts.vw;
  r.precision_degenerate = pd == 0;
  r.recall_degenerate = rd == 0;
  r.precision = pd == 0 ? 0.0 : static_cast<double>(counts.vc) / static_cast<double>(pd);
  r.recall = rd == 0 ? 0.0 : static_cast<double>(counts.vc) / static_cast<double>(rd);
  r.f1 = (r.precision + r.recall) > 0.0
             ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
             : 0.0;
  return r;
}

inline std::size_t total_words(const ProductProfile& profile) {
  std::size_t n = 0;
  for (const auto& s : profile.sources) n += tokenize::whitespace_tokenize(s.text).size();
  return n;
}

inline const std::vector<std::size_t>& default_bucket_edges() {
  static const std::vector<std::size_t> edges = {0, 128, 256, 512, 1024};
  return edges;
}

/// Label of the bucket that `words` falls into for strictly increasing
/// edges; the last bucket is open-ended.
inline std::string bucket_label(std::size_t words, const std::vector<std::size_t>& edges) {
  std::size_t idx = 0;
  for (std::size_t i = 0; i < edges.size(); ++i)
    if (words >= edges[i]) idx = i;
  std::ostringstream out;
  if (idx + 1 < edges.size())
    out << "[" << edges[idx] << "," << edges[idx + 1] << ")";
  else
    out << "[" << edges[idx] << ",inf)";
  return out.str();
}

/// Accumulates outcome counts per sequence-length bucket; the example's
/// length is its total whitespace word count across all sources.
inline std::map<std::string, MetricsCounts> bucket_by_length(
    const std::vector<std::pair<const AttributeExample*, Outcome>>& outcomes,
    const std::vector<std::size_t>& edges = default_bucket_edges()) {
  for (std::size_t i = 1; i < edges.size(); ++i)
    if (edges[i] <= edges[i - 1]) throw ContractError("bucket edges must be strictly increasing");
  std::map<std::string, MetricsCounts> buckets;
  for (const auto& [ex, outcome] : outcomes)
    buckets[bucket_label(total_words(ex->profile), edges)].add(outcome);
  return buckets;
}

struct SplitSpec {
  double train_ratio = 8.0;
  double eval_ratio = 1.0;
  double test_ratio = 1.0;
  std::uint64_t seed = 0;
  std::vector<std::string> holdout_attributes;
  std::optional<int> few_shot_k;

  void validate() const {
    if (train_ratio <= 0.0 || eval_ratio <= 0.0 || test_ratio <= 0.0)
      throw ConfigError("split ratios must be positive");
    if (few_shot_k) {
      static constexpr std::array kValid = {1, 2, 3, 5, 10, 50, 100};
      if (std::find(kValid.begin(), kValid.end(), *few_shot_k) == kValid.end())
        throw ConfigError("few-shot k must be one of 1, 2, 3, 5, 10, 50, 100");
    }
  }
};

struct RandomSplit {
  Dataset train, eval, test;
};

/// Deterministic assignment into train/eval/test by the seeded hash of the
/// example id; disjoint and exhaustive by construction, stable under dataset
/// growth and sharding.
inline RandomSplit split_random(const Dataset& dataset, const SplitSpec& spec) {
  spec.validate();
  const double total = spec.train_ratio + spec.eval_ratio + spec.test_ratio;
  const double t1 = spec.train_ratio / total;
  const double t2 = t1 + spec.eval_ratio / total;
  RandomSplit split;
  auto assign = [&](const AttributeExample& ex, bool positive) {
    const double u = unit_interval(stable_hash(spec.seed, {"split", example_key(ex)}));
    Dataset& target = u < t1 ? split.train : (u < t2 ? split.eval : split.test);
    (positive ? target.positives : target.negatives).push_back(ex);
  };
  for (const auto& ex : dataset.positives) assign(ex, true);
  for (const auto& ex : dataset.negatives) assign(ex, false);
  return split;
}

struct ZeroShotSplit {
  Dataset train, eval;
  std::vector<std::string> missing_attributes;  // holdouts absent from the data
};

/// train = attribute not held out, eval = attribute held out. A holdout
/// attribute absent from the dataset is reported, not an error.
inline ZeroShotSplit split_zero_shot(const Dataset& dataset,
                                     const std::vector<std::string>& holdout_attrs) {
  if (holdout_attrs.empty()) throw ContractError("holdout attribute list is empty");
  const std::set<std::string> holdout(holdout_attrs.begin(), holdout_attrs.end());
  ZeroShotSplit split;
  std::set<std::string> seen;
  auto assign = [&](const AttributeExample& ex, bool positive) {
    seen.insert(ex.attribute);
    Dataset& target = holdout.count(ex.attribute) ? split.eval : split.train;
    (positive ? target.positives : target.negatives).push_back(ex);
  };
  for (const auto& ex : dataset.positives) assign(ex, true);
  for (const auto& ex : dataset.negatives) assign(ex, false);
  for (const auto& attr : holdout)
    if (!seen.count(attr)) split.missing_attributes.push_back(attr);
  return split;
}

/// Per attribute: seeded pool of 100 examples, then the k lowest-ranked of
/// the pool. Ranking by one seeded hash makes the pool fixed across k and
/// the k-sample nested: k' < k implies sample(k') is a subset of sample(k),
/// and every sample is a subset of the 100-example pool.
inline Dataset sample_few_shot(const Dataset& pool, int k, std::uint64_t seed) {
  SplitSpec spec;
  spec.few_shot_k = k;
  spec.validate();
  struct Ranked {
    std::uint64_t rank;
    const AttributeExample* ex;
    bool positive;
  };
  std::map<std::string, std::vector<Ranked>> by_attr;
  for (const auto& ex : pool.positives)
    by_attr[ex.attribute].push_back(
        Ranked{stable_hash(seed, {"few-shot", ex.attribute, example_key(ex)}), &ex, true});
  for (const auto& ex : pool.negatives)
    by_attr[ex.attribute].push_back(
        Ranked{stable_hash(seed, {"few-shot", ex.attribute, example_key(ex)}), &ex, false});

  Dataset out;
  for (auto& [attr, ranked] : by_attr) {
    if (ranked.size() < 100)
      throw ContractError("attribute \"" + attr + "\" has only " +
                          std::to_string(ranked.size()) + " examples, need 100 for few-shot");
    std::sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
      return std::tie(a.rank, a.ex->profile.id) < std::tie(b.rank, b.ex->profile.id);
    });
    for (int i = 0; i < k; ++i) {
      const auto& r = ranked[static_cast<std::size_t>(i)];
      (r.positive ? out.positives : out.negatives).push_back(*r.ex);
    }
  }
  return out;
}

/// Counters for one side (positives or negatives) of the dataset.
struct SetStats {
  long products = 0;
  long product_attribute_pairs = 0;
  long products_1_2_attrs = 0;
  long products_3_5_attrs = 0;
  long products_6_plus_attrs = 0;
  long unique_categories = 0;
  long unique_attributes = 0;
  long unique_category_attribute_pairs = 0;
  std::map<int, long> sources_histogram;          // #sources -> #products
  std::map<std::string, long> words_histogram;    // bucket label -> #products

  bool operator==(const SetStats&) const = default;
};

struct StatsReport {
  SetStats positives, negatives;
};

namespace detail {

inline SetStats set_stats(const std::vector<AttributeExample>& examples,
                          const std::vector<std::size_t>& edges) {
  SetStats s;
  s.product_attribute_pairs = static_cast<long>(examples.size());
  std::map<std::string, std::set<std::string>> attrs_of_product;
  std::map<std::string, const ProductProfile*> profile_of;
  std::set<std::string> categories, attributes;
  std::set<std::pair<std::string, std::string>> cat_attr;
  for (const auto& ex : examples) {
    attrs_of_product[ex.profile.id].insert(ex.attribute);
    profile_of[ex.profile.id] = &ex.profile;
    categories.insert(ex.category);
    attributes.insert(ex.attribute);
    cat_attr.insert({ex.category, ex.attribute});
  }
  s.products = static_cast<long>(attrs_of_product.size());
  for (const auto& [id, attrs] : attrs_of_product) {
    const std::size_t n = attrs.size();
    if (n <= 2)
      ++s.products_1_2_attrs;
    else if (n <= 5)
      ++s.products_3_5_attrs;
    else
      ++s.products_6_plus_attrs;
    const ProductProfile& p = *profile_of.at(id);
    ++s.sources_histogram[static_cast<int>(p.sources.size())];
    ++s.words_histogram[bucket_label(total_words(p), edges)];
  }
  s.unique_categories = static_cast<long>(categories.size());
  s.unique_attributes = static_cast<long>(attributes.size());
  s.unique_category_attribute_pairs = static_cast<long>(cat_attr.size());
  return s;
}

}  // namespace detail

inline StatsReport dataset_stats(const Dataset& dataset,
                                 const std::vector<std::size_t>& edges = default_bucket_edges()) {
  StatsReport r;
  r.positives = detail::set_stats(dataset.positives, edges);
  r.negatives = detail::set_stats(dataset.negatives, edges);
  return r;
}

inline nlohmann::ordered_json stats_to_json(const StatsReport& report) {
  auto side = [](const SetStats& s) {
    nlohmann::ordered_json j;
    j["products"] = s.products;
    j["product_attribute_pairs"] = s.product_attribute_pairs;
    j["products_1_2_attributes"] = s.products_1_2_attrs;
    j["products_3_5_attributes"] = s.products_3_5_attrs;
    j["products_6_plus_attributes"] = s.products_6_plus_attrs;
    j["unique_categories"] = s.unique_categories;
    j["unique_attributes"] = s.unique_attributes;
    j["unique_category_attribute_pairs"] = s.unique_category_attribute_pairs;
    j["sources_histogram"] = nlohmann::ordered_json::object();
    for (const auto& [k, v] : s.sources_histogram) j["sources_histogram"][std::to_string(k)] = v;
    j["words_histogram"] = nlohmann::ordered_json::object();
    for (const auto& [k, v] : s.words_histogram) j["words_histogram"][k] = v;
    return j;
  };
  nlohmann::ordered_json j;
  j["positives"] = side(report.positives);
  j["negatives"] = side(report.negatives);
  return j;
}

/// Aligned plain-text table in the shape of the overall-statistics table.
inline std::string render_stats_text(const StatsReport& report) {
  std::ostringstream out;
  auto row = [&out](std::string_view label, long pos, long neg) {
    out << label;
    for (std::size_t i = label.size(); i < 42; ++i) out << ' ';
    out << " " << pos;
    for (std::size_t i = std::to_string(pos).size(); i < 12; ++i) out << ' ';
    out << " " << neg << "\n";
  };
  out << "Counts                                      Positives    Negatives\n";
  const SetStats& p = report.positives;
  const SetStats& n = report.negatives;
  row("# products", p.products, n.products);
  row("# product-attribute pairs", p.product_attribute_pairs, n.product_attribute_pairs);
  row("# products with 1-2 attributes", p.products_1_2_attrs, n.products_1_2_attrs);
  row("# products with 3-5 attributes", p.products_3_5_attrs, n.products_3_5_attrs);
  row("# products with >=6 attributes", p.products_6_plus_attrs, n.products_6_plus_attrs);
  row("# unique categories", p.unique_categories, n.unique_categories);
  row("# unique attributes", p.unique_attributes, n.unique_attributes);
  row("# unique category-attribute pairs", p.unique_category_attribute_pairs,
      n.unique_category_attribute_pairs);
  return out.str();
}

}  // namespace mave::evalkit
