#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mave/core.hpp"
#include "mave/ingest.hpp"

// The beanie-baby worked example: an 8-source profile with four "Beanie
// Baby" mentions (title, both descriptions, first feature) for the toy-maker
// attribute. Expected half-open evidence spans: title (3,14), description 1
// (3,16), description 2 (18,29), feature 1 (3,14).

namespace testsupport {

inline mave::ProductProfile beanie_profile() {
  mave::ProductProfile p;
  p.id = "B00000DMEL";
  const std::vector<std::pair<mave::SourceKind, std::string>> sources = {
      {mave::SourceKind::title, "Ty Beanie Baby Ants the Anteater"},
      {mave::SourceKind::description,
       "Ty Beanie Babies Ants the Anteater. Approximately 8\" long, 4\" tall. Birthday: "
       "November 7, 1997 Poem: Most anteaters love to eat bugs But this little fellow gives "
       "big hugs. He'd rather dine on apple pie Than eat an ant or harm a fly."},
      {mave::SourceKind::description,
       "This most unusual Beanie Baby is brimming with personality. Ants was born November 7, "
       "1997. His poem reads: Most anteaters love to eat bugs But this little fellow gives big "
       "hugs He'd rather dine on apple pie Than eat an ant or harm a fly! This long-snouted "
       "guy, balancing on his long tail, is just adorable. His head and tail are gray; his "
       "middle is three stripes white, black, and white; and he has sweet black button eyes. "
       "His tiny gray felt ears really give this guy some charm. Surface wash only."},
      {mave::SourceKind::feature, "Ty beanie baby - Ants the anteater"},
      {mave::SourceKind::feature, "Birthday: November 7, 1997"},
      {mave::SourceKind::feature, "Approx 8\" long"},
      {mave::SourceKind::price, "$6.06"},
      {mave::SourceKind::brand, "TY"}};
  int pid = 0;
  for (const auto& [kind, text] : sources) p.sources.push_back(mave::Source{pid++, kind, text});
  return p;
}

/// The four gold toy-maker evidence spans, half-open, sorted by (pid, begin).
inline std::vector<mave::Span> beanie_spans() {
  const auto p = beanie_profile();
  auto make = [&p](int pid, std::size_t begin, std::size_t end) {
    mave::Span sp;
    sp.pid = pid;
    sp.begin = begin;
    sp.end = end;
    sp.value = mave::utf8::substr(p.sources[static_cast<std::size_t>(pid)].text, begin, end);
    return sp;
  };
  return {make(0, 3, 14), make(1, 3, 16), make(2, 18, 29), make(3, 3, 14)};
}

inline mave::AttributeExample beanie_example() {
  mave::AttributeExample ex;
  ex.profile = beanie_profile();
  ex.category = "Toys & Games";
  ex.attribute = "Toy Maker";
  ex.normalized_value = "Beanie Baby";
  ex.evidences = beanie_spans();
  return ex;
}

/// Raw (pre-cleaning) record whose cleaned form is exactly beanie_profile().
inline std::string beanie_raw_line() {
  const auto p = beanie_profile();
  nlohmann::ordered_json raw;
  raw["id"] = p.id;
  raw["title"] = "<b>Ty</b> Beanie&nbsp;Baby  Ants the Anteater";
  raw["descriptions"] = {"<p>" + p.sources[1].text + "</p><script>track();</script>",
                         p.sources[2].text + "  "};
  raw["features"] = {p.sources[3].text, "<i>Birthday:</i> November 7, 1997",
                     p.sources[5].text};
  raw["price"] = p.sources[6].text;
  raw["brand"] = p.sources[7].text;
  return raw.dump();
}

/// The toy extraction rule for the beanie product.
inline std::string beanie_rule_line() {
  nlohmann::ordered_json rule;
  rule["category"] = "Toys & Games";
  rule["attribute"] = "Toy Maker";
  rule["pattern"] = "beanie bab(y|ies)";
  rule["normalization"] = {{"beanie baby", "Beanie Baby"}, {"beanie babies", "Beanie Baby"}};
  return rule.dump();
}

}  // namespace testsupport
