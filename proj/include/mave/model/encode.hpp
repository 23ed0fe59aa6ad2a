#pragma once

#include <string>
#include <vector>

#include "mave/core.hpp"
#include "mave/model/config.hpp"
#include "mave/tokenize.hpp"

namespace mave::model {

/// Model-ready form of one example. Segments 0 and 1 are the category and
/// attribute; every product source is its own segment in profile order.
/// Category/attribute positions carry zero labels and are never scored.
struct EncodedInput {
  // long side, all vectors of length n_long()
  std::vector<int> long_ids;
  std::vector<int> segment_of;
  std::vector<int> pos_in_segment;
  std::vector<std::size_t> char_begin, char_end;  // code point offsets
  std::vector<std::uint8_t> long_labels, long_scored;

  // global side, all vectors of length n_global()
  std::vector<int> global_ids;
  std::vector<int> segment_pid;  // -1 for category/attribute segments
  std::vector<std::uint8_t> global_labels, global_scored;

  std::vector<std::string> source_texts;  // indexed by pid
  std::string profile_id, category, attribute;
  int dropped_sources = 0;

  int n_long() const { return static_cast<int>(long_ids.size()); }
  int n_global() const { return static_cast<int>(global_ids.size()); }
};

/// Tokenizes category, attribute and sources into segments, truncates the
/// concatenated long sequence at max_long (sources wholly beyond the cut are
/// dropped, a straddling source is truncated), caps segments at max_global,
/// and derives labels: a long token is positive iff its character interval
/// overlaps an evidence span; a global is positive iff its segment kept a
/// positive long token.
inline EncodedInput encode_example(const AttributeExample& ex, const tokenize::Vocab& vocab,
                                   const ModelConfig& config) {
  EncodedInput enc;
  enc.profile_id = ex.profile.id;
  enc.category = ex.category;
  enc.attribute = ex.attribute;
  for (const auto& src : ex.profile.sources) enc.source_texts.push_back(src.text);

  struct SegmentPlan {
    int pid;  // -1 for category/attribute
    std::vector<tokenize::Token> tokens;
  };
  std::vector<SegmentPlan> plans;
  plans.push_back(SegmentPlan{-1, tokenize::wordpiece_tokenize(ex.category, vocab)});
  plans.push_back(SegmentPlan{-1, tokenize::wordpiece_tokenize(ex.attribute, vocab)});
  for (const auto& src : ex.profile.sources)
    plans.push_back(SegmentPlan{src.pid, tokenize::wordpiece_tokenize(src.text, vocab)});

  if (static_cast<int>(plans.size()) > config.max_global) {
    enc.dropped_sources += static_cast<int>(plans.size()) - config.max_global;
    plans.resize(static_cast<std::size_t>(config.max_global));
  }

  long budget = config.max_long;
  int segment = 0;
  for (const auto& plan : plans) {
    if (budget <= 0) {
      if (plan.pid >= 0) ++enc.dropped_sources;
      continue;
    }
    const std::size_t take =
        std::min<std::size_t>(plan.tokens.size(), static_cast<std::size_t>(budget));
    if (take == 0 && !plan.tokens.empty()) {
      if (plan.pid >= 0) ++enc.dropped_sources;
      continue;
    }
    const bool scored = plan.pid >= 0;
    bool any_positive = false;
    for (std::size_t i = 0; i < take; ++i) {
      const auto& tok = plan.tokens[i];
      enc.long_ids.push_back(vocab.id_of(tok.text) >= 0 ? vocab.id_of(tok.text) : vocab.unk_id);
      enc.segment_of.push_back(segment);
      enc.pos_in_segment.push_back(static_cast<int>(i));
      enc.char_begin.push_back(tok.begin);
      enc.char_end.push_back(tok.end);
      std::uint8_t label = 0;
      if (scored) {
        for (const auto& ev : ex.evidences) {
          if (ev.pid == plan.pid && tok.begin < ev.end && ev.begin < tok.end) {
            label = 1;
            break;
          }
        }
      }
      any_positive = any_positive || label != 0;
      enc.long_labels.push_back(label);
      enc.long_scored.push_back(scored ? 1 : 0);
    }
    budget -= static_cast<long>(take);
    enc.global_ids.push_back(segment);
    enc.segment_pid.push_back(plan.pid);
    enc.global_labels.push_back(any_positive ? 1 : 0);
    enc.global_scored.push_back(scored ? 1 : 0);
    ++segment;
  }
  return enc;
}

}  // namespace mave::model
