#pragma once

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mave/annotate.hpp"
#include "mave/core.hpp"
#include "mave/errors.hpp"
#include "mave/evalkit.hpp"
#include "mave/ingest.hpp"
#include "mave/jsonl.hpp"
#include "mave/log.hpp"
#include "mave/model/encode.hpp"
#include "mave/model/network.hpp"
#include "mave/model/train.hpp"
#include "mave/tokenize.hpp"

// Single entry point wiring the modules into reproducible pipeline runs.
// Subcommands: clean, annotate, split, stats, train, eval, few-shot. All
// randomness flows from --seed; identical inputs and seed give byte-identical
// outputs. Exit codes: 0 success, 1 validation error, 2 I/O error.

namespace mave::cli {

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

/// Records the resolved options of a run next to its outputs.
inline void write_run_record(const std::filesystem::path& dir, const std::string& subcommand,
                             std::vector<std::pair<std::string, std::string>> kv) {
  if (dir.empty()) return;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  kv.emplace_back("subcommand", subcommand);
  std::sort(kv.begin(), kv.end());
  jsonl::LineWriter out((dir / ("mave_run_" + subcommand + ".txt")).string());
  for (const auto& [k, v] : kv) out.write(k + " = " + v);
}

inline std::vector<std::string> split_list(const std::string& s, char sep = ',') {
  std::vector<std::string> parts;
  std::string cur;
  for (const char c : s) {
    if (c == sep) {
      if (!cur.empty()) parts.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) parts.push_back(cur);
  return parts;
}

inline jsonl::SpanEnd parse_span_end(const std::string& s) {
  if (s == "exclusive") return jsonl::SpanEnd::exclusive;
  if (s == "inclusive") return jsonl::SpanEnd::inclusive;
  throw ConfigError("--span-end must be exclusive or inclusive");
}

/// Loads "pos.jsonl" or "pos.jsonl,neg.jsonl".
inline Dataset load_dataset_arg(const std::string& arg, jsonl::SpanEnd mode) {
  const auto parts = split_list(arg);
  if (parts.empty() || parts.size() > 2)
    throw ConfigError("expected POS[,NEG] file list, got \"" + arg + "\"");
  return jsonl::read_dataset(parts[0], parts.size() == 2 ? parts[1] : "", mode);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// clean

struct CleanOptions {
  std::string in, out, rejects;
};

inline int run_clean(const CleanOptions& opt) {
  jsonl::LineReader reader(opt.in);
  jsonl::LineWriter profiles(opt.out);
  std::unique_ptr<jsonl::LineWriter> rejects;
  if (!opt.rejects.empty()) rejects = std::make_unique<jsonl::LineWriter>(opt.rejects);

  std::size_t kept = 0, dropped = 0;
  std::string line;
  while (reader.next(line)) {
    if (utf8::collapse_ws(line).empty()) {
      if (rejects) {
        nlohmann::ordered_json rj;
        rj["id"] = "";
        rj["code"] = std::string(ingest::to_string(ingest::RejectCode::empty_after_cleaning));
        rj["detail"] = "blank record at line " + std::to_string(reader.line_no());
        rejects->write(rj.dump());
      }
      ++dropped;
      continue;
    }
    const ingest::RawProduct raw = ingest::parse_raw_product(line, reader.line_no());
    const auto result = ingest::build_profile(raw);
    if (const auto* profile = std::get_if<ProductProfile>(&result)) {
      profiles.write(jsonl::serialize_profile(*profile));
      ++kept;
    } else {
      const auto& reason = std::get<ingest::RejectionReason>(result);
      if (rejects) {
        nlohmann::ordered_json rj;
        rj["id"] = raw.id;
        rj["code"] = std::string(ingest::to_string(reason.code));
        rj["detail"] = reason.detail;
        rejects->write(rj.dump());
      }
      ++dropped;
    }
  }
  detail::write_run_record(std::filesystem::path(opt.out).parent_path(), "clean",
                           {{"in", opt.in}, {"out", opt.out}, {"rejects", opt.rejects}});
  std::cout << "clean: kept " << kept << ", rejected " << dropped << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// annotate

struct AnnotateOptions {
  std::string profiles, rules, classifier;
  std::string out_pos, out_neg, out_discard;
  double category_threshold = 0.5;
  double noise = 0.0;
  std::size_t cap = 5000;
  std::uint64_t seed = 0;
  std::string span_end = "exclusive";
};

inline int run_annotate(const AnnotateOptions& opt) {
  const jsonl::SpanEnd mode = detail::parse_span_end(opt.span_end);
  const auto rules = annotate::load_rules(opt.rules);
  std::unique_ptr<annotate::KeywordCategoryClassifier> classifier;
  if (!opt.classifier.empty())
    classifier = std::make_unique<annotate::KeywordCategoryClassifier>(
        annotate::KeywordCategoryClassifier::from_file(opt.classifier));

  // category -> sorted attribute list derived from the rule file
  std::map<std::string, std::set<std::string>> attrs_by_category;
  for (const auto& r : rules) attrs_by_category[r.category].insert(r.attribute);

  std::vector<std::unique_ptr<annotate::Extractor>> ensemble;
  ensemble.push_back(std::make_unique<annotate::RuleExtractor>(0));
  for (int i = 1; i < 5; ++i) {
    if (opt.noise > 0.0)
      ensemble.push_back(std::make_unique<annotate::NoisyRuleExtractor>(i, opt.noise, opt.seed));
    else
      ensemble.push_back(std::make_unique<annotate::RuleExtractor>(i));
  }

  jsonl::LineReader reader(opt.profiles);
  Dataset dataset;
  std::size_t discarded = 0, gated = 0;
  std::unique_ptr<jsonl::LineWriter> discard_file;
  if (!opt.out_discard.empty()) discard_file = std::make_unique<jsonl::LineWriter>(opt.out_discard);

  std::string line;
  while (reader.next(line)) {
    if (line.empty()) continue;
    const ProductProfile profile = jsonl::deserialize_profile(line, reader.line_no());

    std::vector<std::string> categories;
    if (classifier) {
      const auto pred = classifier->predict(profile);
      if (annotate::gate_category(pred, opt.category_threshold) == annotate::Gate::drop) {
        ++gated;
        continue;
      }
      if (attrs_by_category.count(pred.category)) categories.push_back(pred.category);
    } else {
      for (const auto& [cat, attrs] : attrs_by_category) categories.push_back(cat);
    }

    std::vector<std::vector<tokenize::Token>> tokens_per_source;
    tokens_per_source.reserve(profile.sources.size());
    for (const auto& src : profile.sources)
      tokens_per_source.push_back(tokenize::whitespace_tokenize(src.text));

    for (const auto& category : categories) {
      for (const auto& attribute : attrs_by_category.at(category)) {
        const auto outcome = annotate::annotate_example(profile, category, attribute, ensemble,
                                                        rules, tokens_per_source);
        switch (outcome.tag) {
          case annotate::OutcomeTag::positive:
            dataset.positives.push_back(*outcome.example);
            break;
          case annotate::OutcomeTag::negative:
            dataset.negatives.push_back(*outcome.example);
            break;
          case annotate::OutcomeTag::discard:
            ++discarded;
            if (discard_file) {
              nlohmann::ordered_json dj;
              dj["id"] = profile.id;
              dj["category"] = category;
              dj["attribute"] = attribute;
              dj["detail"] = outcome.detail;
              discard_file->write(dj.dump());
            }
            break;
        }
      }
    }
  }

  const Dataset capped = annotate::downsample_negatives(dataset, opt.cap, opt.seed);
  jsonl::write_examples(opt.out_pos, capped.positives, mode);
  jsonl::write_examples(opt.out_neg, capped.negatives, mode);
  detail::write_run_record(
      std::filesystem::path(opt.out_pos).parent_path(), "annotate",
      {{"profiles", opt.profiles},
       {"rules", opt.rules},
       {"classifier", opt.classifier},
       {"category_threshold", detail::format_double(opt.category_threshold)},
       {"noise", detail::format_double(opt.noise)},
       {"cap", std::to_string(opt.cap)},
       {"seed", std::to_string(opt.seed)},
       {"span_end", opt.span_end}});
  std::cout << "annotate: " << capped.positives.size() << " positives, "
            << capped.negatives.size() << " negatives (" << dataset.negatives.size()
            << " before downsampling), " << discarded << " discarded, " << gated
            << " gated out\n";
  return 0;
}

// ---------------------------------------------------------------------------
// split

struct SplitOptions {
  std::string pos, neg;
  std::string ratios = "8:1:1";
  std::string holdout;
  std::uint64_t seed = 0;
  std::string out_dir;
};

inline int run_split(const SplitOptions& opt) {
  const Dataset dataset = jsonl::read_dataset(opt.pos, opt.neg);
  std::filesystem::create_directories(opt.out_dir);
  const std::filesystem::path dir(opt.out_dir);

  auto write_pair = [&dir](const std::string& stem, const Dataset& ds) {
    jsonl::write_examples((dir / (stem + "_pos.jsonl")).string(), ds.positives);
    jsonl::write_examples((dir / (stem + "_neg.jsonl")).string(), ds.negatives);
  };

  if (!opt.holdout.empty()) {
    const auto split = evalkit::split_zero_shot(dataset, detail::split_list(opt.holdout));
    for (const auto& missing : split.missing_attributes)
      log::warn("holdout attribute \"" + missing + "\" does not occur in the dataset");
    write_pair("train", split.train);
    write_pair("eval", split.eval);
    std::cout << "split: zero-shot train " << split.train.size() << ", eval "
              << split.eval.size() << "\n";
  } else {
    const auto parts = detail::split_list(opt.ratios, ':');
    if (parts.size() != 3) throw ConfigError("--ratios must look like 8:1:1");
    evalkit::SplitSpec spec;
    spec.train_ratio = std::stod(parts[0]);
    spec.eval_ratio = std::stod(parts[1]);
    spec.test_ratio = std::stod(parts[2]);
    spec.seed = opt.seed;
    const auto split = evalkit::split_random(dataset, spec);
    write_pair("train", split.train);
    write_pair("eval", split.eval);
    write_pair("test", split.test);
    std::cout << "split: train " << split.train.size() << ", eval " << split.eval.size()
              << ", test " << split.test.size() << "\n";
  }
  detail::write_run_record(dir, "split",
                           {{"pos", opt.pos},
                            {"neg", opt.neg},
                            {"ratios", opt.ratios},
                            {"holdout", opt.holdout},
                            {"seed", std::to_string(opt.seed)}});
  return 0;
}

// ---------------------------------------------------------------------------
// stats

struct StatsOptions {
  std::string in, neg, json_out;
};

inline int run_stats(const StatsOptions& opt) {
  const Dataset dataset = jsonl::read_dataset(opt.in, opt.neg);
  const auto report = evalkit::dataset_stats(dataset);
  std::cout << evalkit::render_stats_text(report);
  if (!opt.json_out.empty()) {
    jsonl::LineWriter out(opt.json_out);
    out.write(evalkit::stats_to_json(report).dump(2));
    detail::write_run_record(std::filesystem::path(opt.json_out).parent_path(), "stats",
                             {{"in", opt.in}, {"neg", opt.neg}, {"json", opt.json_out}});
  }
  return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainOptions {
  std::string config;
  std::string train_files;
  std::string eval_files;
  std::string vocab;
  std::string out_dir;
  std::uint64_t seed = 0;
  long steps_override = -1;
  int batch_override = -1;
  double lr_override = -1.0;
  long max_train = 640000;
};

namespace detail {

struct EncodedSet {
  std::vector<model::EncodedInput> inputs;
  std::vector<const AttributeExample*> golds;
};

inline EncodedSet encode_dataset(const Dataset& ds, const tokenize::Vocab& vocab,
                                 const model::ModelConfig& config) {
  EncodedSet set;
  long dropped_sources = 0;
  for (const auto* list : {&ds.positives, &ds.negatives}) {
    for (const auto& ex : *list) {
      set.inputs.push_back(model::encode_example(ex, vocab, config));
      dropped_sources += set.inputs.back().dropped_sources;
      set.golds.push_back(&ex);
    }
  }
  if (dropped_sources > 0)
    log::warn(std::to_string(dropped_sources) + " sources dropped by truncation");
  return set;
}

}  // namespace detail

inline int run_train(const TrainOptions& opt) {
  model::ModelConfig config = model::ModelConfig::desk_scale();
  model::TrainConfig train_cfg;
  std::string vocab_file = opt.vocab;
  if (!opt.config.empty()) {
    const auto kv = model::parse_config_file(opt.config);
    const std::string from_config = model::apply_config(kv, config, train_cfg);
    if (vocab_file.empty()) vocab_file = from_config;
  }
  if (opt.steps_override >= 0) train_cfg.total_steps = opt.steps_override;
  if (opt.batch_override > 0) train_cfg.batch_size = opt.batch_override;
  if (opt.lr_override > 0.0) train_cfg.peak_lr = opt.lr_override;
  if (vocab_file.empty()) throw ConfigError("no vocab file (use --vocab or config vocab_file)");

  const tokenize::Vocab vocab = tokenize::load_vocab(vocab_file);
  if (config.vocab_size == 0)
    config.vocab_size = static_cast<int>(vocab.size());
  else if (config.vocab_size != static_cast<int>(vocab.size()))
    throw ConfigError("config vocab_size " + std::to_string(config.vocab_size) +
                      " does not match vocab file size " + std::to_string(vocab.size()));
  config.validate();

  Dataset train_ds = detail::load_dataset_arg(opt.train_files, jsonl::SpanEnd::exclusive);

  // training budget cap: keep the max_train lowest-hashed examples
  const std::size_t total = train_ds.size();
  if (total > static_cast<std::size_t>(opt.max_train)) {
    auto rank = [&](const AttributeExample& ex) {
      return stable_hash(opt.seed, {"train-cap", example_key(ex)});
    };
    std::vector<std::uint64_t> hashes;
    hashes.reserve(total);
    for (const auto& ex : train_ds.positives) hashes.push_back(rank(ex));
    for (const auto& ex : train_ds.negatives) hashes.push_back(rank(ex));
    std::nth_element(hashes.begin(), hashes.begin() + opt.max_train - 1, hashes.end());
    const std::uint64_t cutoff = hashes[static_cast<std::size_t>(opt.max_train - 1)];
    Dataset capped;
    long budget = opt.max_train;
    auto keep = [&](const AttributeExample& ex) {
      const std::uint64_t h = rank(ex);
      if (h > cutoff || budget == 0) return false;
      --budget;
      return true;
    };
    for (const auto& ex : train_ds.positives)
      if (keep(ex)) capped.positives.push_back(ex);
    for (const auto& ex : train_ds.negatives)
      if (keep(ex)) capped.negatives.push_back(ex);
    log::info("training cap: sampled " + std::to_string(capped.size()) + " of " +
              std::to_string(total) + " examples");
    train_ds = std::move(capped);
  }

  const auto train_set = detail::encode_dataset(train_ds, vocab, config);

  std::filesystem::create_directories(opt.out_dir);
  const std::filesystem::path dir(opt.out_dir);
  jsonl::LineWriter loss_log((dir / "loss_log.csv").string());
  loss_log.write("step,lr,loss");
  auto state = model::run_training(
      train_set.inputs, config, train_cfg, opt.seed,
      [&loss_log](long step, double lr, double batch_loss) {
        loss_log.write(std::to_string(step) + "," + detail::format_double(lr) + "," +
                       detail::format_double(batch_loss));
      });
  loss_log.close();
  model::save_checkpoint((dir / "checkpoint.mave").string(), config, state.params, state.step);

  std::vector<std::pair<std::string, std::string>> record = {
      {"config", opt.config},
      {"train", opt.train_files},
      {"eval", opt.eval_files},
      {"vocab", vocab_file},
      {"seed", std::to_string(opt.seed)},
      {"d", std::to_string(config.d)},
      {"n_layers", std::to_string(config.n_layers)},
      {"n_heads", std::to_string(config.n_heads)},
      {"local_radius", std::to_string(config.local_radius)},
      {"max_long", std::to_string(config.max_long)},
      {"max_global", std::to_string(config.max_global)},
      {"vocab_size", std::to_string(config.vocab_size)},
      {"encoder_mode", std::string(model::to_string(config.encoder_mode))},
      {"batch_size", std::to_string(train_cfg.batch_size)},
      {"steps", std::to_string(train_cfg.total_steps)},
      {"warmup_steps", std::to_string(train_cfg.warmup_steps)},
      {"peak_lr", detail::format_double(train_cfg.peak_lr)},
      {"threshold", detail::format_double(train_cfg.threshold)},
      {"max_train", std::to_string(opt.max_train)}};
  detail::write_run_record(dir, "train", record);

  const double first_loss = state.loss_history.empty() ? 0.0 : state.loss_history.front();
  const double last_loss = state.loss_history.empty() ? 0.0 : state.loss_history.back();
  std::cout << "train: " << state.step << " steps, batch loss " << detail::format_double(first_loss)
            << " -> " << detail::format_double(last_loss) << "\n";

  if (!opt.eval_files.empty()) {
    const Dataset eval_ds = detail::load_dataset_arg(opt.eval_files, jsonl::SpanEnd::exclusive);
    const auto eval_set = detail::encode_dataset(eval_ds, vocab, config);
    jsonl::LineWriter preds((dir / "eval_preds.jsonl").string());
    evalkit::MetricsCounts counts;
    std::map<std::string, evalkit::MetricsCounts> by_attr;
    for (std::size_t i = 0; i < eval_set.inputs.size(); ++i) {
      const auto& enc = eval_set.inputs[i];
      const AttributeExample& gold = *eval_set.golds[i];
      const auto result = model::forward(enc, state.params, config);
      const auto spans = model::predict_spans(result.long_probs, enc, train_cfg.threshold);
      const auto outcome = evalkit::classify_outcome(gold, spans);
      counts.add(outcome);
      by_attr[gold.attribute].add(outcome);

      AttributeExample pred;
      pred.profile = gold.profile;
      pred.category = gold.category;
      pred.attribute = gold.attribute;
      pred.evidences = spans;
      if (!spans.empty()) pred.normalized_value = spans.front().value;
      preds.write(jsonl::serialize_example(pred));
    }
    preds.close();

    nlohmann::ordered_json mj;
    auto metrics_json = [](const evalkit::MetricsReport& r) {
      nlohmann::ordered_json j;
      j["precision"] = r.precision;
      j["recall"] = r.recall;
      j["f1"] = r.f1;
      j["counts"] = {{"NN", r.counts.nn},
                     {"NV", r.counts.nv},
                     {"VN", r.counts.vn},
                     {"VC", r.counts.vc},
                     {"VW", r.counts.vw}};
      return j;
    };
    mj["overall"] = metrics_json(evalkit::compute_metrics(counts));
    mj["by_attribute"] = nlohmann::ordered_json::object();
    for (const auto& [attr, c] : by_attr)
      mj["by_attribute"][attr] = metrics_json(evalkit::compute_metrics(c));
    jsonl::LineWriter metrics_file((dir / "eval_metrics.json").string());
    metrics_file.write(mj.dump(2));

    const auto overall = evalkit::compute_metrics(counts);
    std::cout << "eval: P " << detail::format_double(overall.precision) << " R "
              << detail::format_double(overall.recall) << " F1 "
              << detail::format_double(overall.f1) << " over " << counts.total()
              << " examples\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// eval

struct EvalOptions {
  std::string gold_files, pred_file;
  std::string by = "attribute";
  std::string json_out, csv_out;
};

namespace detail {

/// Lenient prediction reader: needs only id, attribute key, and evidence
/// values; foreign prediction files need not carry paragraphs.
inline std::map<std::string, std::vector<Span>> read_predictions(const std::string& path) {
  jsonl::LineReader reader(path);
  std::map<std::string, std::vector<Span>> preds;
  std::string line;
  while (reader.next(line)) {
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path + " line " + std::to_string(reader.line_no()) + ": " + e.what());
    }
    try {
      const std::string id = j.at("id").get<std::string>();
      for (const auto& attr : j.value("attributes", nlohmann::json::array())) {
        std::string key = id;
        key.push_back('\x1F');
        key += attr.at("key").get<std::string>();
        auto& spans = preds[key];
        for (const auto& ev : attr.value("evidences", nlohmann::json::array())) {
          Span sp;
          sp.value = ev.at("value").get<std::string>();
          sp.pid = ev.value("pid", 0);
          sp.begin = ev.value("begin", 0);
          sp.end = ev.value("end", sp.begin + utf8::length(sp.value));
          spans.push_back(std::move(sp));
        }
      }
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(path + " line " + std::to_string(reader.line_no()) + ": " + e.what());
    }
  }
  return preds;
}

}  // namespace detail

inline int run_eval(const EvalOptions& opt) {
  const Dataset gold = detail::load_dataset_arg(opt.gold_files, jsonl::SpanEnd::exclusive);
  const auto preds = detail::read_predictions(opt.pred_file);

  const auto groups = detail::split_list(opt.by);
  for (const auto& g : groups)
    if (g != "attribute" && g != "category" && g != "bucket")
      throw ConfigError("--by accepts attribute, category, bucket");

  evalkit::MetricsCounts overall;
  std::map<std::string, evalkit::MetricsCounts> by_attr, by_cat;
  std::vector<std::pair<const AttributeExample*, evalkit::Outcome>> outcomes;
  std::size_t missing = 0;
  auto run_side = [&](const std::vector<AttributeExample>& list) {
    for (const auto& ex : list) {
      const auto it = preds.find(example_key(ex));
      if (it == preds.end()) ++missing;
      static const std::vector<Span> kEmpty;
      const auto& spans = it == preds.end() ? kEmpty : it->second;
      const auto outcome = evalkit::classify_outcome(ex, spans);
      overall.add(outcome);
      by_attr[ex.attribute].add(outcome);
      by_cat[ex.category].add(outcome);
      outcomes.emplace_back(&ex, outcome);
    }
  };
  run_side(gold.positives);
  run_side(gold.negatives);
  if (missing > 0)
    log::warn(std::to_string(missing) + " gold examples had no prediction (scored as empty)");

  const auto buckets = evalkit::bucket_by_length(outcomes);

  auto report_line = [](const std::string& label, const evalkit::MetricsCounts& c) {
    const auto r = evalkit::compute_metrics(c);
    std::ostringstream out;
    out << label;
    for (std::size_t i = label.size(); i < 28; ++i) out << ' ';
    out << " P " << detail::format_double(r.precision) << "  R "
        << detail::format_double(r.recall) << "  F1 " << detail::format_double(r.f1)
        << "  (NN " << c.nn << " NV " << c.nv << " VN " << c.vn << " VC " << c.vc << " VW "
        << c.vw << ")";
    return out.str();
  };

  std::cout << report_line("overall", overall) << "\n";
  for (const auto& g : groups) {
    const auto* grouped = g == "attribute" ? &by_attr : (g == "category" ? &by_cat : nullptr);
    std::cout << "by " << g << ":\n";
    if (grouped) {
      for (const auto& [key, c] : *grouped) std::cout << "  " << report_line(key, c) << "\n";
    } else {
      for (const auto& [key, c] : buckets) std::cout << "  " << report_line(key, c) << "\n";
    }
  }

  auto metrics_json = [](const evalkit::MetricsCounts& c) {
    const auto r = evalkit::compute_metrics(c);
    nlohmann::ordered_json j;
    j["precision"] = r.precision;
    j["recall"] = r.recall;
    j["f1"] = r.f1;
    j["counts"] = {{"NN", c.nn}, {"NV", c.nv}, {"VN", c.vn}, {"VC", c.vc}, {"VW", c.vw}};
    return j;
  };
  if (!opt.json_out.empty()) {
    nlohmann::ordered_json j;
    j["overall"] = metrics_json(overall);
    for (const auto& g : groups) {
      nlohmann::ordered_json sub = nlohmann::ordered_json::object();
      if (g == "attribute")
        for (const auto& [key, c] : by_attr) sub[key] = metrics_json(c);
      else if (g == "category")
        for (const auto& [key, c] : by_cat) sub[key] = metrics_json(c);
      else
        for (const auto& [key, c] : buckets) sub[key] = metrics_json(c);
      j["by_" + g] = sub;
    }
    jsonl::LineWriter out(opt.json_out);
    out.write(j.dump(2));
  }
  if (!opt.csv_out.empty()) {
    jsonl::LineWriter out(opt.csv_out);
    out.write("group,key,NN,NV,VN,VC,VW,precision,recall,f1");
    auto csv_row = [&out](const std::string& group, const std::string& key,
                          const evalkit::MetricsCounts& c) {
      const auto r = evalkit::compute_metrics(c);
      out.write(group + "," + key + "," + std::to_string(c.nn) + "," + std::to_string(c.nv) +
                "," + std::to_string(c.vn) + "," + std::to_string(c.vc) + "," +
                std::to_string(c.vw) + "," + detail::format_double(r.precision) + "," +
                detail::format_double(r.recall) + "," + detail::format_double(r.f1));
    };
    csv_row("overall", "all", overall);
    for (const auto& g : groups) {
      if (g == "attribute")
        for (const auto& [key, c] : by_attr) csv_row(g, key, c);
      else if (g == "category")
        for (const auto& [key, c] : by_cat) csv_row(g, key, c);
      else
        for (const auto& [key, c] : buckets) csv_row(g, key, c);
    }
  }
  return 0;
}

// ---------------------------------------------------------------------------
// few-shot

struct FewShotOptions {
  std::string pos, neg;
  int k = 5;
  std::uint64_t seed = 0;
  std::string out_pos, out_neg;
};

inline int run_few_shot(const FewShotOptions& opt) {
  const Dataset pool = jsonl::read_dataset(opt.pos, opt.neg);
  const Dataset sampled = evalkit::sample_few_shot(pool, opt.k, opt.seed);
  jsonl::write_examples(opt.out_pos, sampled.positives);
  jsonl::write_examples(opt.out_neg, sampled.negatives);
  detail::write_run_record(std::filesystem::path(opt.out_pos).parent_path(), "few-shot",
                           {{"pos", opt.pos},
                            {"neg", opt.neg},
                            {"k", std::to_string(opt.k)},
                            {"seed", std::to_string(opt.seed)}});
  std::cout << "few-shot: " << sampled.positives.size() << " positives, "
            << sampled.negatives.size() << " negatives\n";
  return 0;
}

// ---------------------------------------------------------------------------

inline int run(int argc, const char* const* argv) {
  CLI::App app{"multi-source attribute value extraction toolkit"};
  app.require_subcommand(1);

  CleanOptions clean;
  auto* clean_cmd = app.add_subcommand("clean", "clean raw product records into profiles");
  clean_cmd->add_option("--in", clean.in, "raw products JSONL")->required();
  clean_cmd->add_option("--out", clean.out, "output profiles JSONL")->required();
  clean_cmd->add_option("--rejects", clean.rejects, "rejected records JSONL");

  AnnotateOptions annotate_opt;
  auto* annotate_cmd = app.add_subcommand("annotate", "produce positive/negative examples");
  annotate_cmd->add_option("--profiles", annotate_opt.profiles, "profiles JSONL")->required();
  annotate_cmd->add_option("--rules", annotate_opt.rules, "extraction rules JSONL")->required();
  annotate_cmd->add_option("--classifier", annotate_opt.classifier,
                           "keyword classifier JSONL (omit to skip gating)");
  annotate_cmd->add_option("--category-threshold", annotate_opt.category_threshold,
                           "gate threshold (default 0.5)");
  annotate_cmd->add_option("--noise", annotate_opt.noise,
                           "per-match drop probability for ensemble members 1-4");
  annotate_cmd->add_option("--cap", annotate_opt.cap, "negative cap per category-attribute");
  annotate_cmd->add_option("--seed", annotate_opt.seed, "seed");
  annotate_cmd->add_option("--out-pos", annotate_opt.out_pos, "positives JSONL")->required();
  annotate_cmd->add_option("--out-neg", annotate_opt.out_neg, "negatives JSONL")->required();
  annotate_cmd->add_option("--out-discard", annotate_opt.out_discard, "discards JSONL");
  annotate_cmd->add_option("--span-end", annotate_opt.span_end,
                           "exclusive|inclusive span ends on output");

  SplitOptions split;
  auto* split_cmd = app.add_subcommand("split", "random or zero-shot dataset split");
  split_cmd->add_option("--pos", split.pos, "positives JSONL")->required();
  split_cmd->add_option("--neg", split.neg, "negatives JSONL");
  split_cmd->add_option("--ratios", split.ratios, "train:eval:test, default 8:1:1");
  split_cmd->add_option("--holdout", split.holdout, "comma list of zero-shot attributes");
  split_cmd->add_option("--seed", split.seed, "seed");
  split_cmd->add_option("--out-dir", split.out_dir, "output directory")->required();

  StatsOptions stats;
  auto* stats_cmd = app.add_subcommand("stats", "dataset statistics");
  stats_cmd->add_option("--in", stats.in, "positives JSONL")->required();
  stats_cmd->add_option("--neg", stats.neg, "negatives JSONL");
  stats_cmd->add_option("--json", stats.json_out, "write JSON report here");

  TrainOptions train;
  auto* train_cmd = app.add_subcommand("train", "train the extraction model");
  train_cmd->add_option("--config", train.config, "flat key = value config file");
  train_cmd->add_option("--train", train.train_files, "POS[,NEG] training files")->required();
  train_cmd->add_option("--eval", train.eval_files, "POS[,NEG] eval files");
  train_cmd->add_option("--vocab", train.vocab, "vocab file (one piece per line)");
  train_cmd->add_option("--out", train.out_dir, "output directory")->required();
  train_cmd->add_option("--seed", train.seed, "seed");
  train_cmd->add_option("--steps", train.steps_override, "override total steps");
  train_cmd->add_option("--batch", train.batch_override, "override batch size");
  train_cmd->add_option("--peak-lr", train.lr_override, "override peak learning rate");
  train_cmd->add_option("--max-train", train.max_train,
                        "sample at most this many training examples");

  EvalOptions eval;
  auto* eval_cmd = app.add_subcommand("eval", "score predictions against gold");
  eval_cmd->add_option("--gold", eval.gold_files, "POS[,NEG] gold files")->required();
  eval_cmd->add_option("--pred", eval.pred_file, "predictions JSONL")->required();
  eval_cmd->add_option("--by", eval.by, "breakdowns: attribute,category,bucket");
  eval_cmd->add_option("--json", eval.json_out, "write JSON report here");
  eval_cmd->add_option("--csv", eval.csv_out, "write CSV report here");

  FewShotOptions few;
  auto* few_cmd = app.add_subcommand("few-shot", "sample k training examples per attribute");
  few_cmd->add_option("--pos", few.pos, "positives JSONL")->required();
  few_cmd->add_option("--neg", few.neg, "negatives JSONL");
  few_cmd->add_option("--k", few.k, "examples per attribute (1,2,3,5,10,50,100)")->required();
  few_cmd->add_option("--seed", few.seed, "seed");
  few_cmd->add_option("--out-pos", few.out_pos, "sampled positives JSONL")->required();
  few_cmd->add_option("--out-neg", few.out_neg, "sampled negatives JSONL")->required();

  try {
    app.parse(argc, argv);
    if (clean_cmd->parsed()) return run_clean(clean);
    if (annotate_cmd->parsed()) return run_annotate(annotate_opt);
    if (split_cmd->parsed()) return run_split(split);
    if (stats_cmd->parsed()) return run_stats(stats);
    if (train_cmd->parsed()) return run_train(train);
    if (eval_cmd->parsed()) return run_eval(eval);
    if (few_cmd->parsed()) return run_few_shot(few);
    return 1;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace mave::cli
