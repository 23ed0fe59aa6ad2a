#pragma once

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mave/core.hpp"
#include "mave/errors.hpp"
#include "mave/tokenize.hpp"
#include "support/synthetic.hpp"

namespace testsupport {

/// Scratch directory under the system temp root, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    dir_ = std::filesystem::temp_directory_path() /
           ("mave_test_" + tag + "_" + std::to_string(counter++) + "_" +
            std::to_string(::getpid()));
    std::filesystem::create_directories(dir_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(dir_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
};

inline void write_lines(const std::string& path, const std::vector<std::string>& lines) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  for (const auto& l : lines) out << l << "\n";
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw mave::IoError("cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

/// Random valid AttributeExample; roughly half are negatives. Word-aligned
/// evidence spans, occasionally non-ASCII words.
inline mave::AttributeExample random_example(Rng& rng) {
  static const std::vector<std::string> words = {
      "alpha", "bravo", "chart",  "delta", "echo",   "frame", "gift",  "house",
      "ivory", "jolt",  "karma",  "lemon", "metro",  "noble", "op\xc3\xa9ra",
      "prism", "quartz", "rive\xc3\xa8", "stone", "tulip"};
  mave::AttributeExample ex;
  ex.profile.id = "rnd-" + std::to_string(rng.next() % 1000000);
  const int n_sources = 1 + static_cast<int>(rng.pick(4));
  for (int si = 0; si < n_sources; ++si) {
    std::string text;
    const int n_words = 2 + static_cast<int>(rng.pick(8));
    for (int w = 0; w < n_words; ++w) {
      if (!text.empty()) text += ' ';
      text += rng.choose(words);
    }
    const auto kind = si == 0 ? mave::SourceKind::title
                              : (rng.chance(0.5) ? mave::SourceKind::description
                                                 : mave::SourceKind::feature);
    ex.profile.sources.push_back(mave::Source{si, kind, text});
  }
  ex.category = rng.chance(0.5) ? "cat-a" : "cat-b";
  ex.attribute = "attr-" + std::to_string(rng.pick(5));
  if (rng.chance(0.5)) {
    // positive: pick 1-3 word-aligned spans
    const int n_spans = 1 + static_cast<int>(rng.pick(3));
    std::vector<mave::Span> spans;
    for (int i = 0; i < n_spans; ++i) {
      const int pid = static_cast<int>(rng.pick(ex.profile.sources.size()));
      const auto tokens =
          mave::tokenize::whitespace_tokenize(ex.profile.sources[static_cast<std::size_t>(pid)].text);
      const std::size_t t = rng.pick(tokens.size());
      mave::Span sp;
      sp.pid = pid;
      sp.begin = tokens[t].begin;
      sp.end = tokens[t].end;
      sp.value = tokens[t].text;
      bool overlap = false;
      for (const auto& other : spans) overlap = overlap || other.overlaps(sp);
      if (!overlap) spans.push_back(std::move(sp));
    }
    std::sort(spans.begin(), spans.end());
    ex.evidences = std::move(spans);
    ex.normalized_value = "Value " + std::to_string(rng.pick(10));
  }
  mave::validate_example(ex);
  return ex;
}

/// Pseudo-random markup document; strips to text with no '<'-letter pairs.
inline std::string random_markup_doc(Rng& rng) {
  static const std::vector<std::string> inline_tags = {"b", "i", "em", "strong", "span", "a"};
  static const std::vector<std::string> block_tags = {"p", "div", "li", "h2", "td"};
  static const std::vector<std::string> words = {
      "soft", "toy",  "anteater", "plush", "gray", "classic", "gift", "washable",
      "8",    "long", "tall",     "cuddly"};
  std::string doc;
  const int n_parts = 3 + static_cast<int>(rng.pick(10));
  for (int i = 0; i < n_parts; ++i) {
    switch (rng.pick(8)) {
      case 0: {
        const auto& tag = rng.choose(inline_tags);
        doc += "<" + tag + ">" + rng.choose(words) + "</" + tag + ">";
        break;
      }
      case 1: {
        const auto& tag = rng.choose(block_tags);
        doc += "<" + tag + " class=\"c" + std::to_string(rng.pick(9)) + "\">" +
               rng.choose(words) + "</" + tag + ">";
        break;
      }
      case 2:
        doc += "<script>var a = '" + rng.choose(words) + "';</script>";
        break;
      case 3:
        doc += "<style>.x { color: red; }</style>";
        break;
      case 4:
        doc += "<!-- " + rng.choose(words) + " -->";
        break;
      case 5:
        doc += rng.choose(words) + " &amp; " + rng.choose(words) + "&nbsp;" +
               rng.choose(words);
        break;
      case 6:
        // unbalanced or attribute-heavy tags
        doc += rng.chance(0.5) ? "<img src=\"x.png\" alt=\"a > b\">"
                               : "<div class='unclosed";
        break;
      default:
        doc += " " + rng.choose(words) + " ";
        break;
    }
  }
  return doc;
}

}  // namespace testsupport
