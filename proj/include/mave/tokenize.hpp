#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <fstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mave/errors.hpp"
#include "mave/utf8.hpp"

// Whitespace and WordPiece tokenization with exact code point offsets into
// the original text. Offsets are the bridge between token-level model output
// and character-level evidence spans.

namespace mave::tokenize {

/// One token. [begin, end) are code point offsets into the source string;
/// continuation pieces carry the "##" prefix in `text` and have
/// is_continuation set.
struct Token {
  std::string text;
  std::size_t begin = 0;
  std::size_t end = 0;
  bool is_continuation = false;

  bool operator==(const Token&) const = default;
};

/// Maximal non-space runs with exact offsets.
inline std::vector<Token> whitespace_tokenize(std::string_view text) {
  std::vector<Token> out;
  std::size_t i = 0, cp_index = 0;
  std::size_t run_begin = 0;
  std::string run;
  auto flush = [&](std::size_t end_index) {
    if (!run.empty()) {
      out.push_back(Token{std::move(run), run_begin, end_index, false});
      run.clear();
    }
  };
  while (i < text.size()) {
    const char32_t cp = utf8::decode_next(text, i);
    if (cp == utf8::kInvalid || utf8::is_space(cp)) {
      flush(cp_index);
    } else {
      if (run.empty()) run_begin = cp_index;
      utf8::append(run, cp);
    }
    ++cp_index;
  }
  flush(cp_index);
  return out;
}

struct Vocab {
  std::vector<std::string> entries;
  std::unordered_map<std::string, int> index;
  int unk_id = -1;

  std::size_t size() const { return entries.size(); }

  int id_of(std::string_view piece) const {
    const auto it = index.find(std::string(piece));
    return it == index.end() ? -1 : it->second;
  }

  bool contains(std::string_view piece) const { return id_of(piece) >= 0; }
};

/// Plain-text vocab: one subword per line, line number = id. [UNK] required.
inline Vocab load_vocab(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw IoError("cannot open vocab file " + path);
  Vocab v;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(file, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      if (file.peek() == std::ifstream::traits_type::eof()) break;
      throw ConfigError(path + ": empty vocab entry at line " + std::to_string(line_no));
    }
    const auto [it, inserted] = v.index.emplace(line, static_cast<int>(v.entries.size()));
    if (!inserted)
      throw ConfigError(path + ": duplicate vocab entry \"" + line + "\" at line " +
                        std::to_string(line_no));
    v.entries.push_back(line);
  }
  if (v.entries.empty()) throw ConfigError(path + ": vocab file is empty");
  v.unk_id = v.id_of("[UNK]");
  if (v.unk_id < 0) throw ConfigError(path + ": vocab has no [UNK] entry");
  return v;
}

namespace detail {

struct FoldPair {
  std::uint16_t cp;
  std::uint16_t out;
};

// Lowercase + strip accents (NFD, drop combining marks) for Basic Latin
// through Latin Extended-B. Code points outside the table pass through
// unchanged; combining marks U+0300..U+036F are dropped.
inline constexpr std::array<FoldPair, 352> kFoldTable = {{
    {0x0041, 0x0061}, {0x0042, 0x0062}, {0x0043, 0x0063}, {0x0044, 0x0064},
    {0x0045, 0x0065}, {0x0046, 0x0066}, {0x0047, 0x0067}, {0x0048, 0x0068},
    {0x0049, 0x0069}, {0x004A, 0x006A}, {0x004B, 0x006B}, {0x004C, 0x006C},
    {0x004D, 0x006D}, {0x004E, 0x006E}, {0x004F, 0x006F}, {0x0050, 0x0070},
    {0x0051, 0x0071}, {0x0052, 0x0072}, {0x0053, 0x0073}, {0x0054, 0x0074},
    {0x0055, 0x0075}, {0x0056, 0x0076}, {0x0057, 0x0077}, {0x0058, 0x0078},
    {0x0059, 0x0079}, {0x005A, 0x007A}, {0x00C0, 0x0061}, {0x00C1, 0x0061},
    {0x00C2, 0x0061}, {0x00C3, 0x0061}, {0x00C4, 0x0061}, {0x00C5, 0x0061},
    {0x00C6, 0x00E6}, {0x00C7, 0x0063}, {0x00C8, 0x0065}, {0x00C9, 0x0065},
    {0x00CA, 0x0065}, {0x00CB, 0x0065}, {0x00CC, 0x0069}, {0x00CD, 0x0069},
    {0x00CE, 0x0069}, {0x00CF, 0x0069}, {0x00D0, 0x00F0}, {0x00D1, 0x006E},
    {0x00D2, 0x006F}, {0x00D3, 0x006F}, {0x00D4, 0x006F}, {0x00D5, 0x006F},
    {0x00D6, 0x006F}, {0x00D8, 0x00F8}, {0x00D9, 0x0075}, {0x00DA, 0x0075},
    {0x00DB, 0x0075}, {0x00DC, 0x0075}, {0x00DD, 0x0079}, {0x00DE, 0x00FE},
    {0x00E0, 0x0061}, {0x00E1, 0x0061}, {0x00E2, 0x0061}, {0x00E3, 0x0061},
    {0x00E4, 0x0061}, {0x00E5, 0x0061}, {0x00E7, 0x0063}, {0x00E8, 0x0065},
    {0x00E9, 0x0065}, {0x00EA, 0x0065}, {0x00EB, 0x0065}, {0x00EC, 0x0069},
    {0x00ED, 0x0069}, {0x00EE, 0x0069}, {0x00EF, 0x0069}, {0x00F1, 0x006E},
    {0x00F2, 0x006F}, {0x00F3, 0x006F}, {0x00F4, 0x006F}, {0x00F5, 0x006F},
    {0x00F6, 0x006F}, {0x00F9, 0x0075}, {0x00FA, 0x0075}, {0x00FB, 0x0075},
    {0x00FC, 0x0075}, {0x00FD, 0x0079}, {0x00FF, 0x0079}, {0x0100, 0x0061},
    {0x0101, 0x0061}, {0x0102, 0x0061}, {0x0103, 0x0061}, {0x0104, 0x0061},
    {0x0105, 0x0061}, {0x0106, 0x0063}, {0x0107, 0x0063}, {0x0108, 0x0063},
    {0x0109, 0x0063}, {0x010A, 0x0063}, {0x010B, 0x0063}, {0x010C, 0x0063},
    {0x010D, 0x0063}, {0x010E, 0x0064}, {0x010F, 0x0064}, {0x0110, 0x0111},
    {0x0112, 0x0065}, {0x0113, 0x0065}, {0x0114, 0x0065}, {0x0115, 0x0065},
    {0x0116, 0x0065}, {0x0117, 0x0065}, {0x0118, 0x0065}, {0x0119, 0x0065},
    {0x011A, 0x0065}, {0x011B, 0x0065}, {0x011C, 0x0067}, {0x011D, 0x0067},
    {0x011E, 0x0067}, {0x011F, 0x0067}, {0x0120, 0x0067}, {0x0121, 0x0067},
    {0x0122, 0x0067}, {0x0123, 0x0067}, {0x0124, 0x0068}, {0x0125, 0x0068},
    {0x0126, 0x0127}, {0x0128, 0x0069}, {0x0129, 0x0069}, {0x012A, 0x0069},
    {0x012B, 0x0069}, {0x012C, 0x0069}, {0x012D, 0x0069}, {0x012E, 0x0069},
    {0x012F, 0x0069}, {0x0130, 0x0069}, {0x0132, 0x0133}, {0x0134, 0x006A},
    {0x0135, 0x006A}, {0x0136, 0x006B}, {0x0137, 0x006B}, {0x0139, 0x006C},
    {0x013A, 0x006C}, {0x013B, 0x006C}, {0x013C, 0x006C}, {0x013D, 0x006C},
    {0x013E, 0x006C}, {0x013F, 0x0140}, {0x0141, 0x0142}, {0x0143, 0x006E},
    {0x0144, 0x006E}, {0x0145, 0x006E}, {0x0146, 0x006E}, {0x0147, 0x006E},
    {0x0148, 0x006E}, {0x014A, 0x014B}, {0x014C, 0x006F}, {0x014D, 0x006F},
    {0x014E, 0x006F}, {0x014F, 0x006F}, {0x0150, 0x006F}, {0x0151, 0x006F},
    {0x0152, 0x0153}, {0x0154, 0x0072}, {0x0155, 0x0072}, {0x0156, 0x0072},
    {0x0157, 0x0072}, {0x0158, 0x0072}, {0x0159, 0x0072}, {0x015A, 0x0073},
    {0x015B, 0x0073}, {0x015C, 0x0073}, {0x015D, 0x0073}, {0x015E, 0x0073},
    {0x015F, 0x0073}, {0x0160, 0x0073}, {0x0161, 0x0073}, {0x0162, 0x0074},
    {0x0163, 0x0074}, {0x0164, 0x0074}, {0x0165, 0x0074}, {0x0166, 0x0167},
    {0x0168, 0x0075}, {0x0169, 0x0075}, {0x016A, 0x0075}, {0x016B, 0x0075},
    {0x016C, 0x0075}, {0x016D, 0x0075}, {0x016E, 0x0075}, {0x016F, 0x0075},
    {0x0170, 0x0075}, {0x0171, 0x0075}, {0x0172, 0x0075}, {0x0173, 0x0075},
    {0x0174, 0x0077}, {0x0175, 0x0077}, {0x0176, 0x0079}, {0x0177, 0x0079},
    {0x0178, 0x0079}, {0x0179, 0x007A}, {0x017A, 0x007A}, {0x017B, 0x007A},
    {0x017C, 0x007A}, {0x017D, 0x007A}, {0x017E, 0x007A}, {0x0181, 0x0253},
    {0x0182, 0x0183}, {0x0184, 0x0185}, {0x0186, 0x0254}, {0x0187, 0x0188},
    {0x0189, 0x0256}, {0x018A, 0x0257}, {0x018B, 0x018C}, {0x018E, 0x01DD},
    {0x018F, 0x0259}, {0x0190, 0x025B}, {0x0191, 0x0192}, {0x0193, 0x0260},
    {0x0194, 0x0263}, {0x0196, 0x0269}, {0x0197, 0x0268}, {0x0198, 0x0199},
    {0x019C, 0x026F}, {0x019D, 0x0272}, {0x019F, 0x0275}, {0x01A0, 0x006F},
    {0x01A1, 0x006F}, {0x01A2, 0x01A3}, {0x01A4, 0x01A5}, {0x01A6, 0x0280},
    {0x01A7, 0x01A8}, {0x01A9, 0x0283}, {0x01AC, 0x01AD}, {0x01AE, 0x0288},
    {0x01AF, 0x0075}, {0x01B0, 0x0075}, {0x01B1, 0x028A}, {0x01B2, 0x028B},
    {0x01B3, 0x01B4}, {0x01B5, 0x01B6}, {0x01B7, 0x0292}, {0x01B8, 0x01B9},
    {0x01BC, 0x01BD}, {0x01C4, 0x01C6}, {0x01C5, 0x01C6}, {0x01C7, 0x01C9},
    {0x01C8, 0x01C9}, {0x01CA, 0x01CC}, {0x01CB, 0x01CC}, {0x01CD, 0x0061},
    {0x01CE, 0x0061}, {0x01CF, 0x0069}, {0x01D0, 0x0069}, {0x01D1, 0x006F},
    {0x01D2, 0x006F}, {0x01D3, 0x0075}, {0x01D4, 0x0075}, {0x01D5, 0x0075},
    {0x01D6, 0x0075}, {0x01D7, 0x0075}, {0x01D8, 0x0075}, {0x01D9, 0x0075},
    {0x01DA, 0x0075}, {0x01DB, 0x0075}, {0x01DC, 0x0075}, {0x01DE, 0x0061},
    {0x01DF, 0x0061}, {0x01E0, 0x0061}, {0x01E1, 0x0061}, {0x01E2, 0x00E6},
    {0x01E3, 0x00E6}, {0x01E4, 0x01E5}, {0x01E6, 0x0067}, {0x01E7, 0x0067},
    {0x01E8, 0x006B}, {0x01E9, 0x006B}, {0x01EA, 0x006F}, {0x01EB, 0x006F},
    {0x01EC, 0x006F}, {0x01ED, 0x006F}, {0x01EE, 0x0292}, {0x01EF, 0x0292},
    {0x01F0, 0x006A}, {0x01F1, 0x01F3}, {0x01F2, 0x01F3}, {0x01F4, 0x0067},
    {0x01F5, 0x0067}, {0x01F6, 0x0195}, {0x01F7, 0x01BF}, {0x01F8, 0x006E},
    {0x01F9, 0x006E}, {0x01FA, 0x0061}, {0x01FB, 0x0061}, {0x01FC, 0x00E6},
    {0x01FD, 0x00E6}, {0x01FE, 0x00F8}, {0x01FF, 0x00F8}, {0x0200, 0x0061},
    {0x0201, 0x0061}, {0x0202, 0x0061}, {0x0203, 0x0061}, {0x0204, 0x0065},
    {0x0205, 0x0065}, {0x0206, 0x0065}, {0x0207, 0x0065}, {0x0208, 0x0069},
    {0x0209, 0x0069}, {0x020A, 0x0069}, {0x020B, 0x0069}, {0x020C, 0x006F},
    {0x020D, 0x006F}, {0x020E, 0x006F}, {0x020F, 0x006F}, {0x0210, 0x0072},
    {0x0211, 0x0072}, {0x0212, 0x0072}, {0x0213, 0x0072}, {0x0214, 0x0075},
    {0x0215, 0x0075}, {0x0216, 0x0075}, {0x0217, 0x0075}, {0x0218, 0x0073},
    {0x0219, 0x0073}, {0x021A, 0x0074}, {0x021B, 0x0074}, {0x021C, 0x021D},
    {0x021E, 0x0068}, {0x021F, 0x0068}, {0x0220, 0x019E}, {0x0222, 0x0223},
    {0x0224, 0x0225}, {0x0226, 0x0061}, {0x0227, 0x0061}, {0x0228, 0x0065},
    {0x0229, 0x0065}, {0x022A, 0x006F}, {0x022B, 0x006F}, {0x022C, 0x006F},
    {0x022D, 0x006F}, {0x022E, 0x006F}, {0x022F, 0x006F}, {0x0230, 0x006F},
    {0x0231, 0x006F}, {0x0232, 0x0079}, {0x0233, 0x0079}, {0x023A, 0x2C65},
    {0x023B, 0x023C}, {0x023D, 0x019A}, {0x023E, 0x2C66}, {0x0241, 0x0242},
    {0x0243, 0x0180}, {0x0244, 0x0289}, {0x0245, 0x028C}, {0x0246, 0x0247},
    {0x0248, 0x0249}, {0x024A, 0x024B}, {0x024C, 0x024D}, {0x024E, 0x024F},
}};

struct CpRange {
  std::uint16_t lo;
  std::uint16_t hi;
};

// Unicode category P outside ASCII, up to U+30FF.
inline constexpr std::array<CpRange, 89> kPunctRanges = {{
    {0x00A1, 0x00A1}, {0x00A7, 0x00A7}, {0x00AB, 0x00AB}, {0x00B6, 0x00B7}, {0x00BB, 0x00BB},
    {0x00BF, 0x00BF}, {0x037E, 0x037E}, {0x0387, 0x0387}, {0x055A, 0x055F}, {0x0589, 0x058A},
    {0x05BE, 0x05BE}, {0x05C0, 0x05C0}, {0x05C3, 0x05C3}, {0x05C6, 0x05C6}, {0x05F3, 0x05F4},
    {0x0609, 0x060A}, {0x060C, 0x060D}, {0x061B, 0x061B}, {0x061E, 0x061F}, {0x066A, 0x066D},
    {0x06D4, 0x06D4}, {0x0700, 0x070D}, {0x07F7, 0x07F9}, {0x0830, 0x083E}, {0x085E, 0x085E},
    {0x0964, 0x0965}, {0x0970, 0x0970}, {0x09FD, 0x09FD}, {0x0A76, 0x0A76}, {0x0AF0, 0x0AF0},
    {0x0C77, 0x0C77}, {0x0C84, 0x0C84}, {0x0DF4, 0x0DF4}, {0x0E4F, 0x0E4F}, {0x0E5A, 0x0E5B},
    {0x0F04, 0x0F12}, {0x0F14, 0x0F14}, {0x0F3A, 0x0F3D}, {0x0F85, 0x0F85}, {0x0FD0, 0x0FD4},
    {0x0FD9, 0x0FDA}, {0x104A, 0x104F}, {0x10FB, 0x10FB}, {0x1360, 0x1368}, {0x1400, 0x1400},
    {0x166E, 0x166E}, {0x169B, 0x169C}, {0x16EB, 0x16ED}, {0x1735, 0x1736}, {0x17D4, 0x17D6},
    {0x17D8, 0x17DA}, {0x1800, 0x180A}, {0x1944, 0x1945}, {0x1A1E, 0x1A1F}, {0x1AA0, 0x1AA6},
    {0x1AA8, 0x1AAD}, {0x1B5A, 0x1B60}, {0x1BFC, 0x1BFF}, {0x1C3B, 0x1C3F}, {0x1C7E, 0x1C7F},
    {0x1CC0, 0x1CC7}, {0x1CD3, 0x1CD3}, {0x2010, 0x2027}, {0x2030, 0x2043}, {0x2045, 0x2051},
    {0x2053, 0x205E}, {0x207D, 0x207E}, {0x208D, 0x208E}, {0x2308, 0x230B}, {0x2329, 0x232A},
    {0x2768, 0x2775}, {0x27C5, 0x27C6}, {0x27E6, 0x27EF}, {0x2983, 0x2998}, {0x29D8, 0x29DB},
    {0x29FC, 0x29FD}, {0x2CF9, 0x2CFC}, {0x2CFE, 0x2CFF}, {0x2D70, 0x2D70}, {0x2E00, 0x2E2E},
    {0x2E30, 0x2E4F}, {0x2E52, 0x2E52}, {0x3001, 0x3003}, {0x3008, 0x3011}, {0x3014, 0x301F},
    {0x3030, 0x3030}, {0x303D, 0x303D}, {0x30A0, 0x30A0}, {0x30FB, 0x30FB},
}};

inline bool is_punct(char32_t cp) {
  if ((cp >= 33 && cp <= 47) || (cp >= 58 && cp <= 64) || (cp >= 91 && cp <= 96) ||
      (cp >= 123 && cp <= 126))
    return true;
  for (const auto& r : kPunctRanges) {
    if (cp < r.lo) return false;
    if (cp <= r.hi) return true;
  }
  return false;
}

inline bool is_combining_mark(char32_t cp) { return cp >= 0x0300 && cp <= 0x036F; }

/// Folded code point, or 0 when the code point is dropped entirely.
inline char32_t fold(char32_t cp) {
  if (is_combining_mark(cp)) return 0;
  if (cp < 'A') return cp;
  std::size_t lo = 0, hi = kFoldTable.size();
  while (lo < hi) {
    const std::size_t mid = (lo + hi) / 2;
    if (kFoldTable[mid].cp < cp)
      lo = mid + 1;
    else
      hi = mid;
  }
  if (lo < kFoldTable.size() && kFoldTable[lo].cp == cp)
    return kFoldTable[lo].out;
  return cp;
}

/// A word chunk after the basic pass: folded code points plus, per folded
/// code point, the index of the original code point it came from.
struct Chunk {
  std::vector<char32_t> folded;
  std::vector<std::size_t> origin;
  std::size_t begin = 0;  // original cp range of the whole chunk
  std::size_t end = 0;
};

/// Splits on whitespace and punctuation (each punctuation cp its own chunk),
/// folding case and accents. Offsets refer to the original string.
inline std::vector<Chunk> basic_chunks(std::string_view text) {
  std::vector<Chunk> chunks;
  Chunk cur;
  auto flush = [&](std::size_t end_index) {
    if (!cur.folded.empty() || cur.end > cur.begin) {
      cur.end = end_index;
      if (!cur.folded.empty()) chunks.push_back(std::move(cur));
    }
    cur = Chunk{};
  };
  std::size_t i = 0, cp_index = 0;
  while (i < text.size()) {
    const char32_t cp = utf8::decode_next(text, i);
    if (cp == utf8::kInvalid || utf8::is_space(cp)) {
      flush(cp_index);
    } else if (is_punct(cp)) {
      flush(cp_index);
      chunks.push_back(Chunk{{fold(cp) ? fold(cp) : cp}, {cp_index}, cp_index, cp_index + 1});
    } else {
      if (cur.folded.empty()) cur.begin = cp_index;
      const char32_t f = fold(cp);
      if (f != 0) {
        cur.folded.push_back(f);
        cur.origin.push_back(cp_index);
      }
      cur.end = cp_index + 1;
    }
    ++cp_index;
  }
  flush(cp_index);
  return chunks;
}

inline std::string encode_range(const std::vector<char32_t>& cps, std::size_t from,
                                std::size_t to) {
  std::string s;
  for (std::size_t k = from; k < to; ++k) utf8::append(s, cps[k]);
  return s;
}

}  // namespace detail

/// Uncased WordPiece: lowercase + accent strip, split on whitespace and
/// punctuation, then greedy longest-match-first subword segmentation with
/// "##" continuation pieces. A word with no segmentation, or longer than
/// max_word_len code points, becomes one [UNK] token covering the word.
/// Offsets always refer to the original string.
inline std::vector<Token> wordpiece_tokenize(std::string_view text, const Vocab& vocab,
                                             std::size_t max_word_len = 100) {
  if (vocab.unk_id < 0) throw ConfigError("vocab has no [UNK] entry");
  std::vector<Token> out;
  for (const auto& chunk : detail::basic_chunks(text)) {
    const std::size_t n = chunk.folded.size();
    if (n > max_word_len) {
      out.push_back(Token{"[UNK]", chunk.begin, chunk.end, false});
      continue;
    }
    std::vector<Token> pieces;
    std::size_t pos = 0;
    bool ok = true;
    while (pos < n) {
      std::size_t match_end = 0;
      std::string match_text;
      for (std::size_t cand = n; cand > pos; --cand) {
        std::string piece = detail::encode_range(chunk.folded, pos, cand);
        if (pos > 0) piece.insert(0, "##");
        if (vocab.contains(piece)) {
          match_end = cand;
          match_text = std::move(piece);
          break;
        }
      }
      if (match_end == 0) {
        ok = false;
        break;
      }
      // Piece i covers original cps up to the start of piece i+1; the last
      // piece absorbs any trailing dropped marks of the chunk.
      Token t;
      t.text = std::move(match_text);
      t.begin = chunk.origin[pos];
      t.end = match_end < n ? chunk.origin[match_end] : chunk.end;
      t.is_continuation = pos > 0;
      pieces.push_back(std::move(t));
      pos = match_end;
    }
    if (!ok) {
      out.push_back(Token{"[UNK]", chunk.begin, chunk.end, false});
    } else {
      for (auto& p : pieces) out.push_back(std::move(p));
    }
  }
  return out;
}

inline std::vector<int> token_ids(const std::vector<Token>& tokens, const Vocab& vocab) {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) {
    const int id = vocab.id_of(t.text);
    ids.push_back(id >= 0 ? id : vocab.unk_id);
  }
  return ids;
}

}  // namespace mave::tokenize
