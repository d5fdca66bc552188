#include "sthreads/text.hpp"

#include <cctype>
#include <fstream>

#include "sthreads/types.hpp"

namespace sthreads::text {

namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

std::string collapse_whitespace(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (char c : s) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(c);
  }
  return out;
}

void replace_all(std::string& s, const std::string& from,
                 const std::string& to) {
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
}

constexpr const char* kEllipsis = "…";
constexpr const char* kEmDash = "—";

bool is_terminal(char c) { return c == '.' || c == '!' || c == '?'; }

// True when the byte at `i` begins an uppercase letter or a straight or
// curly quote.
bool upper_or_quote_at(const std::string& s, std::size_t i) {
  char c = s[i];
  if (c >= 'A' && c <= 'Z') return true;
  if (c == '"' || c == '\'') return true;
  if (i + 2 < s.size() && static_cast<unsigned char>(c) == 0xE2 &&
      static_cast<unsigned char>(s[i + 1]) == 0x80) {
    unsigned char third = static_cast<unsigned char>(s[i + 2]);
    // Curly double and single quotes.
    return third == 0x9C || third == 0x9D || third == 0x98 || third == 0x99;
  }
  return false;
}

// A period belonging to "..." or ". . ." never closes a sentence.
bool part_of_ellipsis(const std::string& s, std::size_t i) {
  if (i + 1 < s.size() && s[i + 1] == '.') return true;
  if (i > 0 && s[i - 1] == '.') return true;
  if (i + 2 < s.size() && s[i + 1] == ' ' && s[i + 2] == '.') return true;
  if (i >= 2 && s[i - 1] == ' ' && s[i - 2] == '.') return true;
  return false;
}

bool closes_abbreviation(const std::string& s, std::size_t i,
                         const std::vector<std::string>& abbreviations) {
  std::size_t start = i;
  while (start > 0 && std::isalpha(static_cast<unsigned char>(s[start - 1])))
    --start;
  if (start == i) return false;  // no word before the period
  if (start > 0 && std::isalpha(static_cast<unsigned char>(s[start - 1])))
    return false;
  std::string word = s.substr(start, i - start) + ".";
  for (const auto& abbr : abbreviations)
    if (word == abbr) return true;
  return false;
}

std::string trimmed(const std::string& s, std::size_t from, std::size_t to) {
  while (from < to && is_space(s[from])) ++from;
  while (to > from && is_space(s[to - 1])) --to;
  return s.substr(from, to - from);
}

}  // namespace

std::string normalize_text(const std::string& text) {
  std::string out = collapse_whitespace(text);
  replace_all(out, ". . .", kEllipsis);
  replace_all(out, "...", kEllipsis);
  replace_all(out, " - ", std::string(" ") + kEmDash + " ");
  replace_all(out, "--", kEmDash);
  return out;
}

const std::vector<std::string>& default_abbreviations() {
  static const std::vector<std::string> abbrs = {"Mr.", "Mrs.", "Dr.",
                                                 "Ms.", "St.",  "vs."};
  return abbrs;
}

std::vector<std::string> segment_sentences(
    const std::string& line_text,
    const std::vector<std::string>& abbreviations) {
  const std::string& s = line_text;
  std::vector<std::string> sentences;
  std::size_t start = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!is_terminal(s[i])) continue;
    // Boundaries sit after the last mark of a "?!"-style run.
    if (i + 1 < s.size() && is_terminal(s[i + 1])) continue;
    if (s[i] == '.' && part_of_ellipsis(s, i)) continue;
    if (s[i] == '.' && closes_abbreviation(s, i, abbreviations)) continue;
    std::size_t next = i + 1;
    if (next >= s.size() || !is_space(s[next])) continue;
    while (next < s.size() && is_space(s[next])) ++next;
    if (next >= s.size() || !upper_or_quote_at(s, next)) continue;
    std::string sentence = trimmed(s, start, i + 1);
    if (!sentence.empty()) sentences.push_back(std::move(sentence));
    start = next;
  }
  std::string tail = trimmed(s, start, s.size());
  if (!tail.empty()) sentences.push_back(std::move(tail));
  return sentences;
}

std::vector<std::string> word_tokens(const std::string& text) {
  std::vector<std::string> tokens;
  std::string current;
  for (unsigned char c : text) {
    bool keep = std::isalnum(c) || c >= 0x80;  // non-ASCII bytes stay in-token
    if (keep) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

SubwordVocab SubwordVocab::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open vocabulary file: " + path);
  std::vector<std::string> pieces;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) pieces.push_back(line);
  }
  return from_pieces(pieces);
}

SubwordVocab SubwordVocab::from_pieces(const std::vector<std::string>& pieces) {
  SubwordVocab v;
  v.pieces_.insert(pieces.begin(), pieces.end());
  return v;
}

std::vector<std::string> SubwordVocab::tokenize(const std::string& text) const {
  std::vector<std::string> out;
  for (const std::string& word : word_tokens(text)) {
    std::vector<std::string> parts;
    std::size_t pos = 0;
    bool ok = true;
    while (pos < word.size()) {
      std::size_t len = word.size() - pos;
      std::string piece;
      for (; len > 0; --len) {
        std::string cand = word.substr(pos, len);
        if (pos > 0) cand = "##" + cand;
        if (pieces_.count(cand)) {
          piece = cand;
          break;
        }
      }
      if (len == 0) {
        ok = false;
        break;
      }
      parts.push_back(piece);
      pos += len;
    }
    if (ok)
      out.insert(out.end(), parts.begin(), parts.end());
    else
      out.push_back("[UNK]");
  }
  return out;
}

TokenizerFn SubwordVocab::tokenizer() const {
  // Copies the inventory so the function object owns what it needs.
  SubwordVocab copy = *this;
  return [copy](const std::string& text) { return copy.tokenize(text); };
}

}  // namespace sthreads::text
