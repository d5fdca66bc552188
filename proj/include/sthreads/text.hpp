#pragma once

#include <functional>
#include <set>
#include <string>
#include <vector>

namespace sthreads::text {

// Canonical text form: ". . ." and "..." become an ellipsis character,
// " - " and "--" become an em-dash, runs of whitespace collapse to one
// space, ends trimmed.
std::string normalize_text(const std::string& text);

const std::vector<std::string>& default_abbreviations();

// Rule-based splitter: a sentence ends at {. ! ?} followed by whitespace
// and an uppercase letter or a quote. Ellipses never end a sentence and
// neither does a period that closes a known abbreviation. Sentences come
// back trimmed and never empty; joining them recovers the input up to
// whitespace.
std::vector<std::string> segment_sentences(
    const std::string& line_text,
    const std::vector<std::string>& abbreviations = default_abbreviations());

// Lowercase word tokens, split on whitespace and punctuation.
std::vector<std::string> word_tokens(const std::string& text);

using TokenizerFn = std::function<std::vector<std::string>(const std::string&)>;

// Greedy longest-match subword segmentation over a fixed piece inventory.
// Continuation pieces carry a "##" prefix; words with no parse become
// "[UNK]". The inventory file lists one piece per line.
class SubwordVocab {
 public:
  static SubwordVocab from_file(const std::string& path);
  static SubwordVocab from_pieces(const std::vector<std::string>& pieces);

  std::vector<std::string> tokenize(const std::string& text) const;
  TokenizerFn tokenizer() const;
  std::size_t size() const { return pieces_.size(); }

 private:
  std::set<std::string> pieces_;
};

}  // namespace sthreads::text
