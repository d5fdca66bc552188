#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "sthreads/types.hpp"

namespace sthreads::screenplay {

struct ParseOptions {
  // A line is indented when it starts with at least this many spaces or a
  // tab.
  std::size_t indent_threshold = 4;
  // Minimum share of uppercase letters among alphabetic characters for a
  // cue line.
  double cue_upper_ratio = 0.7;
};

// Speaker cue decomposition: name plus the markers carried in parentheses.
struct CueInfo {
  std::string speaker;
  bool off_screen = false;
  bool voice_over = false;
  bool continued = false;
  std::vector<std::string> directions;
};

CueInfo parse_cue(const std::string& cue_text);

// Parse a standard-format screenplay into scenes, turns, dialogue lines and
// sentence-level utterances. Recoverable oddities (cue with no dialogue,
// stray parentheticals, preamble before the first header) are repaired and
// reported through `warnings`. Throws UnparsableDocument when no scene
// header exists at all.
ParsedDocument parse_screenplay(const RawDocument& doc,
                                std::vector<std::string>* warnings = nullptr,
                                const ParseOptions& options = {});

// One JSON object per action line / utterance, in document order, LF
// terminated. Reading the stream back and emitting again is byte-identical.
std::string emit_canonical(const ParsedDocument& doc);
std::vector<ParsedDocument> read_canonical(std::istream& in);
std::vector<ParsedDocument> read_canonical_file(const std::string& path);

std::string slugify(const std::string& title);

struct DocumentStats {
  std::size_t scenes = 0;
  std::size_t turns = 0;
  std::size_t dialogue_lines = 0;
  std::size_t action_lines = 0;
  std::size_t utterances = 0;
};

DocumentStats count_stats(const ParsedDocument& doc);

}  // namespace sthreads::screenplay
