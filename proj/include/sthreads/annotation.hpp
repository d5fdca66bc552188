#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "sthreads/types.hpp"

namespace sthreads::annotation {

// Where to find each field in the tabular annotation file. With a header
// row the entries are column names; without one they are 0-based indices
// written as decimal strings. scene_id may be empty when the file covers a
// single scene; rows then fall under default_scene.
struct ColumnMap {
  char delimiter = '\t';
  char tag_delimiter = '|';
  bool has_header = true;
  std::string scene_id = "scene_id";
  std::string turn_id = "turn_id";
  std::string line_id = "line_id";
  std::string speaker = "speaker";
  std::string text = "text";
  std::string tags = "tags";
  std::string default_scene = "S1";
};

struct Tag {
  enum class Kind { thread_start, prev, reply_to, skip, discuss };
  Kind kind = Kind::prev;
  char flavor = 'T';    // thread_start only: 'T', 'F', or 'P'
  std::string target;   // reply_to only: "D45" or "D45.2"
};

// One tag symbol: T | F | P | - | D<x> | S | X. Throws UnknownTag.
Tag parse_tag(const std::string& token);

struct AnnotatedUtterance {
  Utterance utterance;
  Tag tag;
};

// One AnnotatedUtterance per sentence. Rows with k > 1 tags are split into
// k sentences; single-tag rows are taken verbatim as one sentence. Rows
// whose line_id is an action id ("A", "A12") are dropped. Dummy IDs such
// as "La"/"Da" pass through untouched; postprocess regularizes them.
// Throws ColumnMissing, UnknownTag, or DataError.
std::vector<AnnotatedUtterance> read_annotations(std::istream& in,
                                                 const ColumnMap& columns = {});

struct PostprocessOptions {
  enum class LineTarget { last_sentence, first_sentence };
  // How a reply target naming a whole line resolves to a sentence.
  LineTarget line_target = LineTarget::last_sentence;
};

struct SceneGold {
  GoldLinks links;
  ThreadPartition partition;
};

struct PostprocessResult {
  std::vector<SceneGold> scenes;              // in order of first appearance
  std::vector<Utterance> survivors;           // rewritten IDs and positions
  std::map<std::string, std::string> id_map;  // old -> new (utt, line, turn)
  std::vector<std::string> warnings;
};

// Appendix-style cleanup: deletes Skip rows, renumbers the remaining IDs
// densely (emitting the old->new map), downgrades unadjudicated Discuss
// tags to Prev with a warning, resolves Prev/ReplyTo tags into a parent
// link per utterance, and closes the links into thread partitions. Reply
// targets that name a line rather than a sentence resolve per
// options.line_target; targets lost to Skip deletion are re-pointed at the
// nearest preceding survivor of the same line when one exists. Throws
// DanglingReply or ForwardReply when a link cannot be resolved.
PostprocessResult postprocess(const std::vector<AnnotatedUtterance>& annotated,
                              const PostprocessOptions& options = {});

// Rebuild Scene skeletons (turn and line structure, no headers or stage
// directions) from a flat utterance list, e.g. postprocess survivors.
std::vector<Scene> scenes_from_utterances(const std::vector<Utterance>& utts);

// Gold link records as JSONL: {scene_id, utt_id, parent_id, thread_label},
// utterances in position order, one object per line.
std::string emit_gold(const std::vector<SceneGold>& scenes);
std::vector<SceneGold> read_gold(std::istream& in);
std::vector<SceneGold> read_gold_file(const std::string& path);

}  // namespace sthreads::annotation
