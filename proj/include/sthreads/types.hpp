#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace sthreads {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// screenplay
struct UnparsableDocument : Error { using Error::Error; };
struct MalformedCue : Error { using Error::Error; };

// annotation
struct UnknownTag : Error { using Error::Error; };
struct ColumnMissing : Error { using Error::Error; };
struct DanglingReply : Error { using Error::Error; };
struct ForwardReply : Error { using Error::Error; };
struct NotAForest : Error { using Error::Error; };

// linkmodel
struct ScenesMismatch : Error { using Error::Error; };
struct EmptyDataset : Error { using Error::Error; };
struct NoPositives : Error { using Error::Error; };

// metrics
struct UtteranceSetMismatch : Error { using Error::Error; };
struct TooFewUnits : Error { using Error::Error; };

// analytics
struct DuplicateCharacter : Error { using Error::Error; };
struct BadGenderCode : Error { using Error::Error; };
struct MissingYear : Error { using Error::Error; };

// catch-all for malformed input files
struct DataError : Error { using Error::Error; };

enum class SourceKind { movie, tv_pilot };

struct RawDocument {
  std::string title_slug;
  SourceKind source_kind = SourceKind::movie;
  std::string text;
};

struct ActionLine {
  std::string action_id;
  std::string text;
};

struct Utterance {
  std::string utt_id;    // line id + sentence index, e.g. "D470.2"
  std::string speaker;   // normalized cue-line name
  std::string turn_id;
  std::string line_id;
  std::string scene_id;
  std::string text;
  int position = 0;      // ordinal within the scene's dialogue sequence
};

struct DialogueLine {
  std::string line_id;
  std::vector<Utterance> sentences;
};

struct DialogueTurn {
  std::string turn_id;
  std::string speaker;
  bool off_screen = false;
  bool voice_over = false;
  std::vector<std::string> stage_directions;
  std::vector<DialogueLine> lines;
};

using SceneElement = std::variant<ActionLine, DialogueTurn>;

struct Scene {
  std::string scene_id;
  std::string header;
  std::vector<SceneElement> elements;

  // Utterances in position order.
  std::vector<const Utterance*> utterances() const;
};

struct ParsedDocument {
  std::string title;
  SourceKind kind = SourceKind::movie;
  std::vector<Scene> scenes;
};

// Reply-to links for one scene. parent[u] == u encodes a thread start.
struct GoldLinks {
  std::string scene_id;
  std::vector<std::string> order;             // utt ids in position order
  std::map<std::string, std::string> parent;  // utt id -> parent utt id
};

// Thread membership for one scene. Labels are "T1", "T2", ... in order of
// first appearance.
struct ThreadPartition {
  std::string scene_id;
  std::vector<std::string> order;
  std::map<std::string, std::string> assignment;  // utt id -> thread label
  // How each thread was opened (T/F/P), when the source recorded it.
  std::map<std::string, char> start_flavor;  // thread label -> flavor
};

inline std::vector<const Utterance*> Scene::utterances() const {
  std::vector<const Utterance*> out;
  for (const auto& el : elements) {
    if (const auto* turn = std::get_if<DialogueTurn>(&el)) {
      for (const auto& line : turn->lines)
        for (const auto& utt : line.sentences) out.push_back(&utt);
    }
  }
  return out;
}

}  // namespace sthreads
