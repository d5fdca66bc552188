#include "sthreads/screenplay.hpp"

#include <cctype>
#include <fstream>
#include <istream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "sthreads/text.hpp"

namespace sthreads::screenplay {

namespace {

using nlohmann::ordered_json;

struct LineView {
  std::string trimmed;
  std::size_t indent = 0;  // leading spaces; a tab counts as the threshold
  bool blank = false;
};

LineView scan_line(const std::string& raw, const ParseOptions& options) {
  LineView view;
  std::size_t i = 0;
  while (i < raw.size() && (raw[i] == ' ' || raw[i] == '\t')) {
    view.indent += raw[i] == '\t' ? options.indent_threshold : 1;
    ++i;
  }
  std::size_t end = raw.size();
  while (end > i && std::isspace(static_cast<unsigned char>(raw[end - 1])))
    --end;
  view.trimmed = raw.substr(i, end - i);
  view.blank = view.trimmed.empty();
  return view;
}

bool all_alpha_uppercase(const std::string& s) {
  bool has_alpha = false;
  for (unsigned char c : s) {
    if (std::isalpha(c)) {
      has_alpha = true;
      if (std::islower(c)) return false;
    }
  }
  return has_alpha;
}

bool is_scene_header(const LineView& line) {
  if (line.indent != 0) return false;
  const std::string& s = line.trimmed;
  if (s.rfind("INT.", 0) == 0 || s.rfind("EXT.", 0) == 0) return true;
  return all_alpha_uppercase(s);
}

bool cue_shaped(const std::string& s, double min_ratio) {
  std::size_t alpha = 0, upper = 0;
  for (unsigned char c : s) {
    if (std::isalpha(c)) {
      ++alpha;
      if (std::isupper(c)) ++upper;
    }
  }
  if (alpha == 0) return false;
  return static_cast<double>(upper) >= min_ratio * static_cast<double>(alpha);
}

bool is_parenthetical(const std::string& s) {
  return s.size() >= 2 && s.front() == '(' && s.back() == ')';
}

std::string strip_marks(const std::string& s) {
  std::string out;
  for (unsigned char c : s)
    if (std::isalnum(c)) out.push_back(static_cast<char>(std::toupper(c)));
  return out;
}

struct Parser {
  const RawDocument& raw;
  const ParseOptions& options;
  std::vector<std::string>* warnings;

  ParsedDocument doc = {};
  bool have_scene = false;
  bool warned_preamble = false;

  // current dialogue block
  bool have_cue = false;
  bool in_dialogue = false;
  CueInfo cue = {};
  std::string cue_raw = {};
  std::size_t cue_indent = 0;
  std::size_t dialogue_indent = 0;
  std::vector<std::string> pending_directions = {};
  std::vector<std::string> speech = {};  // physical lines of the logical line
  std::size_t turn_index = 0;            // element index of the open turn

  // current action paragraph
  std::vector<std::string> action_buf = {};

  int scene_n = 0, turn_n = 0, line_n = 0, action_n = 0;
  int position = 0;

  void warn(const std::string& message) {
    if (warnings) warnings->push_back(message);
  }

  Scene& scene() { return doc.scenes.back(); }

  bool ensure_scene() {
    if (have_scene) return true;
    if (!warned_preamble) {
      warn("content before the first scene header was skipped");
      warned_preamble = true;
    }
    return false;
  }

  DialogueTurn& open_turn_element() {
    return std::get<DialogueTurn>(scene().elements[turn_index]);
  }

  // Find the most recent turn in the current scene, for continuations.
  const DialogueTurn* last_turn() const {
    if (!have_scene) return nullptr;
    const auto& elements = doc.scenes.back().elements;
    for (auto it = elements.rbegin(); it != elements.rend(); ++it)
      if (const auto* turn = std::get_if<DialogueTurn>(&*it)) return turn;
    return nullptr;
  }

  void start_turn() {
    DialogueTurn turn;
    const DialogueTurn* previous = last_turn();
    if (cue.continued && previous && previous->speaker == cue.speaker) {
      // A continuation re-opens the same turn; it gets its own element so
      // document order survives interleaved action lines.
      turn.turn_id = previous->turn_id;
    } else {
      if (cue.continued)
        warn("continuation cue '" + cue.speaker +
             "' does not match the previous speaker");
      turn.turn_id = "L" + std::to_string(++turn_n);
    }
    turn.speaker = cue.speaker;
    turn.off_screen = cue.off_screen;
    turn.voice_over = cue.voice_over;
    turn.stage_directions = cue.directions;
    for (auto& direction : pending_directions)
      turn.stage_directions.push_back(std::move(direction));
    pending_directions.clear();
    scene().elements.emplace_back(std::move(turn));
    turn_index = scene().elements.size() - 1;
    in_dialogue = true;
  }

  void flush_speech() {
    if (speech.empty()) return;
    std::string joined;
    for (const auto& part : speech) {
      if (!joined.empty()) joined += ' ';
      joined += part;
    }
    speech.clear();
    std::string normalized = text::normalize_text(joined);
    if (normalized.empty()) return;
    DialogueLine line;
    line.line_id = "D" + std::to_string(++line_n);
    DialogueTurn& turn = open_turn_element();
    int k = 0;
    for (auto& sentence : text::segment_sentences(normalized)) {
      Utterance utt;
      utt.utt_id = line.line_id + "." + std::to_string(++k);
      utt.speaker = turn.speaker;
      utt.turn_id = turn.turn_id;
      utt.line_id = line.line_id;
      utt.scene_id = scene().scene_id;
      utt.text = std::move(sentence);
      utt.position = position++;
      line.sentences.push_back(std::move(utt));
    }
    turn.lines.push_back(std::move(line));
  }

  void flush_action() {
    if (action_buf.empty()) return;
    std::string joined;
    for (const auto& part : action_buf) {
      if (!joined.empty()) joined += ' ';
      joined += part;
    }
    action_buf.clear();
    std::string normalized = text::normalize_text(joined);
    if (normalized.empty()) return;
    if (!ensure_scene()) return;
    ActionLine action;
    action.action_id = "A" + std::to_string(++action_n);
    action.text = std::move(normalized);
    scene().elements.emplace_back(std::move(action));
  }

  // Close the open dialogue block, demoting a dialogue-less cue to action.
  void end_block() {
    if (in_dialogue) {
      flush_speech();
      // A cue that produced a turn but no utterances leaves an empty husk.
      if (open_turn_element().lines.empty()) {
        warn("cue '" + cue.speaker + "' has no dialogue; kept as action");
        scene().elements[turn_index] = ActionLine{
            "A" + std::to_string(++action_n), text::normalize_text(cue_raw)};
      }
    } else if (have_cue) {
      warn("cue '" + cue.speaker + "' has no dialogue; kept as action");
      action_buf.push_back(cue_raw);
      for (const auto& direction : pending_directions)
        action_buf.push_back(direction);
      pending_directions.clear();
      flush_action();
    }
    have_cue = false;
    in_dialogue = false;
  }

  void start_cue(const LineView& line) {
    end_block();
    flush_action();
    cue = parse_cue(line.trimmed);
    cue_raw = line.trimmed;
    cue_indent = line.indent;
    have_cue = true;
    in_dialogue = false;
  }

  void start_scene(const std::string& header) {
    end_block();
    flush_action();
    Scene scene;
    scene.scene_id = "S" + std::to_string(++scene_n);
    // Headers keep their source form; dash rewriting is for prose.
    scene.header = header;
    doc.scenes.push_back(std::move(scene));
    have_scene = true;
    position = 0;
  }

  void handle_indented(const LineView& line) {
    if (is_parenthetical(line.trimmed)) {
      if (in_dialogue) {
        flush_speech();
        open_turn_element().stage_directions.push_back(line.trimmed);
      } else if (have_cue) {
        pending_directions.push_back(line.trimmed);
      } else {
        warn("parenthetical outside any dialogue block: " + line.trimmed);
        action_buf.push_back(line.trimmed);
      }
      return;
    }
    if (in_dialogue) {
      // Without a blank separator, a deeper uppercase line at cue depth
      // starts the next cue; same-depth uppercase lines are shouted speech.
      if (cue_shaped(line.trimmed, options.cue_upper_ratio) &&
          line.indent > dialogue_indent && line.indent >= cue_indent) {
        start_cue(line);
        return;
      }
      speech.push_back(line.trimmed);
      dialogue_indent = line.indent;
      return;
    }
    if (have_cue) {
      if (!ensure_scene()) return;
      start_turn();
      speech.push_back(line.trimmed);
      dialogue_indent = line.indent;
      return;
    }
    if (cue_shaped(line.trimmed, options.cue_upper_ratio)) {
      start_cue(line);
      return;
    }
    warn("indented line outside any dialogue block treated as action: " +
         line.trimmed);
    action_buf.push_back(line.trimmed);
  }

  ParsedDocument run() {
    std::istringstream stream(raw.text);
    std::string raw_line;
    while (std::getline(stream, raw_line)) {
      if (!raw_line.empty() && raw_line.back() == '\r') raw_line.pop_back();
      LineView line = scan_line(raw_line, options);
      if (line.blank) {
        end_block();
        flush_action();
        continue;
      }
      if (line.indent >= options.indent_threshold) {
        handle_indented(line);
        continue;
      }
      end_block();
      if (is_scene_header(line)) {
        start_scene(line.trimmed);
        continue;
      }
      if (!ensure_scene()) continue;
      action_buf.push_back(line.trimmed);
    }
    end_block();
    flush_action();
    if (doc.scenes.empty())
      throw UnparsableDocument("no scene header found in '" + raw.title_slug +
                               "'");
    doc.title = raw.title_slug;
    doc.kind = raw.source_kind;
    return std::move(doc);
  }
};

}  // namespace

CueInfo parse_cue(const std::string& cue_text) {
  CueInfo info;
  std::string name;
  std::string group;
  int depth = 0;
  for (char c : cue_text) {
    if (c == '(') {
      if (depth++ == 0) {
        group.clear();
        continue;
      }
    } else if (c == ')') {
      if (--depth <= 0) {
        depth = 0;
        std::string mark = strip_marks(group);
        if (mark == "VO")
          info.voice_over = true;
        else if (mark == "OS" || mark == "OC")
          info.off_screen = true;
        else if (mark == "CONTD")
          info.continued = true;
        else if (!group.empty())
          info.directions.push_back(text::normalize_text(group));
        continue;
      }
    }
    (depth > 0 ? group : name).push_back(c);
  }
  std::string collapsed = text::normalize_text(name);
  for (char& c : collapsed)
    c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  info.speaker = collapsed;
  return info;
}

ParsedDocument parse_screenplay(const RawDocument& doc,
                                std::vector<std::string>* warnings,
                                const ParseOptions& options) {
  if (doc.text.empty())
    throw UnparsableDocument("document '" + doc.title_slug + "' is empty");
  Parser parser{doc, options, warnings};
  return parser.run();
}

std::string emit_canonical(const ParsedDocument& doc) {
  std::string out;
  auto emit = [&out](const ordered_json& j) {
    out += j.dump();
    out += '\n';
  };
  for (const Scene& scene : doc.scenes) {
    for (const SceneElement& element : scene.elements) {
      if (const auto* action = std::get_if<ActionLine>(&element)) {
        ordered_json j;
        j["title"] = doc.title;
        j["scene_id"] = scene.scene_id;
        j["kind"] = "action";
        j["line_id"] = action->action_id;
        j["text"] = action->text;
        emit(j);
        continue;
      }
      const auto& turn = std::get<DialogueTurn>(element);
      for (const DialogueLine& line : turn.lines) {
        for (const Utterance& utt : line.sentences) {
          ordered_json j;
          j["title"] = doc.title;
          j["scene_id"] = scene.scene_id;
          j["kind"] = "dialogue";
          j["turn_id"] = turn.turn_id;
          j["line_id"] = line.line_id;
          j["utt_id"] = utt.utt_id;
          j["speaker"] = utt.speaker;
          j["position"] = utt.position;
          j["text"] = utt.text;
          emit(j);
        }
      }
    }
  }
  return out;
}

std::vector<ParsedDocument> read_canonical(std::istream& in) {
  std::vector<ParsedDocument> docs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ordered_json j;
    try {
      j = ordered_json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError("line " + std::to_string(line_no) +
                      ": invalid JSON: " + e.what());
    }
    auto field = [&](const char* name) -> std::string {
      if (!j.contains(name))
        throw DataError("line " + std::to_string(line_no) +
                        ": missing field '" + name + "'");
      return j.at(name).get<std::string>();
    };
    std::string title = field("title");
    if (docs.empty() || docs.back().title != title) {
      docs.emplace_back();
      docs.back().title = title;
    }
    ParsedDocument& doc = docs.back();
    std::string scene_id = field("scene_id");
    if (doc.scenes.empty() || doc.scenes.back().scene_id != scene_id) {
      Scene scene;
      scene.scene_id = scene_id;
      doc.scenes.push_back(std::move(scene));
    }
    Scene& scene = doc.scenes.back();
    std::string kind = field("kind");
    if (kind == "action") {
      scene.elements.emplace_back(ActionLine{field("line_id"), field("text")});
      continue;
    }
    if (kind != "dialogue")
      throw DataError("line " + std::to_string(line_no) + ": unknown kind '" +
                      kind + "'");
    std::string turn_id = field("turn_id");
    DialogueTurn* turn = nullptr;
    if (!scene.elements.empty())
      if (auto* last = std::get_if<DialogueTurn>(&scene.elements.back()))
        if (last->turn_id == turn_id) turn = last;
    if (!turn) {
      DialogueTurn fresh;
      fresh.turn_id = turn_id;
      fresh.speaker = field("speaker");
      scene.elements.emplace_back(std::move(fresh));
      turn = &std::get<DialogueTurn>(scene.elements.back());
    }
    std::string line_id = field("line_id");
    if (turn->lines.empty() || turn->lines.back().line_id != line_id) {
      DialogueLine fresh;
      fresh.line_id = line_id;
      turn->lines.push_back(std::move(fresh));
    }
    if (!j.contains("position") || !j.at("position").is_number_integer())
      throw DataError("line " + std::to_string(line_no) +
                      ": missing integer field 'position'");
    Utterance utt;
    utt.utt_id = field("utt_id");
    utt.speaker = field("speaker");
    utt.turn_id = turn_id;
    utt.line_id = line_id;
    utt.scene_id = scene_id;
    utt.text = field("text");
    utt.position = j.at("position").get<int>();
    turn->lines.back().sentences.push_back(std::move(utt));
  }
  return docs;
}

std::vector<ParsedDocument> read_canonical_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path);
  return read_canonical(in);
}

std::string slugify(const std::string& title) {
  std::string out;
  bool pending_dash = false;
  for (unsigned char c : title) {
    if (std::isalnum(c)) {
      if (pending_dash && !out.empty()) out.push_back('-');
      pending_dash = false;
      out.push_back(static_cast<char>(std::tolower(c)));
    } else {
      pending_dash = true;
    }
  }
  return out.empty() ? "untitled" : out;
}

DocumentStats count_stats(const ParsedDocument& doc) {
  DocumentStats stats;
  stats.scenes = doc.scenes.size();
  std::set<std::string> turn_ids;
  for (const Scene& scene : doc.scenes) {
    for (const SceneElement& element : scene.elements) {
      if (std::holds_alternative<ActionLine>(element)) {
        ++stats.action_lines;
        continue;
      }
      const auto& turn = std::get<DialogueTurn>(element);
      turn_ids.insert(turn.turn_id);
      stats.dialogue_lines += turn.lines.size();
      for (const DialogueLine& line : turn.lines)
        stats.utterances += line.sentences.size();
    }
  }
  stats.turns = turn_ids.size();
  return stats;
}

}  // namespace sthreads::screenplay
