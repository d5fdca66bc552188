#include "sthreads/annotation.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"
#include "sthreads/text.hpp"
#include "sthreads/threading.hpp"
#include "tabular.hpp"

namespace sthreads::annotation {

namespace {

using tabular::split_row;
using tabular::trim;

bool is_action_id(const std::string& line_id) {
  if (line_id.empty() || line_id[0] != 'A') return false;
  return std::all_of(line_id.begin() + 1, line_id.end(),
                     [](unsigned char c) { return std::isdigit(c); });
}

struct ColumnIndices {
  std::size_t scene_id = npos;
  std::size_t turn_id = npos;
  std::size_t line_id = npos;
  std::size_t speaker = npos;
  std::size_t text = npos;
  std::size_t tags = npos;
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
};

std::size_t resolve_column(const std::string& ref,
                           const std::vector<std::string>& header,
                           bool has_header, bool required,
                           const std::string& what) {
  if (ref.empty()) {
    if (required) throw ColumnMissing("no column configured for " + what);
    return ColumnIndices::npos;
  }
  if (has_header) {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (trim(header[i]) == ref) return i;
    if (required) throw ColumnMissing("column \"" + ref + "\" (" + what +
                                      ") not found in header");
    return ColumnIndices::npos;
  }
  if (ref.find_first_not_of("0123456789") != std::string::npos)
    throw ColumnMissing("headerless input needs a numeric index for " + what +
                        ", got \"" + ref + "\"");
  return static_cast<std::size_t>(std::stoul(ref));
}

}  // namespace

Tag parse_tag(const std::string& token) {
  std::string t = trim(token);
  Tag tag;
  if (t == "T" || t == "F" || t == "P") {
    tag.kind = Tag::Kind::thread_start;
    tag.flavor = t[0];
    return tag;
  }
  if (t == "-") {
    tag.kind = Tag::Kind::prev;
    return tag;
  }
  if (t == "S") {
    tag.kind = Tag::Kind::skip;
    return tag;
  }
  if (t == "X") {
    tag.kind = Tag::Kind::discuss;
    return tag;
  }
  if (t.size() > 1 && t[0] == 'D') {
    tag.kind = Tag::Kind::reply_to;
    tag.target = t;
    return tag;
  }
  throw UnknownTag("unknown annotation tag \"" + t + "\"");
}

std::vector<AnnotatedUtterance> read_annotations(std::istream& in,
                                                 const ColumnMap& columns) {
  std::string line;
  std::vector<std::string> header;
  if (columns.has_header) {
    if (!std::getline(in, line))
      throw DataError("annotation stream is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    header = split_row(line, columns.delimiter);
  }
  ColumnIndices idx;
  idx.scene_id = resolve_column(columns.scene_id, header, columns.has_header,
                                false, "scene_id");
  idx.turn_id = resolve_column(columns.turn_id, header, columns.has_header,
                               true, "turn_id");
  idx.line_id = resolve_column(columns.line_id, header, columns.has_header,
                               true, "line_id");
  idx.speaker = resolve_column(columns.speaker, header, columns.has_header,
                               true, "speaker");
  idx.text =
      resolve_column(columns.text, header, columns.has_header, true, "text");
  idx.tags =
      resolve_column(columns.tags, header, columns.has_header, true, "tags");

  std::vector<AnnotatedUtterance> out;
  std::map<std::string, int> sentence_count;  // line id -> sentences so far
  std::map<std::string, int> scene_position;  // scene id -> next position
  std::size_t row_number = columns.has_header ? 1 : 0;
  while (std::getline(in, line)) {
    ++row_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto fields = split_row(line, columns.delimiter);
    auto field = [&](std::size_t i) -> std::string {
      if (i == ColumnIndices::npos) return "";
      if (i >= fields.size())
        throw DataError("row " + std::to_string(row_number) + " has only " +
                        std::to_string(fields.size()) + " fields");
      return trim(fields[i]);
    };
    std::string line_id = field(idx.line_id);
    if (is_action_id(line_id)) continue;  // action rows carry no utterances

    std::string scene_id = field(idx.scene_id);
    if (scene_id.empty()) scene_id = columns.default_scene;
    std::string turn_id = field(idx.turn_id);
    std::string speaker = field(idx.speaker);
    std::string text = field(idx.text);
    std::string tag_field = field(idx.tags);
    if (tag_field.empty())
      throw DataError("row " + std::to_string(row_number) + " has no tags");

    std::vector<Tag> tags;
    std::string token;
    std::istringstream tag_stream(tag_field);
    while (std::getline(tag_stream, token, columns.tag_delimiter))
      tags.push_back(parse_tag(token));

    // A single tag covers the row's text verbatim; several tags mean the
    // text holds that many sentences.
    std::vector<std::string> sentences;
    if (tags.size() == 1) {
      sentences.push_back(text);
    } else {
      sentences = text::segment_sentences(text);
      if (sentences.size() != tags.size())
        throw DataError("row " + std::to_string(row_number) + " has " +
                        std::to_string(tags.size()) + " tags but " +
                        std::to_string(sentences.size()) + " sentences");
    }
    for (std::size_t i = 0; i < sentences.size(); ++i) {
      AnnotatedUtterance annotated;
      Utterance& utt = annotated.utterance;
      utt.line_id = line_id;
      utt.turn_id = turn_id;
      utt.scene_id = scene_id;
      utt.speaker = speaker;
      utt.text = sentences[i];
      utt.utt_id = line_id + "." + std::to_string(++sentence_count[line_id]);
      utt.position = scene_position[scene_id]++;
      annotated.tag = tags[i];
      out.push_back(std::move(annotated));
    }
  }
  return out;
}

PostprocessResult postprocess(const std::vector<AnnotatedUtterance>& annotated,
                              const PostprocessOptions& options) {
  PostprocessResult result;

  // Work on a copy so Discuss downgrades stay local.
  std::vector<AnnotatedUtterance> rows = annotated;
  for (auto& row : rows) {
    if (row.tag.kind == Tag::Kind::discuss) {
      row.tag.kind = Tag::Kind::prev;
      result.warnings.push_back("unadjudicated X on " + row.utterance.utt_id +
                                " treated as -");
    }
  }

  std::vector<std::size_t> kept;
  std::set<std::string> all_utt_ids;
  std::set<std::string> all_line_ids;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    all_utt_ids.insert(rows[i].utterance.utt_id);
    all_line_ids.insert(rows[i].utterance.line_id);
    if (rows[i].tag.kind != Tag::Kind::skip) kept.push_back(i);
  }

  // Dense renumbering by first appearance among survivors, document-wide.
  std::map<std::string, std::string> new_line;
  std::map<std::string, std::string> new_turn;
  std::map<std::string, int> new_line_sentences;
  std::map<std::string, std::string> new_utt;  // old utt id -> new utt id
  for (std::size_t i : kept) {
    const Utterance& old = rows[i].utterance;
    auto [line_it, line_fresh] = new_line.emplace(old.line_id, "");
    if (line_fresh)
      line_it->second = "D" + std::to_string(new_line.size());
    auto [turn_it, turn_fresh] = new_turn.emplace(old.turn_id, "");
    if (turn_fresh)
      turn_it->second = "L" + std::to_string(new_turn.size());
    new_utt[old.utt_id] =
        line_it->second + "." +
        std::to_string(++new_line_sentences[line_it->second]);
  }
  result.id_map = new_utt;
  result.id_map.insert(new_line.begin(), new_line.end());
  result.id_map.insert(new_turn.begin(), new_turn.end());

  // Lookups in source coordinates: survivor by utt id, survivors per line.
  std::map<std::string, std::size_t> survivor_of;     // old utt id -> row
  std::map<std::string, std::vector<std::size_t>> line_survivors;
  for (std::size_t i : kept) {
    survivor_of[rows[i].utterance.utt_id] = i;
    line_survivors[rows[i].utterance.line_id].push_back(i);
  }

  std::vector<std::string> scene_order;
  std::map<std::string, std::vector<std::size_t>> scene_rows;
  for (std::size_t i : kept) {
    const std::string& scene = rows[i].utterance.scene_id;
    if (!scene_rows.count(scene)) scene_order.push_back(scene);
    scene_rows[scene].push_back(i);
  }

  for (const std::string& scene_id : scene_order) {
    const auto& members = scene_rows[scene_id];
    std::map<std::size_t, int> order_in_scene;
    for (std::size_t k = 0; k < members.size(); ++k)
      order_in_scene[members[k]] = static_cast<int>(k);

    SceneGold gold;
    gold.links.scene_id = scene_id;
    gold.partition.scene_id = scene_id;

    for (std::size_t k = 0; k < members.size(); ++k) {
      std::size_t i = members[k];
      const AnnotatedUtterance& row = rows[i];
      const std::string& old_id = row.utterance.utt_id;
      std::size_t parent_row = i;  // self until resolved otherwise

      switch (row.tag.kind) {
        case Tag::Kind::thread_start:
          break;
        case Tag::Kind::prev: {
          if (k == 0)
            throw DanglingReply(old_id +
                                " replies to the preceding utterance, but "
                                "none precedes it");
          parent_row = members[k - 1];
          break;
        }
        case Tag::Kind::reply_to: {
          const std::string& target = row.tag.target;
          auto hit = survivor_of.find(target);
          if (hit != survivor_of.end()) {
            parent_row = hit->second;
          } else if (all_utt_ids.count(target)) {
            // The exact sentence was skipped; fall back to the closest
            // preceding survivor of the same line.
            std::string target_line = target.substr(0, target.rfind('.'));
            bool repaired = false;
            auto siblings = line_survivors.find(target_line);
            if (siblings != line_survivors.end()) {
              for (std::size_t j : siblings->second) {
                if (j < i) {
                  parent_row = j;
                  repaired = true;
                }
              }
            }
            if (!repaired)
              throw DanglingReply(old_id + " replies to " + target +
                                  ", which was skipped and has no surviving "
                                  "sibling");
            result.warnings.push_back(
                old_id + " replied to skipped " + target + "; re-pointed at " +
                rows[parent_row].utterance.utt_id);
          } else if (all_line_ids.count(target)) {
            auto found = line_survivors.find(target);
            if (found == line_survivors.end())
              throw DanglingReply(old_id + " replies to fully skipped line " +
                                  target);
            const auto& sentences = found->second;
            parent_row =
                options.line_target == PostprocessOptions::LineTarget::last_sentence
                    ? sentences.back()
                    : sentences.front();
            if (sentences.size() > 1)
              result.warnings.push_back(
                  old_id + " replies to line " + target + "; resolved to " +
                  rows[parent_row].utterance.utt_id);
          } else {
            throw DanglingReply(old_id + " replies to nonexistent " + target);
          }
          break;
        }
        case Tag::Kind::skip:
        case Tag::Kind::discuss:
          break;  // removed or downgraded above
      }

      if (row.tag.kind == Tag::Kind::reply_to && parent_row == i)
        throw ForwardReply(old_id + " replies to itself");
      if (parent_row != i) {
        auto at = order_in_scene.find(parent_row);
        if (at == order_in_scene.end())
          throw DanglingReply(old_id + " replies to " + row.tag.target +
                              " in another scene");
        if (at->second >= static_cast<int>(k))
          throw ForwardReply(old_id + " replies to " +
                             rows[parent_row].utterance.utt_id +
                             ", which does not precede it");
      }

      Utterance rewritten = row.utterance;
      rewritten.utt_id = new_utt.at(old_id);
      rewritten.line_id = new_line.at(row.utterance.line_id);
      rewritten.turn_id = new_turn.at(row.utterance.turn_id);
      rewritten.position = static_cast<int>(k);
      gold.links.order.push_back(rewritten.utt_id);
      gold.links.parent[rewritten.utt_id] =
          new_utt.at(rows[parent_row].utterance.utt_id);
      result.survivors.push_back(std::move(rewritten));
    }

    gold.partition = threading::links_to_partition(gold.links);
    for (std::size_t k = 0; k < members.size(); ++k) {
      const AnnotatedUtterance& row = rows[members[k]];
      if (row.tag.kind != Tag::Kind::thread_start) continue;
      const std::string& label =
          gold.partition.assignment.at(gold.links.order[k]);
      gold.partition.start_flavor[label] = row.tag.flavor;
    }
    result.scenes.push_back(std::move(gold));
  }
  return result;
}

std::vector<Scene> scenes_from_utterances(const std::vector<Utterance>& utts) {
  std::vector<Scene> scenes;
  std::map<std::string, std::size_t> index_of;
  for (const Utterance& utt : utts) {
    auto [it, fresh] = index_of.emplace(utt.scene_id, scenes.size());
    if (fresh) {
      scenes.emplace_back();
      scenes.back().scene_id = utt.scene_id;
    }
    Scene& scene = scenes[it->second];
    DialogueTurn* turn = nullptr;
    if (!scene.elements.empty())
      turn = std::get_if<DialogueTurn>(&scene.elements.back());
    if (!turn || turn->turn_id != utt.turn_id) {
      DialogueTurn fresh_turn;
      fresh_turn.turn_id = utt.turn_id;
      fresh_turn.speaker = utt.speaker;
      scene.elements.emplace_back(std::move(fresh_turn));
      turn = std::get_if<DialogueTurn>(&scene.elements.back());
    }
    if (turn->lines.empty() || turn->lines.back().line_id != utt.line_id) {
      DialogueLine line;
      line.line_id = utt.line_id;
      turn->lines.push_back(std::move(line));
    }
    turn->lines.back().sentences.push_back(utt);
  }
  return scenes;
}

std::string emit_gold(const std::vector<SceneGold>& scenes) {
  std::string out;
  for (const SceneGold& scene : scenes) {
    for (const std::string& id : scene.links.order) {
      nlohmann::ordered_json j;
      j["scene_id"] = scene.links.scene_id;
      j["utt_id"] = id;
      j["parent_id"] = scene.links.parent.at(id);
      j["thread_label"] = scene.partition.assignment.at(id);
      out += j.dump();
      out += '\n';
    }
  }
  return out;
}

std::vector<SceneGold> read_gold(std::istream& in) {
  std::vector<SceneGold> scenes;
  std::map<std::string, std::size_t> index_of;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError("gold line " + std::to_string(row) + ": " + e.what());
    }
    for (const char* key : {"scene_id", "utt_id", "parent_id", "thread_label"})
      if (!j.contains(key) || !j[key].is_string())
        throw DataError("gold line " + std::to_string(row) +
                        " lacks string field " + key);
    std::string scene_id = j["scene_id"];
    auto [it, fresh] = index_of.emplace(scene_id, scenes.size());
    if (fresh) {
      scenes.emplace_back();
      scenes.back().links.scene_id = scene_id;
      scenes.back().partition.scene_id = scene_id;
    }
    SceneGold& scene = scenes[it->second];
    std::string utt_id = j["utt_id"];
    if (scene.links.parent.count(utt_id))
      throw DataError("gold line " + std::to_string(row) + ": duplicate " +
                      utt_id + " in scene " + scene_id);
    scene.links.order.push_back(utt_id);
    scene.links.parent[utt_id] = j["parent_id"];
    scene.partition.order.push_back(utt_id);
    scene.partition.assignment[utt_id] = j["thread_label"];
  }
  return scenes;
}

std::vector<SceneGold> read_gold_file(const std::string& path) {
  std::ifstream in(path);
  if (!in.good()) throw DataError("cannot open gold file " + path);
  return read_gold(in);
}

}  // namespace sthreads::annotation
