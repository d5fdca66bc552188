#include "sthreads/screenplay.hpp"

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "sthreads/types.hpp"

using namespace sthreads;
using namespace sthreads::screenplay;

namespace {

std::string read_file(const std::string& name) {
  std::ifstream in(std::string(STHREADS_TEST_DATA_DIR) + "/" + name);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

ParsedDocument parse_text(const std::string& text,
                          std::vector<std::string>* warnings = nullptr) {
  RawDocument doc;
  doc.title_slug = "fixture";
  doc.text = text;
  return parse_screenplay(doc, warnings);
}

const DialogueTurn& turn_at(const Scene& scene, std::size_t element) {
  REQUIRE(element < scene.elements.size());
  REQUIRE(std::holds_alternative<DialogueTurn>(scene.elements[element]));
  return std::get<DialogueTurn>(scene.elements[element]);
}

const ActionLine& action_at(const Scene& scene, std::size_t element) {
  REQUIRE(element < scene.elements.size());
  REQUIRE(std::holds_alternative<ActionLine>(scene.elements[element]));
  return std::get<ActionLine>(scene.elements[element]);
}

}  // namespace

TEST_CASE("scene headers open scenes") {
  auto doc = parse_text(
      "EXT. ONE OF THE EXITS\n\nEmily and Junior are standing by the door.\n");
  REQUIRE(doc.scenes.size() == 1);
  CHECK(doc.scenes[0].scene_id == "S1");
  CHECK(doc.scenes[0].header == "EXT. ONE OF THE EXITS");
  const auto& action = action_at(doc.scenes[0], 0);
  CHECK(action.action_id == "A1");
  CHECK(action.text == "Emily and Junior are standing by the door.");
}

TEST_CASE("uppercase flush-left lines are headers even without INT/EXT") {
  auto doc = parse_text("COLD OPEN\n\n    A\n    Hi.\n\nINT. ROOM - DAY\n");
  REQUIRE(doc.scenes.size() == 2);
  CHECK(doc.scenes[0].header == "COLD OPEN");
  CHECK(doc.scenes[1].header == "INT. ROOM - DAY");
}

TEST_CASE("two cue blocks become two turns with consecutive positions") {
  auto doc = parse_text(
      "INT. DINER - DAY\n\n"
      "    LORELAI\n"
      "    Please, Luke.\n\n"
      "    LUKE\n"
      "    How many cups have you had this morning?\n");
  REQUIRE(doc.scenes.size() == 1);
  const Scene& scene = doc.scenes[0];
  REQUIRE(scene.elements.size() == 2);
  const auto& first = turn_at(scene, 0);
  const auto& second = turn_at(scene, 1);
  CHECK(first.speaker == "LORELAI");
  CHECK(second.speaker == "LUKE");
  CHECK(first.turn_id == "L1");
  CHECK(second.turn_id == "L2");
  auto utts = scene.utterances();
  REQUIRE(utts.size() == 2);
  CHECK(utts[0]->position == 0);
  CHECK(utts[1]->position == 1);
  CHECK(utts[0]->utt_id == "D1.1");
  CHECK(utts[1]->utt_id == "D2.1");
  CHECK(utts[0]->speaker == "LORELAI");
}

TEST_CASE("dialogue lines split into sentence utterances") {
  auto doc = parse_text(
      "INT. YARD - DAY\n\n"
      "    EARLY BIRD\n"
      "    Gotta catch me that worm. See ya.\n");
  auto utts = doc.scenes[0].utterances();
  REQUIRE(utts.size() == 2);
  CHECK(utts[0]->utt_id == "D1.1");
  CHECK(utts[1]->utt_id == "D1.2");
  CHECK(utts[0]->text == "Gotta catch me that worm.");
  CHECK(utts[1]->text == "See ya.");
  CHECK(utts[0]->line_id == utts[1]->line_id);
  CHECK(utts[0]->position == 0);
  CHECK(utts[1]->position == 1);
}

TEST_CASE("wrapped dialogue joins into one line") {
  auto doc = parse_text(
      "INT. ROOM - DAY\n\n"
      "    ANNOUNCER\n"
      "    This is a very long sentence that the\n"
      "    typesetter wrapped onto a second line.\n");
  auto utts = doc.scenes[0].utterances();
  REQUIRE(utts.size() == 1);
  CHECK(utts[0]->text ==
        "This is a very long sentence that the typesetter wrapped onto a "
        "second line.");
}

TEST_CASE("uppercase shouting at dialogue depth stays dialogue") {
  auto doc = parse_text(
      "INT. HALLWAY - MORNING\n\n"
      "    KID\n"
      "    MOM, I CAN'T FIND MY BOWTIE! WHERE IS IT?\n");
  const Scene& scene = doc.scenes[0];
  REQUIRE(scene.elements.size() == 1);
  auto utts = scene.utterances();
  REQUIRE(utts.size() == 2);
  CHECK(utts[0]->speaker == "KID");
  CHECK(utts[0]->text == "MOM, I CAN'T FIND MY BOWTIE!");
}

TEST_CASE("deeper uppercase line at cue depth opens the next turn") {
  auto doc = parse_text(
      "INT. DINER - DAY\n\n"
      "      LORELAI\n"
      "    Please, Luke.\n"
      "      LUKE\n"
      "    How many cups have you had this morning?\n");
  const Scene& scene = doc.scenes[0];
  REQUIRE(scene.elements.size() == 2);
  CHECK(turn_at(scene, 0).speaker == "LORELAI");
  CHECK(turn_at(scene, 1).speaker == "LUKE");
}

TEST_CASE("continuation cue extends the previous turn") {
  auto doc = parse_text(
      "INT. KITCHEN - DAY\n\n"
      "    MOM\n"
      "    Breakfast is ready.\n\n"
      "She sets the table.\n\n"
      "    MOM (CONT'D)\n"
      "    Come down right now, please.\n");
  const Scene& scene = doc.scenes[0];
  REQUIRE(scene.elements.size() == 3);
  const auto& first = turn_at(scene, 0);
  const auto& action = action_at(scene, 1);
  const auto& continuation = turn_at(scene, 2);
  CHECK(first.turn_id == continuation.turn_id);
  CHECK(action.text == "She sets the table.");
  CHECK(count_stats(doc).turns == 1);
  auto utts = scene.utterances();
  REQUIRE(utts.size() == 2);
  CHECK(utts[0]->turn_id == utts[1]->turn_id);
  CHECK(utts[0]->position == 0);
  CHECK(utts[1]->position == 1);
}

TEST_CASE("continuation against a different speaker opens a fresh turn") {
  std::vector<std::string> warnings;
  auto doc = parse_text(
      "INT. ROOM - DAY\n\n"
      "    ANNA\n"
      "    Hello.\n\n"
      "    BEN (CONT'D)\n"
      "    Hi there.\n",
      &warnings);
  const Scene& scene = doc.scenes[0];
  CHECK(turn_at(scene, 0).turn_id != turn_at(scene, 1).turn_id);
  CHECK(!warnings.empty());
}

TEST_CASE("offscreen and voiceover markers strip from the speaker") {
  auto doc = parse_text(
      "INT. HOUSE - DAY\n\n"
      "    NARRATOR (V.O.)\n"
      "    Nobody believed him.\n\n"
      "    KID (O.S.)\n"
      "    Can somebody help me?\n");
  const Scene& scene = doc.scenes[0];
  const auto& narrator = turn_at(scene, 0);
  const auto& kid = turn_at(scene, 1);
  CHECK(narrator.speaker == "NARRATOR");
  CHECK(narrator.voice_over);
  CHECK_FALSE(narrator.off_screen);
  CHECK(kid.speaker == "KID");
  CHECK(kid.off_screen);
  CHECK_FALSE(kid.voice_over);
  CHECK(scene.utterances()[1]->speaker == "KID");
}

TEST_CASE("parentheticals attach as stage direction") {
  auto doc = parse_text(
      "INT. DINER - DAY\n\n"
      "    LUKE\n"
      "    (pouring coffee)\n"
      "    This is the last one.\n"
      "    (beat)\n"
      "    No more.\n");
  const Scene& scene = doc.scenes[0];
  const auto& turn = turn_at(scene, 0);
  REQUIRE(turn.stage_directions.size() == 2);
  CHECK(turn.stage_directions[0] == "(pouring coffee)");
  CHECK(turn.stage_directions[1] == "(beat)");
  // The parenthetical splits the speech into two dialogue lines.
  REQUIRE(turn.lines.size() == 2);
  CHECK(turn.lines[0].sentences[0].text == "This is the last one.");
  CHECK(turn.lines[1].sentences[0].text == "No more.");
}

TEST_CASE("a cue with no dialogue is demoted to action with a warning") {
  std::vector<std::string> warnings;
  auto doc = parse_text(
      "INT. ROOM - DAY\n\n"
      "    ORPHAN CUE\n\n"
      "Another person walks in.\n",
      &warnings);
  const Scene& scene = doc.scenes[0];
  REQUIRE(scene.elements.size() == 2);
  CHECK(action_at(scene, 0).text == "ORPHAN CUE");
  CHECK(action_at(scene, 1).text == "Another person walks in.");
  REQUIRE_FALSE(warnings.empty());
  CHECK(warnings[0].find("ORPHAN CUE") != std::string::npos);
  CHECK(scene.utterances().empty());
}

TEST_CASE("action paragraphs merge consecutive flush-left lines") {
  auto doc = parse_text(
      "INT. ROOM - DAY\n\n"
      "The room is dark.\n"
      "A clock ticks on the wall.\n\n"
      "Somewhere, a dog barks.\n");
  const Scene& scene = doc.scenes[0];
  REQUIRE(scene.elements.size() == 2);
  CHECK(action_at(scene, 0).text == "The room is dark. A clock ticks on the wall.");
  CHECK(action_at(scene, 1).text == "Somewhere, a dog barks.");
  CHECK(action_at(scene, 0).action_id == "A1");
  CHECK(action_at(scene, 1).action_id == "A2");
}

TEST_CASE("preamble before the first header is dropped with a warning") {
  std::vector<std::string> warnings;
  auto doc = parse_text(
      "my great screenplay\nby someone or other\n\n"
      "INT. ROOM - DAY\n\nHello there.\n",
      &warnings);
  REQUIRE(doc.scenes.size() == 1);
  CHECK(doc.scenes[0].elements.size() == 1);
  REQUIRE_FALSE(warnings.empty());
  CHECK(warnings[0].find("before the first scene header") != std::string::npos);
}

TEST_CASE("documents without any header are rejected") {
  CHECK_THROWS_AS(parse_text("just some prose\nwithout any header\n"),
                  UnparsableDocument);
  RawDocument empty;
  empty.title_slug = "empty";
  CHECK_THROWS_AS(parse_screenplay(empty), UnparsableDocument);
}

TEST_CASE("cue parsing handles names and markers") {
  CueInfo plain = parse_cue("LORELAI");
  CHECK(plain.speaker == "LORELAI");
  CHECK_FALSE(plain.off_screen);

  CueInfo os = parse_cue("SHELDON (O.S.)");
  CHECK(os.speaker == "SHELDON");
  CHECK(os.off_screen);

  CueInfo stacked = parse_cue("MARY (V.O.) (CONT'D)");
  CHECK(stacked.speaker == "MARY");
  CHECK(stacked.voice_over);
  CHECK(stacked.continued);

  CueInfo lower = parse_cue("sheldon (o.s.)");
  CHECK(lower.speaker == "SHELDON");
  CHECK(lower.off_screen);

  CueInfo directed = parse_cue("COP #2 (into radio)");
  CHECK(directed.speaker == "COP #2");
  REQUIRE(directed.directions.size() == 1);
  CHECK(directed.directions[0] == "into radio");

  CueInfo spaced = parse_cue("  GEORGE   JR  ");
  CHECK(spaced.speaker == "GEORGE JR");
}

TEST_CASE("positions are contiguous per scene") {
  auto doc = parse_text(read_file("breakfast.txt"));
  REQUIRE(doc.scenes.size() == 1);
  auto utts = doc.scenes[0].utterances();
  REQUIRE(utts.size() == 13);
  for (std::size_t i = 0; i < utts.size(); ++i)
    CHECK(utts[i]->position == static_cast<int>(i));
  DocumentStats stats = count_stats(doc);
  CHECK(stats.scenes == 1);
  CHECK(stats.turns == 13);
  CHECK(stats.dialogue_lines == 13);
  CHECK(stats.action_lines == 1);
  CHECK(stats.utterances == 13);
  // The collar request comes from off screen.
  bool found = false;
  for (const auto& element : doc.scenes[0].elements) {
    if (const auto* turn = std::get_if<DialogueTurn>(&element)) {
      if (turn->speaker == "KID") {
        CHECK(turn->off_screen);
        found = true;
      }
    }
  }
  CHECK(found);
}

TEST_CASE("canonical emission round-trips byte for byte") {
  auto doc = parse_text(read_file("breakfast.txt"));
  std::string first = emit_canonical(doc);
  std::istringstream in(first);
  auto docs = read_canonical(in);
  REQUIRE(docs.size() == 1);
  std::string second = emit_canonical(docs[0]);
  CHECK(first == second);

  // Reconstructed structure matches the original counts.
  DocumentStats a = count_stats(doc);
  DocumentStats b = count_stats(docs[0]);
  CHECK(a.turns == b.turns);
  CHECK(a.dialogue_lines == b.dialogue_lines);
  CHECK(a.action_lines == b.action_lines);
  CHECK(a.utterances == b.utterances);
}

TEST_CASE("canonical records carry the right fields") {
  auto doc = parse_text(
      "INT. ROOM - DAY\n\nA door opens.\n\n    ANNA\n    Hello there. Come in.\n");
  std::string jsonl = emit_canonical(doc);
  std::istringstream in(jsonl);
  std::string line;
  std::vector<nlohmann::ordered_json> records;
  while (std::getline(in, line)) records.push_back(nlohmann::ordered_json::parse(line));
  REQUIRE(records.size() == 3);

  const auto& action = records[0];
  CHECK(action.at("kind") == "action");
  CHECK(action.at("title") == "fixture");
  CHECK(action.at("scene_id") == "S1");
  CHECK_FALSE(action.contains("speaker"));
  CHECK_FALSE(action.contains("utt_id"));
  CHECK_FALSE(action.contains("position"));

  const auto& utt = records[1];
  CHECK(utt.at("kind") == "dialogue");
  for (const char* key :
       {"title", "scene_id", "turn_id", "line_id", "utt_id", "speaker",
        "position", "text"})
    CHECK(utt.contains(key));
  CHECK(utt.at("utt_id") == "D1.1");
  CHECK(utt.at("position") == 0);
  CHECK(records[2].at("utt_id") == "D1.2");
  CHECK(records[2].at("position") == 1);

  // Field order is stable.
  std::istringstream again(jsonl);
  std::getline(again, line);
  CHECK(line.rfind("{\"title\":", 0) == 0);
}

TEST_CASE("canonical reader rejects malformed rows") {
  std::istringstream bad("not json\n");
  CHECK_THROWS_AS(read_canonical(bad), DataError);
  std::istringstream missing(R"({"title":"t","scene_id":"S1","kind":"dialogue"})"
                             "\n");
  CHECK_THROWS_AS(read_canonical(missing), DataError);
  std::istringstream unknown(R"({"title":"t","scene_id":"S1","kind":"song","text":"x"})"
                             "\n");
  CHECK_THROWS_AS(read_canonical(unknown), DataError);
}

TEST_CASE("multiple titles split on read") {
  std::string jsonl =
      R"({"title":"a","scene_id":"S1","kind":"action","line_id":"A1","text":"x"})"
      "\n"
      R"({"title":"b","scene_id":"S1","kind":"action","line_id":"A1","text":"y"})"
      "\n";
  std::istringstream in(jsonl);
  auto docs = read_canonical(in);
  REQUIRE(docs.size() == 2);
  CHECK(docs[0].title == "a");
  CHECK(docs[1].title == "b");
}

TEST_CASE("slugify produces filesystem-safe names") {
  CHECK(slugify("The Big Heat (1953)") == "the-big-heat-1953");
  CHECK(slugify("  Spaced   Out!  ") == "spaced-out");
  CHECK(slugify("già")== "gi");
  CHECK(slugify("...") == "untitled");
}
