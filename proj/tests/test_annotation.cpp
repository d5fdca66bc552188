#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "sthreads/annotation.hpp"
#include "sthreads/screenplay.hpp"
#include "sthreads/threading.hpp"

using namespace sthreads;
using namespace sthreads::annotation;

namespace {

std::string data_path(const std::string& name) {
  return std::string(STHREADS_TEST_DATA_DIR) + "/" + name;
}

std::vector<AnnotatedUtterance> read_tsv(const std::string& text,
                                         const ColumnMap& columns = {}) {
  std::istringstream in(text);
  return read_annotations(in, columns);
}

// Rows of (line_id, tag) become single-sentence utterances of one scene.
std::vector<AnnotatedUtterance> rows_of(
    const std::vector<std::pair<std::string, std::string>>& rows) {
  std::string tsv = "scene_id\tturn_id\tline_id\tspeaker\ttext\ttags\n";
  int n = 0;
  for (const auto& [line_id, tag] : rows) {
    ++n;
    tsv += "S1\tL" + std::to_string(n) + "\t" + line_id + "\tWHO\tline " +
           std::to_string(n) + ".\t" + tag + "\n";
  }
  return read_tsv(tsv);
}

bool warned(const PostprocessResult& result, const std::string& needle) {
  for (const auto& w : result.warnings)
    if (w.find(needle) != std::string::npos) return true;
  return false;
}

}  // namespace

TEST_CASE("parse_tag covers the whole symbol set") {
  CHECK(parse_tag("T").kind == Tag::Kind::thread_start);
  CHECK(parse_tag("T").flavor == 'T');
  CHECK(parse_tag("F").flavor == 'F');
  CHECK(parse_tag("P").flavor == 'P');
  CHECK(parse_tag("-").kind == Tag::Kind::prev);
  CHECK(parse_tag("S").kind == Tag::Kind::skip);
  CHECK(parse_tag("X").kind == Tag::Kind::discuss);
  CHECK(parse_tag("D45").kind == Tag::Kind::reply_to);
  CHECK(parse_tag("D45").target == "D45");
  CHECK(parse_tag("D45.2").target == "D45.2");
  CHECK(parse_tag("  D7 ").target == "D7");
}

TEST_CASE("parse_tag rejects symbols outside the set") {
  CHECK_THROWS_AS(parse_tag("Q"), UnknownTag);
  CHECK_THROWS_AS(parse_tag("D"), UnknownTag);
  CHECK_THROWS_AS(parse_tag(""), UnknownTag);
  CHECK_THROWS_AS(parse_tag("t"), UnknownTag);
}

TEST_CASE("read_annotations yields one utterance per sentence") {
  auto rows = read_tsv(
      "scene_id\tturn_id\tline_id\tspeaker\ttext\ttags\n"
      "S1\tL1\tD1\tANN\tHello there. How are you?\tT|-\n"
      "S1\tL2\tD2\tBOB\tFine.\t-\n");
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].utterance.utt_id == "D1.1");
  CHECK(rows[0].utterance.text == "Hello there.");
  CHECK(rows[0].tag.kind == Tag::Kind::thread_start);
  CHECK(rows[1].utterance.utt_id == "D1.2");
  CHECK(rows[1].utterance.text == "How are you?");
  CHECK(rows[1].tag.kind == Tag::Kind::prev);
  CHECK(rows[2].utterance.utt_id == "D2.1");
  CHECK(rows[2].utterance.speaker == "BOB");
  CHECK(rows[0].utterance.position == 0);
  CHECK(rows[1].utterance.position == 1);
  CHECK(rows[2].utterance.position == 2);
}

TEST_CASE("read_annotations keeps single-tag rows verbatim") {
  // One tag means one utterance, even if segmentation would split it.
  auto rows = read_tsv(
      "scene_id\tturn_id\tline_id\tspeaker\ttext\ttags\n"
      "S1\tL1\tD1\tANN\tWait. Stop right there.\tT\n");
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].utterance.text == "Wait. Stop right there.");
}

TEST_CASE("read_annotations counts sentences per line across rows") {
  auto rows = read_tsv(
      "scene_id\tturn_id\tline_id\tspeaker\ttext\ttags\n"
      "S1\tL1\tD1\tANN\tFirst sentence.\tT\n"
      "S1\tL1\tD1\tANN\tSecond sentence.\t-\n");
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].utterance.utt_id == "D1.1");
  CHECK(rows[1].utterance.utt_id == "D1.2");
}

TEST_CASE("read_annotations preserves dummy IDs") {
  auto rows = read_tsv(
      "scene_id\tturn_id\tline_id\tspeaker\ttext\ttags\n"
      "S1\tLa\tDa\tANN\tUnnumbered aside.\tT\n");
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].utterance.turn_id == "La");
  CHECK(rows[0].utterance.line_id == "Da");
  CHECK(rows[0].utterance.utt_id == "Da.1");
}

TEST_CASE("read_annotations drops action rows") {
  auto rows = read_tsv(
      "scene_id\tturn_id\tline_id\tspeaker\ttext\ttags\n"
      "S1\t\tA\t\tA door slams.\t\n"
      "S1\tL1\tD1\tANN\tWho's there?\tT\n"
      "S1\t\tA7\t\tSilence.\t\n");
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].utterance.utt_id == "D1.1");
  CHECK(rows[0].utterance.position == 0);
}

TEST_CASE("read_annotations errors on tag/sentence mismatch") {
  CHECK_THROWS_AS(read_tsv("scene_id\tturn_id\tline_id\tspeaker\ttext\ttags\n"
                           "S1\tL1\tD1\tANN\tOnly one sentence here.\tT|-|-\n"),
                  DataError);
}

TEST_CASE("read_annotations errors on unknown tags and missing columns") {
  CHECK_THROWS_AS(read_tsv("scene_id\tturn_id\tline_id\tspeaker\ttext\ttags\n"
                           "S1\tL1\tD1\tANN\tHm.\tQ\n"),
                  UnknownTag);
  CHECK_THROWS_AS(read_tsv("scene_id\tturn_id\tline_id\tspeaker\ttext\n"
                           "S1\tL1\tD1\tANN\tHm.\n"),
                  ColumnMissing);
  CHECK_THROWS_AS(read_tsv("scene_id\tturn_id\tline_id\tspeaker\ttext\ttags\n"
                           "S1\tL1\tD1\n"),
                  DataError);
}

TEST_CASE("read_annotations takes indices when there is no header") {
  ColumnMap columns;
  columns.has_header = false;
  columns.scene_id = "";
  columns.turn_id = "0";
  columns.line_id = "1";
  columns.speaker = "2";
  columns.text = "3";
  columns.tags = "4";
  columns.default_scene = "S9";
  auto rows = read_tsv("L1\tD1\tANN\tHi.\tT\n", columns);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].utterance.scene_id == "S9");

  columns.tags = "tags";
  CHECK_THROWS_AS(read_tsv("L1\tD1\tANN\tHi.\tT\n", columns), ColumnMissing);
}

TEST_CASE("read_annotations handles quoted CSV") {
  ColumnMap columns;
  columns.delimiter = ',';
  auto rows = read_tsv(
      "scene_id,turn_id,line_id,speaker,text,tags\n"
      "S1,L1,D1,ANN,\"Well, well. Look who it is.\",T|-\n",
      columns);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].utterance.text == "Well, well.");
  CHECK(rows[1].utterance.text == "Look who it is.");
}

TEST_CASE("postprocess applies plain thread-start runs") {
  auto result = postprocess(rows_of(
      {{"D1", "T"}, {"D2", "-"}, {"D3", "-"}, {"D4", "P"}, {"D5", "-"}}));
  REQUIRE(result.scenes.size() == 1);
  const auto& part = result.scenes[0].partition;
  CHECK(part.assignment.at("D1.1") == "T1");
  CHECK(part.assignment.at("D2.1") == "T1");
  CHECK(part.assignment.at("D3.1") == "T1");
  CHECK(part.assignment.at("D4.1") == "T2");
  CHECK(part.assignment.at("D5.1") == "T2");
  CHECK(part.start_flavor.at("T1") == 'T');
  CHECK(part.start_flavor.at("T2") == 'P');
  CHECK(result.warnings.empty());
}

TEST_CASE("postprocess resolves explicit reply targets") {
  auto result = postprocess(rows_of(
      {{"D1", "T"}, {"D2", "-"}, {"D3", "D1"}, {"D4", "F"}, {"D5", "D4"}}));
  const auto& links = result.scenes[0].links;
  CHECK(links.parent.at("D1.1") == "D1.1");
  CHECK(links.parent.at("D2.1") == "D1.1");
  CHECK(links.parent.at("D3.1") == "D1.1");
  CHECK(links.parent.at("D4.1") == "D4.1");
  CHECK(links.parent.at("D5.1") == "D4.1");
  const auto& part = result.scenes[0].partition;
  CHECK(part.assignment.at("D3.1") == "T1");
  CHECK(part.assignment.at("D5.1") == "T2");
}

TEST_CASE("postprocess deletes skips and renumbers densely") {
  auto result = postprocess(rows_of({{"D45", "T"},
                                     {"D46", "S"},
                                     {"D47", "-"},
                                     {"D48", "D45"}}));
  const auto& links = result.scenes[0].links;
  REQUIRE(links.order.size() == 3);
  CHECK(links.order[0] == "D1.1");
  CHECK(links.order[1] == "D2.1");
  CHECK(links.order[2] == "D3.1");
  // The survivor of the deletion slides up one slot.
  CHECK(result.id_map.at("D47") == "D2");
  CHECK(result.id_map.at("D47.1") == "D2.1");
  CHECK(result.id_map.at("D48") == "D3");
  CHECK(result.id_map.count("D46") == 0);
  // Prev skips over the deleted row.
  CHECK(links.parent.at("D2.1") == "D1.1");
  CHECK(links.parent.at("D3.1") == "D1.1");
}

TEST_CASE("postprocess renumbers dummy IDs into conventional ones") {
  auto rows = read_tsv(
      "scene_id\tturn_id\tline_id\tspeaker\ttext\ttags\n"
      "S1\tLa\tDa\tANN\tFound page.\tT\n"
      "S1\tL1\tD1\tBOB\tReply.\t-\n");
  auto result = postprocess(rows);
  CHECK(result.id_map.at("Da") == "D1");
  CHECK(result.id_map.at("La") == "L1");
  CHECK(result.id_map.at("D1") == "D2");
  CHECK(result.id_map.at("L1") == "L2");
  CHECK(result.survivors[0].utt_id == "D1.1");
  CHECK(result.survivors[1].utt_id == "D2.1");
}

TEST_CASE("postprocess is the identity on clean input") {
  auto result = postprocess(rows_of(
      {{"D1", "T"}, {"D2", "-"}, {"D3", "T"}, {"D4", "D2"}}));
  for (const auto& [old_id, new_id] : result.id_map) CHECK(old_id == new_id);
  CHECK(result.warnings.empty());
  REQUIRE(result.survivors.size() == 4);
  for (int i = 0; i < 4; ++i) CHECK(result.survivors[i].position == i);
}

TEST_CASE("postprocess repairs replies to skipped sentences") {
  auto rows = read_tsv(
      "scene_id\tturn_id\tline_id\tspeaker\ttext\ttags\n"
      "S1\tL1\tD1\tANN\tKeep this. Drop this garbled bit.\tT|S\n"
      "S1\tL2\tD2\tBOB\tReplying to the dropped part.\tD1.2\n");
  auto result = postprocess(rows);
  const auto& links = result.scenes[0].links;
  CHECK(links.parent.at("D2.1") == "D1.1");
  CHECK(warned(result, "re-pointed"));
}

TEST_CASE("postprocess rejects replies with no surviving sibling") {
  auto result_rows = rows_of({{"D1", "T"}, {"D2", "S"}, {"D3", "D2.1"}});
  CHECK_THROWS_AS(postprocess(result_rows), DanglingReply);
  CHECK_THROWS_AS(postprocess(rows_of({{"D1", "T"}, {"D2", "S"},
                                       {"D3", "D2"}})),
                  DanglingReply);
}

TEST_CASE("postprocess resolves line-level targets per configuration") {
  auto rows = read_tsv(
      "scene_id\tturn_id\tline_id\tspeaker\ttext\ttags\n"
      "S1\tL1\tD1\tANN\tTwo parts here. Second part.\tT|-\n"
      "S1\tL2\tD2\tBOB\tWhich part?\tD1\n");
  auto last = postprocess(rows);
  CHECK(last.scenes[0].links.parent.at("D2.1") == "D1.2");
  CHECK(warned(last, "resolved to"));

  PostprocessOptions options;
  options.line_target = PostprocessOptions::LineTarget::first_sentence;
  auto first = postprocess(rows, options);
  CHECK(first.scenes[0].links.parent.at("D2.1") == "D1.1");
}

TEST_CASE("postprocess downgrades Discuss to Prev with a warning") {
  auto result = postprocess(rows_of({{"D1", "T"}, {"D2", "X"}}));
  CHECK(result.scenes[0].links.parent.at("D2.1") == "D1.1");
  CHECK(warned(result, "X"));
}

TEST_CASE("postprocess rejects forward and dangling replies") {
  CHECK_THROWS_AS(postprocess(rows_of({{"D1", "D2"}, {"D2", "T"}})),
                  ForwardReply);
  CHECK_THROWS_AS(postprocess(rows_of({{"D1", "T"}, {"D2", "D2.1"}})),
                  ForwardReply);
  CHECK_THROWS_AS(postprocess(rows_of({{"D1", "T"}, {"D2", "D9"}})),
                  DanglingReply);
  CHECK_THROWS_AS(postprocess(rows_of({{"D1", "-"}, {"D2", "T"}})),
                  DanglingReply);
}

TEST_CASE("postprocess keeps scenes separate") {
  auto rows = read_tsv(
      "scene_id\tturn_id\tline_id\tspeaker\ttext\ttags\n"
      "S1\tL1\tD1\tANN\tScene one start.\tT\n"
      "S1\tL2\tD2\tBOB\tScene one reply.\t-\n"
      "S2\tL3\tD3\tANN\tScene two start.\tT\n"
      "S2\tL4\tD4\tBOB\tScene two reply.\t-\n");
  auto result = postprocess(rows);
  REQUIRE(result.scenes.size() == 2);
  CHECK(result.scenes[0].links.scene_id == "S1");
  CHECK(result.scenes[1].links.scene_id == "S2");
  CHECK(result.scenes[1].links.parent.at("D4.1") == "D3.1");
  // Positions restart per scene; IDs run document-wide.
  CHECK(result.survivors[2].position == 0);
  CHECK(result.survivors[2].utt_id == "D3.1");

  // A cross-scene reply target does not resolve.
  auto bad = read_tsv(
      "scene_id\tturn_id\tline_id\tspeaker\ttext\ttags\n"
      "S1\tL1\tD1\tANN\tScene one start.\tT\n"
      "S2\tL2\tD2\tBOB\tScene two reply.\tD1\n");
  CHECK_THROWS_AS(postprocess(bad), DanglingReply);
}

TEST_CASE("gold links round-trip through JSONL") {
  auto result = postprocess(rows_of(
      {{"D1", "T"}, {"D2", "-"}, {"D3", "T"}, {"D4", "D2"}, {"D5", "-"}}));
  std::string text = emit_gold(result.scenes);
  std::istringstream in(text);
  auto back = read_gold(in);
  REQUIRE(back.size() == 1);
  CHECK(back[0].links.order == result.scenes[0].links.order);
  CHECK(back[0].links.parent == result.scenes[0].links.parent);
  CHECK(back[0].partition.assignment == result.scenes[0].partition.assignment);
  std::istringstream again(emit_gold(back));
  CHECK(emit_gold(read_gold(again)) == text);
}

TEST_CASE("read_gold rejects malformed rows") {
  std::istringstream bad_json("not json\n");
  CHECK_THROWS_AS(read_gold(bad_json), DataError);
  std::istringstream missing(R"({"scene_id":"S1","utt_id":"D1.1"})" "\n");
  CHECK_THROWS_AS(read_gold(missing), DataError);
  std::istringstream dup(
      R"({"scene_id":"S1","utt_id":"D1.1","parent_id":"D1.1","thread_label":"T1"})"
      "\n"
      R"({"scene_id":"S1","utt_id":"D1.1","parent_id":"D1.1","thread_label":"T1"})"
      "\n");
  CHECK_THROWS_AS(read_gold(dup), DataError);
}

TEST_CASE("breakfast annotations line up with the parsed screenplay") {
  std::ifstream in(data_path("breakfast_gold.tsv"));
  REQUIRE(in.good());
  auto rows = read_annotations(in);
  REQUIRE(rows.size() == 13);
  auto result = postprocess(rows);
  REQUIRE(result.scenes.size() == 1);
  CHECK(result.warnings.empty());
  for (const auto& [old_id, new_id] : result.id_map) CHECK(old_id == new_id);

  std::ifstream script(data_path("breakfast.txt"));
  std::ostringstream buf;
  buf << script.rdbuf();
  auto doc = screenplay::parse_screenplay(
      RawDocument{"breakfast", SourceKind::movie, buf.str()});
  auto utts = doc.scenes[0].utterances();
  REQUIRE(utts.size() == result.survivors.size());
  for (std::size_t i = 0; i < utts.size(); ++i) {
    CHECK(utts[i]->utt_id == result.survivors[i].utt_id);
    CHECK(utts[i]->speaker == result.survivors[i].speaker);
    CHECK(utts[i]->position == result.survivors[i].position);
    CHECK(utts[i]->text == result.survivors[i].text);
  }

  auto stats =
      threading::thread_stats(result.scenes[0].partition, doc.scenes[0]);
  REQUIRE(stats.threads.size() == 4);
  CHECK(stats.threads[0].size == 4);
  CHECK(stats.threads[1].size == 4);
  CHECK(stats.threads[2].size == 2);
  CHECK(stats.threads[3].size == 3);
  CHECK(stats.threads[2].start_speaker == "KID");
  CHECK(result.scenes[0].partition.start_flavor.at("T3") == 'P');
  CHECK(result.scenes[0].partition.start_flavor.at("T4") == 'F');
  CHECK(threading::validate_links(result.scenes[0].links, doc.scenes[0])
            .empty());
}
