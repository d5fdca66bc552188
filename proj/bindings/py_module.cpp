// Python bindings for the screenplay conversation threading toolkit.
//
// The module trades in the toolkit's interchange formats: canonical corpus
// JSONL and gold-link JSONL travel as strings, models and reports as plain
// dicts. That keeps the Python surface aligned with what the CLI reads and
// writes, so artifacts move freely between the two.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "sthreads/analytics.hpp"
#include "sthreads/annotation.hpp"
#include "sthreads/linkmodel.hpp"
#include "sthreads/metrics.hpp"
#include "sthreads/screenplay.hpp"
#include "sthreads/threading.hpp"
#include "sthreads/types.hpp"

namespace py = pybind11;
using nlohmann::json;
using nlohmann::ordered_json;
using namespace sthreads;

namespace {

// --- JSON <-> Python -------------------------------------------------------

py::object json_to_py(const json& j) {
  switch (j.type()) {
    case json::value_t::null:
      return py::none();
    case json::value_t::boolean:
      return py::bool_(j.get<bool>());
    case json::value_t::number_integer:
      return py::int_(j.get<std::int64_t>());
    case json::value_t::number_unsigned:
      return py::int_(j.get<std::uint64_t>());
    case json::value_t::number_float:
      return py::float_(j.get<double>());
    case json::value_t::string:
      return py::str(j.get<std::string>());
    case json::value_t::array: {
      py::list out;
      for (const auto& item : j) out.append(json_to_py(item));
      return out;
    }
    case json::value_t::object: {
      py::dict out;
      for (const auto& [key, value] : j.items())
        out[py::str(key)] = json_to_py(value);
      return out;
    }
    default:
      return py::none();
  }
}

py::object json_to_py(const ordered_json& j) {
  return json_to_py(json(j));
}

json py_to_json(const py::handle& h) {
  if (h.is_none()) return nullptr;
  if (py::isinstance<py::bool_>(h)) return h.cast<bool>();
  if (py::isinstance<py::int_>(h)) return h.cast<std::int64_t>();
  if (py::isinstance<py::float_>(h)) return h.cast<double>();
  if (py::isinstance<py::str>(h)) return h.cast<std::string>();
  if (py::isinstance<py::list>(h) || py::isinstance<py::tuple>(h)) {
    json arr = json::array();
    for (const auto& item : h) arr.push_back(py_to_json(item));
    return arr;
  }
  if (py::isinstance<py::dict>(h)) {
    json obj = json::object();
    for (const auto& item : h.cast<py::dict>())
      obj[item.first.cast<std::string>()] = py_to_json(item.second);
    return obj;
  }
  throw py::type_error("value is not JSON-representable");
}

// --- shared plumbing ---------------------------------------------------------

ParsedDocument one_document(const std::string& canonical) {
  std::istringstream in(canonical);
  auto docs = screenplay::read_canonical(in);
  if (docs.size() != 1)
    throw DataError("expected exactly one document, got " +
                    std::to_string(docs.size()));
  return docs[0];
}

std::map<std::string, annotation::SceneGold> gold_by_scene(
    const std::string& gold_jsonl) {
  std::istringstream in(gold_jsonl);
  std::map<std::string, annotation::SceneGold> out;
  for (auto& sg : annotation::read_gold(in)) {
    auto id = sg.links.scene_id;
    if (!out.emplace(id, std::move(sg)).second)
      throw DataError("duplicate scene '" + id + "' in gold links");
  }
  return out;
}

// Pair a parsed document with its gold links; every gold scene must exist
// in the document, while document scenes without gold are skipped.
std::vector<linkmodel::LabeledScene> labeled_scenes(
    const std::string& canonical, const std::string& gold_jsonl) {
  auto doc = one_document(canonical);
  auto gold = gold_by_scene(gold_jsonl);
  std::vector<linkmodel::LabeledScene> out;
  for (const auto& scene : doc.scenes) {
    auto it = gold.find(scene.scene_id);
    if (it != gold.end()) out.push_back({scene, it->second.links});
    gold.erase(scene.scene_id);
  }
  if (!gold.empty())
    throw DataError("gold links name scene '" + gold.begin()->first +
                    "' which is not in the corpus document");
  return out;
}

GoldLinks links_from_py(const py::dict& d) {
  GoldLinks links;
  links.scene_id = d.contains("scene_id")
                       ? d["scene_id"].cast<std::string>()
                       : std::string("S1");
  links.order = d["order"].cast<std::vector<std::string>>();
  for (const auto& item : d["parent"].cast<py::dict>())
    links.parent[item.first.cast<std::string>()] =
        item.second.cast<std::string>();
  return links;
}

ordered_json interval_json(const metrics::Interval& i) {
  ordered_json out;
  out["point"] = i.point;
  if (i.has_ci) {
    out["lo"] = i.lo;
    out["hi"] = i.hi;
  } else {
    out["lo"] = nullptr;
    out["hi"] = nullptr;
  }
  return out;
}

ordered_json report_json(const metrics::MetricsReport& r) {
  ordered_json out;
  out["link_accuracy"] = interval_json(r.link_accuracy);
  out["ari"] = interval_json(r.ari);
  out["one_minus_vi"] = interval_json(r.one_minus_vi);
  out["shen_f1"] = interval_json(r.shen_f1);
  out["one_to_one"] = interval_json(r.one_to_one);
  out["exact_match_f1"] = interval_json(r.exact_match_f1);
  return out;
}

SourceKind parse_kind(const std::string& kind) {
  if (kind == "movie") return SourceKind::movie;
  if (kind == "tv_pilot") return SourceKind::tv_pilot;
  throw std::invalid_argument("kind must be 'movie' or 'tv_pilot'");
}

linkmodel::ScorerModel::Architecture parse_architecture(
    const std::string& name) {
  if (name == "linear") return linkmodel::ScorerModel::Architecture::linear;
  if (name == "one_hidden")
    return linkmodel::ScorerModel::Architecture::one_hidden;
  throw std::invalid_argument("architecture must be 'linear' or 'one_hidden'");
}

// Join parallel corpus/links inputs into the analytics corpus view.
analytics::Corpus build_corpus(const std::vector<std::string>& corpus,
                               const std::vector<std::string>& links) {
  if (corpus.size() != links.size())
    throw std::invalid_argument("corpus and links lists must pair up");
  if (corpus.empty()) throw EmptyDataset("no titles given");
  analytics::Corpus out;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    auto doc = one_document(corpus[i]);
    auto gold = gold_by_scene(links[i]);
    if (out.count(doc.title))
      throw DataError("duplicate title '" + doc.title + "'");
    auto& scenes = out[doc.title];
    for (const auto& scene : doc.scenes) {
      auto it = gold.find(scene.scene_id);
      if (it == gold.end()) continue;  // unlabeled scenes carry no threads
      analytics::SceneThreads st;
      st.partition = it->second.partition;
      for (const Utterance* utt : scene.utterances())
        st.utterances.push_back(*utt);
      scenes.push_back(std::move(st));
      gold.erase(scene.scene_id);
    }
    if (!gold.empty())
      throw DataError("links for '" + doc.title + "' name scene '" +
                      gold.begin()->first + "' which is not in the document");
  }
  return out;
}

analytics::MetadataMap metadata_from_csv(const std::string& csv) {
  std::istringstream in(csv);
  return analytics::ingest_metadata(in);
}

// --- operations --------------------------------------------------------------

py::dict op_parse(const std::string& text, const std::string& title,
                  const std::string& kind, std::size_t indent_threshold,
                  double cue_upper_ratio) {
  RawDocument raw;
  raw.title_slug = screenplay::slugify(title);
  if (raw.title_slug.empty())
    throw std::invalid_argument("title slugifies to nothing");
  raw.source_kind = parse_kind(kind);
  raw.text = text;
  screenplay::ParseOptions options{indent_threshold, cue_upper_ratio};
  std::vector<std::string> warnings;
  auto doc = screenplay::parse_screenplay(raw, &warnings, options);
  auto stats = screenplay::count_stats(doc);

  py::dict out;
  out["title"] = doc.title;
  out["canonical"] = screenplay::emit_canonical(doc);
  ordered_json stats_json{{"scenes", stats.scenes},
                          {"turns", stats.turns},
                          {"dialogue_lines", stats.dialogue_lines},
                          {"action_lines", stats.action_lines},
                          {"utterances", stats.utterances}};
  out["stats"] = json_to_py(stats_json);
  out["warnings"] = py::cast(warnings);
  return out;
}

py::dict op_annotations_to_gold(const std::string& tsv, char delimiter,
                                bool has_header,
                                const std::string& default_scene,
                                const std::string& line_target) {
  annotation::ColumnMap columns;
  columns.delimiter = delimiter;
  columns.has_header = has_header;
  columns.default_scene = default_scene;
  annotation::PostprocessOptions options;
  if (line_target == "last_sentence")
    options.line_target = annotation::PostprocessOptions::LineTarget::last_sentence;
  else if (line_target == "first_sentence")
    options.line_target = annotation::PostprocessOptions::LineTarget::first_sentence;
  else
    throw std::invalid_argument(
        "line_target must be 'last_sentence' or 'first_sentence'");

  std::istringstream in(tsv);
  auto annotated = annotation::read_annotations(in, columns);
  auto result = annotation::postprocess(annotated, options);

  py::dict out;
  out["gold"] = annotation::emit_gold(result.scenes);
  py::dict id_map;
  for (const auto& [from, to] : result.id_map) id_map[py::str(from)] = to;
  out["id_map"] = id_map;
  out["warnings"] = py::cast(result.warnings);
  return out;
}

std::string op_previous_baseline(const std::string& corpus) {
  auto doc = one_document(corpus);
  std::vector<annotation::SceneGold> scenes;
  for (const auto& scene : doc.scenes) {
    if (scene.utterances().empty()) continue;
    annotation::SceneGold sg;
    sg.links = linkmodel::predict_previous_baseline(scene);
    sg.partition = threading::links_to_partition(sg.links);
    scenes.push_back(std::move(sg));
  }
  return annotation::emit_gold(scenes);
}

py::dict op_train(const std::vector<std::string>& train_corpus,
                  const std::vector<std::string>& train_gold,
                  const std::vector<std::string>& dev_corpus,
                  const std::vector<std::string>& dev_gold, int epochs,
                  double learning_rate, int negatives_per_positive,
                  double alpha, std::uint64_t seed,
                  const std::string& architecture, std::size_t hidden_width,
                  std::size_t pool_size, bool candidate_features) {
  if (train_corpus.size() != train_gold.size())
    throw std::invalid_argument("train_corpus and train_gold must pair up");
  if (dev_corpus.size() != dev_gold.size())
    throw std::invalid_argument("dev_corpus and dev_gold must pair up");
  if (epochs < 1) throw std::invalid_argument("epochs must be positive");
  if (learning_rate <= 0)
    throw std::invalid_argument("learning_rate must be positive");
  if (negatives_per_positive < 0)
    throw std::invalid_argument("negatives_per_positive cannot be negative");
  if (pool_size < 2) throw std::invalid_argument("pool_size must be at least 2");
  if (hidden_width < 1)
    throw std::invalid_argument("hidden_width must be positive");

  std::vector<linkmodel::LabeledScene> train_data, dev_data;
  for (std::size_t i = 0; i < train_corpus.size(); ++i)
    for (auto& ls : labeled_scenes(train_corpus[i], train_gold[i]))
      train_data.push_back(std::move(ls));
  for (std::size_t i = 0; i < dev_corpus.size(); ++i)
    for (auto& ls : labeled_scenes(dev_corpus[i], dev_gold[i]))
      dev_data.push_back(std::move(ls));

  linkmodel::TrainingConfig config;
  config.epochs = epochs;
  config.learning_rate = learning_rate;
  config.negatives_per_positive = negatives_per_positive;
  config.alpha = alpha;
  config.seed = seed;
  config.architecture = parse_architecture(architecture);
  config.hidden_width = hidden_width;
  config.features.pool_size = pool_size;
  config.features.candidate_utterance_features = candidate_features;

  linkmodel::TrainLog log;
  auto model = linkmodel::train(train_data, dev_data, config, &log);

  ordered_json log_json;
  log_json["epochs"] = ordered_json::array();
  for (const auto& entry : log.epochs) {
    ordered_json e;
    e["epoch"] = entry.epoch;
    e["mean_loss"] = entry.mean_loss;
    if (entry.dev_accuracy < 0)
      e["dev_accuracy"] = nullptr;
    else
      e["dev_accuracy"] = entry.dev_accuracy;
    e["selected"] = entry.selected;
    log_json["epochs"].push_back(e);
  }
  if (log.best_epoch > 0)
    log_json["best_epoch"] = log.best_epoch;
  else
    log_json["best_epoch"] = nullptr;

  py::dict out;
  out["model"] = json_to_py(linkmodel::model_to_json(model));
  out["log"] = json_to_py(log_json);
  return out;
}

std::string op_predict(const py::dict& model_dict, const std::string& corpus) {
  auto model = linkmodel::model_from_json(py_to_json(model_dict));
  auto doc = one_document(corpus);
  std::vector<annotation::SceneGold> scenes;
  for (const auto& scene : doc.scenes) {
    if (scene.utterances().empty()) continue;
    annotation::SceneGold sg;
    sg.links = linkmodel::predict_links(model, scene);
    sg.partition = threading::links_to_partition(sg.links);
    scenes.push_back(std::move(sg));
  }
  return annotation::emit_gold(scenes);
}

py::dict op_evaluate(const std::string& pred, const std::string& gold,
                     int resamples, std::uint64_t seed) {
  auto pred_map = gold_by_scene(pred);
  std::istringstream gold_in(gold);
  auto gold_scenes = annotation::read_gold(gold_in);

  std::vector<metrics::ScenePair> units;
  for (const auto& gs : gold_scenes) {
    auto id = gs.links.scene_id;
    auto it = pred_map.find(id);
    if (it == pred_map.end())
      throw ScenesMismatch("no predictions for scene '" + id + "'");
    units.push_back({it->second.links, gs.links, it->second.partition,
                     gs.partition});
    pred_map.erase(it);
  }
  if (!pred_map.empty())
    throw ScenesMismatch("predictions cover scene '" +
                         pred_map.begin()->first + "' which has no gold");

  auto report = metrics::evaluate_corpus(units, resamples, seed);
  return json_to_py(report_json(report)).cast<py::dict>();
}

py::dict op_agreement(const std::string& a_tsv, const std::string& b_tsv) {
  auto parse_side = [](const std::string& tsv) {
    std::istringstream in(tsv);
    auto annotated = annotation::read_annotations(in);
    return annotation::postprocess(annotated);
  };
  auto a = parse_side(a_tsv);
  auto b = parse_side(b_tsv);

  std::map<std::string, const annotation::SceneGold*> b_map;
  for (const auto& sg : b.scenes) b_map[sg.links.scene_id] = &sg;

  std::vector<metrics::ScenePair> units;
  for (const auto& sa : a.scenes) {
    auto it = b_map.find(sa.links.scene_id);
    if (it == b_map.end())
      throw ScenesMismatch("annotation b is missing scene '" +
                           sa.links.scene_id + "'");
    // Annotation A rides in the gold slots, B in the pred slots.
    units.push_back({it->second->links, sa.links, it->second->partition,
                     sa.partition});
    b_map.erase(it);
  }
  if (!b_map.empty())
    throw ScenesMismatch("annotation a is missing scene '" +
                         b_map.begin()->first + "'");

  auto report = metrics::agreement(units);
  py::dict out;
  out["a_as_reference"] = json_to_py(report_json(report.a_as_reference));
  out["b_as_reference"] = json_to_py(report_json(report.b_as_reference));
  out["average"] = json_to_py(report_json(report.average));
  std::vector<std::string> warnings;
  for (const auto& w : a.warnings) warnings.push_back("a: " + w);
  for (const auto& w : b.warnings) warnings.push_back("b: " + w);
  out["warnings"] = py::cast(warnings);
  return out;
}

py::list op_analyze_era(const std::vector<std::string>& corpus,
                        const std::vector<std::string>& links,
                        const std::string& meta_csv, int bucket_width,
                        int resamples, std::uint64_t seed) {
  auto data = build_corpus(corpus, links);
  auto meta = metadata_from_csv(meta_csv);
  auto buckets =
      analytics::thread_length_by_era(data, meta, bucket_width, resamples, seed);
  py::list out;
  for (const auto& b : buckets) {
    py::dict d;
    d["start_year"] = b.start_year;
    d["mean_thread_length"] = b.mean_thread_length;
    d["lo"] = b.ci.lo;
    d["hi"] = b.ci.hi;
    d["n_movies"] = b.n_movies;
    out.append(d);
  }
  return out;
}

py::dict op_analyze_floor(const std::vector<std::string>& corpus,
                          const std::vector<std::string>& links,
                          const std::string& meta_csv, int min_year,
                          int resamples, std::uint64_t seed) {
  auto data = build_corpus(corpus, links);
  auto meta = metadata_from_csv(meta_csv);
  auto report =
      analytics::floor_claiming(data, meta, min_year, resamples, seed);
  py::dict out;
  py::list by_year;
  for (const auto& r : report.by_year) {
    py::dict d;
    d["year"] = r.year;
    d["pct_threads_started_by_women"] = r.pct_threads_started_by_women;
    d["pct_lines_by_women"] = r.pct_lines_by_women;
    d["delta"] = r.delta;
    d["lo"] = r.ci.lo;
    d["hi"] = r.ci.hi;
    d["n_titles"] = r.n_titles;
    by_year.append(d);
  }
  out["by_year"] = by_year;
  py::dict pooled;
  pooled["pct_threads_started_by_women"] =
      report.pooled_pct_threads_started_by_women;
  pooled["pct_lines_by_women"] = report.pooled_pct_lines_by_women;
  pooled["delta_points"] = report.pooled_delta_points;
  pooled["delta_fraction"] = report.pooled_delta_fraction;
  pooled["lo"] = report.pooled_ci.lo;
  pooled["hi"] = report.pooled_ci.hi;
  pooled["n_titles"] = report.n_titles;
  out["pooled"] = pooled;
  out["warnings"] = py::cast(report.warnings);
  return out;
}

py::dict op_links_to_partition(const py::dict& links_dict) {
  auto partition = threading::links_to_partition(links_from_py(links_dict));
  py::dict out;
  out["scene_id"] = partition.scene_id;
  out["order"] = py::cast(partition.order);
  py::dict assignment;
  for (const auto& [utt, label] : partition.assignment)
    assignment[py::str(utt)] = label;
  out["assignment"] = assignment;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Native core of the screenplay conversation threading toolkit.";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<DataError>(m, "DataError", base);
  py::register_exception<UnparsableDocument>(m, "UnparsableDocument", base);
  py::register_exception<NotAForest>(m, "NotAForest", base);
  py::register_exception<ScenesMismatch>(m, "ScenesMismatch", base);
  py::register_exception<UtteranceSetMismatch>(m, "UtteranceSetMismatch", base);
  py::register_exception<TooFewUnits>(m, "TooFewUnits", base);

  m.def("parse", &op_parse, py::arg("text"), py::arg("title"),
        py::arg("kind") = "movie", py::arg("indent_threshold") = 4,
        py::arg("cue_upper_ratio") = 0.7,
        "Parse screenplay text into the canonical corpus form. Returns a "
        "dict with the document title, the canonical JSONL, per-document "
        "stats, and parser warnings.");

  m.def("annotations_to_gold", &op_annotations_to_gold, py::arg("tsv"),
        py::arg("delimiter") = '\t', py::arg("has_header") = true,
        py::arg("default_scene") = "S1",
        py::arg("line_target") = "last_sentence",
        "Convert a tabular reply-to annotation file into gold-link JSONL. "
        "Returns a dict with the gold JSONL, the old->new id map, and "
        "cleanup warnings.");

  m.def("previous_baseline", &op_previous_baseline, py::arg("corpus"),
        "Predict links for a canonical corpus document with the "
        "previous-utterance baseline. Returns gold-format JSONL.");

  m.def("train", &op_train, py::arg("train_corpus"), py::arg("train_gold"),
        py::arg("dev_corpus") = std::vector<std::string>{},
        py::arg("dev_gold") = std::vector<std::string>{},
        py::arg("epochs") = 10, py::arg("learning_rate") = 1e-3,
        py::arg("negatives_per_positive") = 5, py::arg("alpha") = 0.1,
        py::arg("seed") = std::uint64_t{42},
        py::arg("architecture") = "one_hidden", py::arg("hidden_width") = 16,
        py::arg("pool_size") = 6, py::arg("candidate_features") = false,
        "Train a link scorer on canonical corpus documents paired with gold "
        "JSONL. Returns a dict with the model (JSON form) and the training "
        "log.");

  m.def("predict", &op_predict, py::arg("model"), py::arg("corpus"),
        "Predict links for a canonical corpus document with a trained "
        "model dict. Returns gold-format JSONL.");

  m.def("evaluate", &op_evaluate, py::arg("pred"), py::arg("gold"),
        py::arg("resamples") = 0, py::arg("seed") = std::uint64_t{42},
        "Score predicted links against gold links (both gold-format JSONL). "
        "Returns {metric: {point, lo, hi}}; lo/hi are None without "
        "resamples.");

  m.def("agreement", &op_agreement, py::arg("a"), py::arg("b"),
        "Inter-annotator agreement between two tabular annotation files "
        "covering the same scenes.");

  m.def("analyze_era", &op_analyze_era, py::arg("corpus"), py::arg("links"),
        py::arg("meta_csv"), py::arg("bucket_width") = 5,
        py::arg("resamples") = 1000, py::arg("seed") = std::uint64_t{42},
        "Mean thread length per release-era bucket with bootstrap CIs. "
        "corpus and links are parallel lists of canonical and gold JSONL.");

  m.def("analyze_floor", &op_analyze_floor, py::arg("corpus"),
        py::arg("links"), py::arg("meta_csv"), py::arg("min_year") = 1980,
        py::arg("resamples") = 1000, py::arg("seed") = std::uint64_t{42},
        "Floor-claiming analysis: per-year and pooled shares of threads "
        "started by women versus lines spoken by women.");

  m.def("links_to_partition", &op_links_to_partition, py::arg("links"),
        "Close a reply-to link map {scene_id, order, parent} into thread "
        "assignments.");
}
