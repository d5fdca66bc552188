#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "sthreads/analytics.hpp"
#include "sthreads/annotation.hpp"
#include "sthreads/linkmodel.hpp"
#include "sthreads/metrics.hpp"
#include "sthreads/screenplay.hpp"
#include "sthreads/threading.hpp"
#include "sthreads/types.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;
using namespace sthreads;

namespace {

// Flag/config mistakes exit 2; data problems exit 1.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file '" + path.string() + "'");
  out << bytes;
  if (!out) throw DataError("failed writing file '" + path.string() + "'");
}

// Content digest for manifests (FNV-1a, 64-bit); enough to trace which bytes
// a run consumed.
std::string digest_hex(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  static const char* hex = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = hex[h & 0xF];
    h >>= 4;
  }
  return out;
}

// runs/model.json -> runs/model<suffix>; used for manifests and logs that
// sit next to a single-file output.
fs::path sibling(const fs::path& out, const std::string& suffix) {
  fs::path p = out;
  p.replace_extension();
  return fs::path(p.string() + suffix);
}

std::string format_real(double v) {
  // Shortest round-trip representation, always with a decimal marker so CSV
  // columns read as reals.
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  std::string s(buf, res.ptr);
  if (s.find_first_of(".en") == std::string::npos) s += ".0";
  return s;
}

// ---------------------------------------------------------------------------
// Flags with JSON-config fallback: a --config file may preset any flag of the
// subcommand, with command-line flags taking precedence. The effective value
// of every flag is echoed into the run manifest.
class FlagSet {
 public:
  explicit FlagSet(CLI::App* cmd) : cmd_(cmd) {
    cmd->add_option("--config", config_path_,
                    "JSON object presetting any flag of this command "
                    "(command-line flags win)");
  }

  template <class T>
  CLI::Option* option(const std::string& name, T& var,
                      const std::string& help) {
    CLI::Option* opt = cmd_->add_option(name, var, help);
    opt->capture_default_str();
    enroll(name, opt, var);
    return opt;
  }

  CLI::Option* flag(const std::string& name, bool& var,
                    const std::string& help) {
    CLI::Option* opt = cmd_->add_flag(name, var, help);
    enroll(name, opt, var);
    return opt;
  }

  // Applies the config file (if any) to flags not given on the command line.
  void finalize() {
    if (config_path_.empty()) return;
    std::ifstream in(config_path_, std::ios::binary);
    if (!in) throw UsageError("cannot read config file '" + config_path_ + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    config_bytes_ = buf.str();
    json cfg;
    try {
      cfg = json::parse(config_bytes_);
    } catch (const json::exception&) {
      throw UsageError("config file '" + config_path_ + "' is not valid JSON");
    }
    if (!cfg.is_object())
      throw UsageError("config file '" + config_path_ +
                       "' must hold a JSON object");
    for (const auto& [key, value] : cfg.items()) {
      auto it = entries_.find(key);
      if (it == entries_.end())
        throw UsageError("unknown config key \"" + key + "\"");
      if (it->second.opt->count() > 0) continue;  // flags win
      try {
        it->second.apply(value);
      } catch (const json::exception&) {
        throw UsageError("config key \"" + key + "\" has the wrong type");
      }
    }
  }

  ordered_json effective_config() const {
    std::map<std::string, ordered_json> sorted;
    for (const auto& [key, entry] : entries_) sorted[key] = entry.read();
    if (!config_path_.empty()) sorted["config"] = config_path_;
    ordered_json out;
    for (const auto& [key, value] : sorted) out[key] = value;
    return out;
  }

  const std::string& config_path() const { return config_path_; }
  const std::string& config_bytes() const { return config_bytes_; }

 private:
  struct Entry {
    CLI::Option* opt = nullptr;
    std::function<void(const json&)> apply;
    std::function<ordered_json()> read;
  };

  template <class T>
  void enroll(const std::string& name, CLI::Option* opt, T& var) {
    std::string key = name;
    while (!key.empty() && key.front() == '-') key.erase(key.begin());
    entries_[key] = Entry{
        opt, [&var](const json& v) { var = v.get<T>(); },
        [&var]() { return ordered_json(var); }};
  }

  CLI::App* cmd_;
  std::string config_path_;
  std::string config_bytes_;
  std::map<std::string, Entry> entries_;
};

// ---------------------------------------------------------------------------
// Run manifest: full effective config plus input digests, so every reported
// number is traceable. Contains no timestamps; reruns are byte-identical.
struct Manifest {
  std::string command;
  ordered_json config;
  ordered_json inputs = ordered_json::array();
  std::vector<std::string> outputs;
  std::vector<std::string> skipped;
  std::vector<std::string> warnings;

  Manifest(std::string cmd, const FlagSet& flags)
      : command(std::move(cmd)), config(flags.effective_config()) {
    if (!flags.config_path().empty())
      add_input(flags.config_path(), flags.config_bytes());
  }

  void add_input(const std::string& path, const std::string& bytes) {
    inputs.push_back(
        ordered_json{{"path", path}, {"digest", digest_hex(bytes)}});
  }

  void write(const fs::path& where) const {
    ordered_json j;
    j["command"] = command;
    j["config"] = config;
    j["inputs"] = inputs;
    j["outputs"] = outputs;
    j["skipped"] = skipped;
    j["warnings"] = warnings;
    write_file(where, j.dump(2) + "\n");
  }
};

// ---------------------------------------------------------------------------
// Shared loaders.

// A canonical corpus file holding exactly one parsed document.
ParsedDocument load_single_document(const std::string& path, Manifest& mf) {
  std::string bytes = read_file_bytes(path);
  mf.add_input(path, bytes);
  std::istringstream in(bytes);
  auto docs = screenplay::read_canonical(in);
  if (docs.size() != 1)
    throw DataError("corpus file '" + path + "' holds " +
                    std::to_string(docs.size()) +
                    " documents; expected exactly one");
  return std::move(docs[0]);
}

std::vector<annotation::SceneGold> load_gold(const std::string& path,
                                             Manifest& mf) {
  std::string bytes = read_file_bytes(path);
  mf.add_input(path, bytes);
  std::istringstream in(bytes);
  return annotation::read_gold(in);
}

// A corpus file paired with the gold/predicted links for its scenes.
struct TitleData {
  ParsedDocument doc;
  std::map<std::string, annotation::SceneGold> by_scene;
};

TitleData load_pair(const std::string& corpus_path,
                    const std::string& links_path, Manifest& mf) {
  TitleData data;
  data.doc = load_single_document(corpus_path, mf);
  std::set<std::string> known;
  for (const Scene& scene : data.doc.scenes) known.insert(scene.scene_id);
  for (auto& gold : load_gold(links_path, mf)) {
    const std::string& id = gold.links.scene_id;
    if (!known.count(id))
      throw DataError("links file '" + links_path + "' covers scene '" + id +
                      "' which '" + corpus_path + "' does not contain");
    data.by_scene.emplace(id, std::move(gold));
  }
  return data;
}

std::vector<linkmodel::LabeledScene> labeled_scenes(const TitleData& data,
                                                    Manifest& mf) {
  std::vector<linkmodel::LabeledScene> out;
  for (const Scene& scene : data.doc.scenes) {
    auto it = data.by_scene.find(scene.scene_id);
    if (it == data.by_scene.end()) {
      mf.skipped.push_back(data.doc.title + "/" + scene.scene_id +
                           ": no gold links");
      continue;
    }
    out.push_back(linkmodel::LabeledScene{scene, it->second.links});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Report emitters.

ordered_json interval_json(const metrics::Interval& interval) {
  ordered_json j;
  j["point"] = interval.point;
  j["lo"] = interval.has_ci ? ordered_json(interval.lo) : ordered_json();
  j["hi"] = interval.has_ci ? ordered_json(interval.hi) : ordered_json();
  return j;
}

const std::vector<std::pair<std::string, metrics::Interval metrics::MetricsReport::*>>&
metric_fields() {
  static const std::vector<
      std::pair<std::string, metrics::Interval metrics::MetricsReport::*>>
      fields = {{"link_accuracy", &metrics::MetricsReport::link_accuracy},
                {"ari", &metrics::MetricsReport::ari},
                {"one_minus_vi", &metrics::MetricsReport::one_minus_vi},
                {"shen_f1", &metrics::MetricsReport::shen_f1},
                {"one_to_one", &metrics::MetricsReport::one_to_one},
                {"exact_match_f1", &metrics::MetricsReport::exact_match_f1}};
  return fields;
}

ordered_json metrics_json(const metrics::MetricsReport& report) {
  ordered_json j;
  for (const auto& [name, member] : metric_fields())
    j[name] = interval_json(report.*member);
  return j;
}

std::string metrics_csv(const metrics::MetricsReport& report) {
  std::string out = "metric,point,lo,hi\n";
  for (const auto& [name, member] : metric_fields()) {
    const metrics::Interval& i = report.*member;
    out += name + ',' + format_real(i.point) + ',';
    if (i.has_ci) out += format_real(i.lo);
    out += ',';
    if (i.has_ci) out += format_real(i.hi);
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// parse

struct ParseArgs {
  std::vector<std::string> inputs;
  std::string out;
  std::string kind = "movie";
  std::size_t indent = 4;
  double cue_ratio = 0.7;
};

int cmd_parse(const ParseArgs& a, const FlagSet& flags) {
  if (a.inputs.empty())
    throw UsageError("parse needs at least one screenplay file");
  if (a.out.empty()) throw UsageError("parse needs --out");
  SourceKind kind;
  if (a.kind == "movie")
    kind = SourceKind::movie;
  else if (a.kind == "tv_pilot")
    kind = SourceKind::tv_pilot;
  else
    throw UsageError("--kind must be movie or tv_pilot");

  Manifest mf("parse", flags);
  fs::create_directories(a.out);

  struct FileReport {
    std::string input;
    std::string slug;
    screenplay::DocumentStats stats;
  };
  std::vector<FileReport> reports;
  std::vector<fs::path> written;
  try {
    std::set<std::string> slugs;
    for (const std::string& input : a.inputs) {
      std::string bytes = read_file_bytes(input);
      mf.add_input(input, bytes);
      std::string slug = screenplay::slugify(fs::path(input).stem().string());
      if (slug.empty() || !slugs.insert(slug).second)
        throw DataError("input '" + input + "' yields " +
                        (slug.empty() ? "an empty" : "a duplicate") +
                        " title slug");
      RawDocument raw{slug, kind, bytes};
      std::vector<std::string> parse_warnings;
      screenplay::ParseOptions options;
      options.indent_threshold = a.indent;
      options.cue_upper_ratio = a.cue_ratio;
      ParsedDocument doc = screenplay::parse_screenplay(raw, &parse_warnings,
                                                        options);
      for (const std::string& w : parse_warnings)
        mf.warnings.push_back(slug + ": " + w);
      fs::path out_path = fs::path(a.out) / (slug + ".jsonl");
      write_file(out_path, screenplay::emit_canonical(doc));
      written.push_back(out_path);
      reports.push_back({input, slug, screenplay::count_stats(doc)});
    }
  } catch (...) {
    // No partial corpus: remove whatever this run already wrote.
    for (const fs::path& p : written) {
      std::error_code ec;
      fs::remove(p, ec);
    }
    throw;
  }

  std::sort(reports.begin(), reports.end(),
            [](const FileReport& a, const FileReport& b) {
              return a.slug < b.slug;
            });
  ordered_json files = ordered_json::array();
  screenplay::DocumentStats totals;
  for (const FileReport& r : reports) {
    files.push_back(ordered_json{{"input", r.input},
                                 {"title_slug", r.slug},
                                 {"output", r.slug + ".jsonl"},
                                 {"scenes", r.stats.scenes},
                                 {"turns", r.stats.turns},
                                 {"dialogue_lines", r.stats.dialogue_lines},
                                 {"action_lines", r.stats.action_lines},
                                 {"utterances", r.stats.utterances}});
    totals.scenes += r.stats.scenes;
    totals.turns += r.stats.turns;
    totals.dialogue_lines += r.stats.dialogue_lines;
    totals.action_lines += r.stats.action_lines;
    totals.utterances += r.stats.utterances;
    mf.outputs.push_back(r.slug + ".jsonl");
  }
  ordered_json report;
  report["files"] = files;
  report["totals"] = ordered_json{{"titles", reports.size()},
                                  {"scenes", totals.scenes},
                                  {"turns", totals.turns},
                                  {"dialogue_lines", totals.dialogue_lines},
                                  {"action_lines", totals.action_lines},
                                  {"utterances", totals.utterances}};
  write_file(fs::path(a.out) / "parse_report.json", report.dump(2) + "\n");
  mf.outputs.push_back("parse_report.json");
  mf.write(fs::path(a.out) / "manifest.json");
  std::cout << "parsed " << reports.size() << " title(s) into " << a.out
            << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  std::vector<std::string> train_corpus;
  std::vector<std::string> train_gold;
  std::vector<std::string> dev_corpus;
  std::vector<std::string> dev_gold;
  std::string out;
  int epochs = 10;
  double lr = 1e-3;
  int negatives = 5;
  double alpha = 0.1;
  int pool_size = 6;
  std::string arch = "one_hidden";
  int hidden = 16;
  bool candidate_features = false;
  std::uint64_t seed = 42;
};

int cmd_train(const TrainArgs& a, const FlagSet& flags) {
  if (a.train_corpus.empty())
    throw UsageError("train needs at least one --train-corpus file");
  if (a.train_corpus.size() != a.train_gold.size())
    throw UsageError("--train-corpus and --train-gold must pair up");
  if (a.dev_corpus.size() != a.dev_gold.size())
    throw UsageError("--dev-corpus and --dev-gold must pair up");
  if (a.out.empty()) throw UsageError("train needs --out");
  if (a.epochs < 1) throw UsageError("--epochs must be at least 1");
  if (a.lr <= 0.0) throw UsageError("--lr must be positive");
  if (a.negatives < 1) throw UsageError("--negatives must be at least 1");
  if (a.alpha < 0.0) throw UsageError("--alpha must be non-negative");
  if (a.pool_size < 1) throw UsageError("--pool-size must be at least 1");
  if (a.hidden < 1) throw UsageError("--hidden must be at least 1");

  linkmodel::TrainingConfig cfg;
  cfg.epochs = a.epochs;
  cfg.learning_rate = a.lr;
  cfg.negatives_per_positive = a.negatives;
  cfg.alpha = a.alpha;
  cfg.seed = a.seed;
  cfg.hidden_width = static_cast<std::size_t>(a.hidden);
  cfg.features.pool_size = static_cast<std::size_t>(a.pool_size);
  cfg.features.candidate_utterance_features = a.candidate_features;
  if (a.arch == "one_hidden")
    cfg.architecture = linkmodel::ScorerModel::Architecture::one_hidden;
  else if (a.arch == "linear")
    cfg.architecture = linkmodel::ScorerModel::Architecture::linear;
  else
    throw UsageError("--arch must be one_hidden or linear");

  Manifest mf("train", flags);
  std::vector<linkmodel::LabeledScene> train_data;
  for (std::size_t i = 0; i < a.train_corpus.size(); ++i) {
    TitleData data = load_pair(a.train_corpus[i], a.train_gold[i], mf);
    for (auto& scene : labeled_scenes(data, mf))
      train_data.push_back(std::move(scene));
  }
  std::vector<linkmodel::LabeledScene> dev_data;
  for (std::size_t i = 0; i < a.dev_corpus.size(); ++i) {
    TitleData data = load_pair(a.dev_corpus[i], a.dev_gold[i], mf);
    for (auto& scene : labeled_scenes(data, mf))
      dev_data.push_back(std::move(scene));
  }

  linkmodel::TrainLog log;
  linkmodel::ScorerModel model = linkmodel::train(train_data, dev_data, cfg,
                                                  &log);
  write_file(a.out, linkmodel::model_to_json(model).dump(2) + "\n");
  mf.outputs.push_back(fs::path(a.out).filename().string());

  ordered_json log_json;
  log_json["epochs"] = ordered_json::array();
  for (const linkmodel::EpochLog& e : log.epochs) {
    log_json["epochs"].push_back(ordered_json{
        {"epoch", e.epoch},
        {"mean_loss", e.mean_loss},
        {"dev_accuracy", e.dev_accuracy < 0.0 ? ordered_json()
                                              : ordered_json(e.dev_accuracy)},
        {"selected", e.selected}});
  }
  log_json["best_epoch"] =
      log.best_epoch > 0 ? ordered_json(log.best_epoch) : ordered_json();
  fs::path log_path = sibling(a.out, ".log.json");
  write_file(log_path, log_json.dump(2) + "\n");
  mf.outputs.push_back(log_path.filename().string());
  mf.write(sibling(a.out, ".manifest.json"));
  std::cout << "trained on " << train_data.size() << " scene(s); model at "
            << a.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// predict

struct PredictArgs {
  std::string model;
  std::string baseline;
  std::string corpus;
  std::string out;
  int jobs = 1;
};

int cmd_predict(const PredictArgs& a, const FlagSet& flags) {
  if (a.model.empty() == a.baseline.empty())
    throw UsageError("predict needs exactly one of --model or --baseline");
  if (!a.baseline.empty() && a.baseline != "previous")
    throw UsageError("--baseline must be \"previous\"");
  if (a.corpus.empty()) throw UsageError("predict needs --corpus");
  if (a.out.empty()) throw UsageError("predict needs --out");
  if (a.jobs < 1) throw UsageError("--jobs must be at least 1");

  Manifest mf("predict", flags);
  linkmodel::ScorerModel model;
  if (!a.model.empty()) {
    std::string bytes = read_file_bytes(a.model);
    mf.add_input(a.model, bytes);
    json j;
    try {
      j = json::parse(bytes);
    } catch (const json::exception& e) {
      throw DataError("model file '" + a.model + "' is not valid JSON: " +
                      e.what());
    }
    model = linkmodel::model_from_json(j);
  }
  ParsedDocument doc = load_single_document(a.corpus, mf);

  // Scenes are independent; --jobs bounds the worker count while results
  // keep canonical scene order.
  std::vector<annotation::SceneGold> results(doc.scenes.size());
  std::atomic<std::size_t> cursor{0};
  auto worker = [&] {
    for (std::size_t i = cursor.fetch_add(1); i < doc.scenes.size();
         i = cursor.fetch_add(1)) {
      const Scene& scene = doc.scenes[i];
      GoldLinks links = a.model.empty()
                            ? linkmodel::predict_previous_baseline(scene)
                            : linkmodel::predict_links(model, scene);
      results[i] = annotation::SceneGold{
          links, threading::links_to_partition(links)};
    }
  };
  std::size_t workers = std::min<std::size_t>(
      static_cast<std::size_t>(a.jobs), std::max<std::size_t>(doc.scenes.size(), 1));
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();

  for (const Scene& scene : doc.scenes)
    if (scene.utterances().empty())
      mf.skipped.push_back(doc.title + "/" + scene.scene_id +
                           ": no utterances");

  write_file(a.out, annotation::emit_gold(results));
  mf.outputs.push_back(fs::path(a.out).filename().string());
  mf.write(sibling(a.out, ".manifest.json"));
  std::cout << "predicted links for " << doc.scenes.size()
            << " scene(s) into " << a.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateArgs {
  std::vector<std::string> pred;
  std::vector<std::string> gold;
  std::string out;
  int resamples = 1000;
  std::uint64_t seed = 42;
  std::string format = "json";
};

int cmd_evaluate(const EvaluateArgs& a, const FlagSet& flags) {
  if (a.pred.empty()) throw UsageError("evaluate needs --pred and --gold");
  if (a.pred.size() != a.gold.size())
    throw UsageError("--pred and --gold must pair up");
  if (a.out.empty()) throw UsageError("evaluate needs --out");
  if (a.resamples < 0) throw UsageError("--resamples must be non-negative");
  if (a.format != "json" && a.format != "csv")
    throw UsageError("--format must be json or csv");

  Manifest mf("evaluate", flags);
  std::vector<metrics::ScenePair> units;
  std::size_t utterances = 0;
  for (std::size_t i = 0; i < a.pred.size(); ++i) {
    auto pred_scenes = load_gold(a.pred[i], mf);
    auto gold_scenes = load_gold(a.gold[i], mf);
    std::map<std::string, annotation::SceneGold*> by_id;
    for (auto& p : pred_scenes) by_id[p.links.scene_id] = &p;
    if (by_id.size() != gold_scenes.size())
      throw ScenesMismatch("'" + a.pred[i] + "' and '" + a.gold[i] +
                           "' cover different scene sets");
    for (auto& gold : gold_scenes) {
      auto it = by_id.find(gold.links.scene_id);
      if (it == by_id.end())
        throw ScenesMismatch("scene '" + gold.links.scene_id +
                             "' of '" + a.gold[i] + "' is missing from '" +
                             a.pred[i] + "'");
      metrics::ScenePair unit{it->second->links, gold.links,
                              it->second->partition, gold.partition};
      utterances += unit.size();
      units.push_back(std::move(unit));
    }
  }

  metrics::MetricsReport report =
      metrics::evaluate_corpus(units, a.resamples, a.seed);
  if (a.format == "json") {
    ordered_json j;
    j["metrics"] = metrics_json(report);
    j["scenes"] = units.size();
    j["utterances"] = utterances;
    j["resamples"] = a.resamples;
    j["seed"] = a.seed;
    write_file(a.out, j.dump(2) + "\n");
  } else {
    write_file(a.out, metrics_csv(report));
  }
  mf.outputs.push_back(fs::path(a.out).filename().string());
  mf.write(sibling(a.out, ".manifest.json"));
  std::cout << "evaluated " << units.size() << " scene(s); report at "
            << a.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// agreement

struct AgreementArgs {
  std::string a;
  std::string b;
  std::string out;
  std::string format = "json";
};

int cmd_agreement(const AgreementArgs& a, const FlagSet& flags) {
  if (a.a.empty() || a.b.empty())
    throw UsageError("agreement needs --a and --b annotation files");
  if (a.out.empty()) throw UsageError("agreement needs --out");
  if (a.format != "json" && a.format != "csv")
    throw UsageError("--format must be json or csv");

  Manifest mf("agreement", flags);
  auto load = [&](const std::string& path, const std::string& tag) {
    std::string bytes = read_file_bytes(path);
    mf.add_input(path, bytes);
    std::istringstream in(bytes);
    auto rows = annotation::read_annotations(in);
    annotation::PostprocessResult result = annotation::postprocess(rows);
    for (const std::string& w : result.warnings)
      mf.warnings.push_back(tag + ": " + w);
    return result.scenes;
  };
  auto scenes_a = load(a.a, "a");
  auto scenes_b = load(a.b, "b");
  std::map<std::string, annotation::SceneGold*> b_by_id;
  for (auto& scene : scenes_b) b_by_id[scene.links.scene_id] = &scene;
  if (b_by_id.size() != scenes_a.size())
    throw ScenesMismatch("the two annotation files cover different scenes");
  std::vector<metrics::ScenePair> units;
  for (auto& scene_a : scenes_a) {
    auto it = b_by_id.find(scene_a.links.scene_id);
    if (it == b_by_id.end())
      throw ScenesMismatch("scene '" + scene_a.links.scene_id +
                           "' is missing from '" + a.b + "'");
    // Annotation A rides in the gold slots, B in the prediction slots.
    units.push_back(metrics::ScenePair{it->second->links, scene_a.links,
                                       it->second->partition,
                                       scene_a.partition});
  }

  metrics::AgreementReport report = metrics::agreement(units);
  if (a.format == "json") {
    ordered_json j;
    j["a_as_reference"] = metrics_json(report.a_as_reference);
    j["b_as_reference"] = metrics_json(report.b_as_reference);
    j["average"] = metrics_json(report.average);
    j["scenes"] = units.size();
    write_file(a.out, j.dump(2) + "\n");
  } else {
    std::string csv = "metric,a_as_reference,b_as_reference,average\n";
    for (const auto& [name, member] : metric_fields()) {
      csv += name + ',' + format_real((report.a_as_reference.*member).point) +
             ',' + format_real((report.b_as_reference.*member).point) + ',' +
             format_real((report.average.*member).point) + '\n';
    }
    write_file(a.out, csv);
  }
  mf.outputs.push_back(fs::path(a.out).filename().string());
  mf.write(sibling(a.out, ".manifest.json"));
  std::cout << "compared " << units.size() << " scene(s); report at " << a.out
            << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// analyze

struct AnalyzeArgs {
  std::vector<std::string> corpus;
  std::vector<std::string> links;
  std::string meta;
  std::string provenance;
  std::string out;
  int min_year = 1980;
  int bucket_width = 5;
  int resamples = 1000;
  std::uint64_t seed = 42;
};

int cmd_analyze(const AnalyzeArgs& a, const FlagSet& flags) {
  if (a.corpus.empty())
    throw UsageError("analyze needs at least one --corpus file");
  if (a.corpus.size() != a.links.size())
    throw UsageError("--corpus and --links must pair up");
  if (a.meta.empty()) throw UsageError("analyze needs --meta");
  if (a.provenance != "gold" && a.provenance != "predicted")
    throw UsageError("--provenance must be gold or predicted");
  if (a.out.empty()) throw UsageError("analyze needs --out");
  if (a.bucket_width < 1) throw UsageError("--bucket-width must be positive");
  if (a.resamples < 1) throw UsageError("--resamples must be positive");

  Manifest mf("analyze", flags);
  analytics::Corpus corpus;
  for (std::size_t i = 0; i < a.corpus.size(); ++i) {
    TitleData data = load_pair(a.corpus[i], a.links[i], mf);
    const std::string& slug = data.doc.title;
    if (corpus.count(slug))
      throw DataError("title '" + slug + "' appears in two corpus files");
    std::vector<analytics::SceneThreads>& scenes = corpus[slug];
    for (const Scene& scene : data.doc.scenes) {
      auto it = data.by_scene.find(scene.scene_id);
      if (it == data.by_scene.end()) {
        mf.skipped.push_back(slug + "/" + scene.scene_id +
                             ": no thread labels");
        continue;
      }
      analytics::SceneThreads st;
      st.partition = it->second.partition;
      for (const Utterance* utt : scene.utterances())
        st.utterances.push_back(*utt);
      scenes.push_back(std::move(st));
    }
  }
  std::string meta_bytes = read_file_bytes(a.meta);
  mf.add_input(a.meta, meta_bytes);
  std::istringstream meta_in(meta_bytes);
  analytics::MetadataMap meta = analytics::ingest_metadata(meta_in);

  auto buckets = analytics::thread_length_by_era(corpus, meta, a.bucket_width,
                                                 a.resamples, a.seed);
  auto floor = analytics::floor_claiming(corpus, meta, a.min_year,
                                         a.resamples, a.seed);
  for (const std::string& w : floor.warnings) mf.warnings.push_back(w);

  fs::create_directories(a.out);
  write_file(fs::path(a.out) / "era_report.json",
             analytics::emit_era_report(buckets, a.provenance));
  mf.outputs.push_back("era_report.json");
  if (!buckets.empty()) {
    write_file(fs::path(a.out) / "era_plot.csv",
               analytics::emit_plot_data(buckets));
    mf.outputs.push_back("era_plot.csv");
  } else {
    mf.warnings.push_back("no era buckets; era_plot.csv not written");
  }
  write_file(fs::path(a.out) / "floor_report.json",
             analytics::emit_floor_report(floor, a.provenance));
  mf.outputs.push_back("floor_report.json");
  if (!floor.by_year.empty()) {
    write_file(fs::path(a.out) / "floor_plot.csv",
               analytics::emit_plot_data(floor.by_year));
    mf.outputs.push_back("floor_plot.csv");
  } else {
    mf.warnings.push_back("no floor-claiming records; floor_plot.csv not written");
  }
  mf.write(fs::path(a.out) / "manifest.json");
  std::cout << "analyzed " << corpus.size() << " title(s) into " << a.out
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"screenplay conversation threading toolkit"};
  app.require_subcommand(1);

  ParseArgs pa;
  CLI::App* c_parse =
      app.add_subcommand("parse", "parse screenplays into canonical JSONL");
  FlagSet f_parse(c_parse);
  f_parse.option("inputs", pa.inputs, "screenplay text files");
  f_parse.option("--out", pa.out, "output directory");
  f_parse.option("--kind", pa.kind, "source kind: movie or tv_pilot");
  f_parse.option("--indent", pa.indent, "indent threshold for dialogue blocks");
  f_parse.option("--cue-ratio", pa.cue_ratio,
                 "minimum uppercase share for cue lines");

  TrainArgs ta;
  CLI::App* c_train =
      app.add_subcommand("train", "train the featurized link scorer");
  FlagSet f_train(c_train);
  f_train.option("--train-corpus", ta.train_corpus,
                 "canonical corpus files (one title each)");
  f_train.option("--train-gold", ta.train_gold,
                 "gold link files paired with --train-corpus");
  f_train.option("--dev-corpus", ta.dev_corpus,
                 "canonical corpus files for early stopping");
  f_train.option("--dev-gold", ta.dev_gold,
                 "gold link files paired with --dev-corpus");
  f_train.option("--out", ta.out, "model file to write");
  f_train.option("--epochs", ta.epochs, "training epochs");
  f_train.option("--lr", ta.lr, "learning rate");
  f_train.option("--negatives", ta.negatives, "negative samples per positive");
  f_train.option("--alpha", ta.alpha,
                 "auxiliary thread-start loss weight (0 disables)");
  f_train.option("--pool-size", ta.pool_size,
                 "candidate pool size including self");
  f_train.option("--arch", ta.arch, "scorer architecture: one_hidden or linear");
  f_train.option("--hidden", ta.hidden, "hidden width for one_hidden");
  f_train.flag("--candidate-features", ta.candidate_features,
               "also extract speaker features for the candidate");
  f_train.option("--seed", ta.seed, "random seed");

  PredictArgs ra;
  CLI::App* c_predict =
      app.add_subcommand("predict", "predict reply-to links for a corpus");
  FlagSet f_predict(c_predict);
  f_predict.option("--model", ra.model, "trained model file");
  f_predict.option("--baseline", ra.baseline,
                   "rule baseline instead of a model (\"previous\")");
  f_predict.option("--corpus", ra.corpus, "canonical corpus file (one title)");
  f_predict.option("--out", ra.out, "links file to write");
  f_predict.option("--jobs", ra.jobs, "concurrent scene workers");

  EvaluateArgs ea;
  CLI::App* c_evaluate =
      app.add_subcommand("evaluate", "score predicted links against gold");
  FlagSet f_evaluate(c_evaluate);
  f_evaluate.option("--pred", ea.pred, "predicted link files");
  f_evaluate.option("--gold", ea.gold, "gold link files paired with --pred");
  f_evaluate.option("--out", ea.out, "report file to write");
  f_evaluate.option("--resamples", ea.resamples,
                    "bootstrap resamples (0 disables CIs)");
  f_evaluate.option("--seed", ea.seed, "bootstrap seed");
  f_evaluate.option("--format", ea.format, "report format: json or csv");

  AgreementArgs ga;
  CLI::App* c_agreement = app.add_subcommand(
      "agreement", "inter-annotator agreement between two annotation files");
  FlagSet f_agreement(c_agreement);
  f_agreement.option("--a", ga.a, "first annotation file");
  f_agreement.option("--b", ga.b, "second annotation file");
  f_agreement.option("--out", ga.out, "report file to write");
  f_agreement.option("--format", ga.format, "report format: json or csv");

  AnalyzeArgs na;
  CLI::App* c_analyze = app.add_subcommand(
      "analyze", "era and floor-claiming analytics over thread labelings");
  FlagSet f_analyze(c_analyze);
  f_analyze.option("--corpus", na.corpus,
                   "canonical corpus files (one title each)");
  f_analyze.option("--links", na.links,
                   "gold or predicted link files paired with --corpus");
  f_analyze.option("--meta", na.meta, "title/character metadata CSV");
  f_analyze.option("--provenance", na.provenance,
                   "labeling provenance: gold or predicted");
  f_analyze.option("--out", na.out, "output directory");
  f_analyze.option("--min-year", na.min_year,
                   "earliest release year for floor claiming");
  f_analyze.option("--bucket-width", na.bucket_width, "era bucket width");
  f_analyze.option("--resamples", na.resamples, "bootstrap resamples");
  f_analyze.option("--seed", na.seed, "bootstrap seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (app.got_subcommand(c_parse)) {
      f_parse.finalize();
      return cmd_parse(pa, f_parse);
    }
    if (app.got_subcommand(c_train)) {
      f_train.finalize();
      return cmd_train(ta, f_train);
    }
    if (app.got_subcommand(c_predict)) {
      f_predict.finalize();
      return cmd_predict(ra, f_predict);
    }
    if (app.got_subcommand(c_evaluate)) {
      f_evaluate.finalize();
      return cmd_evaluate(ea, f_evaluate);
    }
    if (app.got_subcommand(c_agreement)) {
      f_agreement.finalize();
      return cmd_agreement(ga, f_agreement);
    }
    if (app.got_subcommand(c_analyze)) {
      f_analyze.finalize();
      return cmd_analyze(na, f_analyze);
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
