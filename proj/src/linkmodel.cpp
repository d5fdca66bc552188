#include "sthreads/linkmodel.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "sthreads/metrics.hpp"
#include "sthreads/threading.hpp"

namespace sthreads::linkmodel {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Clamped BCE so a saturated sigmoid cannot produce inf.
double bce(double p, double y) {
  constexpr double eps = 1e-12;
  p = std::min(1.0 - eps, std::max(eps, p));
  return -y * std::log(p) - (1.0 - y) * std::log(1.0 - p);
}

const Utterance* at(const std::vector<const Utterance*>& utts, int position) {
  if (position < 0 || position >= static_cast<int>(utts.size()))
    return nullptr;
  return utts[position];
}

// f1/f2/f3 for the utterance at `position`, looking back over the scene.
void speaker_features(const std::vector<const Utterance*>& utts, int position,
                      double& spoken_after, double& since_last, double& next_same) {
  const std::string& speaker = utts[position]->speaker;
  int last = -1;
  for (int q = position - 1; q >= 0; --q) {
    if (utts[q]->speaker == speaker) {
      last = q;
      break;
    }
  }
  std::set<std::string> others;
  for (int q = last + 1; q < position; ++q)
    if (utts[q]->speaker != speaker) others.insert(utts[q]->speaker);
  spoken_after = static_cast<double>(others.size());
  since_last = last >= 0 ? static_cast<double>(position - last)
                         : static_cast<double>(position);
  const Utterance* next = at(utts, position + 1);
  next_same = next && next->speaker == speaker ? 1.0 : 0.0;
}

std::vector<std::string> tokens_of(const FeatureConfig& config,
                                   const std::string& text) {
  return config.tokenizer ? config.tokenizer(text) : text::word_tokens(text);
}

}  // namespace

std::vector<double> FeatureVector::values(const FeatureConfig& config) const {
  std::vector<double> out = {speakers_spoken_after,
                             utterances_since_speaker_last_spoke,
                             next_same_speaker,
                             common_tokens,
                             distance,
                             intervening_same_speakers,
                             same_turn,
                             same_speaker,
                             is_self};
  if (config.candidate_utterance_features) {
    out.push_back(cand_speakers_spoken_after);
    out.push_back(cand_utterances_since_speaker_last_spoke);
    out.push_back(cand_next_same_speaker);
  }
  return out;
}

FeatureVector extract_features(const Utterance& uoi, const Utterance& candidate,
                               const Scene& scene,
                               const FeatureConfig& config) {
  if (uoi.scene_id != scene.scene_id || candidate.scene_id != scene.scene_id)
    throw ScenesMismatch("utterance pair does not belong to scene " +
                         scene.scene_id);
  if (candidate.position > uoi.position)
    throw ScenesMismatch("candidate " + candidate.utt_id + " follows " +
                         uoi.utt_id);
  auto utts = scene.utterances();
  int i = uoi.position;
  int j = candidate.position;

  FeatureVector fv;
  speaker_features(utts, i, fv.speakers_spoken_after,
                   fv.utterances_since_speaker_last_spoke,
                   fv.next_same_speaker);
  if (config.candidate_utterance_features)
    speaker_features(utts, j, fv.cand_speakers_spoken_after,
                     fv.cand_utterances_since_speaker_last_spoke,
                     fv.cand_next_same_speaker);

  auto ti = tokens_of(config, uoi.text);
  auto tj = tokens_of(config, candidate.text);
  std::set<std::string> si(ti.begin(), ti.end());
  std::set<std::string> sj(tj.begin(), tj.end());
  fv.common_tokens = static_cast<double>(std::count_if(
      si.begin(), si.end(),
      [&](const std::string& t) { return sj.count(t) > 0; }));

  fv.distance = static_cast<double>(i - j);
  for (int q = j + 1; q < i; ++q) {
    if (utts[q]->speaker == uoi.speaker ||
        utts[q]->speaker == candidate.speaker) {
      fv.intervening_same_speakers = 1.0;
      break;
    }
  }
  fv.same_turn = uoi.turn_id == candidate.turn_id ? 1.0 : 0.0;
  fv.same_speaker = uoi.speaker == candidate.speaker ? 1.0 : 0.0;
  fv.is_self = uoi.utt_id == candidate.utt_id ? 1.0 : 0.0;
  return fv;
}

CandidatePool make_pool(const Scene& scene, int position,
                        std::size_t pool_size) {
  auto utts = scene.utterances();
  CandidatePool pool;
  pool.uoi = utts.at(position);
  for (std::size_t k = 0; k < pool_size; ++k) {
    int j = position - static_cast<int>(k);
    if (j < 0) break;
    pool.candidates.push_back(utts[j]);
  }
  return pool;
}

void Standardizer::fit(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) return;
  std::size_t dim = rows[0].size();
  mean.assign(dim, 0.0);
  stdev.assign(dim, 0.0);
  for (const auto& row : rows)
    for (std::size_t d = 0; d < dim; ++d) mean[d] += row[d];
  for (double& m : mean) m /= static_cast<double>(rows.size());
  for (const auto& row : rows)
    for (std::size_t d = 0; d < dim; ++d)
      stdev[d] += (row[d] - mean[d]) * (row[d] - mean[d]);
  for (double& s : stdev) s = std::sqrt(s / static_cast<double>(rows.size()));
}

std::vector<double> Standardizer::apply(const std::vector<double>& x) const {
  if (mean.empty()) return x;
  std::vector<double> z(x.size());
  for (std::size_t d = 0; d < x.size(); ++d)
    z[d] = stdev[d] > 0.0 ? (x[d] - mean[d]) / stdev[d] : x[d];
  return z;
}

double score_standardized(const ScorerModel& model,
                          const std::vector<double>& z) {
  if (model.architecture == ScorerModel::Architecture::linear) {
    double s = model.b;
    for (std::size_t d = 0; d < z.size(); ++d) s += model.w[d] * z[d];
    return sigmoid(s);
  }
  double s = 0.0;
  for (std::size_t h = 0; h < model.hidden_width; ++h) {
    double pre = 0.0;
    for (std::size_t d = 0; d < z.size(); ++d)
      pre += model.w0[h * model.input_dim + d] * z[d];
    s += model.w1[h] * std::tanh(pre);
  }
  return sigmoid(s);
}

double aux_score_standardized(const ScorerModel& model,
                              const std::vector<double>& z) {
  double s = 0.0;
  for (std::size_t d = 0; d < z.size(); ++d) s += model.aux[d] * z[d];
  return sigmoid(s);
}

double score(const ScorerModel& model, const FeatureVector& fv) {
  return score_standardized(model,
                            model.standardizer.apply(fv.values(model.features)));
}

std::vector<Instance> build_instances(const std::vector<LabeledScene>& data,
                                      const TrainingConfig& config, Rng& rng) {
  std::vector<Instance> out;
  for (const LabeledScene& labeled : data) {
    const Scene& scene = labeled.scene;
    const GoldLinks& links = labeled.links;
    if (links.parent.empty())
      throw NoPositives("scene " + scene.scene_id + " carries no links");
    auto utts = scene.utterances();
    std::map<std::string, const Utterance*> by_id;
    for (const Utterance* utt : utts) by_id[utt->utt_id] = utt;

    auto partition = threading::links_to_partition(links);
    auto same_thread = [&](const Utterance& a, const Utterance& b) {
      return partition.assignment.at(a.utt_id) ==
             partition.assignment.at(b.utt_id);
    };
    auto push = [&](const Utterance& uoi, const Utterance& cand, double label) {
      Instance inst;
      inst.x = extract_features(uoi, cand, scene, config.features)
                   .values(config.features);
      inst.link_label = label;
      inst.thread_label = same_thread(uoi, cand) ? 1.0 : 0.0;
      out.push_back(std::move(inst));
    };

    for (const std::string& id : links.order) {
      auto uoi_it = by_id.find(id);
      auto par_it = by_id.find(links.parent.at(id));
      if (uoi_it == by_id.end() || par_it == by_id.end())
        throw ScenesMismatch("gold link " + id + " -> " +
                             links.parent.at(id) + " not in scene " +
                             scene.scene_id);
      const Utterance& uoi = *uoi_it->second;
      const Utterance& parent = *par_it->second;
      push(uoi, parent, 1.0);

      // Negatives: preceding utterances, plus self when not a thread
      // start, minus the gold parent.
      bool thread_start = parent.utt_id == uoi.utt_id;
      std::vector<const Utterance*> support;
      for (int q = 0; q < uoi.position; ++q)
        if (utts[q]->utt_id != parent.utt_id) support.push_back(utts[q]);
      if (!thread_start) support.push_back(&uoi);
      if (support.empty()) continue;
      for (int k = 0; k < config.negatives_per_positive; ++k)
        push(uoi, *support[rng.below(support.size())], 0.0);
    }
  }
  return out;
}

double loss_and_gradients(const ScorerModel& model,
                          const std::vector<double>& z, double link_label,
                          double thread_label, double alpha, Gradients& out) {
  double loss = 0.0;
  if (model.architecture == ScorerModel::Architecture::linear) {
    double p = score_standardized(model, z);
    loss += bce(p, link_label);
    double g = p - link_label;  // d BCE / d logit
    for (std::size_t d = 0; d < z.size(); ++d) out.w[d] += g * z[d];
    out.b += g;
  } else {
    std::vector<double> h(model.hidden_width);
    double s = 0.0;
    for (std::size_t k = 0; k < model.hidden_width; ++k) {
      double pre = 0.0;
      for (std::size_t d = 0; d < z.size(); ++d)
        pre += model.w0[k * model.input_dim + d] * z[d];
      h[k] = std::tanh(pre);
      s += model.w1[k] * h[k];
    }
    double p = sigmoid(s);
    loss += bce(p, link_label);
    double g = p - link_label;
    for (std::size_t k = 0; k < model.hidden_width; ++k) {
      out.w1[k] += g * h[k];
      double back = g * model.w1[k] * (1.0 - h[k] * h[k]);
      for (std::size_t d = 0; d < z.size(); ++d)
        out.w0[k * model.input_dim + d] += back * z[d];
    }
  }
  if (alpha > 0.0 && !model.aux.empty()) {
    double t = aux_score_standardized(model, z);
    loss += alpha * bce(t, thread_label);
    double g = alpha * (t - thread_label);
    for (std::size_t d = 0; d < z.size(); ++d) out.aux[d] += g * z[d];
  }
  return loss;
}

double mean_link_bce(const ScorerModel& model,
                     const std::vector<Instance>& instances) {
  if (instances.empty()) return 0.0;
  double total = 0.0;
  for (const Instance& inst : instances)
    total += bce(score_standardized(model, model.standardizer.apply(inst.x)),
                 inst.link_label);
  return total / static_cast<double>(instances.size());
}

namespace {

Gradients zero_gradients(const ScorerModel& model) {
  Gradients g;
  g.w.assign(model.w.size(), 0.0);
  g.w0.assign(model.w0.size(), 0.0);
  g.w1.assign(model.w1.size(), 0.0);
  g.aux.assign(model.aux.size(), 0.0);
  return g;
}

double dev_link_accuracy(const ScorerModel& model,
                         const std::vector<LabeledScene>& dev) {
  std::size_t total = 0, correct = 0;
  for (const LabeledScene& labeled : dev) {
    GoldLinks pred =
        predict_links(model, labeled.scene, model.features.pool_size);
    for (const auto& [id, parent] : labeled.links.parent) {
      ++total;
      auto it = pred.parent.find(id);
      if (it != pred.parent.end() && it->second == parent) ++correct;
    }
  }
  return total == 0 ? 0.0
                    : 100.0 * static_cast<double>(correct) /
                          static_cast<double>(total);
}

}  // namespace

ScorerModel train(const std::vector<LabeledScene>& train_data,
                  const std::vector<LabeledScene>& dev_data,
                  const TrainingConfig& config, TrainLog* log) {
  if (log) *log = TrainLog{};
  if (train_data.empty()) throw EmptyDataset("no training scenes");
  if (config.epochs < 1 || config.negatives_per_positive < 1 ||
      config.alpha < 0.0)
    throw DataError("training configuration out of range");

  Rng rng(config.seed);
  std::vector<Instance> instances = build_instances(train_data, config, rng);
  if (instances.empty()) throw NoPositives("no training instances");

  ScorerModel model;
  model.architecture = config.architecture;
  model.input_dim = config.features.dimensions();
  model.hidden_width = config.hidden_width;
  model.features = config.features;
  model.seed = config.seed;

  std::vector<std::vector<double>> rows;
  rows.reserve(instances.size());
  for (const Instance& inst : instances) rows.push_back(inst.x);
  model.standardizer.fit(rows);
  std::vector<std::vector<double>> standardized;
  standardized.reserve(instances.size());
  for (const Instance& inst : instances)
    standardized.push_back(model.standardizer.apply(inst.x));

  auto init = [&](std::vector<double>& weights, std::size_t n,
                  std::size_t fan_in) {
    weights.resize(n);
    double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& weight : weights) weight = (2.0 * rng.real() - 1.0) * scale;
  };
  if (config.architecture == ScorerModel::Architecture::linear) {
    init(model.w, model.input_dim, model.input_dim);
    model.b = 0.0;
  } else {
    init(model.w0, model.hidden_width * model.input_dim, model.input_dim);
    init(model.w1, model.hidden_width, model.hidden_width);
  }
  if (config.alpha > 0.0) init(model.aux, model.input_dim, model.input_dim);

  std::vector<std::size_t> order(instances.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  ScorerModel best = model;
  double best_accuracy = -1.0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    double loss_total = 0.0;
    for (std::size_t i : order) {
      Gradients g = zero_gradients(model);
      loss_total +=
          loss_and_gradients(model, standardized[i], instances[i].link_label,
                             instances[i].thread_label, config.alpha, g);
      double lr = config.learning_rate;
      for (std::size_t d = 0; d < model.w.size(); ++d)
        model.w[d] -= lr * g.w[d];
      model.b -= lr * g.b;
      for (std::size_t d = 0; d < model.w0.size(); ++d)
        model.w0[d] -= lr * g.w0[d];
      for (std::size_t d = 0; d < model.w1.size(); ++d)
        model.w1[d] -= lr * g.w1[d];
      for (std::size_t d = 0; d < model.aux.size(); ++d)
        model.aux[d] -= lr * g.aux[d];
    }
    EpochLog entry;
    entry.epoch = epoch + 1;
    entry.mean_loss = loss_total / static_cast<double>(instances.size());
    if (!dev_data.empty()) {
      double accuracy = dev_link_accuracy(model, dev_data);
      entry.dev_accuracy = accuracy;
      if (accuracy > best_accuracy) {
        best_accuracy = accuracy;
        best = model;
        entry.selected = true;
        if (log) log->best_epoch = epoch + 1;
      }
    }
    if (log) log->epochs.push_back(entry);
  }
  return dev_data.empty() ? model : best;
}

GoldLinks predict_links(const ScorerModel& model, const Scene& scene,
                        std::size_t pool_size) {
  GoldLinks links;
  links.scene_id = scene.scene_id;
  auto utts = scene.utterances();
  for (const Utterance* uoi : utts) {
    CandidatePool pool = make_pool(scene, uoi->position, pool_size);
    const Utterance* parent = nullptr;
    double parent_score = 0.0;
    // Candidates run from distance 0 upward, so keeping strict maxima
    // resolves ties toward the smaller distance and self first.
    for (const Utterance* candidate : pool.candidates) {
      double s = score(
          model, extract_features(*uoi, *candidate, scene, model.features));
      if (!parent || s > parent_score) {
        parent = candidate;
        parent_score = s;
      }
    }
    links.order.push_back(uoi->utt_id);
    links.parent[uoi->utt_id] = parent->utt_id;
  }
  return links;
}

GoldLinks predict_previous_baseline(const Scene& scene) {
  GoldLinks links;
  links.scene_id = scene.scene_id;
  const Utterance* previous = nullptr;
  for (const Utterance* utt : scene.utterances()) {
    links.order.push_back(utt->utt_id);
    links.parent[utt->utt_id] = previous ? previous->utt_id : utt->utt_id;
    previous = utt;
  }
  return links;
}

double pool_coverage(const std::vector<LabeledScene>& data,
                     std::size_t pool_size) {
  std::size_t total = 0, inside = 0;
  for (const LabeledScene& labeled : data) {
    std::map<std::string, int> position;
    for (const Utterance* utt : labeled.scene.utterances())
      position[utt->utt_id] = utt->position;
    for (const auto& [id, parent] : labeled.links.parent) {
      ++total;
      int d = position.at(id) - position.at(parent);
      if (d >= 0 && d < static_cast<int>(pool_size)) ++inside;
    }
  }
  return total == 0 ? 0.0
                    : 100.0 * static_cast<double>(inside) /
                          static_cast<double>(total);
}

nlohmann::ordered_json model_to_json(const ScorerModel& model) {
  nlohmann::ordered_json j;
  j["architecture"] = model.architecture == ScorerModel::Architecture::linear
                          ? "linear"
                          : "one_hidden";
  j["input_dim"] = model.input_dim;
  j["hidden_width"] = model.hidden_width;
  j["weights"]["w"] = model.w;
  j["weights"]["b"] = model.b;
  j["weights"]["w0"] = model.w0;
  j["weights"]["w1"] = model.w1;
  j["weights"]["aux"] = model.aux;
  j["standardization"]["mean"] = model.standardizer.mean;
  j["standardization"]["stdev"] = model.standardizer.stdev;
  j["features"]["pool_size"] = model.features.pool_size;
  j["features"]["candidate_utterance_features"] =
      model.features.candidate_utterance_features;
  j["seed"] = model.seed;
  return j;
}

ScorerModel model_from_json(const nlohmann::json& j) {
  ScorerModel model;
  std::string arch = j.at("architecture");
  if (arch == "linear") {
    model.architecture = ScorerModel::Architecture::linear;
  } else if (arch == "one_hidden") {
    model.architecture = ScorerModel::Architecture::one_hidden;
  } else {
    throw DataError("unknown model architecture \"" + arch + "\"");
  }
  model.input_dim = j.at("input_dim");
  model.hidden_width = j.at("hidden_width");
  const auto& weights = j.at("weights");
  model.w = weights.at("w").get<std::vector<double>>();
  model.b = weights.at("b");
  model.w0 = weights.at("w0").get<std::vector<double>>();
  model.w1 = weights.at("w1").get<std::vector<double>>();
  model.aux = weights.at("aux").get<std::vector<double>>();
  model.standardizer.mean =
      j.at("standardization").at("mean").get<std::vector<double>>();
  model.standardizer.stdev =
      j.at("standardization").at("stdev").get<std::vector<double>>();
  model.features.pool_size = j.at("features").at("pool_size");
  model.features.candidate_utterance_features =
      j.at("features").at("candidate_utterance_features");
  model.seed = j.at("seed");
  if (model.features.dimensions() != model.input_dim)
    throw DataError("model input_dim does not match its feature configuration");
  return model;
}

}  // namespace sthreads::linkmodel
